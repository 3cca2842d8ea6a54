"""Numerical tolerances used across the library.

All defaults are chosen for double precision at block dimensions <= 16.
Functions accept individual overrides; these module constants are the single
source of the default values.
"""

# General identity / equality tolerance.
ATOL = 1e-9

# Hermiticity test tolerance.
HERM_TOL = 1e-10

# Eigenvalues below this are treated as zero when deciding faithfulness;
# strict-mode operations error if any eigenvalue is smaller than this.
FAITHFULNESS_TOL = 1e-10

# Eigenvalues closer than this are grouped into a single spectral projector.
GROUP_TOL = 1e-8

# A map counts as completely positive when every blockwise Choi eigenvalue
# is >= -CP_TOL.
CP_TOL = 1e-9

# Certification thresholds: a property fails on a violation above
# FAIL_THRESHOLD and holds when the worst residual stays below
# PASS_THRESHOLD.  The gap is deliberate so verdicts do not flap.
FAIL_THRESHOLD = 1e-6
PASS_THRESHOLD = 1e-8

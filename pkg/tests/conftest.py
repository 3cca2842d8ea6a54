"""Shared fixtures and independent dense oracles for the test suite.

The oracle helpers deliberately avoid the library's own vectorization and
blockwise machinery: they work on plain numpy arrays for single full matrix
blocks, so any agreement with the library is a genuine cross-check.
"""
import zlib

import numpy as np
import pytest

from qsot import algebra as alg, maps, sampling
from qsot.algebra import AlgebraElement, AlgebraShape
from qsot.maps import LinearMap


def rng_for(name: str, extra: int = 0) -> np.random.Generator:
    """A deterministic per-test generator so failures are reproducible."""
    return np.random.default_rng([zlib.crc32(name.encode()), extra])


@pytest.fixture
def rng(request):
    return rng_for(request.node.name)


# --------------------------------------------------------- dense oracles
def single_block(dim: int, label: str = "q0") -> AlgebraShape:
    return alg.matrix_algebra(dim, label)


def as_matrix(a: AlgebraElement) -> np.ndarray:
    """The single dense block of a one-block element."""
    assert len(a.data) == 1
    return a.data[0]


def apply_dense(e: LinearMap, mat: np.ndarray) -> np.ndarray:
    """Apply a single-block map to a dense matrix through the library call,
    returning a dense matrix (convenience, not an oracle)."""
    return as_matrix(e(AlgebraElement(e.source, (mat,))))


def dense_channel_state(e: LinearMap) -> np.ndarray:
    """Kron-sum oracle for D[E] = sum_ij E_ij (x) E(E_ji), single blocks."""
    m = e.source.dims[0]
    out = 0
    for i in range(m):
        for j in range(m):
            unit = np.zeros((m, m), dtype=complex)
            unit[i, j] = 1.0
            image = apply_dense(e, unit.conj().T.copy())  # E(E_ji)
            out = out + np.kron(unit, image)
    return out


def dense_partial_trace(mat: np.ndarray, da: int, db: int, side: str) -> np.ndarray:
    four = mat.reshape(da, db, da, db)
    if side == "B":
        return np.einsum("ikjk->ij", four)
    return np.einsum("kikj->ij", four)


def dense_hs_adjoint_check(e: LinearMap, rng: np.random.Generator) -> float:
    """max |<A, E(B)> - <E*(A), B>| over a few random dense pairs."""
    adj = e.hs_adjoint()
    worst = 0.0
    for _ in range(5):
        a = sampling.random_hermitian(e.target, rng)
        b = sampling.random_hermitian(e.source, rng)
        lhs = (a.dagger() @ e(b)).trace()
        rhs = (adj(a).dagger() @ b).trace()
        worst = max(worst, abs(lhs - rhs))
    return worst


def random_traceless_direction(shape: AlgebraShape, rng: np.random.Generator,
                               norm: float = 1.0) -> AlgebraElement:
    a = sampling.random_hermitian(shape, rng)
    a = a - (a.trace().real / shape.total_dim) * alg.identity(shape)
    return (norm / a.norm()) * a

"""Bayes maps: solutions X of  E⋆ρ = τ(~X ⋆ E(ρ)).

Closed forms are implemented per family (Petz and its rotated/STH variants,
the bloom one-sided formulas, the spectral-basis symmetric-bloom and (r,s)
formulas, and generalized conditional expectations for state-rendering maps).
``generic_bayes`` solves the defining condition directly as a constrained
linear least-squares problem and measures uniqueness, which is the
cross-check oracle for everything else.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import algebra as alg, maps, sot
from .algebra import AlgebraElement
from .config import ATOL, FAITHFULNESS_TOL
from .errors import SingularityError, UnsupportedFamilyError
from .maps import LinearMap


# ------------------------------------------------------------ state rendering
@dataclass(frozen=True)
class StateRenderingMap:
    """A state-indexed superoperator family ρ ↦ Θ_ρ.

    ``linear_in_state`` marks recipes where Θ_ρ depends linearly on ρ, which
    is what lets the derived SOT extend beyond density matrices.
    """
    name: str
    recipe: Callable[[AlgebraElement], LinearMap]
    linear_in_state: bool = False


def theta_right() -> StateRenderingMap:
    return StateRenderingMap("right", lambda rho: maps.left_mult(rho), True)


def theta_left() -> StateRenderingMap:
    return StateRenderingMap("left", lambda rho: maps.right_mult(rho), True)


def theta_jordan() -> StateRenderingMap:
    return StateRenderingMap(
        "jordan",
        lambda rho: 0.5 * (maps.left_mult(rho) + maps.right_mult(rho)),
        True)


def theta_ls() -> StateRenderingMap:
    return StateRenderingMap(
        "ls", lambda rho: maps.ad_map(alg.power(rho, 0.5)), False)


def theta_rs(r: float, s: float) -> StateRenderingMap:
    def recipe(rho: AlgebraElement) -> LinearMap:
        a, b = alg.power(rho, r), alg.power(rho, 1.0 - r)
        return (s * maps.left_mult(a).compose(maps.right_mult(b))
                + (1.0 - s) * maps.left_mult(b).compose(maps.right_mult(a)))
    return StateRenderingMap(f"rs({r},{s})", recipe, False)


# -------------------------------------------------------------- Bayes residual
def bayes_residual(family: sot.SotFamily, x: LinearMap, e: LinearMap,
                   rho: AlgebraElement) -> float:
    """‖E⋆ρ − τ(~X ⋆ E(ρ))‖ with the same family on both sides."""
    forward = sot.evaluate(family, e, rho).value
    backward = sot.evaluate(family, x.tilde(), e(rho)).value
    return (forward - maps.time_reversal_tau(backward)).norm()


def classify_solution(x: LinearMap) -> str:
    if x.is_cptp:
        return "CPTP"
    if x.is_tp and x.is_dagger_preserving:
        return "HPTP-only"
    return "TP-only"


@dataclass(frozen=True)
class BayesSolution:
    map: LinearMap
    residual: float
    classification: str
    uniqueness: str  # unique | non-unique-witness | none-found
    witnesses: tuple[LinearMap, ...] = field(default=())


# ---------------------------------------------------------------- closed forms
def petz(e: LinearMap, rho: AlgebraElement, strict: bool = False) -> LinearMap:
    """Ad_{ρ^{1/2}} ∘ E* ∘ Ad_{E(ρ)^{−1/2}}."""
    sigma = e(rho)
    outer = maps.ad_map(alg.power(rho, 0.5))
    inner = maps.ad_map(alg.power(sigma, -0.5, strict=strict))
    return outer.compose(e.hs_adjoint()).compose(inner)


def rotated_petz(e: LinearMap, rho: AlgebraElement, t: float,
                 strict: bool = False) -> LinearMap:
    """Rotated recovery map Ad_{ρ^{1/2−it}} ∘ E* ∘ Ad_{E(ρ)^{−1/2−it}}.

    This is the unique solution of the Bayes condition for the rotated
    family (ρ^{1/2−it}⊗1)D[E](ρ^{1/2+it}⊗1); at t=0 it is the Petz map.
    """
    sigma = e(rho)
    outer = maps.ad_map(alg.power(rho, 0.5 - 1j * t))
    inner = maps.ad_map(alg.power(sigma, -0.5 - 1j * t, strict=strict))
    return outer.compose(e.hs_adjoint()).compose(inner)


def sth_inverse(e: LinearMap, rho: AlgebraElement,
                family: sot.STH | None = None, strict: bool = False) -> LinearMap:
    """Ad_{U_ρ†ρ^{1/2}} ∘ E* ∘ Ad_{U_{E(ρ)}†E(ρ)^{−1/2}} for the chooser's unitaries.

    Solves the Bayes condition for the family
    (U_ρ†ρ^{1/2}⊗1)D[E](ρ^{1/2}U_ρ⊗1); with the trivial chooser it is Petz.
    """
    family = family or sot.STH()
    sigma = e(rho)
    u_rho = family.unitary_for(rho)
    u_sig = family.unitary_for(sigma)
    outer = maps.ad_map(u_rho.dagger() @ alg.power(rho, 0.5))
    inner = maps.ad_map(u_sig.dagger() @ alg.power(sigma, -0.5, strict=strict))
    return outer.compose(e.hs_adjoint()).compose(inner)


def bloom_bayes(side: str, e: LinearMap, rho: AlgebraElement,
                strict: bool = False) -> LinearMap:
    """Right: B ↦ ρE*(E(ρ)^{−1}B); left: B ↦ E*(BE(ρ)^{−1})ρ."""
    inv = alg.power(e(rho), -1.0, strict=strict)
    adjoint = e.hs_adjoint()
    if side == "right":
        return maps.left_mult(rho).compose(adjoint).compose(maps.left_mult(inv))
    if side == "left":
        return maps.right_mult(rho).compose(adjoint).compose(maps.right_mult(inv))
    raise ValueError("side must be 'left' or 'right'")


def _spectral_basis_solver(e: LinearMap, rho: AlgebraElement,
                           image_of, denominator,
                           strict: bool = False,
                           faithfulness_tol: float = FAITHFULNESS_TOL) -> LinearMap:
    """Assemble X from its action on the eigenbasis units of E(ρ).

    ``image_of(unit)`` produces the unnormalized image of the basis unit
    e_kl = |w_k><w_l| and ``denominator(q_k, q_l)`` the scalar it is divided
    by.  Both spectral-basis Bayes formulas share this skeleton.
    """
    sigma = e(rho)
    if strict:
        alg.power(sigma, 1.0, strict=True)  # trigger the faithfulness check
    b_shape, a_shape = e.target, e.source
    matrix = np.zeros((a_shape.vector_dim, b_shape.vector_dim), dtype=complex)
    for bi, (label, d) in enumerate(b_shape.blocks):
        vals, vecs = np.linalg.eigh(sigma.data[bi])
        for k in range(d):
            for l in range(d):
                denom = denominator(vals[k], vals[l])
                if abs(denom) <= faithfulness_tol:
                    raise SingularityError(
                        f"vanishing denominator at spectral unit ({k},{l}) "
                        f"of block {alg.label_text(label)}")
                unit_mats = [np.zeros((dd, dd), dtype=complex) for dd in b_shape.dims]
                unit_mats[bi] = np.outer(vecs[:, k], vecs[:, l].conj())
                unit = AlgebraElement(b_shape, tuple(unit_mats))
                col = maps.vec((1.0 / denom) * image_of(unit))
                matrix += np.outer(col, maps.vec(unit).conj())
    return LinearMap(b_shape, a_shape, matrix)


def symmetric_bloom_bayes(e: LinearMap, rho: AlgebraElement,
                          strict: bool = False) -> LinearMap:
    """X(e_kl) = (q_k+q_l)^{−1} {ρ, E*(e_kl)} in the eigenbasis of E(ρ)."""
    adjoint = e.hs_adjoint()
    return _spectral_basis_solver(
        e, rho,
        image_of=lambda unit: alg.jordan(rho, adjoint(unit)),
        denominator=lambda qk, ql: qk + ql,
        strict=strict)


def rs_bayes(r: float, s: float, e: LinearMap, rho: AlgebraElement,
             strict: bool = False) -> LinearMap:
    """Spectral-basis Bayes map for the (r,s) family."""
    adjoint = e.hs_adjoint()
    rho_r, rho_1r = alg.power(rho, r), alg.power(rho, 1.0 - r)

    def image_of(unit: AlgebraElement) -> AlgebraElement:
        img = adjoint(unit)
        return s * (rho_r @ img @ rho_1r) + (1.0 - s) * (rho_1r @ img @ rho_r)

    def denominator(qk: float, ql: float) -> float:
        qk, ql = max(qk, 0.0), max(ql, 0.0)
        return s * qk ** r * ql ** (1.0 - r) + (1.0 - s) * qk ** (1.0 - r) * ql ** r

    return _spectral_basis_solver(e, rho, image_of, denominator, strict=strict)


def closed_form_bayes(family: sot.SotFamily, e: LinearMap, rho: AlgebraElement,
                      strict: bool = False) -> LinearMap:
    """Dispatch to the closed-form solver for the given family."""
    if isinstance(family, sot.LeiferSpekkens):
        return petz(e, rho, strict)
    if isinstance(family, sot.TRotated):
        return rotated_petz(e, rho, family.t, strict)
    if isinstance(family, sot.STH):
        return sth_inverse(e, rho, family, strict)
    if isinstance(family, sot.SymmetricBloom):
        return symmetric_bloom_bayes(e, rho, strict)
    if isinstance(family, sot.RightBloom):
        return bloom_bayes("right", e, rho, strict)
    if isinstance(family, sot.LeftBloom):
        return bloom_bayes("left", e, rho, strict)
    if isinstance(family, sot.RSFamily):
        return rs_bayes(family.r, family.s, e, rho, strict)
    if isinstance(family, sot.ThetaDerived):
        return gce_solve(family.theta, e, rho)
    raise UnsupportedFamilyError(
        f"no closed-form Bayes map for family {getattr(family, 'tag', family)}")


# --------------------------------------------------------------- generic solve
def _trace_row(shape) -> np.ndarray:
    row = np.zeros(shape.vector_dim)
    off = 0
    for d in shape.dims:
        for i in range(d):
            row[off + i * d + i] = 1.0
        off += d * d
    return row


def generic_bayes(family: sot.SotFamily, e: LinearMap, rho: AlgebraElement,
                  rank_tol: float = 1e-8) -> BayesSolution:
    """Solve E⋆ρ = τ(~X ⋆ E(ρ)) for trace-preserving X by least squares.

    The map X ↦ τ(~X ⋆ σ) is complex-linear for every process-linear family
    (two conjugations cancel), so the condition is a linear system in the
    entries of X; trace preservation enters as affine constraints, handled by
    restriction to the constraint nullspace.  Uniqueness is read off the rank
    of the restricted system.
    """
    if not sot.is_process_linear(family):
        raise UnsupportedFamilyError("generic solver needs a process-linear family")
    sigma = e(rho)
    a_shape, b_shape = e.source, e.target
    n_a, n_b = a_shape.vector_dim, b_shape.vector_dim
    n_x = n_a * n_b

    forward = sot.evaluate(family, e, rho).value
    b_vec = maps.vec(forward)

    def response(x_matrix: np.ndarray) -> np.ndarray:
        x = LinearMap(b_shape, a_shape, x_matrix.copy())
        value = sot._evaluate_value(family, x.tilde(), sigma)
        return maps.vec(maps.time_reversal_tau(value))

    g = np.zeros((b_vec.size, n_x), dtype=complex)
    basis = np.zeros((n_a, n_b), dtype=complex)
    for p in range(n_a):
        for u in range(n_b):
            basis[p, u] = 1.0
            g[:, p * n_b + u] = response(basis)
            basis[p, u] = 0.0

    # Trace-preservation constraints: t_A @ X[:, u] = t_B[u] for every unit u.
    t_a, t_b = _trace_row(a_shape), _trace_row(b_shape)
    constraints = np.zeros((n_b, n_x))
    for u in range(n_b):
        constraints[u, u::n_b] = t_a
    x_part = np.linalg.lstsq(constraints, t_b, rcond=None)[0].astype(complex)

    _, svals, vt = np.linalg.svd(constraints, full_matrices=True)
    rank = int(np.sum(svals > rank_tol * max(1.0, svals[0])))
    null_basis = vt[rank:].conj().T  # columns span the constraint nullspace

    g_null = g @ null_basis
    rhs = b_vec - g @ x_part
    z, *_ = np.linalg.lstsq(g_null, rhs, rcond=None)
    x_vec = x_part + null_basis @ z
    x_map = LinearMap(b_shape, a_shape, x_vec.reshape(n_a, n_b))

    residual = bayes_residual(family, x_map, e, rho)
    if residual > 1e-6:
        uniqueness, witnesses = "none-found", ()
    else:
        sv = np.linalg.svd(g_null, compute_uv=False) if g_null.size else np.zeros(0)
        top = max(1.0, float(sv[0])) if sv.size else 1.0
        nullity = g_null.shape[1] - int(np.sum(sv > rank_tol * top))
        if nullity == 0:
            uniqueness, witnesses = "unique", ()
        else:
            _, _, vt2 = np.linalg.svd(g_null)
            direction = null_basis @ vt2[-1].conj()
            alt = LinearMap(b_shape, a_shape,
                            (x_vec + direction).reshape(n_a, n_b))
            uniqueness, witnesses = "non-unique-witness", (alt,)
    return BayesSolution(x_map, residual, classify_solution(x_map),
                         uniqueness, witnesses)


# ------------------------------------------------------------------------- GCE
def gce_solve(theta: StateRenderingMap, e: LinearMap,
              rho: AlgebraElement) -> LinearMap:
    """Solve E∘Θ_ρ = Θ_{E(ρ)}∘X for X and return its HS adjoint (a Bayes map)."""
    theta_rho = theta.recipe(rho)
    theta_sigma = theta.recipe(e(rho))
    lhs = e.matrix @ theta_rho.matrix
    cond = np.linalg.cond(theta_sigma.matrix)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularityError("Θ at E(ρ) is numerically singular")
    x = np.linalg.solve(theta_sigma.matrix, lhs)
    return LinearMap(e.source, e.target, x).hs_adjoint()


# -------------------------------------------------------- Remark-4 style checks
def bloom_cp_condition_residual(e: LinearMap, rho: AlgebraElement) -> float:
    """‖ρE*(E(ρ)^{−1}·) − E*(·E(ρ)^{−1})ρ‖: zero iff the bloom Bayes map is CP."""
    right = bloom_bayes("right", e, rho)
    left = bloom_bayes("left", e, rho)
    return float(np.linalg.norm(right.matrix - left.matrix))


def modular_covariance_residual(e: LinearMap, rho: AlgebraElement,
                                ts: Sequence[float] = (0.1, -0.1, 0.37, -0.37, 1.0, -1.0)) -> float:
    """max_t ‖Ad_{E(ρ)^{it}}∘E − E∘Ad_{ρ^{it}}‖ over the check grid."""
    sigma = e(rho)
    worst = 0.0
    for t in ts:
        lhs = maps.ad_map(alg.support_unitary(sigma, t)).compose(e)
        rhs = e.compose(maps.ad_map(alg.support_unitary(rho, t)))
        worst = max(worst, float(np.linalg.norm(lhs.matrix - rhs.matrix)))
    return worst

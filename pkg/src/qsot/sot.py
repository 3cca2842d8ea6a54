"""State-over-time families: evaluate E⋆ρ on A⊗B for a chosen recipe.

Every family below consumes a trace-preserving map E: A→B and a density
matrix ρ on A and produces an element of A⊗B whose marginals are ρ and E(ρ).
Families that are linear in the state (the blooms and the symmetric bloom,
plus Θ-derived recipes with a state-linear Θ) extend to arbitrary hermitian
unit-trace second arguments by the same formula; the other families refuse
anything that is not PSD.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import algebra as alg, maps, sampling
from .algebra import AlgebraElement, AlgebraShape
from .config import ATOL, FAITHFULNESS_TOL, GROUP_TOL
from .errors import ConstraintError, ExtensionError, UnsupportedFamilyError
from .maps import LinearMap


# -------------------------------------------------------------------- families
@dataclass(frozen=True)
class Uncorrelated:
    tag: str = field(default="uncorrelated", init=False)


@dataclass(frozen=True)
class OhyaCompound:
    tag: str = field(default="ohya", init=False)
    group_tol: float = GROUP_TOL


@dataclass(frozen=True)
class LeiferSpekkens:
    tag: str = field(default="leifer-spekkens", init=False)


@dataclass(frozen=True)
class TRotated:
    t: float = 0.3
    tag: str = field(default="t-rotated", init=False)


@dataclass(frozen=True)
class STH:
    """Sutter–Tomamichel–Harrow style family.

    ``chooser`` maps a state to a commuting unitary U_ρ; the default is
    ρ^{it} on the support and the identity off it, with ``t`` the parameter.
    """
    t: float = 0.3
    chooser: Callable[[AlgebraElement], AlgebraElement] | None = field(
        default=None, compare=False)
    tag: str = field(default="sth", init=False)

    def unitary_for(self, state: AlgebraElement) -> AlgebraElement:
        if self.chooser is not None:
            return self.chooser(state)
        return alg.support_unitary(state, self.t)


@dataclass(frozen=True)
class SymmetricBloom:
    tag: str = field(default="symmetric-bloom", init=False)


@dataclass(frozen=True)
class RightBloom:
    tag: str = field(default="right-bloom", init=False)


@dataclass(frozen=True)
class LeftBloom:
    tag: str = field(default="left-bloom", init=False)


@dataclass(frozen=True)
class RSFamily:
    r: float
    s: float
    tag: str = field(default="rs", init=False)

    def __post_init__(self):
        if not (0.0 <= self.r <= 1.0 and 0.0 <= self.s <= 1.0):
            raise ConstraintError("RSFamily needs r, s in [0, 1]")


@dataclass(frozen=True)
class ThetaDerived:
    """SOT generated by a state-rendering map: (Θ_ρ ⊗ id)(D[E])."""
    theta: object  # StateRenderingMap (duck-typed: .recipe, .linear_in_state)
    tag: str = field(default="theta", init=False)


SotFamily = (Uncorrelated | OhyaCompound | LeiferSpekkens | TRotated | STH
             | SymmetricBloom | RightBloom | LeftBloom | RSFamily | ThetaDerived)

TABLE_FAMILIES: dict[str, SotFamily] = {
    "uncorrelated": Uncorrelated(),
    "ohya": OhyaCompound(),
    "leifer-spekkens": LeiferSpekkens(),
    "t-rotated": TRotated(),
    "sth": STH(),
    "symmetric-bloom": SymmetricBloom(),
    "right-bloom": RightBloom(),
    "left-bloom": LeftBloom(),
}


def is_state_linear(family: SotFamily) -> bool:
    if isinstance(family, (SymmetricBloom, RightBloom, LeftBloom)):
        return True
    if isinstance(family, ThetaDerived):
        return bool(getattr(family.theta, "linear_in_state", False))
    return False


def is_process_linear(family: SotFamily) -> bool:
    # Every implemented family is linear in the channel argument.
    return True


@dataclass(frozen=True)
class StateOverTime:
    value: AlgebraElement  # on A⊗B
    channel: LinearMap
    state: AlgebraElement
    family: SotFamily

    def marginal_residuals(self) -> tuple[float, float]:
        res_a = (alg.partial_trace(self.value, "B") - self.state).norm()
        res_b = (alg.partial_trace(self.value, "A") - self.channel(self.state)).norm()
        return res_a, res_b


def _lift(a: AlgebraElement, target: AlgebraShape) -> AlgebraElement:
    """a ⊗ 1_B on the tensor shape."""
    return alg.tensor(a, alg.identity(target))


def evaluate(family: SotFamily, e: LinearMap, rho: AlgebraElement,
             atol: float = ATOL) -> StateOverTime:
    """E⋆ρ for the given family.

    ``rho`` may be any hermitian unit-trace element when the family is linear
    in the state; otherwise it must be PSD (a density matrix).
    """
    if not e.is_tp:
        raise ConstraintError("state over time requires a trace-preserving map")
    if rho.shape != e.source:
        raise ConstraintError("state does not live on the channel's source")
    if not rho.is_hermitian(1e4 * atol):
        raise ConstraintError("second argument must be hermitian")
    if abs(rho.trace() - 1.0) > 1e4 * atol:
        raise ConstraintError("second argument must have unit trace")
    if not is_state_linear(family) and rho.min_eigenvalue() < -1e3 * atol:
        raise ExtensionError(
            f"family {getattr(family, 'tag', family)} is not linear in the state "
            "and only evaluates density matrices")
    if isinstance(family, OhyaCompound) and len(e.source.blocks) != 1:
        raise UnsupportedFamilyError(
            "the compound construction is only defined on single-block algebras")

    value = _evaluate_value(family, e, rho)
    return StateOverTime(value, e, rho, family)


def _evaluate_value(family: SotFamily, e: LinearMap, rho: AlgebraElement) -> AlgebraElement:
    if isinstance(family, Uncorrelated):
        return alg.tensor(rho, e(rho))

    if isinstance(family, OhyaCompound):
        sd = alg.spectral_decompose(rho, group_tol=family.group_tol)
        out = alg.zero(e.source.tensor(e.target))
        for lam, proj in zip(sd.eigenvalues, sd.projectors):
            tr_p = proj.trace().real
            out = out + lam * alg.tensor(proj, e((1.0 / tr_p) * proj))
        return out

    d = maps.channel_state(e)
    target = e.target
    if isinstance(family, LeiferSpekkens):
        s = _lift(alg.power(rho, 0.5), target)
        return s @ d @ s
    if isinstance(family, TRotated):
        lft = _lift(alg.power(rho, 0.5 - 1j * family.t), target)
        rgt = _lift(alg.power(rho, 0.5 + 1j * family.t), target)
        return lft @ d @ rgt
    if isinstance(family, STH):
        u = family.unitary_for(rho)
        root = alg.power(rho, 0.5)
        lft = _lift(u.dagger() @ root, target)
        rgt = _lift(root @ u, target)
        return lft @ d @ rgt
    if isinstance(family, SymmetricBloom):
        lifted = _lift(rho, target)
        return 0.5 * (lifted @ d + d @ lifted)
    if isinstance(family, RightBloom):
        return _lift(rho, target) @ d
    if isinstance(family, LeftBloom):
        return d @ _lift(rho, target)
    if isinstance(family, RSFamily):
        a = _lift(alg.power(rho, family.r), target)
        b = _lift(alg.power(rho, 1.0 - family.r), target)
        return family.s * (a @ d @ b) + (1.0 - family.s) * (b @ d @ a)
    if isinstance(family, ThetaDerived):
        theta_rho = family.theta.recipe(rho)
        return maps.apply_to_factor(theta_rho, d, "left")
    raise UnsupportedFamilyError(f"unknown family {family!r}")


def reverse_orientation(family: SotFamily, e: LinearMap,
                        rho: AlgebraElement) -> AlgebraElement:
    """E⋆†ρ := ((†∘E∘†)⋆ρ)†, the reverse-orientation state over time."""
    return evaluate(family, e.tilde(), rho).value.dagger()


# --------------------------------------------------------- classical-limit pairs
def commutation_residual(e: LinearMap, rho: AlgebraElement) -> float:
    """‖[D[E], ρ⊗1]‖ — zero exactly on classical-limit pairs."""
    lifted = _lift(rho, e.target)
    return alg.commutator(maps.channel_state(e), lifted).norm()


def _central_state(shape: AlgebraShape, rng: np.random.Generator) -> AlgebraElement:
    weights = rng.dirichlet(np.ones(len(shape.blocks)))
    mats = [w / d * np.eye(d, dtype=complex) for w, d in zip(weights, shape.dims)]
    return AlgebraElement(shape, tuple(mats))


def _diagonal_state(shape: AlgebraShape, rng: np.random.Generator) -> AlgebraElement:
    return alg.diagonal_element(shape, rng.dirichlet(np.ones(shape.total_dim)))


def _has_nondegenerate_spectrum(rho: AlgebraElement, gap: float = 1e-3) -> bool:
    vals = np.sort(np.concatenate([np.linalg.eigvalsh(m) for m in rho.data]))
    return bool(np.all(np.diff(vals) > gap)) and vals[0] > gap


def classical_limit_pairs(shape_a: AlgebraShape, shape_b: AlgebraShape,
                          rng: np.random.Generator,
                          nondegenerate_prior: bool = False,
                          comm_tol: float = 1e-12) -> Iterator[tuple[LinearMap, AlgebraElement]]:
    """Endless stream of (E, ρ) with [D[E], ρ⊗1] = 0.

    Cycles through: (a) replacement channels with arbitrary priors,
    (b) diagonal priors with diagonal-reading (decohering) channels,
    (c) central priors with arbitrary channels (covers every bistochastic
    instance since ρ = 1/m is central), and (d) fully classical pairs when
    both algebras are commutative.  Every emitted pair is checked against
    ``comm_tol``; with ``nondegenerate_prior`` only priors with simple,
    strictly positive spectrum are emitted (the central construction is then
    skipped unless the blocks are one-dimensional).
    """
    both_classical = all(d == 1 for d in shape_a.dims + shape_b.dims)
    kind = 0
    while True:
        kind = (kind + 1) % 4
        if kind == 0:
            e = sampling.random_cptp(shape_a, shape_b, rng)
            rho = sampling.random_state(shape_a, rng)
            if not both_classical:
                continue
        elif kind == 1:
            e = maps.replace_channel(sampling.random_state(shape_b, rng), shape_a)
            rho = sampling.random_state(shape_a, rng)
        elif kind == 2:
            e = sampling.random_decohering_channel(shape_a, shape_b, rng)
            rho = _diagonal_state(shape_a, rng)
        else:
            e = sampling.random_cptp(shape_a, shape_b, rng)
            rho = _central_state(shape_a, rng)
        if nondegenerate_prior and not _has_nondegenerate_spectrum(rho):
            continue
        if commutation_residual(e, rho) > comm_tol:
            continue
        yield e, rho

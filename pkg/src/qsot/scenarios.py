"""End-to-end physics built on the state-over-time machinery.

Prepare-evolve-measure pipelines and their inferential reversal, quantum
instruments and the state-update rule, pre/post-selected two-states with weak
values, two-time correlators, and the finite-difference check that the
symmetric-bloom output is the derivative of the square-root family at the
maximally mixed state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import algebra as alg, bayes, maps, sot
from .algebra import AlgebraElement, AlgebraShape
from .config import ATOL
from .errors import ConstraintError, FaithfulnessError, SingularityError
from .maps import LinearMap


# ------------------------------------------------------------ PEM scenarios
@dataclass(frozen=True)
class PemScenario:
    """A prepare-evolve-measure pipeline with classical ends.

    ``p`` is a classical state on ``prep``'s source; ``prep`` embeds outcomes
    as quantum states, ``evo`` is the dynamics, and ``meas`` is a POVM back
    into a classical algebra.
    """
    p: AlgebraElement
    prep: LinearMap
    evo: LinearMap
    meas: LinearMap

    def __post_init__(self):
        if self.p.shape != self.prep.source:
            raise ConstraintError("prior does not live on the preparation's source")
        if self.prep.target != self.evo.source or self.evo.target != self.meas.source:
            raise ConstraintError("PEM maps do not compose")
        alg.assert_state(self.p)

    @property
    def rho(self) -> AlgebraElement:
        return self.prep(self.p)

    @property
    def sigma(self) -> AlgebraElement:
        return self.evo(self.rho)

    @property
    def q(self) -> AlgebraElement:
        return self.meas(self.sigma)

    def classical_dynamics(self) -> LinearMap:
        """f = meas ∘ evo ∘ prep, a stochastic channel between the ends."""
        return self.meas.compose(self.evo).compose(self.prep)


def _distribution(state: AlgebraElement) -> np.ndarray:
    return np.array([m[0, 0].real for m in state.data])


def pem_reverse(s: PemScenario, strict: bool = True,
                prob_tol: float = 1e-12) -> tuple[PemScenario, dict]:
    """Reverse a PEM scenario by inverting each stage at its input state.

    Returns the reverse scenario (prior q, preparation M⋆_σ, dynamics E⋆_ρ,
    measurement P⋆_p) together with residuals: the composed reverse equals
    the classical Bayes inverse g_{xy} = f_{yx} p_x / q_y, and the classical
    joint f⋆p is recovered by pairing the quantum state over time against the
    reverse-preparation and measurement effects.
    """
    p = _distribution(s.p)
    rho, sigma = s.rho, s.sigma
    q = _distribution(s.q)
    notices: list[str] = []
    dead = [i for i, qy in enumerate(q) if qy < prob_tol]
    if strict and dead:
        label = s.meas.target.labels[dead[0]]
        raise FaithfulnessError(f"outcome {label} has probability below {prob_tol}")
    for i in dead:
        notices.append(f"outcome {s.meas.target.labels[i]} excluded "
                       f"(probability {q[i]:.2e})")

    meas_rev = bayes.petz(s.meas, sigma)
    evo_rev = bayes.petz(s.evo, rho)
    prep_rev = bayes.petz(s.prep, s.p)

    f = s.classical_dynamics().matrix.real
    composed = prep_rev.compose(evo_rev).compose(meas_rev).matrix.real
    live = [y for y in range(len(q)) if y not in dead]
    g = np.zeros_like(f.T)
    for y in live:
        g[:, y] = f[y, :] * p / q[y]
    classical_residual = float(np.max(np.abs(g[:, live] - composed[:, live]))) \
        if live else 0.0

    # The classical joint read off the quantum state over time.
    joint = sot.evaluate(sot.LeiferSpekkens(), s.evo, rho).value
    n_eff = maps.povm_effects(prep_rev)
    m_eff = maps.povm_effects(s.meas)
    pairing_residual = 0.0
    for x, n_x in enumerate(n_eff):
        for y, m_y in enumerate(m_eff):
            lhs = f[y, x] * p[x]
            rhs = (alg.tensor(n_x, m_y) @ joint).trace()
            pairing_residual = max(pairing_residual, abs(lhs - rhs))

    reverse = PemScenario(s.q, meas_rev, evo_rev, prep_rev)
    residuals = {"classical_inverse": classical_residual,
                 "leifer_pairing": float(pairing_residual),
                 "notices": notices}
    return reverse, residuals


def eigenbasis_pem(evo: LinearMap, rho: AlgebraElement) -> PemScenario:
    """PEM scenario whose ends are the spectral rank-1 projectors of ρ and
    σ = evo(ρ); requires a non-degenerate spectrum on a single-block source."""
    p_vals, prep_states = _rank_one_basis(rho)
    q_vals, meas_states = _rank_one_basis(evo(rho))
    prep = maps.ensemble(prep_states, source_prefix="x")
    meas = maps.povm(meas_states, target_prefix="y")
    p = alg.diagonal_element(prep.source, p_vals)
    return PemScenario(p, prep, evo, meas)


def _rank_one_basis(a: AlgebraElement) -> tuple[np.ndarray, list[AlgebraElement]]:
    if len(a.shape.blocks) != 1:
        raise ConstraintError("eigenbasis scenarios need a single-block algebra")
    vals, vecs = np.linalg.eigh(a.data[0])
    projs = [AlgebraElement(a.shape, (np.outer(vecs[:, i], vecs[:, i].conj()),))
             for i in range(len(vals))]
    return vals, projs


def eigenbasis_identities(s: PemScenario) -> dict:
    """Residuals of the eigenbasis-PEM facts: the end reversals are plain
    adjoints, and the reversed conditional probabilities satisfy the
    classical Bayes identity tr(M_k E(P_i)) p_i = tr(P_i E⋆_ρ(M_k)) q_k."""
    rho, sigma = s.rho, s.sigma
    p, q = _distribution(s.p), _distribution(s.q)
    meas_rev = bayes.petz(s.meas, sigma)
    prep_rev = bayes.petz(s.prep, s.p)
    adjoint_meas = float(np.max(np.abs(meas_rev.matrix - s.meas.hs_adjoint().matrix)))
    adjoint_prep = float(np.max(np.abs(prep_rev.matrix - s.prep.hs_adjoint().matrix)))

    evo_rev = bayes.petz(s.evo, rho)
    preps = [s.prep(alg.basis_vector(s.prep.source, lab)) for lab in s.prep.source.labels]
    meff = maps.povm_effects(s.meas)
    bayes_identity = 0.0
    for i, p_i in enumerate(preps):
        for k, m_k in enumerate(meff):
            lhs = (m_k @ s.evo(p_i)).trace().real * p[i]
            rhs = (p_i @ evo_rev(m_k)).trace().real * q[k]
            bayes_identity = max(bayes_identity, abs(lhs - rhs))
    return {"adjoint_meas": adjoint_meas, "adjoint_prep": adjoint_prep,
            "bayes_identity": float(bayes_identity)}


# ---------------------------------------------------------------- Fuchs rule
def fuchs_rule(meas: LinearMap, rho: AlgebraElement,
               prob_tol: float = 1e-12) -> tuple[list[tuple[object, float, AlgebraElement]],
                                                 list[str]]:
    """Posterior states ρ_x = √ρ M_x √ρ / p_x for a POVM measurement.

    Returns (entries, notices); outcomes with vanishing probability are
    omitted and reported in the notices.
    """
    root = alg.power(rho, 0.5)
    entries, notices = [], []
    for label, m_x in zip(meas.target.labels, maps.povm_effects(meas)):
        p_x = (m_x @ rho).trace().real
        if p_x < prob_tol:
            notices.append(f"outcome {label} omitted (probability {p_x:.2e})")
            continue
        entries.append((label, p_x, (1.0 / p_x) * (root @ m_x @ root)))
    return entries, notices


# ------------------------------------------------------------- state update
@dataclass(frozen=True)
class InstrumentScenario:
    """An initial state together with the CP parts of an instrument."""
    sigma: AlgebraElement
    cp_parts: tuple[LinearMap, ...]

    def __post_init__(self):
        alg.assert_state(self.sigma)

    @property
    def instrument(self) -> LinearMap:
        return maps.instrument(list(self.cp_parts))

    @property
    def rho(self) -> AlgebraElement:
        return self.instrument(self.sigma)

    def outcome_probabilities(self) -> np.ndarray:
        return np.array([f(self.sigma).trace().real for f in self.cp_parts])


DEFAULT_UPDATE_FAMILIES: tuple[sot.SotFamily, ...] = (
    sot.LeiferSpekkens(), sot.SymmetricBloom(), sot.RightBloom())


def state_update(s: InstrumentScenario,
                 family: sot.SotFamily | None = None,
                 independence_families: Sequence[sot.SotFamily] = DEFAULT_UPDATE_FAMILIES,
                 prob_tol: float = 1e-12) -> tuple[LinearMap, dict]:
    """The measurement state-update map as a Bayes map of the outcome readout.

    Inverting the partial trace E = tr_B at ρ = F(σ) sends each outcome to
    its normalized updated state: Ψ(δ_x) = F_x(σ)/tr(F_x(σ)) ⊗ δ_x.  The
    checks report the distance to this closed formula, the recovery
    identities Ψ(E(ρ)) = ρ and E∘Ψ = id, and the maximum disagreement across
    several families (the map is family-independent).
    """
    family = family or sot.LeiferSpekkens()
    probs = s.outcome_probabilities()
    for x, p_x in enumerate(probs):
        if p_x < prob_tol:
            raise SingularityError(f"outcome {x} has vanishing probability {p_x:.2e}")
    rho = s.rho
    e = maps.partial_trace_channel(rho.shape, "A")  # traces out B, keeps outcomes
    psi = bayes.closed_form_bayes(family, e, rho)

    outcomes = e.target
    cols = []
    for x, (f_x, p_x) in enumerate(zip(s.cp_parts, probs)):
        posterior = alg.tensor((1.0 / p_x) * f_x(s.sigma),
                               alg.basis_vector(outcomes, outcomes.labels[x]))
        cols.append(maps.vec(posterior))
    direct = LinearMap(outcomes, rho.shape, np.column_stack(cols))

    recovery = (psi(e(rho)) - rho).norm()
    conditional = np.linalg.norm(e.compose(psi).matrix - maps.identity_map(outcomes).matrix)
    others = [bayes.closed_form_bayes(fam, e, rho) for fam in independence_families]
    independence = max((np.linalg.norm(a.matrix - b.matrix)
                        for i, a in enumerate(others) for b in others[i + 1:]),
                       default=0.0)
    checks = {"direct_formula": float(np.linalg.norm(psi.matrix - direct.matrix)),
              "recovery": float(recovery),
              "conditional_expectation": float(conditional),
              "family_independence": float(independence)}
    return psi, checks


def jeffrey_update(s: InstrumentScenario, r: Sequence[float],
                   prob_tol: float = 1e-12) -> AlgebraElement:
    """Soft-evidence barycenter Σ_x r_x · F_x(σ)/tr(F_x(σ))."""
    r = np.asarray(r, dtype=float)
    if r.shape != (len(s.cp_parts),) or np.any(r < 0) or abs(r.sum() - 1.0) > 1e-9:
        raise ConstraintError("r must be a distribution over the outcomes")
    probs = s.outcome_probabilities()
    out = alg.zero(s.cp_parts[0].target)
    for x, (f_x, p_x) in enumerate(zip(s.cp_parts, probs)):
        if r[x] == 0.0:
            continue
        if p_x < prob_tol:
            raise SingularityError(f"outcome {x} has vanishing probability {p_x:.2e}")
        out = out + (r[x] / p_x) * f_x(s.sigma)
    return out


# ------------------------------------------------------ two-states, weak values
@dataclass(frozen=True)
class TwoStateEntry:
    outcome: object
    probability: float
    defined: bool
    state: AlgebraElement | None
    weak_value: Callable[[np.ndarray], complex] | None
    propagated_residual: float | None


def _rank_one_vector(m: np.ndarray, tol: float = 1e-10) -> np.ndarray | None:
    vals, vecs = np.linalg.eigh(m)
    if vals[-1] > tol and np.all(np.abs(vals[:-1]) < tol * max(1.0, vals[-1])):
        return np.sqrt(vals[-1]) * vecs[:, -1]
    return None


def two_state(psi: np.ndarray, povm: LinearMap,
              unitaries: tuple[np.ndarray, np.ndarray] | None = None,
              overlap_tol: float = 1e-9) -> list[TwoStateEntry]:
    """Pre/post-selected two-states and weak values from a POVM readout.

    ``unitaries`` holds (U_{t1←t0}, U_{t2←t1}); the measurement acts at t2 on
    the state evolved by their product.  Each entry carries the normalized
    two-state at t0 (the one-sided Bayes update ρM'_x/p_x of ρ = |ψ⟩⟨ψ|), the
    weak-value functional A ↦ tr(ρ_x†A), and — for rank-1 effects — the
    residual of the propagated-to-t1 identity against ⟨ψ'|φ'_x⟩|ψ'⟩⟨φ'_x|.
    Orthogonal pre/post-selection is flagged undefined instead of an error.
    """
    shape = povm.source
    if len(shape.blocks) != 1:
        raise ConstraintError("two-state scenarios need a single-block algebra")
    dim = shape.dims[0]
    psi = np.asarray(psi, dtype=complex).reshape(dim)
    psi = psi / np.linalg.norm(psi)
    if unitaries is None:
        u10 = u21 = np.eye(dim, dtype=complex)
    else:
        u10, u21 = (np.asarray(u, dtype=complex) for u in unitaries)
    u20 = u21 @ u10
    rho = AlgebraElement(shape, (np.outer(psi, psi.conj()),))
    e_prime = povm.compose(maps.unitary_channel(AlgebraElement(shape, (u20,))))

    joint = sot.evaluate(sot.RightBloom(), e_prime, rho).value
    propagated = maps.apply_to_factor(
        maps.unitary_channel(AlgebraElement(shape, (u10,))), joint, "left")
    psi1 = u10 @ psi

    entries = []
    for x, (label, m_x) in enumerate(zip(povm.target.labels, maps.povm_effects(povm))):
        m_back = u20.conj().T @ m_x.data[0] @ u20
        p_x = float(np.real(psi.conj() @ m_back @ psi))
        phi = _rank_one_vector(m_x.data[0])
        prop_res = None
        if phi is not None:
            phi1 = u21.conj().T @ phi
            expected = (psi1.conj() @ phi1) * np.outer(psi1, phi1.conj())
            block = _tensor_block(propagated, label)
            prop_res = float(np.linalg.norm(block - expected))
        if p_x < overlap_tol:
            entries.append(TwoStateEntry(label, p_x, False, None, None, prop_res))
            continue
        state = AlgebraElement(shape, ((rho.data[0] @ m_back) / p_x,))
        weak = _weak_value_functional(state)
        entries.append(TwoStateEntry(label, p_x, True, state, weak, prop_res))
    return entries


def _weak_value_functional(state: AlgebraElement) -> Callable[[np.ndarray], complex]:
    mat = state.data[0]

    def weak_value(a: np.ndarray | AlgebraElement) -> complex:
        arr = a.data[0] if isinstance(a, AlgebraElement) else np.asarray(a, dtype=complex)
        return complex(np.trace(mat.conj().T @ arr))

    return weak_value


def _tensor_block(t: AlgebraElement, right_label: object) -> np.ndarray:
    for label, mat in zip(t.shape.labels, t.data):
        if alg.label_key(label[1]) == alg.label_key(right_label):
            return mat
    raise ConstraintError(f"no tensor block with outcome label {right_label!r}")


# ------------------------------------------------------------- correlators
def _unitary_exponential(h: AlgebraElement, scalar: complex) -> AlgebraElement:
    """e^{scalar·H} blockwise via the hermitian eigendecomposition."""
    mats = []
    for m in h.data:
        vals, vecs = np.linalg.eigh(m)
        mats.append((vecs * np.exp(scalar * vals)) @ vecs.conj().T)
    return AlgebraElement(h.shape, tuple(mats))


def two_time_correlator(rho: AlgebraElement, h: AlgebraElement, t: float,
                        a: AlgebraElement, b: AlgebraElement,
                        via: str = "direct") -> complex:
    """⟨B(t)A(0)⟩_ρ = tr(e^{iHt} B e^{−iHt} A ρ).

    ``via='sot'`` computes the same number as tr((E⋆ρ)†(A⊗B)) with
    E = Ad_{e^{−iHt}} and ⋆ the one-sided family D[E](ρ⊗1).
    """
    for name, x in (("H", h), ("A", a), ("B", b)):
        if not x.is_hermitian():
            raise ConstraintError(f"{name} must be hermitian")
    u = _unitary_exponential(h, -1j * t)
    if via == "direct":
        total = 0.0 + 0.0j
        for u_m, b_m, a_m, r_m in zip(u.data, b.data, a.data, rho.data):
            total += np.trace(u_m.conj().T @ b_m @ u_m @ a_m @ r_m)
        return complex(total)
    if via == "sot":
        e = maps.unitary_channel(u)
        joint = sot.evaluate(sot.LeftBloom(), e, rho).value
        return complex((joint.dagger() @ alg.tensor(a, b)).trace())
    raise ConstraintError("via must be 'direct' or 'sot'")


# --------------------------------------------------------- LS linearization
@dataclass(frozen=True)
class LinearizationReport:
    epsilons: tuple[float, ...]
    errors: tuple[float, ...]
    half_step_errors: tuple[float, ...]
    ratios: tuple[float, ...]


def ls_linearization_check(e: LinearMap, a: AlgebraElement,
                           epsilons: Sequence[float],
                           atol: float = ATOL) -> LinearizationReport:
    """Finite-difference check that the square-root family linearizes, at the
    maximally mixed state, to the symmetric-bloom evaluation of the direction.

    For each ε the symmetric difference quotient of ε ↦ E⋆(1/m + εA) is
    compared against ½{A⊗1, D[E]}; the error is O(ε²), so halving ε should
    shrink it by ≈ 4.
    """
    if not a.is_hermitian() or abs(a.trace()) > 1e3 * atol:
        raise ConstraintError("direction must be hermitian and traceless")
    if a.shape != e.source:
        raise ConstraintError("direction does not live on the channel's source")
    dim = e.source.total_dim
    rho0 = (1.0 / dim) * alg.identity(e.source)
    target = sot._evaluate_value(sot.SymmetricBloom(), e, a)

    def quotient_error(eps: float) -> float:
        plus, minus = rho0 + eps * a, rho0 - eps * a
        for state in (plus, minus):
            if state.min_eigenvalue() <= 10 * atol:
                raise ConstraintError(
                    f"step {eps} leaves the state set (direction too large)")
        diff = (sot.evaluate(sot.LeiferSpekkens(), e, plus).value
                - sot.evaluate(sot.LeiferSpekkens(), e, minus).value)
        return ((1.0 / (2.0 * eps)) * diff - target).norm()

    errors = tuple(quotient_error(eps) for eps in epsilons)
    halves = tuple(quotient_error(eps / 2.0) for eps in epsilons)
    ratios = tuple(err / half if half > 0 else float("inf")
                   for err, half in zip(errors, halves))
    return LinearizationReport(tuple(epsilons), errors, halves, ratios)

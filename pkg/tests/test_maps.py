"""Superoperators and the channel-state calculus, cross-checked against
dense kron-sum oracles on single-block algebras."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsot import algebra as alg, maps, sampling
from qsot.algebra import AlgebraElement, AlgebraShape
from qsot.errors import ConstraintError, ShapeMismatchError
from qsot.maps import LinearMap

from conftest import (apply_dense, dense_channel_state, dense_hs_adjoint_check,
                      dense_partial_trace)

ATOL = 1e-11


def depolarizing(shape: AlgebraShape, p: float) -> LinearMap:
    dim = shape.dims[0]
    mix = maps.replace_channel((1.0 / dim) * alg.identity(shape), shape)
    return (1.0 - p) * maps.identity_map(shape) + p * mix


# -------------------------------------------------------------- vectorization
def test_vec_ordering_is_blockwise_row_major():
    shape = AlgebraShape([("a", 2), ("b", 1)])
    x = alg.from_blocks(shape, {"a": np.arange(4).reshape(2, 2), "b": [[9.0]]})
    np.testing.assert_allclose(maps.vec(x), [0, 1, 2, 3, 9])


def test_vec_unvec_roundtrip(rng):
    shape = AlgebraShape([("a", 3), ("b", 2)])
    x = sampling.random_hermitian(shape, rng)
    assert (maps.unvec(shape, maps.vec(x)) - x).norm() < ATOL


def test_linear_map_call_matches_matrix_action(rng):
    source = AlgebraShape([("a", 2), ("b", 2)])
    target = alg.matrix_algebra(3, "c")
    e = sampling.random_cptp(source, target, rng)
    x = sampling.random_hermitian(source, rng)
    np.testing.assert_allclose(maps.vec(e(x)), e.matrix @ maps.vec(x), atol=ATOL)


def test_compose_is_matrix_product(rng):
    a = alg.matrix_algebra(2, "a")
    b = alg.matrix_algebra(3, "b")
    c = alg.matrix_algebra(2, "c")
    e = sampling.random_cptp(a, b, rng)
    f = sampling.random_cptp(b, c, rng)
    g = f.compose(e)
    x = sampling.random_state(a, rng)
    assert (g(x) - f(e(x))).norm() < ATOL


def test_compose_shape_mismatch_rejected(rng):
    a, b = alg.matrix_algebra(2, "a"), alg.matrix_algebra(3, "b")
    e = sampling.random_cptp(a, b, rng)
    with pytest.raises(ShapeMismatchError):
        e.compose(e)


# -------------------------------------------------------------- map predicates
def test_structure_predicates_on_known_maps(rng):
    shape = alg.matrix_algebra(2)
    ident = maps.identity_map(shape)
    assert ident.is_cptp and ident.is_unital
    depo = depolarizing(shape, 0.3)
    assert depo.is_cptp and depo.is_unital

    # transpose: positive, trace-preserving, not completely positive
    transpose = maps.from_action(shape, shape,
                                 lambda x: AlgebraElement(shape, (x.data[0].T,)))
    assert transpose.is_tp and transpose.is_dagger_preserving
    assert not transpose.is_cp

    rho = sampling.random_state(shape, rng)
    left = maps.left_mult(rho)
    assert not left.is_dagger_preserving


def test_hs_adjoint_pairing(rng):
    e = sampling.random_cptp(alg.matrix_algebra(2, "a"),
                             AlgebraShape([("b", 2), ("c", 1)]), rng)
    assert dense_hs_adjoint_check(e, rng) < ATOL


def test_hs_adjoint_of_cptp_is_unital_cp(rng):
    e = sampling.random_cptp(alg.matrix_algebra(3, "a"), alg.matrix_algebra(2, "b"), rng)
    adj = e.hs_adjoint()
    assert adj.is_cp and adj.is_unital


def test_tilde_conjugates_by_dagger(rng):
    shape_a, shape_b = alg.matrix_algebra(2, "a"), alg.matrix_algebra(2, "b")
    e = sampling.random_cptp(shape_a, shape_b, rng)
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    x = AlgebraElement(shape_a, (m,))
    assert (e.tilde()(x) - e(x.dagger()).dagger()).norm() < ATOL


# ------------------------------------------------------------- channel state
def test_channel_state_matches_kron_sum_oracle(rng):
    e = sampling.random_cptp(alg.matrix_algebra(2, "a"), alg.matrix_algebra(3, "b"), rng)
    np.testing.assert_allclose(maps.channel_state(e).data[0],
                               dense_channel_state(e), atol=ATOL)


def test_channel_state_roundtrip(rng):
    source = AlgebraShape([("a", 2), ("x", 1)])
    target = AlgebraShape([("b", 2), ("y", 2)])
    e = sampling.random_cptp(source, target, rng)
    back = maps.channel_from_state(maps.channel_state(e), source, target)
    assert np.max(np.abs(back.matrix - e.matrix)) < ATOL


def test_channel_state_marginal_is_output_state(rng):
    shape = alg.matrix_algebra(3, "a")
    e = sampling.random_cptp(shape, alg.matrix_algebra(2, "b"), rng)
    d = maps.channel_state(e)
    # tr_A D[E] = E(1_A); tr_B D[E] = 1_A
    assert (alg.partial_trace(d, "A") - e(alg.identity(shape))).norm() < ATOL
    assert (alg.partial_trace(d, "B") - alg.identity(shape)).norm() < ATOL


def test_channel_state_via_mu_adjoint_unit(rng):
    shape = AlgebraShape([("a", 2), ("b", 1)])
    e = sampling.random_cptp(shape, alg.matrix_algebra(2, "c"), rng)
    lifted = maps.apply_to_factor(e, maps.mu_adjoint_unit(shape), "right")
    assert (lifted - maps.channel_state(e)).norm() < ATOL


def test_cp_decompose_recombines_and_parts_are_cp(rng):
    source = AlgebraShape([("a", 2), ("b", 1)])
    target = alg.matrix_algebra(2, "c")
    matrix = (rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5)))
    e = LinearMap(source, target, matrix)
    c1, c2, c3, c4 = maps.cp_decompose(e)
    recombined = c1.matrix - c2.matrix + 1j * (c3.matrix - c4.matrix)
    assert np.max(np.abs(recombined - e.matrix)) < ATOL
    assert all(c.is_cp for c in (c1, c2, c3, c4))


# --------------------------------------------------------------- swap and tau
def test_swap_gamma_is_kron_swap(rng):
    a = sampling.random_hermitian(alg.matrix_algebra(2, "a"), rng)
    b = sampling.random_hermitian(alg.matrix_algebra(3, "b"), rng)
    t = alg.tensor(a, b)
    swapped = maps.swap_gamma(t)
    assert (swapped - alg.tensor(b, a)).norm() < ATOL


def test_swap_gamma_is_involutive(rng):
    shape = alg.matrix_algebra(2, "a").tensor(alg.matrix_algebra(2, "b"))
    t = sampling.random_hermitian(shape, rng)
    assert (maps.swap_gamma(maps.swap_gamma(t)) - t).norm() < ATOL


def test_time_reversal_on_elementary_tensor(rng):
    a = sampling.random_hermitian(alg.matrix_algebra(2, "a"), rng)
    b = sampling.random_hermitian(alg.matrix_algebra(2, "b"), rng)
    # tau(b (x) a) = a^dag (x) b^dag
    assert (maps.time_reversal_tau(alg.tensor(b, a))
            - alg.tensor(a.dagger(), b.dagger())).norm() < ATOL


def test_time_reversal_is_conjugate_linear_involution(rng):
    shape = alg.matrix_algebra(2, "a").tensor(alg.matrix_algebra(2, "b"))
    mats = tuple(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
                 for _ in shape.dims)
    t = AlgebraElement(shape, mats)
    assert (maps.time_reversal_tau(maps.time_reversal_tau(t)) - t).norm() < ATOL
    scaled = maps.time_reversal_tau((2.0 + 1.0j) * t)
    assert (scaled - (2.0 - 1.0j) * maps.time_reversal_tau(t)).norm() < ATOL


def test_apply_to_factor_matches_kron_oracle(rng):
    shape_a, shape_b = alg.matrix_algebra(2, "a"), alg.matrix_algebra(2, "b")
    shape_c = alg.matrix_algebra(3, "c")
    e = sampling.random_cptp(shape_b, shape_c, rng)
    t = sampling.random_state(shape_a.tensor(shape_b), rng)
    got = maps.apply_to_factor(e, t, "right").data[0]
    # dense oracle: act on the right kron factor unit by unit
    four = t.data[0].reshape(2, 2, 2, 2)
    want = np.zeros((2 * 3, 2 * 3), dtype=complex)
    for i in range(2):
        for j in range(2):
            want += np.kron(np.eye(2)[:, [i]] @ np.eye(2)[[j], :],
                            apply_dense(e, four[i, :, j, :]))
    np.testing.assert_allclose(got, want, atol=ATOL)


def test_partial_trace_channel_matches_partial_trace(rng):
    tshape = alg.matrix_algebra(2, "a").tensor(AlgebraShape([("b", 2), ("c", 1)]))
    t = sampling.random_state(tshape, rng)
    for side in ("A", "B"):
        ch = maps.partial_trace_channel(tshape, side)
        assert (ch(t) - alg.partial_trace(t, side)).norm() < ATOL
        assert ch.is_cptp


# ------------------------------------------------------- channel constructors
def test_classical_channel_is_stochastic_action(rng):
    f = np.array([[0.7, 0.2], [0.3, 0.8]])
    e = maps.classical_channel(f)
    p = alg.classical_state([0.4, 0.6])
    q = e(p)
    np.testing.assert_allclose([m[0, 0].real for m in q.data], f @ [0.4, 0.6],
                               atol=ATOL)
    with pytest.raises(ConstraintError):
        maps.classical_channel(np.array([[0.5, 0.5], [0.4, 0.5]]))


def test_povm_channel_and_effects_roundtrip(rng):
    shape = alg.matrix_algebra(2)
    m0 = np.array([[0.7, 0.1], [0.1, 0.4]])
    effects = [m0, np.eye(2) - m0]
    e = maps.povm(effects)
    assert e.is_cptp
    back = maps.povm_effects(e)
    for want, got in zip(effects, back):
        np.testing.assert_allclose(got.data[0], want, atol=ATOL)
    rho = sampling.random_state(shape, rng)
    probs = [m[0, 0].real for m in e(rho).data]
    np.testing.assert_allclose(probs, [np.trace(m @ rho.data[0]).real
                                       for m in effects], atol=ATOL)
    with pytest.raises(ConstraintError):
        maps.povm([m0, np.eye(2)])  # not complete


def test_ensemble_prepares_the_listed_states(rng):
    shape = alg.matrix_algebra(2)
    states = [sampling.random_state(shape, rng) for _ in range(3)]
    prep = maps.ensemble(states)
    assert prep.is_cptp
    for i, want in enumerate(states):
        delta = alg.basis_vector(prep.source, prep.source.labels[i])
        assert (prep(delta) - want).norm() < ATOL


def test_instrument_traces_to_povm_probabilities(rng):
    shape = alg.matrix_algebra(2)
    parts = []
    k1 = np.array([[1.0, 0.0], [0.0, 0.5]])
    k2 = np.array([[0.0, np.sqrt(0.75)], [0.0, 0.0]])
    for k in (k1, k2):
        parts.append(maps.from_action(
            shape, shape, lambda x, k=k: AlgebraElement(shape, (k @ x.data[0] @ k.conj().T,))))
    inst = maps.instrument(parts)
    assert inst.is_cptp
    rho = sampling.random_state(shape, rng)
    out = inst(rho)
    # marginal over outcomes recovers the unconditioned evolution
    summed = sum((f(rho) for f in parts), alg.zero(shape))
    assert (alg.partial_trace(out, "B") - summed).norm() < ATOL


def test_unitary_channel_requires_unitary(rng):
    shape = alg.matrix_algebra(2)
    u = sampling.random_unitary_element(shape, rng)
    e = maps.unitary_channel(u)
    rho = sampling.random_state(shape, rng)
    np.testing.assert_allclose(e(rho).data[0],
                               u.data[0] @ rho.data[0] @ u.data[0].conj().T,
                               atol=ATOL)
    with pytest.raises(ConstraintError):
        maps.unitary_channel(2.0 * u)


def test_replace_channel_outputs_sigma(rng):
    source = AlgebraShape([("a", 2), ("b", 1)])
    sigma = sampling.random_state(alg.matrix_algebra(2, "c"), rng)
    e = maps.replace_channel(sigma, source)
    assert e.is_cptp
    rho = sampling.random_state(source, rng)
    assert (e(rho) - sigma).norm() < ATOL


# ---------------------------------------------------------- property testing
@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=3),
       st.integers(min_value=0, max_value=10**6))
def test_random_cptp_is_cptp_and_preserves_states(da, db, seed):
    rng = np.random.default_rng(seed)
    e = sampling.random_cptp(alg.matrix_algebra(da, "a"), alg.matrix_algebra(db, "b"), rng)
    assert e.is_cptp
    rho = sampling.random_state(e.source, rng)
    alg.assert_state(e(rho))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=2, max_value=3), st.integers(min_value=0, max_value=10**6))
def test_random_unital_channel_fixes_identity(dim, seed):
    rng = np.random.default_rng(seed)
    shape = alg.matrix_algebra(dim)
    e = sampling.random_unital_channel(shape, rng)
    assert e.is_cptp and e.is_unital
    one = alg.identity(shape)
    assert (e(one) - one).norm() < 1e-9

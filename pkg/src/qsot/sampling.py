"""Random instances for certification and tests.

States are Ginibre-distributed blockwise (GG†, jointly normalized so block
weights come out random); channels are sampled by Stinespring dilation with a
random isometry and environment dimension twice the output dimension.  All
functions take an explicit numpy Generator so every trial is replayable.
"""
from __future__ import annotations

import numpy as np

from . import algebra as alg, maps
from .algebra import AlgebraElement, AlgebraShape
from .maps import LinearMap


def ginibre(rng: np.random.Generator, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def random_state(shape: AlgebraShape, rng: np.random.Generator,
                 rank: int | None = None) -> AlgebraElement:
    """Ginibre random density matrix; full rank (faithful) unless rank is given."""
    mats = []
    for d in shape.dims:
        g = ginibre(rng, d, rank or d)
        mats.append(g @ g.conj().T)
    total = sum(np.trace(m).real for m in mats)
    return AlgebraElement(shape, tuple(m / total for m in mats))


def random_hermitian(shape: AlgebraShape, rng: np.random.Generator,
                     traceless: bool = False) -> AlgebraElement:
    mats = [((g := ginibre(rng, d)) + g.conj().T) / 2 for d in shape.dims]
    el = AlgebraElement(shape, tuple(mats))
    if traceless:
        el = el - (el.trace() / shape.total_dim) * alg.identity(shape)
    return el


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(rng, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_unitary_element(shape: AlgebraShape, rng: np.random.Generator) -> AlgebraElement:
    return AlgebraElement(shape, tuple(random_unitary(rng, d) for d in shape.dims))


def random_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """rows x cols matrix with orthonormal columns (rows >= cols)."""
    q, r = np.linalg.qr(ginibre(rng, rows, cols))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_cptp(source: AlgebraShape, target: AlgebraShape,
                rng: np.random.Generator, env: int = 2) -> LinearMap:
    """Random CPTP map via isometry dilation, one Stinespring per source block.

    For each source block x an isometry V_x : C^{m_x} → (⊕_y C^{n_y})⊗C^env is
    drawn; its row-blocks give Kraus operators into every target block, so the
    sampled channel has generically full support across all components.
    """
    d_out = target.total_dim
    cols_per_block: dict = {}
    for lx, mx in source.blocks:
        # an isometry needs at least as many rows as columns
        env_x = max(env, -(-mx // d_out))
        v = random_isometry(rng, d_out * env_x, mx)
        kraus: dict = {alg.label_key(ly): [] for ly, _ in target.blocks}
        row = 0
        for _ in range(env_x):
            for ly, ny in target.blocks:
                kraus[alg.label_key(ly)].append(v[row:row + ny, :])
                row += ny
        cols_per_block[alg.label_key(lx)] = kraus

    def act(a: AlgebraElement) -> AlgebraElement:
        out_mats = [np.zeros((ny, ny), dtype=complex) for ny in target.dims]
        for xi, (lx, mx) in enumerate(source.blocks):
            kraus = cols_per_block[alg.label_key(lx)]
            for yi, (ly, ny) in enumerate(target.blocks):
                for k in kraus[alg.label_key(ly)]:
                    out_mats[yi] += k @ a.data[xi] @ k.conj().T
        return AlgebraElement(target, tuple(out_mats))

    return maps.from_action(source, target, act)


def random_unital_channel(shape: AlgebraShape, rng: np.random.Generator,
                          terms: int = 4) -> LinearMap:
    """Random mixed-unitary (hence unital and CPTP) channel on a shape."""
    weights = rng.dirichlet(np.ones(terms))
    total = None
    for w in weights:
        u = random_unitary_element(shape, rng)
        term = w * maps.unitary_channel(u)
        total = term if total is None else total + term
    return total


def random_povm(source: AlgebraShape, outcomes: int,
                rng: np.random.Generator) -> LinearMap:
    """Random POVM channel A → C^outcomes (normalized Ginibre effects)."""
    raw = []
    for _ in range(outcomes):
        mats = [(g := ginibre(rng, d)) @ g.conj().T for d in source.dims]
        raw.append(AlgebraElement(source, tuple(mats)))
    total = raw[0]
    for m in raw[1:]:
        total = total + m
    s_inv = alg.power(total, -0.5)
    effects = [s_inv @ m @ s_inv for m in raw]
    return maps.povm(effects, source)


def random_measure_prepare(source: AlgebraShape, target: AlgebraShape,
                           outcomes: int, rng: np.random.Generator) -> LinearMap:
    """Random entanglement-breaking channel A ↦ Σ_k tr(A P_k) σ_k.

    Its channel state Σ_k P_kᵀ⊗σ_k is PSD, which makes these channels the
    admissible instances for associativity checks of families that need a
    genuine density matrix as second argument.
    """
    measurement = random_povm(source, outcomes, rng)
    effects = maps.povm_effects(measurement)
    states = [random_state(target, rng) for _ in range(outcomes)]
    matrix = sum(np.outer(maps.vec(s), maps.vec(p.dagger()).conj())
                 for s, p in zip(states, effects))
    return LinearMap(source, target, matrix)


def random_decohering_channel(source: AlgebraShape, target: AlgebraShape,
                              rng: np.random.Generator) -> LinearMap:
    """A channel that reads only the block diagonals: a classical channel
    sandwiched between the dephasing map and a diagonal re-embedding.

    Kills every off-diagonal matrix unit, so it commutes with any diagonal
    prior in the classical-limit sense.
    """
    n_in, n_out = source.total_dim, target.total_dim
    f = rng.dirichlet(np.ones(n_out), size=n_in).T  # columns sum to 1

    def act(a: AlgebraElement) -> AlgebraElement:
        diag_in = np.concatenate([np.diag(m) for m in a.data])
        diag_out = f @ diag_in
        return alg.diagonal_element(target, diag_out)

    return maps.from_action(source, target, act)

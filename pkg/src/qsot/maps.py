"""Linear superoperators between multi-matrix algebras.

Storage convention
------------------
A map is a dense complex matrix acting on coordinates in the matrix-unit
basis.  An element is vectorized block by block in shape order, each block
flattened row-major, so the coordinate of matrix unit ``E_ij`` of block ``x``
sits at ``offset(x) + i*dim(x) + j``.  With this convention the matrix units
are orthonormal for the Hilbert–Schmidt inner product ``<A,B> = tr(A† B)``,
hence the adjoint of a map is literally the conjugate transpose of its matrix.

The channel state ``D[E] = (id⊗E)(μ*(1))`` and its inverse are pure
reshape/transpose operations on that matrix, which keeps the certification
loops cheap.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import algebra as alg
from .algebra import AlgebraElement, AlgebraShape, label_text
from .config import ATOL, CP_TOL, HERM_TOL
from .errors import ConstraintError, ShapeMismatchError


# ----------------------------------------------------------------- vectorizing
def _offsets(shape: AlgebraShape) -> list[int]:
    offs, total = [], 0
    for d in shape.dims:
        offs.append(total)
        total += d * d
    return offs


def vec(a: AlgebraElement) -> np.ndarray:
    return np.concatenate([mat.reshape(-1) for mat in a.data])


def unvec(shape: AlgebraShape, v: np.ndarray) -> AlgebraElement:
    mats, off = [], 0
    for d in shape.dims:
        mats.append(np.array(v[off:off + d * d].reshape(d, d)))
        off += d * d
    return AlgebraElement(shape, tuple(mats))


def matrix_units(shape: AlgebraShape):
    """Yield (block_index, i, j, element) over the matrix-unit basis in order."""
    for bi, (label, d) in enumerate(shape.blocks):
        for i in range(d):
            for j in range(d):
                mats = [np.zeros((dd, dd), dtype=complex) for dd in shape.dims]
                mats[bi][i, j] = 1.0
                yield bi, i, j, AlgebraElement(shape, tuple(mats))


def _dagger_permutation(shape: AlgebraShape) -> np.ndarray:
    """Permutation P with vec(A†) = P @ conj(vec(A))."""
    n = shape.vector_dim
    perm = np.zeros((n, n))
    off = 0
    for d in shape.dims:
        for i in range(d):
            for j in range(d):
                perm[off + i * d + j, off + j * d + i] = 1.0
        off += d * d
    return perm


class LinearMap:
    """A linear superoperator with cached classification flags."""

    __slots__ = ("source", "target", "matrix", "_cache")

    def __init__(self, source: AlgebraShape, target: AlgebraShape, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (target.vector_dim, source.vector_dim):
            raise ShapeMismatchError(
                f"map matrix has shape {matrix.shape}, expected "
                f"({target.vector_dim},{source.vector_dim})")
        matrix.flags.writeable = False
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, *_):
        raise AttributeError("LinearMap is immutable")

    # ------------------------------------------------------------------- action
    def __call__(self, a: AlgebraElement) -> AlgebraElement:
        if a.shape != self.source:
            raise ShapeMismatchError("element shape does not match map source")
        return unvec(self.target, self.matrix @ vec(a))

    def compose(self, inner: "LinearMap") -> "LinearMap":
        """self ∘ inner."""
        if inner.target != self.source:
            raise ShapeMismatchError("composition shapes do not align")
        return LinearMap(inner.source, self.target, self.matrix @ inner.matrix)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        if self.source != other.source or self.target != other.target:
            raise ShapeMismatchError("map sum shapes do not align")
        return LinearMap(self.source, self.target, self.matrix + other.matrix)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        if self.source != other.source or self.target != other.target:
            raise ShapeMismatchError("map difference shapes do not align")
        return LinearMap(self.source, self.target, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "LinearMap":
        return LinearMap(self.source, self.target, scalar * self.matrix)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    # ------------------------------------------------------------------ adjoint
    def hs_adjoint(self) -> "LinearMap":
        """Hilbert–Schmidt adjoint: tr(E(A)† B) = tr(A† E*(B))."""
        return LinearMap(self.target, self.source, self.matrix.conj().T)

    def tilde(self) -> "LinearMap":
        """†∘E∘†, the conjugated map appearing in the Bayes condition."""
        pt = _dagger_permutation(self.target)
        ps = _dagger_permutation(self.source)
        return LinearMap(self.source, self.target, pt @ self.matrix.conj() @ ps)

    # ------------------------------------------------------------ classification
    def _trace_functional(self, shape: AlgebraShape) -> np.ndarray:
        row = np.zeros(shape.vector_dim)
        off = 0
        for d in shape.dims:
            for i in range(d):
                row[off + i * d + i] = 1.0
            off += d * d
        return row

    @property
    def is_tp(self) -> bool:
        if "tp" not in self._cache:
            lhs = self._trace_functional(self.target) @ self.matrix
            rhs = self._trace_functional(self.source)
            self._cache["tp"] = bool(np.max(np.abs(lhs - rhs)) <= 1e3 * HERM_TOL)
        return self._cache["tp"]

    @property
    def is_dagger_preserving(self) -> bool:
        if "dp" not in self._cache:
            other = self.tilde()
            self._cache["dp"] = bool(
                np.max(np.abs(self.matrix - other.matrix)) <= 1e3 * HERM_TOL)
        return self._cache["dp"]

    @property
    def is_cp(self) -> bool:
        if "cp" not in self._cache:
            self._cache["cp"] = bool(
                min((np.linalg.eigvalsh((c + c.conj().T) / 2)[0]
                     for c in choi_blocks(self).values()), default=0.0) >= -CP_TOL
                and self.is_dagger_preserving)
        return self._cache["cp"]

    @property
    def is_unital(self) -> bool:
        if "unital" not in self._cache:
            diff = self(alg.identity(self.source)) - alg.identity(self.target)
            self._cache["unital"] = bool(diff.norm() <= 1e3 * HERM_TOL)
        return self._cache["unital"]

    @property
    def is_cptp(self) -> bool:
        return self.is_cp and self.is_tp

    def __repr__(self):
        return f"LinearMap({self.source!r} -> {self.target!r})"


def classify(e: LinearMap) -> dict:
    """Classification flags used by reports and the Bayes solvers."""
    return {
        "TP": e.is_tp,
        "HPTP": e.is_tp and e.is_dagger_preserving,
        "CP": e.is_cp,
        "CPTP": e.is_cptp,
        "unital": e.is_unital,
    }


def from_action(source: AlgebraShape, target: AlgebraShape,
                action: Callable[[AlgebraElement], AlgebraElement]) -> LinearMap:
    """Build the matrix of a map from its action on the matrix-unit basis."""
    cols = []
    for _, _, _, unit in matrix_units(source):
        cols.append(vec(action(unit)))
    return LinearMap(source, target, np.column_stack(cols))


# ------------------------------------------------------------ basic constructors
def identity_map(shape: AlgebraShape) -> LinearMap:
    return LinearMap(shape, shape, np.eye(shape.vector_dim, dtype=complex))


def left_mult(a: AlgebraElement) -> LinearMap:
    """L_a : B ↦ aB."""
    mats = [np.kron(mat, np.eye(d)) for mat, d in zip(a.data, a.shape.dims)]
    return LinearMap(a.shape, a.shape, _block_diag(mats))


def right_mult(a: AlgebraElement) -> LinearMap:
    """R_a : B ↦ Ba."""
    mats = [np.kron(np.eye(d), mat.T) for mat, d in zip(a.data, a.shape.dims)]
    return LinearMap(a.shape, a.shape, _block_diag(mats))


def ad_map(x: AlgebraElement) -> LinearMap:
    """Ad_x : A ↦ x A x†  (x need not be unitary or hermitian)."""
    return left_mult(x).compose(right_mult(x.dagger()))


def _block_diag(mats: Sequence[np.ndarray]) -> np.ndarray:
    total = sum(m.shape[0] for m in mats)
    out = np.zeros((total, total), dtype=complex)
    off = 0
    for m in mats:
        n = m.shape[0]
        out[off:off + n, off:off + n] = m
        off += n
    return out


# -------------------------------------------------------------- channel states
def mu_adjoint_unit(shape: AlgebraShape) -> AlgebraElement:
    """μ*(1): per-block swap operators in the diagonal label-pair blocks."""
    tshape = shape.tensor(shape)
    mats = []
    for (lx, ly) in tshape.labels:
        dx, dy = shape.dim_of(lx), shape.dim_of(ly)
        block = np.zeros((dx * dy, dx * dy), dtype=complex)
        if alg.label_key(lx) == alg.label_key(ly):
            d = dx
            for i in range(d):
                for k in range(d):
                    block[i * d + k, k * d + i] = 1.0
        mats.append(block)
    return AlgebraElement(tshape, tuple(mats))


def _component(e: LinearMap, xi: int, yi: int) -> np.ndarray:
    """Submatrix of e.matrix mapping source block xi into target block yi."""
    so, to = _offsets(e.source), _offsets(e.target)
    mx, ny = e.source.dims[xi], e.target.dims[yi]
    return e.matrix[to[yi]:to[yi] + ny * ny, so[xi]:so[xi] + mx * mx]


def channel_state(e: LinearMap) -> AlgebraElement:
    """D[E] = (id⊗E)(μ*(1)) = Σ_{ij} E_ij ⊗ E(E_ji), blockwise."""
    tshape = e.source.tensor(e.target)
    mats = []
    for (lx, ly) in tshape.labels:
        xi, yi = e.source.index(lx), e.target.index(ly)
        mx, ny = e.source.dims[xi], e.target.dims[yi]
        comp = _component(e, xi, yi).reshape(ny, ny, mx, mx)
        # block[(i,k),(j,l)] = E(E_ji)[k,l] = comp[k,l,j,i]
        mats.append(np.ascontiguousarray(comp.transpose(3, 0, 2, 1))
                    .reshape(mx * ny, mx * ny))
    return AlgebraElement(tshape, tuple(mats))


def channel_from_state(j: AlgebraElement, source: AlgebraShape,
                       target: AlgebraShape) -> LinearMap:
    """Inverse of channel_state: D is a linear isomorphism."""
    tshape = source.tensor(target)
    if j.shape != tshape:
        raise ShapeMismatchError("element does not live on source⊗target")
    matrix = np.zeros((target.vector_dim, source.vector_dim), dtype=complex)
    so, to = _offsets(source), _offsets(target)
    for label in tshape.labels:
        lx, ly = label
        xi, yi = source.index(lx), target.index(ly)
        mx, ny = source.dims[xi], target.dims[yi]
        block = j.block(label).reshape(mx, ny, mx, ny)
        comp = np.ascontiguousarray(block.transpose(1, 3, 2, 0)).reshape(ny * ny, mx * mx)
        matrix[to[yi]:to[yi] + ny * ny, so[xi]:so[xi] + mx * mx] = comp
    return LinearMap(source, target, matrix)


def choi_blocks(e: LinearMap) -> dict:
    """Blockwise (unnormalized) Choi matrices Σ_ij E_ij ⊗ E(E_ij)."""
    out = {}
    for xi, (lx, mx) in enumerate(e.source.blocks):
        for yi, (ly, ny) in enumerate(e.target.blocks):
            comp = _component(e, xi, yi).reshape(ny, ny, mx, mx)
            # choi[(a,k),(b,l)] = E(E_ab)[k,l] = comp[k,l,a,b]
            out[(lx, ly)] = (np.ascontiguousarray(comp.transpose(2, 0, 3, 1))
                             .reshape(mx * ny, mx * ny))
    return out


def map_from_choi(chois: dict, source: AlgebraShape, target: AlgebraShape) -> LinearMap:
    matrix = np.zeros((target.vector_dim, source.vector_dim), dtype=complex)
    so, to = _offsets(source), _offsets(target)
    for (lx, ly), choi in chois.items():
        xi, yi = source.index(lx), target.index(ly)
        mx, ny = source.dims[xi], target.dims[yi]
        block = np.asarray(choi, dtype=complex).reshape(mx, ny, mx, ny)
        comp = np.ascontiguousarray(block.transpose(1, 3, 0, 2)).reshape(ny * ny, mx * mx)
        matrix[to[yi]:to[yi] + ny * ny, so[xi]:so[xi] + mx * mx] = comp
    return LinearMap(source, target, matrix)


def cp_decompose(e: LinearMap) -> tuple[LinearMap, LinearMap, LinearMap, LinearMap]:
    """Write E = C1 − C2 + iC3 − iC4 with each Ck completely positive.

    The split happens on the blockwise Choi matrices: hermitian/antihermitian
    parts, then positive/negative spectral parts of each.
    """
    parts: list[dict] = [{}, {}, {}, {}]
    for key, choi in choi_blocks(e).items():
        herm = (choi + choi.conj().T) / 2
        skew = (choi - choi.conj().T) / (2j)
        for slot, mat in ((0, herm), (2, skew)):
            vals, vecs = np.linalg.eigh(mat)
            pos = (vecs * np.clip(vals, 0, None)) @ vecs.conj().T
            neg = (vecs * np.clip(-vals, 0, None)) @ vecs.conj().T
            parts[slot][key] = pos
            parts[slot + 1][key] = neg
    return tuple(map_from_choi(p, e.source, e.target) for p in parts)


# ------------------------------------------------------------------- swap and τ
def swap_gamma(t: AlgebraElement) -> AlgebraElement:
    """γ: element on A⊗B ↦ element on B⊗A (linear, †-preserving)."""
    tshape = t.shape
    if tshape.factors is None:
        raise ShapeMismatchError("swap_gamma needs a tensor-shaped element")
    left, right = tshape.factors
    target = right.tensor(left)
    mats = {}
    for label, mat in zip(tshape.labels, t.data):
        la, lb = label
        da, db = left.dim_of(la), right.dim_of(lb)
        four = mat.reshape(da, db, da, db)
        mats[alg.label_key((lb, la))] = (np.ascontiguousarray(four.transpose(1, 0, 3, 2))
                                         .reshape(db * da, db * da))
    return AlgebraElement(target, tuple(mats[alg.label_key(l)] for l in target.labels))


def time_reversal_tau(t: AlgebraElement) -> AlgebraElement:
    """τ: conjugate-linear, τ(b⊗a) = a†⊗b†; an involution."""
    return swap_gamma(t).dagger()


def apply_to_factor(m: LinearMap, t: AlgebraElement, which: str) -> AlgebraElement:
    """Apply a superoperator to one tensor factor: (m⊗id) or (id⊗m).

    ``which`` is 'left' or 'right'; the named factor of ``t``'s tensor shape
    must equal ``m.source`` and is replaced by ``m.target``.
    """
    tshape = t.shape
    if tshape.factors is None:
        raise ShapeMismatchError("apply_to_factor needs a tensor-shaped element")
    left, right = tshape.factors
    if which == "right":
        if right != m.source:
            raise ShapeMismatchError("right factor does not match map source")
        target = left.tensor(m.target)
    elif which == "left":
        if left != m.source:
            raise ShapeMismatchError("left factor does not match map source")
        target = m.target.tensor(right)
    else:
        raise ValueError("which must be 'left' or 'right'")
    acc = {alg.label_key(l): np.zeros((d, d), dtype=complex)
           for (l, d) in target.blocks}
    for label, mat in zip(tshape.labels, t.data):
        la, lb = label
        da, db = left.dim_of(la), right.dim_of(lb)
        four = mat.reshape(da, db, da, db)
        if which == "right":
            xi = m.source.index(lb)
            for yi, (ly, ny) in enumerate(m.target.blocks):
                comp = _component(m, xi, yi).reshape(ny, ny, db, db)
                out = np.einsum("iajb,klab->ikjl", four, comp)
                acc[alg.label_key((la, ly))] += out.reshape(da * ny, da * ny)
        else:
            xi = m.source.index(la)
            for yi, (ly, ny) in enumerate(m.target.blocks):
                comp = _component(m, xi, yi).reshape(ny, ny, da, da)
                out = np.einsum("akbl,ijab->ikjl", four, comp)
                acc[alg.label_key((ly, lb))] += out.reshape(ny * db, ny * db)
    return AlgebraElement(target, tuple(acc[alg.label_key(l)] for l in target.labels))


# ---------------------------------------------------------- channel constructors
def classical_channel(stochastic: np.ndarray, atol: float = ATOL,
                      source_prefix: str = "x", target_prefix: str = "y") -> LinearMap:
    """A column-stochastic matrix f_yx as a channel C^X → C^Y."""
    f = np.asarray(stochastic, dtype=float)
    if np.max(np.abs(f.sum(axis=0) - 1.0)) > 1e3 * atol:
        raise ConstraintError("columns of a stochastic matrix must sum to 1")
    n_y, n_x = f.shape
    source = alg.classical_algebra(n_x, source_prefix)
    target = alg.classical_algebra(n_y, target_prefix)
    matrix = f.astype(complex)  # vector_dim == n for commutative algebras
    return LinearMap(source, target, matrix)


def povm(effects: Sequence[np.ndarray] | Sequence[AlgebraElement],
         source: AlgebraShape | None = None, atol: float = ATOL,
         target_prefix: str = "y") -> LinearMap:
    """A POVM {M_y} as the channel A ↦ ⊕_y tr(M_y A) into C^Y."""
    elems = []
    for m in effects:
        if isinstance(m, AlgebraElement):
            elems.append(m)
        else:
            if source is None:
                source = alg.matrix_algebra(np.asarray(m).shape[0])
            elems.append(AlgebraElement(source, (np.asarray(m, dtype=complex),)))
    source = elems[0].shape
    total = elems[0]
    for m in elems[1:]:
        total = total + m
    if (total - alg.identity(source)).norm() > 1e3 * atol:
        raise ConstraintError("POVM effects must sum to the identity")
    target = alg.classical_algebra(len(elems), target_prefix)
    rows = [vec(m.dagger()).conj() for m in elems]  # tr(M_y A) row functionals
    return LinearMap(source, target, np.array(rows))


def povm_effects(e: LinearMap) -> list[AlgebraElement]:
    """Recover the effects M_y of a POVM channel via the adjoint: M_y = E*(δ_y)."""
    adj = e.hs_adjoint()
    return [adj(alg.basis_vector(e.target, label)) for label in e.target.labels]


def ensemble(states: Sequence[AlgebraElement], atol: float = ATOL,
             source_prefix: str = "x") -> LinearMap:
    """An ensemble {ρ_x} as the preparation channel C^X → A, δ_x ↦ ρ_x."""
    for rho in states:
        alg.assert_state(rho, atol)
    source = alg.classical_algebra(len(states), source_prefix)
    cols = [vec(rho) for rho in states]
    return LinearMap(source, states[0].shape, np.column_stack(cols))


def instrument(cp_parts: Sequence[LinearMap], atol: float = ATOL,
               outcome_prefix: str = "x") -> LinearMap:
    """A quantum instrument {F_x} as the channel A → B⊗C^X, A ↦ Σ_x F_x(A)⊗δ_x."""
    source, b_shape = cp_parts[0].source, cp_parts[0].target
    total = cp_parts[0]
    for f in cp_parts[1:]:
        total = total + f
    if not total.is_tp:
        raise ConstraintError("the sum of instrument parts must be trace-preserving")
    outcomes = alg.classical_algebra(len(cp_parts), outcome_prefix)

    def act(a: AlgebraElement) -> AlgebraElement:
        out = alg.zero(b_shape.tensor(outcomes))
        for x, f in enumerate(cp_parts):
            out = out + alg.tensor(f(a), alg.basis_vector(outcomes, f"{outcome_prefix}{x}"))
        return out

    return from_action(source, b_shape.tensor(outcomes), act)


def unitary_channel(u: AlgebraElement, atol: float = ATOL) -> LinearMap:
    """Ad_U for a blockwise unitary U."""
    for mat, d in zip(u.data, u.shape.dims):
        if np.max(np.abs(mat @ mat.conj().T - np.eye(d))) > 1e3 * atol:
            raise ConstraintError("unitary_channel needs unitary blocks")
    return ad_map(u)


def replace_channel(sigma: AlgebraElement, source: AlgebraShape,
                    atol: float = ATOL) -> LinearMap:
    """The replacement channel A ↦ tr(A)·σ."""
    alg.assert_state(sigma, atol)
    row = np.zeros(source.vector_dim, dtype=complex)
    off = 0
    for d in source.dims:
        for i in range(d):
            row[off + i * d + i] = 1.0
        off += d * d
    return LinearMap(source, sigma.shape, np.outer(vec(sigma), row))


def partial_trace_channel(tshape: AlgebraShape, side: str) -> LinearMap:
    """tr_A or tr_B as a channel from a tensor shape onto the kept factor."""
    if tshape.factors is None:
        raise ShapeMismatchError("partial_trace_channel needs a tensor shape")
    left, right = tshape.factors
    target = left if side == "B" else right
    return from_action(tshape, target, lambda t: alg.partial_trace(t, side))

"""Multi-matrix algebras and their elements.

An algebra is a finite direct sum of full complex matrix algebras.  A shape
records the labelled block structure ``[(label, dim), ...]``; an element
stores one dense complex matrix per block.  Commutative algebras are the
special case where every block has dimension 1, so classical probability
distributions and stochastic maps live in the same representation as density
matrices and channels.

Tensor products of shapes carry their two factors as metadata so that partial
traces know how to split each block.  Block labels of a tensor shape are
``(label_left, label_right)`` pairs, kept in lexicographic order of the
flattened label tuples.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import ATOL, FAITHFULNESS_TOL, GROUP_TOL, HERM_TOL
from .errors import (
    FaithfulnessError,
    NotAStateError,
    NotHermitianError,
    ShapeMismatchError,
)

Label = object  # opaque token: a string, or a pair of labels for tensor shapes


def label_key(label: Label) -> tuple:
    """Flatten a (possibly nested-pair) label into a sortable tuple of strings."""
    if isinstance(label, tuple):
        out: list[str] = []
        for part in label:
            out.extend(label_key(part))
        return tuple(out)
    return (str(label),)


def label_text(label: Label) -> str:
    """Canonical flat string for a label; tensor pairs join with '⊗'."""
    return "⊗".join(label_key(label))


class AlgebraShape:
    """Block structure of a multi-matrix algebra.

    Immutable.  ``factors`` is ``None`` for plain shapes and a pair of shapes
    for tensor-product shapes.
    """

    __slots__ = ("blocks", "factors", "_index")

    def __init__(self, blocks: Iterable[tuple[Label, int]],
                 factors: tuple["AlgebraShape", "AlgebraShape"] | None = None):
        blocks = tuple((label, int(dim)) for label, dim in blocks)
        if not blocks:
            raise ShapeMismatchError("a shape needs at least one block")
        if any(dim < 1 for _, dim in blocks):
            raise ShapeMismatchError("every block dimension must be >= 1")
        labels = [label for label, _ in blocks]
        if len(set(map(label_key, labels))) != len(labels):
            raise ShapeMismatchError("block labels must be unique within a shape")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "_index",
                           {label_key(label): i for i, (label, _) in enumerate(blocks)})

    def __setattr__(self, *_):
        raise AttributeError("AlgebraShape is immutable")

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple(label for label, _ in self.blocks)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.blocks)

    def index(self, label: Label) -> int:
        return self._index[label_key(label)]

    def dim_of(self, label: Label) -> int:
        return self.blocks[self.index(label)][1]

    # Total dimension of the underlying Hilbert space (sum of block dims) and
    # of the algebra as a vector space (sum of squared block dims).
    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def vector_dim(self) -> int:
        return sum(d * d for d in self.dims)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AlgebraShape):
            return NotImplemented
        return (tuple((label_key(l), d) for l, d in self.blocks)
                == tuple((label_key(l), d) for l, d in other.blocks))

    def __hash__(self):
        return hash(tuple((label_key(l), d) for l, d in self.blocks))

    def __repr__(self):
        inner = " ⊕ ".join(f"M{d}[{label_text(l)}]" for l, d in self.blocks)
        return f"AlgebraShape({inner})"

    def tensor(self, other: "AlgebraShape") -> "AlgebraShape":
        pairs = sorted(
            (((la, lb), da * db) for la, da in self.blocks for lb, db in other.blocks),
            key=lambda item: label_key(item[0]))
        return AlgebraShape(pairs, factors=(self, other))


def matrix_algebra(dim: int, label: Label = "q0") -> AlgebraShape:
    """A single full matrix block M_dim."""
    return AlgebraShape([(label, dim)])


def classical_algebra(n: int, prefix: str = "x") -> AlgebraShape:
    """The commutative algebra C^n with labels prefix0..prefix(n-1)."""
    return AlgebraShape([(f"{prefix}{i}", 1) for i in range(n)])


@dataclass(frozen=True)
class AlgebraElement:
    """A block-diagonal complex matrix: one dense block per shape block."""

    shape: AlgebraShape
    data: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.data) != len(self.shape.blocks):
            raise ShapeMismatchError("block count does not match shape")
        blocks = []
        for (label, dim), mat in zip(self.shape.blocks, self.data):
            mat = np.asarray(mat, dtype=complex)
            if mat.shape != (dim, dim):
                raise ShapeMismatchError(
                    f"block {label_text(label)} has shape {mat.shape}, expected ({dim},{dim})")
            mat.flags.writeable = False
            blocks.append(mat)
        object.__setattr__(self, "data", tuple(blocks))

    # ------------------------------------------------------------------ algebra
    def _check_same_shape(self, other: "AlgebraElement"):
        if self.shape != other.shape:
            raise ShapeMismatchError("elements live on different shapes")

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_same_shape(other)
        return AlgebraElement(self.shape, tuple(a + b for a, b in zip(self.data, other.data)))

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_same_shape(other)
        return AlgebraElement(self.shape, tuple(a - b for a, b in zip(self.data, other.data)))

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.shape, tuple(-a for a in self.data))

    def __mul__(self, scalar: complex) -> "AlgebraElement":
        return AlgebraElement(self.shape, tuple(scalar * a for a in self.data))

    __rmul__ = __mul__

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        """Blockwise (algebra) product."""
        self._check_same_shape(other)
        return AlgebraElement(self.shape, tuple(a @ b for a, b in zip(self.data, other.data)))

    def dagger(self) -> "AlgebraElement":
        return AlgebraElement(self.shape, tuple(a.conj().T for a in self.data))

    def trace(self) -> complex:
        return complex(sum(np.trace(a) for a in self.data))

    def norm(self) -> float:
        """Hilbert–Schmidt (Frobenius) norm across all blocks."""
        return float(np.sqrt(sum(np.sum(np.abs(a) ** 2) for a in self.data)))

    def block(self, label: Label) -> np.ndarray:
        return self.data[self.shape.index(label)]

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return all(np.max(np.abs(a - a.conj().T)) <= tol for a in self.data)

    def conj(self) -> "AlgebraElement":
        return AlgebraElement(self.shape, tuple(a.conj() for a in self.data))

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the hermitian part across blocks."""
        return min(float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0]) for a in self.data)


def identity(shape: AlgebraShape) -> AlgebraElement:
    return AlgebraElement(shape, tuple(np.eye(d, dtype=complex) for d in shape.dims))


def zero(shape: AlgebraShape) -> AlgebraElement:
    return AlgebraElement(shape, tuple(np.zeros((d, d), dtype=complex) for d in shape.dims))


def basis_vector(shape: AlgebraShape, label: Label) -> AlgebraElement:
    """Indicator element: identity on one block, zero elsewhere (δ_x for C^X)."""
    mats = [np.zeros((d, d), dtype=complex) for d in shape.dims]
    i = shape.index(label)
    mats[i] = np.eye(shape.dims[i], dtype=complex)
    return AlgebraElement(shape, tuple(mats))


def from_blocks(shape: AlgebraShape, blocks: dict) -> AlgebraElement:
    """Build an element from a label->matrix mapping; missing blocks are zero."""
    mats = [np.zeros((d, d), dtype=complex) for d in shape.dims]
    for label, mat in blocks.items():
        mats[shape.index(label)] = np.asarray(mat, dtype=complex)
    return AlgebraElement(shape, tuple(mats))


def diagonal_element(shape: AlgebraShape, values: Sequence[float]) -> AlgebraElement:
    """Element with the given values along the concatenated block diagonals."""
    values = np.asarray(values, dtype=complex)
    if values.size != shape.total_dim:
        raise ShapeMismatchError("diagonal length does not match total dimension")
    mats, off = [], 0
    for d in shape.dims:
        mats.append(np.diag(values[off:off + d]))
        off += d
    return AlgebraElement(shape, tuple(mats))


def classical_state(probs: Sequence[float], prefix: str = "x") -> AlgebraElement:
    """A probability vector as a state on C^n."""
    probs = np.asarray(probs, dtype=float)
    return diagonal_element(classical_algebra(len(probs), prefix), probs)


# ---------------------------------------------------------------------- tensor
def tensor(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Kronecker product of elements on the tensor shape of their shapes."""
    tshape = a.shape.tensor(b.shape)
    mats = {}
    for la, ma in zip(a.shape.labels, a.data):
        for lb, mb in zip(b.shape.labels, b.data):
            mats[(la, lb)] = np.kron(ma, mb)
    return AlgebraElement(tshape, tuple(mats[label] for label in tshape.labels))


def _factor_dims(tshape: AlgebraShape, label: tuple) -> tuple[int, int]:
    left, right = tshape.factors
    return left.dim_of(label[0]), right.dim_of(label[1])


def partial_trace(t: AlgebraElement, side: str) -> AlgebraElement:
    """Trace out one tensor factor; ``side`` names the factor being removed.

    ``side='B'`` removes the right factor (tr_B), ``side='A'`` the left.
    """
    tshape = t.shape
    if tshape.factors is None:
        raise ShapeMismatchError("partial_trace needs a recorded tensor shape")
    left, right = tshape.factors
    if side not in ("A", "B"):
        raise ValueError("side must be 'A' or 'B'")
    out_shape = left if side == "B" else right
    mats = [np.zeros((d, d), dtype=complex) for d in out_shape.dims]
    for label, mat in zip(tshape.labels, t.data):
        da, db = _factor_dims(tshape, label)
        four = mat.reshape(da, db, da, db)
        if side == "B":
            mats[out_shape.index(label[0])] += np.einsum("ibjb->ij", four)
        else:
            mats[out_shape.index(label[1])] += np.einsum("aiaj->ij", four)
    return AlgebraElement(out_shape, tuple(mats))


def reassociate_left_to_right(t: AlgebraElement) -> AlgebraElement:
    """Reinterpret an element on (A⊗B)⊗C as one on A⊗(B⊗C).

    The underlying block matrices are unchanged (Kronecker products are
    associative); only the tensor bookkeeping moves.
    """
    tshape = t.shape
    if tshape.factors is None or tshape.factors[0].factors is None:
        raise ShapeMismatchError("expected an ((A⊗B)⊗C)-shaped element")
    ab, c = tshape.factors
    a, b = ab.factors
    target = a.tensor(b.tensor(c))
    mats = {}
    for label, mat in zip(tshape.labels, t.data):
        (la, lb), lc = label
        mats[label_key((la, (lb, lc)))] = mat
    return AlgebraElement(target, tuple(mats[label_key(l)] for l in target.labels))


# -------------------------------------------------------------------- spectral
@dataclass(frozen=True)
class SpectralDecomposition:
    """Grouped eigenvalues with orthogonal projector elements."""

    eigenvalues: tuple[float, ...]
    projectors: tuple[AlgebraElement, ...]

    def reconstruct(self) -> AlgebraElement:
        out = zero(self.projectors[0].shape)
        for lam, proj in zip(self.eigenvalues, self.projectors):
            out = out + lam * proj
        return out


def spectral_decompose(a: AlgebraElement, group_tol: float = GROUP_TOL,
                       herm_tol: float = HERM_TOL) -> SpectralDecomposition:
    """Eigendecomposition with eigenvalues grouped across all blocks.

    Eigenvalues closer than ``group_tol`` share one projector, so degenerate
    spectra yield the coarse projectors the compound constructions need.
    """
    if not a.is_hermitian(herm_tol):
        raise NotHermitianError("spectral_decompose requires a hermitian element")
    entries = []  # (eigenvalue, block index, eigenvector)
    for bi, mat in enumerate(a.data):
        vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
        for k, lam in enumerate(vals):
            entries.append((float(lam), bi, vecs[:, k]))
    entries.sort(key=lambda e: e[0])
    groups: list[list] = []
    for entry in entries:
        if groups and entry[0] - groups[-1][-1][0] <= group_tol:
            groups[-1].append(entry)
        else:
            groups.append([entry])
    eigenvalues, projectors = [], []
    for group in groups:
        eigenvalues.append(float(np.mean([e[0] for e in group])))
        mats = [np.zeros((d, d), dtype=complex) for d in a.shape.dims]
        for _, bi, vec in group:
            mats[bi] += np.outer(vec, vec.conj())
        projectors.append(AlgebraElement(a.shape, tuple(mats)))
    return SpectralDecomposition(tuple(eigenvalues), tuple(projectors))


def power(a: AlgebraElement, r: complex, strict: bool = False,
          faithfulness_tol: float = FAITHFULNESS_TOL,
          atol: float = ATOL) -> AlgebraElement:
    """Functional calculus a^r for PSD hermitian a, on the spectral support.

    Zero eigenvalues are dropped (pseudo-inverse convention), so a^0 is the
    support projector and negative/complex powers act on the support only.
    In strict mode any eigenvalue below ``faithfulness_tol`` is an error.
    """
    if not a.is_hermitian(1e2 * HERM_TOL):
        raise NotHermitianError("power requires a hermitian element")
    mats = []
    for mat in a.data:
        vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
        if vals.size and vals[0] < -atol:
            raise NotAStateError(f"negative eigenvalue {vals[0]:.3e} in power()")
        if strict and vals.size and np.min(vals) < faithfulness_tol:
            raise FaithfulnessError(
                f"eigenvalue {np.min(vals):.3e} below faithfulness tolerance")
        support = vals > faithfulness_tol
        powered = np.zeros(vals.shape, dtype=complex)
        powered[support] = vals[support].astype(complex) ** r
        mats.append((vecs * powered) @ vecs.conj().T)
    return AlgebraElement(a.shape, tuple(mats))


def support_unitary(a: AlgebraElement, t: float,
                    faithfulness_tol: float = FAITHFULNESS_TOL) -> AlgebraElement:
    """a^{it} on the support, identity off the support (a commuting unitary)."""
    mats = []
    for mat in a.data:
        vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
        phases = np.ones(vals.shape, dtype=complex)
        support = vals > faithfulness_tol
        phases[support] = vals[support].astype(complex) ** (1j * t)
        mats.append((vecs * phases) @ vecs.conj().T)
    return AlgebraElement(a.shape, tuple(mats))


def jordan(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Anticommutator {a,b} = ab + ba."""
    return a @ b + b @ a


def commutator(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    return a @ b - b @ a


def assert_state(a: AlgebraElement, atol: float = ATOL) -> AlgebraElement:
    """Validate the density-matrix requirements and return the element."""
    if not a.is_hermitian(1e3 * HERM_TOL):
        raise NotAStateError("state is not hermitian")
    if abs(a.trace() - 1.0) > 1e3 * atol:
        raise NotAStateError(f"state trace {a.trace():.6f} != 1")
    if a.min_eigenvalue() < -1e3 * atol:
        raise NotAStateError(f"state has eigenvalue {a.min_eigenvalue():.3e} < 0")
    return a

"""JSON documents for shapes, elements, maps, families, and scenarios.

Wire conventions: complex numbers are ``[re, im]`` pairs; matrices are nested
row lists of such pairs; block labels are flat strings (tensor-product labels
are flattened with "⊗", so a re-parsed document is a plain block-diagonal
object without the in-memory tensor factorization).  Superoperator matrices
are indexed by matrix units ordered lexicographically by (block label, row,
column), row-major within each block — identical to the in-memory ordering,
so matrices ship verbatim.  Every document carries ``schema_version``.
"""
from __future__ import annotations

import json
from importlib import resources
from typing import Any

import numpy as np

from . import algebra as alg, bayes, sot
from .algebra import AlgebraElement, AlgebraShape
from .errors import ParseError, ValidationError
from .maps import LinearMap

SCHEMA_VERSION = 1


# ----------------------------------------------------------------- primitives
def serialize_complex(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def parse_complex(v: Any) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ParseError(f"expected a number or an [re, im] pair, got {v!r}")


def serialize_matrix(m: np.ndarray) -> list:
    return [[serialize_complex(z) for z in row] for row in np.asarray(m)]


def parse_matrix(rows: Any) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ParseError("matrix must be a non-empty list of rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError("matrix rows have inconsistent lengths")
    return np.array([[parse_complex(v) for v in row] for row in rows], dtype=complex)


def serialize_shape(shape: AlgebraShape) -> list[dict]:
    return [{"label": alg.label_text(label), "dim": dim}
            for label, dim in shape.blocks]


def parse_shape(payload: Any) -> AlgebraShape:
    if not isinstance(payload, list) or not payload:
        raise ParseError("shape must be a non-empty list of {label, dim} blocks")
    blocks = []
    for entry in payload:
        try:
            blocks.append((str(entry["label"]), int(entry["dim"])))
        except (TypeError, KeyError) as exc:
            raise ParseError(f"bad shape block {entry!r}") from exc
    return AlgebraShape(blocks)


# ------------------------------------------------------------------- elements
def serialize_element(a: AlgebraElement, kind: str = "element") -> dict:
    return {"kind": kind, "schema_version": SCHEMA_VERSION,
            "shape": serialize_shape(a.shape),
            "blocks": {alg.label_text(label): serialize_matrix(mat)
                       for label, mat in zip(a.shape.labels, a.data)}}


def parse_element(doc: dict) -> AlgebraElement:
    shape = parse_shape(doc.get("shape"))
    blocks = doc.get("blocks")
    if not isinstance(blocks, dict):
        raise ParseError("element document needs a blocks mapping")
    mats = []
    for label, dim in shape.blocks:
        key = alg.label_text(label)
        if key not in blocks:
            raise ParseError(f"missing block {key!r}")
        mat = parse_matrix(blocks[key])
        if mat.shape != (dim, dim):
            raise ValidationError(f"block {key!r} is {mat.shape}, expected {(dim, dim)}")
        mats.append(mat)
    return AlgebraElement(shape, tuple(mats))


# ----------------------------------------------------------------------- maps
def serialize_map(e: LinearMap, kind: str = "channel") -> dict:
    return {"kind": kind, "schema_version": SCHEMA_VERSION,
            "source": serialize_shape(e.source), "target": serialize_shape(e.target),
            "matrix": serialize_matrix(e.matrix)}


def parse_map(doc: dict) -> LinearMap:
    source = parse_shape(doc.get("source"))
    target = parse_shape(doc.get("target"))
    matrix = parse_matrix(doc.get("matrix"))
    if matrix.shape != (target.vector_dim, source.vector_dim):
        raise ValidationError(
            f"matrix is {matrix.shape}, expected "
            f"{(target.vector_dim, source.vector_dim)} for these shapes")
    return LinearMap(source, target, matrix)


# ------------------------------------------------------------------- families
_THETA_BUILTINS = {"ls": bayes.theta_ls, "jordan": bayes.theta_jordan,
                   "right": bayes.theta_right, "left": bayes.theta_left}


def serialize_family(family: sot.SotFamily) -> dict:
    doc: dict = {"kind": "sot_family", "schema_version": SCHEMA_VERSION,
                 "tag": family.tag}
    if isinstance(family, (sot.TRotated, sot.STH)):
        doc["t"] = family.t
    if isinstance(family, sot.RSFamily):
        doc["r"], doc["s"] = family.r, family.s
    if isinstance(family, sot.OhyaCompound):
        doc["group_tol"] = family.group_tol
    if isinstance(family, sot.ThetaDerived):
        name = getattr(family.theta, "name", "")
        if name.startswith("rs("):
            raise ValidationError("serialize (r,s) recipes as the rs family tag")
        if name not in _THETA_BUILTINS:
            raise ValidationError(f"state-rendering recipe {name!r} is not serializable")
        doc["theta"] = name
    return doc


def parse_family(doc: dict | str) -> sot.SotFamily:
    if isinstance(doc, str):
        doc = {"tag": doc}
    tag = doc.get("tag")
    if tag == "uncorrelated":
        return sot.Uncorrelated()
    if tag == "ohya":
        return sot.OhyaCompound(group_tol=float(doc.get("group_tol", sot.OhyaCompound().group_tol)))
    if tag == "leifer-spekkens":
        return sot.LeiferSpekkens()
    if tag == "t-rotated":
        return sot.TRotated(t=float(doc.get("t", sot.TRotated().t)))
    if tag == "sth":
        return sot.STH(t=float(doc.get("t", sot.STH().t)))
    if tag == "symmetric-bloom":
        return sot.SymmetricBloom()
    if tag == "right-bloom":
        return sot.RightBloom()
    if tag == "left-bloom":
        return sot.LeftBloom()
    if tag == "rs":
        try:
            return sot.RSFamily(float(doc["r"]), float(doc["s"]))
        except KeyError as exc:
            raise ParseError("rs family needs r and s") from exc
    if tag == "theta":
        name = doc.get("theta")
        if name not in _THETA_BUILTINS:
            raise ParseError(f"unknown state-rendering recipe {name!r}")
        return sot.ThetaDerived(_THETA_BUILTINS[name]())
    raise ParseError(f"unknown family tag {tag!r}")


# ------------------------------------------------------------------ documents
_PARSERS = {"shape": lambda d: parse_shape(d.get("shape")),
            "element": parse_element, "state": parse_element,
            "channel": parse_map, "map": parse_map,
            "sot_family": parse_family}


def parse_document(doc: dict):
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    kind = doc.get("kind")
    if kind == "scenario":
        return doc  # interpreted by the scenario runner
    if kind not in _PARSERS:
        raise ParseError(f"unknown document kind {kind!r}")
    value = _PARSERS[kind](doc)
    if kind == "state":
        alg.assert_state(value)
    return value


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                         f"{exc.msg}") from exc
    return parse_document(doc)


def load(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def dump(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_schema(name: str) -> dict:
    """Load one of the shipped JSON schemas by bare name (e.g. 'element')."""
    text = resources.files("qsot.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)

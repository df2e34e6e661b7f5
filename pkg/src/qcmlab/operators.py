"""Finite commuting hermitian models of multiplication tuples.

Discretizing a self-similar system at word level L produces one basis vector
per length-L word, carrying the cylinder measure weight; the n coordinate
operators are diagonal with the cylinder anchor points on the diagonal, so
they commute exactly.  The tuple calculus (direct sum, tensor with a
diagonal, coordinate rotation, affine shift, multiplicity blocks) operates
on these models and on plain matrix tuples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    CoordCountMismatch,
    DimensionCapExceeded,
    LetterOutOfRange,
    NegativeScale,
    NotOrthogonal,
    OverlappingPieces,
    PrefixTooLong,
    ShapeMismatch,
)
from .fractal import IteratedFunctionSystem, _check_letters, representative_point

HERMITIAN_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-12
DEFAULT_DIM_CAP = 10_000


@dataclass(frozen=True)
class OperatorTuple:
    """n hermitian d x d matrices acting as one commuting-tuple candidate."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = []
        dim = None
        for m in self.matrices:
            m = np.asarray(m)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ShapeMismatch(f"tuple entries must be square, got {m.shape}")
            if dim is None:
                dim = m.shape[0]
            elif m.shape[0] != dim:
                raise ShapeMismatch("tuple entries of different sizes")
            if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise ShapeMismatch("tuple entry is not hermitian")
            m = m.copy()
            m.setflags(write=False)
            mats.append(m)
        if not mats:
            raise ShapeMismatch("empty operator tuple")
        object.__setattr__(self, "matrices", tuple(mats))

    @property
    def n_coords(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __iter__(self):
        return iter(self.matrices)


class DiscretizedModel:
    """Level-L diagonal model of the coordinate multiplication tuple.

    Attributes
    ----------
    ifs : the underlying system
    level : word length of the discretization
    basis_words : all (or a restriction of the) length-L words, lex ordered
    weights : normalized cylinder measures, summing to 1
    points : (d, n) array of cylinder anchor points (the joint spectrum)
    cyclic : unit vector with entries sqrt(weight)
    """

    def __init__(self, ifs: IteratedFunctionSystem, level: int, basis_words,
                 weights, points):
        self.ifs = ifs
        self.level = int(level)
        self.basis_words = tuple(tuple(w) for w in basis_words)
        weights = np.asarray(weights, dtype=np.float64)
        total = weights.sum()
        self.weights = weights / total
        self.points = np.asarray(points, dtype=np.float64)
        self.cyclic = np.sqrt(self.weights)
        self.weights.setflags(write=False)
        self.points.setflags(write=False)
        self.cyclic.setflags(write=False)
        self._tuple = None

    @property
    def dim(self) -> int:
        return len(self.basis_words)

    @property
    def n_coords(self) -> int:
        return self.ifs.dimension

    @property
    def operator_tuple(self) -> OperatorTuple:
        """Dense diagonal realization; built lazily, the points array is
        authoritative."""
        if self._tuple is None:
            self._tuple = OperatorTuple(
                tuple(np.diag(self.points[:, i]) for i in range(self.n_coords)))
        return self._tuple

    def prefix_indices(self, prefix) -> np.ndarray:
        """Indices of basis words extending ``prefix``."""
        prefix = _check_letters(self.ifs, prefix)
        if len(prefix) > self.level:
            raise PrefixTooLong(
                f"prefix length {len(prefix)} exceeds level {self.level}")
        hits = [i for i, w in enumerate(self.basis_words)
                if w[:len(prefix)] == prefix]
        return np.array(hits, dtype=np.intp)

    def restrict(self, prefixes) -> "DiscretizedModel":
        """Sub-model over the words under any of the given prefixes, with the
        conditional (renormalized) measure."""
        _validate_prefix_free(prefixes)
        idx = np.concatenate([self.prefix_indices(p) for p in prefixes])
        idx = np.unique(idx)
        if len(idx) == 0:
            raise PrefixTooLong("restriction selects no basis words")
        return DiscretizedModel(
            self.ifs, self.level,
            [self.basis_words[i] for i in idx],
            self.weights[idx], self.points[idx])


def discretize(ifs: IteratedFunctionSystem, level: int,
               dim_cap: int = DEFAULT_DIM_CAP) -> DiscretizedModel:
    """Full model at the given level: dimension branching**level."""
    level = int(level)
    if level < 0:
        raise ValueError("level must be >= 0")
    m = ifs.branching
    dim = m ** level
    if dim > dim_cap:
        raise DimensionCapExceeded(f"model dimension {dim} exceeds cap {dim_cap}")
    p = ifs.hausdorff_dim
    words = [()]
    for _ in range(level):
        words = [w + (j,) for w in words for j in range(1, m + 1)]
    ratios = np.array([f.ratio for f in ifs.maps])
    weights = np.ones(1)
    for _ in range(level):
        weights = np.kron(weights, ratios ** p)
    points = np.array([representative_point(ifs, w) for w in words])
    return DiscretizedModel(ifs, level, words, weights, points)


def spectral_projection(model: DiscretizedModel, prefix) -> np.ndarray:
    """Diagonal 0/1 matrix selecting the basis words under ``prefix``."""
    mask = np.zeros(model.dim)
    mask[model.prefix_indices(prefix)] = 1.0
    return np.diag(mask)


# --------------------------------------------------------------------------
# tuple calculus


def _matrices(tup):
    if isinstance(tup, OperatorTuple):
        return list(tup.matrices)
    if isinstance(tup, DiscretizedModel):
        return list(tup.operator_tuple.matrices)
    return [np.asarray(m) for m in tup]


def commutator(a, tup) -> list[np.ndarray]:
    """[A, T_i] = A T_i - T_i A per coordinate (skew-hermitian for hermitian A)."""
    a = np.asarray(a)
    out = []
    for t in _matrices(tup):
        if a.shape != t.shape:
            raise ShapeMismatch(f"commutator shapes {a.shape} vs {t.shape}")
        out.append(a @ t - t @ a)
    return out


def direct_sum(tuples) -> OperatorTuple:
    """Coordinate-wise block diagonal sum of operator tuples."""
    tuples = [_matrices(t) for t in tuples]
    if not tuples:
        raise CoordCountMismatch("direct_sum of nothing")
    n = len(tuples[0])
    if any(len(t) != n for t in tuples):
        raise CoordCountMismatch("summands with different coordinate counts")
    dims = [t[0].shape[0] for t in tuples]
    total = sum(dims)
    out = []
    for i in range(n):
        block = np.zeros((total, total))
        at = 0
        for t, d in zip(tuples, dims):
            block[at:at + d, at:at + d] = t[i]
            at += d
        out.append(block)
    return OperatorTuple(tuple(out))


def tensor_diag(tup, scales) -> OperatorTuple:
    """Matrix realization of tau tensor diag(a): block-scaled copies."""
    scales = np.asarray(scales, dtype=np.float64)
    if scales.ndim != 1 or len(scales) == 0:
        raise ShapeMismatch("scales must be a non-empty vector")
    if (scales < 0).any():
        raise NegativeScale("tensor_diag scales must be >= 0")
    mats = _matrices(tup)
    blocks = [[a * m for m in mats] for a in scales]
    return direct_sum(blocks)


def rotate_tuple(u, tup) -> OperatorTuple:
    """Coordinate mixing (U tau)_i = sum_k u_{ik} T_k for orthogonal U."""
    u = np.asarray(u, dtype=np.float64)
    mats = _matrices(tup)
    n = len(mats)
    if u.shape != (n, n):
        raise ShapeMismatch(f"need a {n}x{n} matrix, got {u.shape}")
    if np.max(np.abs(u.T @ u - np.eye(n))) > ORTHOGONALITY_TOL:
        raise NotOrthogonal("coordinate rotation must be orthogonal")
    out = []
    for i in range(n):
        acc = np.zeros_like(mats[0])
        for k in range(n):
            acc = acc + u[i, k] * mats[k]
        out.append(acc)
    return OperatorTuple(tuple(out))


def affine_shift(tup, scale: float, shift) -> OperatorTuple:
    """(scale * T_i + shift_i * I); commutators scale by ``scale`` exactly."""
    if scale < 0:
        raise NegativeScale("affine scale must be >= 0")
    mats = _matrices(tup)
    shift = np.asarray(shift, dtype=np.float64)
    if shift.shape != (len(mats),):
        raise ShapeMismatch(f"shift must have one entry per coordinate")
    eye = np.eye(mats[0].shape[0])
    return OperatorTuple(tuple(scale * m + s * eye for m, s in zip(mats, shift)))


# --------------------------------------------------------------------------
# multiplicity


def _is_prefix(a, b):
    return len(a) <= len(b) and b[:len(a)] == a


def _validate_prefix_free(prefixes):
    prefixes = [tuple(p) for p in prefixes]
    for i, a in enumerate(prefixes):
        for b in prefixes[i + 1:]:
            if _is_prefix(a, b) or _is_prefix(b, a):
                raise OverlappingPieces(f"prefixes {a} and {b} overlap")
    return prefixes


@dataclass(frozen=True)
class MultiplicityAssignment:
    """Finitely many prefix-defined pieces with positive multiplicities."""

    pieces: tuple[tuple[tuple[tuple[int, ...], ...], int], ...]

    def __post_init__(self):
        norm = []
        all_prefixes = []
        for prefixes, mult in self.pieces:
            mult = int(mult)
            if mult < 1:
                raise OverlappingPieces("multiplicities must be >= 1")
            prefixes = tuple(tuple(int(x) for x in p) for p in prefixes)
            all_prefixes.extend(prefixes)
            norm.append((prefixes, mult))
        _validate_prefix_free(all_prefixes)
        object.__setattr__(self, "pieces", tuple(norm))

    @classmethod
    def single(cls, prefixes, mult):
        return cls(((tuple(tuple(p) for p in prefixes), mult),))


def apply_multiplicity(model: DiscretizedModel,
                       assignment: MultiplicityAssignment) -> OperatorTuple:
    """Direct sum of k copies of the tuple restricted to each piece."""
    blocks = []
    for prefixes, mult in assignment.pieces:
        sub = model.restrict(prefixes)
        mats = sub.operator_tuple.matrices
        blocks.extend([mats] * mult)
    return direct_sum(blocks)


def multiplicity_measure(model: DiscretizedModel,
                         assignment: MultiplicityAssignment) -> float:
    """Integral proxy sum_k k * mu(X_k) in the normalized measure."""
    total = 0.0
    for prefixes, mult in assignment.pieces:
        idx = np.concatenate([model.prefix_indices(p) for p in prefixes])
        total += mult * float(model.weights[np.unique(idx)].sum())
    return total


# --------------------------------------------------------------------------
# dump format


def word_label(letters) -> str:
    """Dotted word serialization used in all CSV outputs ('' = empty word)."""
    return ".".join(str(x) for x in letters)


def model_dump_rows(model: DiscretizedModel):
    """Rows (word, weight, x_1..x_n) for the auditable model dump."""
    rows = []
    for w, weight, point in zip(model.basis_words, model.weights, model.points):
        rows.append([word_label(w), repr(float(weight))]
                    + [repr(float(x)) for x in point])
    return rows


def write_model_csv(model: DiscretizedModel, path):
    header = ["word", "weight"] + [f"x_{i+1}" for i in range(model.n_coords)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(model_dump_rows(model))

"""Finite-rank projection statistics for the quasicentral modulus.

For a discretized multiplication tuple the projection P_r spans the
normalized cyclic-vector slices over the stopping partition at resolution r.
The Lorentz norm of [P_r, tau] is the construction statistic u(r); it obeys
a three-step chain of explicit upper bounds (rank bound, counting bound,
constant bound) that holds as a theorem and is verified on every evaluation.

The true modulus is a liminf over an infinite net and is identically zero on
any fixed finite model, so everything here reports u(r), its bound chain and
its exact scaling laws, in the normalization where the attractor has mass 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigensolve import symmetric_eigenvalues
from .errors import (
    BoundChainViolation,
    BudgetZeroWithNoSeed,
    CapExceeded,
    InvalidParams,
    ResolutionExceedsLevel,
)
from .fractal import (
    IteratedFunctionSystem,
    StoppingSet,
    diameter_bound,
    make_word,
    stopping_set,
)
from .operators import (
    DEFAULT_DIM_CAP,
    DiscretizedModel,
    MultiplicityAssignment,
    discretize,
    multiplicity_measure,
)
from .spectra import (
    SpectrumRLE,
    direct_sum_spectrum,
    index_power_sum,
    lorentz_p1,
    spectrum_from_gram,
)

CHAIN_TOL = 1e-9


# --------------------------------------------------------------------------
# projection construction


@dataclass(frozen=True)
class ProjectionStage:
    """P_r = sum_w e_w e_w* with one unit vector per stopping word.

    ``vectors`` has one column per stopping word (zero where the cylinder
    misses the model), so P = vectors @ vectors.T and rank counts the
    nonzero columns.
    """

    r: float
    stopping: StoppingSet
    vectors: np.ndarray
    rank: int

    @property
    def matrix(self) -> np.ndarray:
        return self.vectors @ self.vectors.T


def _grouped_vectors(model: DiscretizedModel, letter_groups):
    """Unit vectors e_g = (restriction of the cyclic vector to group g),
    normalized; groups are word prefixes."""
    vectors = np.zeros((model.dim, len(letter_groups)))
    rank = 0
    for col, prefix in enumerate(letter_groups):
        idx = model.prefix_indices(prefix)
        if len(idx) == 0:
            continue
        seg = model.cyclic[idx]
        nrm = float(np.linalg.norm(seg))
        if nrm > 0.0:
            vectors[idx, col] = seg / nrm
            rank += 1
    return vectors, rank


def partition_projection(model: DiscretizedModel, r) -> ProjectionStage:
    """The finite-rank projection attached to the stopping set at resolution r."""
    ss = stopping_set(model.ifs, r)
    if ss.max_length > model.level:
        raise ResolutionExceedsLevel(
            f"stopping depth {ss.max_length} exceeds model level {model.level}")
    vectors, rank = _grouped_vectors(model, [w.letters for w in ss.words])
    return ProjectionStage(r=float(r), stopping=ss, vectors=vectors, rank=rank)


# --------------------------------------------------------------------------
# commutator spectra via the rank reduction
#
# With P = V V^T and diagonal T_i, the commutator splits against the range
# of P as [P, T_i] = V B_i - B_i^T V^T where B_i = V^T T_i (I - V V^T), so
# its nonzero singular values are those of the small matrix B_i, doubled.
# The stacked (tilde) Gram is block diagonal: sum_i B_i B_i^T on the range
# and sum_i B_i^T B_i on the complement.  tests/test_modulus.py checks this
# reduction against the direct dense route.


def _reduced_blocks(points: np.ndarray, vectors: np.ndarray):
    vt = vectors.T
    blocks = []
    for i in range(points.shape[1]):
        vtd = vt * points[:, i][None, :]
        blocks.append(vtd - (vtd @ vectors) @ vt)
    return blocks


def commutator_spectra(points: np.ndarray, vectors: np.ndarray):
    """Per-coordinate and stacked commutator spectra of [P, tau].

    Returns (coordinate spectra, tilde spectrum, sup norm).
    """
    blocks = _reduced_blocks(points, vectors)
    k = vectors.shape[1]
    d = vectors.shape[0]
    coord_specs = []
    sup = 0.0
    gram_range = np.zeros((k, k))
    for b in blocks:
        gram = b @ b.T
        gram_range += gram
        half = spectrum_from_gram(gram)
        sup = max(sup, half.top())
        doubled = SpectrumRLE(half.values, half.counts * 2)
        coord_specs.append(doubled)
    stacked = np.vstack(blocks)
    if stacked.shape[0] <= d:
        gram_perp = stacked @ stacked.T
    else:
        gram_perp = stacked.T @ stacked
    vals = np.concatenate([
        _gram_eigenvalues(gram_range),
        _gram_eigenvalues(gram_perp),
    ])
    tilde = SpectrumRLE.from_values(np.sqrt(vals))
    return coord_specs, tilde, sup


def _gram_eigenvalues(gram) -> np.ndarray:
    """Nonnegative eigenvalues of a PSD Gram matrix."""
    if gram.shape[0] == 0:
        return np.empty(0)
    return np.clip(symmetric_eigenvalues(gram), 0.0, None)


# --------------------------------------------------------------------------
# the bound chain


def explicit_constant(p: float, lambda_star: float, measure_proxy: float) -> float:
    """p * 2**(1 + 1/p) / lambda_star / measure_proxy**(1/p).

    The constant of the counting bound; the experiment multiplies in the
    diameter bound where the chain requires it.
    """
    if p <= 1.0:
        raise InvalidParams(f"constant needs p > 1, got {p}")
    if not 0.0 < lambda_star < 1.0:
        raise InvalidParams(f"lambda_star must lie in (0, 1), got {lambda_star}")
    if measure_proxy <= 0.0:
        raise InvalidParams(f"measure proxy must be positive, got {measure_proxy}")
    return p * 2.0 ** (1.0 + 1.0 / p) / lambda_star / measure_proxy ** (1.0 / p)


@dataclass(frozen=True)
class ModulusStatistic:
    """u(r) with its bound chain, in the mass-1 measure normalization."""

    fixture: str
    level: int
    r: float
    p: float
    omega: int            # stopping set size
    rank: int             # projection rank (<= omega)
    sup_norm: float       # ||[P_r, tau]||
    u_lorentz: float      # max_i |[P_r, T_i]|_{p,1}
    u_tilde: float        # Lorentz norm of the stacked commutator
    bound_rank: float     # sum_{k<=2 omega} k^(1/p-1) * sup_norm
    bound_count: float    # p (2 omega)^(1/p) * 2 diam / r
    bound_const: float    # explicit constant * diam * proxy^(1/p)
    diam: float
    normalization: str = "normalized self-similar measure (mass 1)"

    def chain(self):
        return (self.u_lorentz, self.bound_rank, self.bound_count, self.bound_const)


def upper_statistic(model: DiscretizedModel, r, p=None, check=True) -> ModulusStatistic:
    """Construction statistic at resolution r with its verified bound chain."""
    ifs = model.ifs
    p = float(ifs.hausdorff_dim if p is None else p)
    if p <= 1.0:
        raise InvalidParams("modulus statistics need p > 1")
    stage = partition_projection(model, r)
    coord_specs, tilde_spec, sup = commutator_spectra(model.points, stage.vectors)
    u_lorentz = max(lorentz_p1(s, p) for s in coord_specs)
    u_tilde = lorentz_p1(tilde_spec, p)
    omega = len(stage.stopping)
    diam = diameter_bound(ifs)
    bound_rank = index_power_sum(1, 2 * omega, 1.0 / p - 1.0) * sup
    bound_count = p * (2.0 * omega) ** (1.0 / p) * 2.0 * diam / stage.r
    bound_const = explicit_constant(p, ifs.min_ratio, 1.0) * diam
    stat = ModulusStatistic(
        fixture=ifs.name, level=model.level, r=stage.r, p=p,
        omega=omega, rank=stage.rank, sup_norm=sup,
        u_lorentz=u_lorentz, u_tilde=u_tilde,
        bound_rank=bound_rank, bound_count=bound_count,
        bound_const=bound_const, diam=diam,
    )
    if check:
        _check_chain(stat)
    return stat


def _check_chain(stat: ModulusStatistic):
    tol = 1.0 + CHAIN_TOL
    sup_cap = 2.0 * stat.diam / stat.r
    if stat.sup_norm > sup_cap * tol:
        raise BoundChainViolation(
            f"sup norm {stat.sup_norm} exceeds 2*diam/r = {sup_cap}")
    links = [
        ("u_lorentz <= rank bound", stat.u_lorentz, stat.bound_rank),
        ("rank bound <= counting bound", stat.bound_rank, stat.bound_count),
        ("counting bound <= constant bound", stat.bound_count, stat.bound_const),
    ]
    for label, lhs, rhs in links:
        if lhs > rhs * tol:
            raise BoundChainViolation(f"{label} failed: {lhs} > {rhs}")


# --------------------------------------------------------------------------
# descent refinement
#
# Local minimization of A -> max_i |[A, T_i]|_{p,1} over positive
# contractions A = V diag(t) V^T, t in [0, 1].  The cyclic vector is pinned
# (first frame column, t = 1) so A xi = xi throughout: without the pin the
# objective is absolutely homogeneous and collapses to A = 0, and the pin is
# what lets the refined family still increase to the identity on the cyclic
# span as the resolution grows.


@dataclass(frozen=True)
class DescentResult:
    contraction: np.ndarray
    value: float
    trace: tuple[float, ...]
    evaluations: int


def _orthonormal_extend(columns, dim, drop_tol=1e-10):
    basis: list[np.ndarray] = []
    for col in columns:
        v = np.array(col, dtype=np.float64)
        for q in basis:
            v -= (q @ v) * q
        for q in basis:  # second pass, keeps orthogonality near eps
            v -= (q @ v) * q
        nrm = float(np.linalg.norm(v))
        if nrm > drop_tol:
            basis.append(v / nrm)
    if not basis:
        return np.zeros((dim, 0))
    return np.column_stack(basis)


def _descent_objective(points, frame, t, p):
    a = (frame * t[None, :]) @ frame.T
    worst = 0.0
    for i in range(points.shape[1]):
        x = points[:, i]
        c = a * x[None, :] - x[:, None] * a
        spec = spectrum_from_gram(c.T @ c)
        worst = max(worst, lorentz_p1(spec, p))
    return worst


def descent_refine(model: DiscretizedModel, seed: ProjectionStage | None,
                   p=None, budget: int = 0, max_iters: int = 50,
                   rel_tol: float = 1e-8) -> DescentResult:
    """Refine the seed projection inside its (optionally extended) range.

    The returned value never exceeds the seed statistic: optimization starts
    at A = P_r and only strict improvements are accepted, so the objective
    trace is monotone non-increasing.
    """
    ifs = model.ifs
    p = float(ifs.hausdorff_dim if p is None else p)
    if p <= 1.0:
        raise InvalidParams("descent needs p > 1")
    if seed is None and budget <= 0:
        raise BudgetZeroWithNoSeed("no seed projection and no room to build one")
    d = model.dim
    cols = [model.cyclic]
    if seed is not None:
        for j in range(seed.vectors.shape[1]):
            col = seed.vectors[:, j]
            if np.linalg.norm(col) > 0:
                cols.append(col)
    frame = _orthonormal_extend(cols, d)
    seed_rank = frame.shape[1]
    # greedy extra directions: standard basis vectors least covered so far
    if budget > 0:
        residual = 1.0 - (frame ** 2).sum(axis=1)
        order = np.argsort(-residual, kind="stable")
        added = 0
        for j in order:
            if added >= budget:
                break
            probe = np.zeros(d)
            probe[j] = 1.0
            wider = _orthonormal_extend([probe], d, drop_tol=1e-8) if frame.size == 0 \
                else _orthonormal_extend(list(frame.T) + [probe], d, drop_tol=1e-8)
            if wider.shape[1] > frame.shape[1]:
                frame = wider
                added += 1
    k = frame.shape[1]
    t = np.zeros(k)
    t[:seed_rank] = 1.0   # A starts as the seed projection; extras enter at 0
    value = _descent_objective(model.points, frame, t, p)
    trace = [value]
    evals = 1
    step_t = 0.25
    step_a = math.pi / 8.0
    floor = 1e-15 * max(value, 1.0)
    pairs = [(i, i + 1) for i in range(1, k - 1)]
    for _ in range(max_iters):
        iter_start = value
        improved = False
        for j in range(1, k):  # index 0 is the pinned cyclic direction
            for delta in (-step_t, step_t):
                cand = min(1.0, max(0.0, t[j] + delta))
                if cand == t[j]:
                    continue
                t_try = t.copy()
                t_try[j] = cand
                v2 = _descent_objective(model.points, frame, t_try, p)
                evals += 1
                if v2 < value - floor:
                    t, value = t_try, v2
                    trace.append(value)
                    improved = True
                    break
        for i, j in pairs:
            if abs(t[i] - t[j]) < 1e-12:
                continue  # rotation inside an equal-weight block is a no-op
            for ang in (-step_a, step_a):
                c, s = math.cos(ang), math.sin(ang)
                frame_try = frame.copy()
                frame_try[:, i] = c * frame[:, i] - s * frame[:, j]
                frame_try[:, j] = s * frame[:, i] + c * frame[:, j]
                v2 = _descent_objective(model.points, frame_try, t, p)
                evals += 1
                if v2 < value - floor:
                    frame, value = frame_try, v2
                    trace.append(value)
                    improved = True
                    break
        if not improved:
            step_t *= 0.5
            step_a *= 0.5
            if step_t < 1e-3:
                break
        elif iter_start - value < rel_tol * max(value, 1e-300):
            break
    contraction = (frame * t[None, :]) @ frame.T
    return DescentResult(contraction=contraction, value=value,
                         trace=tuple(trace), evaluations=evals)


# --------------------------------------------------------------------------
# scaling experiment


@dataclass(frozen=True)
class ScalingReport:
    fixture: str
    word: tuple[int, ...]
    level: int
    r: float
    p: float
    expected_ratio: float
    base_stat: float
    cylinder_stat: float
    ratio: float
    rel_error: float


def scaling_experiment(ifs: IteratedFunctionSystem, letters, level: int, r,
                       p=None, dim_cap: int = DEFAULT_DIM_CAP) -> ScalingReport:
    """Tilde statistic of the cylinder pushforward against the base model.

    The cylinder model is built independently (full model one word deeper,
    restricted to the prefix); rotations and translations drop out of the
    stacked norm, so the ratio equals the word's contraction ratio exactly
    up to rounding.
    """
    word = make_word(ifs, letters)
    total_level = level + len(word.letters)
    if ifs.branching ** total_level > dim_cap:
        raise CapExceeded(
            f"word+level dimension {ifs.branching ** total_level} exceeds cap {dim_cap}")
    p = float(ifs.hausdorff_dim if p is None else p)
    if p <= 1.0:
        raise InvalidParams("scaling experiment needs p > 1")

    base = discretize(ifs, level, dim_cap)
    base_stage = partition_projection(base, r)
    _, base_tilde, _ = commutator_spectra(base.points, base_stage.vectors)
    base_stat = lorentz_p1(base_tilde, p)

    big = discretize(ifs, total_level, dim_cap)
    sub = big.restrict([word.letters])
    groups = [word.letters + w.letters for w in base_stage.stopping.words]
    vectors, _ = _grouped_vectors(sub, groups)
    _, cyl_tilde, _ = commutator_spectra(sub.points, vectors)
    cyl_stat = lorentz_p1(cyl_tilde, p)

    ratio = cyl_stat / base_stat if base_stat > 0 else float("nan")
    rel = abs(ratio - word.ratio_product) / word.ratio_product \
        if base_stat > 0 else float("nan")
    return ScalingReport(
        fixture=ifs.name, word=word.letters, level=level, r=float(r), p=p,
        expected_ratio=word.ratio_product, base_stat=base_stat,
        cylinder_stat=cyl_stat, ratio=ratio, rel_error=rel,
    )


# --------------------------------------------------------------------------
# multiplicity experiment


@dataclass(frozen=True)
class BlockStatistic:
    prefixes: tuple[tuple[int, ...], ...]
    multiplicity: int
    measure: float
    stat: float


@dataclass(frozen=True)
class MultiplicityReport:
    fixture: str
    level: int
    r: float
    p: float
    blocks: tuple[BlockStatistic, ...]
    total_stat: float
    total_stat_pow: float
    integral_proxy: float
    sandwich_low: float
    sandwich_high: float
    sandwich_ok: bool


def multiplicity_experiment(model: DiscretizedModel,
                            assignment: MultiplicityAssignment, r,
                            p=None) -> MultiplicityReport:
    """Statistic of the multiplicity model with one projection per block.

    The commutator of the block-diagonal projection family is block
    diagonal, so the total spectrum is the exact merge of each block
    spectrum repeated by its multiplicity.
    """
    ifs = model.ifs
    p = float(ifs.hausdorff_dim if p is None else p)
    if p <= 1.0:
        raise InvalidParams("multiplicity experiment needs p > 1")
    ss = stopping_set(ifs, r)
    if ss.max_length > model.level:
        raise ResolutionExceedsLevel(
            f"stopping depth {ss.max_length} exceeds model level {model.level}")
    groups = [w.letters for w in ss.words]
    blocks = []
    total_spec = SpectrumRLE(np.empty(0), np.empty(0, dtype=np.int64))
    for prefixes, mult in assignment.pieces:
        sub = model.restrict(prefixes)
        vectors, _ = _grouped_vectors(sub, groups)
        _, tilde, _ = commutator_spectra(sub.points, vectors)
        stat = lorentz_p1(tilde, p)
        idx = np.unique(np.concatenate(
            [model.prefix_indices(q) for q in prefixes]))
        measure = float(model.weights[idx].sum())
        blocks.append(BlockStatistic(tuple(tuple(q) for q in prefixes),
                                     mult, measure, stat))
        for _ in range(mult):
            total_spec = direct_sum_spectrum(total_spec, tilde)
    total = lorentz_p1(total_spec, p)
    low = max(b.stat for b in blocks)
    high = sum(b.multiplicity * b.stat for b in blocks)
    ok = (low <= total * (1.0 + CHAIN_TOL)) and (total <= high * (1.0 + CHAIN_TOL))
    return MultiplicityReport(
        fixture=ifs.name, level=model.level, r=float(r), p=p,
        blocks=tuple(blocks), total_stat=total, total_stat_pow=total ** p,
        integral_proxy=multiplicity_measure(model, assignment),
        sandwich_low=low, sandwich_high=high, sandwich_ok=ok,
    )


# --------------------------------------------------------------------------
# ampliation helpers (diagonal tensor families)


def base_commutator_spectrum(model: DiscretizedModel, r) -> SpectrumRLE:
    """Stacked commutator spectrum of the base projection, for reuse."""
    stage = partition_projection(model, r)
    _, tilde, _ = commutator_spectra(model.points, stage.vectors)
    return tilde


def ampliation_statistic(base_spec: SpectrumRLE, scales, p: float) -> float:
    """Statistic of tau tensor diag(a) under the block projection family.

    The commutator is the block sum of the scaled base commutators, so its
    spectrum is the exact merge of the scaled copies.
    """
    total = SpectrumRLE(np.empty(0), np.empty(0, dtype=np.int64))
    for a in np.asarray(scales, dtype=np.float64):
        total = direct_sum_spectrum(total, base_spec.scale(float(a)))
    return lorentz_p1(total, p)


def ampliation_counting_bound(p: float, omega: int, copies: int,
                              diam: float, r: float) -> float:
    """Counting bound for the block family; scales exactly by copies**(1/p)."""
    return p * (2.0 * copies * omega) ** (1.0 / p) * 2.0 * diam / r

"""Numerical probes for the open additivity questions.

Two explicit families of flat finite-rank spectra are scanned against the
p-power-sum prediction for direct sums.  The first family has rank 2**l and
value (1/p) * 2**(-l/p), so its Lorentz (p,1) norm tends to 1; the second is
the first scaled by 3**(1/p).  Minimizing the norm of the pairwise direct
sum over index offsets stays strictly above (1 + 3)**(1/p), which is the
computable counterexample this module reproduces with explicit digits.

The subsequence liminf is operationalized as: stabilize in the base index,
then minimize over the offset window; the value depends asymptotically only
on the offset because both families are geometric in their index.  A scan
over subsequences alone is known to be insufficient for a well-posed
minimization; mixing the families by convex combinations would be needed,
and no such search is attempted here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidP,
    InvalidParams,
    NormalizationViolation,
    NotStabilized,
    RatioBoundViolation,
)
from .spectra import SpectrumRLE, direct_sum_spectrum, lorentz_p1

MAX_EXPONENT = 62  # run counts are int64


@dataclass(frozen=True)
class CounterexampleFamily:
    """Generators for the two flat spectra families at a fixed p > 1."""

    p: float
    scale_power: float = 3.0

    def __post_init__(self):
        if self.p <= 1.0:
            raise InvalidP(f"family needs p > 1, got {self.p}")

    @property
    def scale(self) -> float:
        """Limit norm of the second family: scale_power**(1/p)."""
        return self.scale_power ** (1.0 / self.p)

    def first(self, l: int) -> SpectrumRLE:
        """Single run of value (1/p) * 2**(-l/p) and count 2**l."""
        l = _check_exponent(l)
        value = (1.0 / self.p) * 2.0 ** (-l / self.p)
        return SpectrumRLE(np.array([value]), np.array([2 ** l], dtype=np.int64))

    def second(self, m: int) -> SpectrumRLE:
        """The first family scaled by scale_power**(1/p)."""
        return self.first(m).scale(self.scale)


def _check_exponent(l) -> int:
    l = int(l)
    if l < 0 or l > MAX_EXPONENT:
        raise InvalidParams(f"index exponent must lie in 0..{MAX_EXPONENT}, got {l}")
    return l


def flat_norm(p: float, l: int) -> float:
    """Lorentz (p,1) norm of the first family member; tends to 1 as l grows."""
    fam = CounterexampleFamily(p)
    return lorentz_p1(fam.first(l), p)


def pair_sum_value(p: float, l: int, m: int) -> float:
    """|first_l (+) second_m| in the Lorentz (p,1) norm, exact on two runs."""
    fam = CounterexampleFamily(p)
    return lorentz_p1(direct_sum_spectrum(fam.first(l), fam.second(m)), p)


@dataclass(frozen=True)
class PairScanReport:
    p: float
    base_index: int
    offsets: tuple[int, ...]
    values: tuple[float, ...]
    min_value: float
    argmin_offset: int
    rhs: float
    margin: float

    @property
    def counterexample_confirmed(self) -> bool:
        return self.margin > 0.0

    def rows(self):
        """CSV rows (p, l, d, value, rhs, margin)."""
        return [
            (self.p, self.base_index, d, v, self.rhs, v - self.rhs)
            for d, v in zip(self.offsets, self.values)
        ]

    def verdict(self) -> dict:
        return {
            "counterexample_confirmed": self.counterexample_confirmed,
            "min_value": self.min_value,
            "argmin": self.argmin_offset,
            "rhs": self.rhs,
            "margin": self.margin,
            "p": self.p,
            "base_index": self.base_index,
        }


def pair_sum_scan(p: float, window: int = 8, start_index: int = 16,
                  max_index: int = 44, stab_tol: float = 1e-4) -> PairScanReport:
    """Minimize the pair-sum norm over offsets after stabilizing the base index.

    The base index l is raised until the whole offset window moves by less
    than ``stab_tol`` between consecutive l; the scan then reports the
    minimum against the p-power-sum prediction (1 + scale_power)**(1/p).
    """
    if window < 0:
        raise InvalidParams(f"window must be >= 0, got {window}")
    fam = CounterexampleFamily(p)
    offsets = tuple(range(-window, window + 1))
    lo = max(int(start_index), window)  # keeps m = l + d >= 0

    def row(l):
        return tuple(pair_sum_value(p, l, l + d) for d in offsets)

    prev = row(lo)
    l_used = None
    values = prev
    for l in range(lo + 1, max_index + 1):
        cur = row(l)
        if max(abs(a - b) for a, b in zip(cur, prev)) < stab_tol:
            l_used, values = l, cur
            break
        prev = cur
    if l_used is None:
        raise NotStabilized(
            f"pair-sum values still moving at base index {max_index}")
    min_value = min(values)
    argmin = offsets[values.index(min_value)]
    rhs = (1.0 + fam.scale_power) ** (1.0 / p)
    return PairScanReport(
        p=p, base_index=l_used, offsets=offsets, values=values,
        min_value=min_value, argmin_offset=argmin, rhs=rhs,
        margin=min_value - rhs,
    )


# --------------------------------------------------------------------------
# ratio-bounded diagonal families


@dataclass(frozen=True)
class FamilyRow:
    size: int
    stat: float
    ratio_to_base: float
    bound_low: float
    bound_high: float
    within_low: bool
    within_high: bool


@dataclass(frozen=True)
class FamilyReport:
    p: float
    ratio_bound: float
    base_stat: float
    rows: tuple[FamilyRow, ...]


def uniform_families(p: float, sizes) -> list[np.ndarray]:
    """a_j = N**(-1/p): normalized with ratio bound c = 1."""
    return [np.full(int(n), float(n) ** (-1.0 / p)) for n in sizes]


def diagonal_family_check(p: float, stat_callback, families,
                          ratio_bound: float) -> FamilyReport:
    """Measure the statistic of tau tensor diag(a) over validated families.

    Each family must be positive, normalized in the p-th power sum, and
    satisfy max <= ratio_bound * min.  The statistic sequence is reported
    against the single-copy statistic together with the multiset sandwich
    min(a) * stat(ones) <= stat(a) <= max(a) * stat(ones); this is
    measurement, the limiting behavior is an open question.
    """
    if p <= 1.0:
        raise InvalidP(f"family check needs p > 1, got {p}")
    if ratio_bound < 1.0:
        raise InvalidParams(f"ratio bound must be >= 1, got {ratio_bound}")
    base = float(stat_callback(np.ones(1)))
    rows = []
    tol = 1.0 + 1e-9
    for family in families:
        a = np.asarray(family, dtype=np.float64)
        if a.ndim != 1 or len(a) == 0 or (a <= 0).any():
            raise InvalidParams("family entries must be a non-empty positive vector")
        power_sum = float((a ** p).sum())
        if abs(power_sum - 1.0) > 1e-10:
            raise NormalizationViolation(
                f"sum |a|^p = {power_sum} is not 1 within 1e-10")
        if a.max() > ratio_bound * a.min() * (1.0 + 1e-12):
            raise RatioBoundViolation(
                f"max/min = {a.max() / a.min()} exceeds declared bound {ratio_bound}")
        stat = float(stat_callback(a))
        ones_stat = float(stat_callback(np.ones(len(a))))
        low = float(a.min()) * ones_stat
        high = float(a.max()) * ones_stat
        rows.append(FamilyRow(
            size=len(a), stat=stat,
            ratio_to_base=stat / base if base > 0 else float("nan"),
            bound_low=low, bound_high=high,
            within_low=low <= stat * tol,
            within_high=stat <= high * tol,
        ))
    return FamilyReport(p=p, ratio_bound=ratio_bound, base_stat=base,
                        rows=tuple(rows))

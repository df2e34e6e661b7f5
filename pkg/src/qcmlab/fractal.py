"""Self-similar systems: similitudes, Moran dimension, words, stopping sets.

A system is a finite list of contracting similitudes F_j(x) = r_j U_j x + b_j.
The Hausdorff dimension p solves the Moran equation sum_j r_j**p = 1 and the
natural self-similar measure assigns weight r_w**p to the cylinder of word w.
All measures here are normalized so the whole attractor has mass 1; this is
a constant multiple of the p-dimensional Hausdorff measure under the open
set condition, which is declared by the caller and never verified.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ClassViolation,
    ConfigError,
    DimensionMismatch,
    EmptyOrSingleton,
    ExplosionGuard,
    InvalidParams,
    LetterOutOfRange,
    RatioOutOfRange,
)

ORTHOGONALITY_TOL = 1e-12
MORAN_RESIDUAL_TOL = 1e-12
DEFAULT_WORD_CAP = 10_000_000

SYSTEM_CLASSES = ("A1", "A2", "A3", "A4")


def _readonly(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Similitude:
    """One contraction x -> ratio * rotation @ x + translation.

    System members must have ratio < 1; compositions (including the empty
    composition, the identity) may carry ratio 1.
    """

    ratio: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        ratio = float(self.ratio)
        if not 0.0 < ratio <= 1.0:
            raise RatioOutOfRange(f"ratio must lie in (0, 1], got {ratio}")
        rot = _readonly(self.rotation)
        tr = _readonly(self.translation)
        if rot.ndim != 2 or rot.shape[0] != rot.shape[1]:
            raise DimensionMismatch(f"rotation must be square, got {rot.shape}")
        if tr.ndim != 1 or tr.shape[0] != rot.shape[0]:
            raise DimensionMismatch(
                f"translation length {tr.shape} does not match rotation {rot.shape}")
        defect = np.max(np.abs(rot.T @ rot - np.eye(rot.shape[0])))
        if defect > ORTHOGONALITY_TOL:
            raise ClassViolation(f"rotation is not orthogonal (defect {defect:.2e})")
        object.__setattr__(self, "ratio", ratio)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls, dimension: int) -> "Similitude":
        return cls(1.0, np.eye(dimension), np.zeros(dimension))

    @property
    def dimension(self) -> int:
        return self.rotation.shape[0]

    def __call__(self, x) -> np.ndarray:
        return self.ratio * (self.rotation @ np.asarray(x, dtype=float)) + self.translation

    def compose(self, other: "Similitude") -> "Similitude":
        """self after other: (self o other)(x) = self(other(x))."""
        if self.dimension != other.dimension:
            raise DimensionMismatch("composing maps of different dimensions")
        return Similitude(
            self.ratio * other.ratio,
            self.rotation @ other.rotation,
            self(other.translation),
        )

    def fixed_point(self) -> np.ndarray:
        """Unique solution of F(x) = x (exists since ratio < 1)."""
        if self.ratio >= 1.0:
            raise InvalidParams("identity-scale map has no unique fixed point")
        n = self.dimension
        return np.linalg.solve(np.eye(n) - self.ratio * self.rotation, self.translation)


def moran_dimension(ratios) -> float:
    """The unique p > 0 with sum_j ratios_j**p = 1.

    The map p -> sum r**p decreases strictly from m to 0, so the root is
    bracketed and found by bisection, then polished with a couple of Newton
    steps to push the residual below 1e-12.
    """
    rs = [float(r) for r in ratios]
    if len(rs) < 2:
        raise EmptyOrSingleton("need at least two contraction ratios")
    for r in rs:
        if not 0.0 < r < 1.0:
            raise RatioOutOfRange(f"ratios must lie in (0, 1), got {r}")

    def f(p):
        return sum(r ** p for r in rs) - 1.0

    lo, hi = 1e-12, 1.0
    while f(hi) > 0.0:
        lo = hi
        hi *= 2.0
        if hi > 1e6:  # unreachable for valid ratios
            raise ArithmeticError("failed to bracket the Moran root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    p = 0.5 * (lo + hi)
    for _ in range(4):
        deriv = sum(r ** p * math.log(r) for r in rs)
        if deriv == 0.0:
            break
        p -= f(p) / deriv
    if abs(f(p)) > MORAN_RESIDUAL_TOL:
        raise ArithmeticError(f"Moran residual {f(p):.3e} above tolerance")
    return p


def _enclosing_ball(maps):
    """Center c and radius R with |F_j(c) - c| + r_j R <= R for every map.

    For a fixed center the minimal feasible radius is
    max_j |F_j(c) - c| / (1 - r_j); the center is seeded at the mean of the
    fixed points and improved by coordinate descent with step halving.
    """
    fixed = np.array([f.fixed_point() for f in maps])
    center = fixed.mean(axis=0)

    def radius(c):
        return max(
            float(np.linalg.norm(f(c) - c)) / (1.0 - f.ratio) for f in maps)

    spread = float(np.max(np.linalg.norm(fixed - center, axis=1), initial=0.0))
    scale = max(spread, 1.0)
    step = scale
    best = radius(center)
    evals = 0
    n = fixed.shape[1]
    while step > 1e-13 * scale and evals < 20_000:
        moved = False
        for axis in range(n):
            for sign in (1.0, -1.0):
                cand = center.copy()
                cand[axis] += sign * step
                r = radius(cand)
                evals += 1
                if r < best:
                    center, best = cand, r
                    moved = True
        if not moved:
            step *= 0.5
    return _readonly(center), best


@dataclass(frozen=True)
class IteratedFunctionSystem:
    """A declared self-similar system plus derived attractor metadata."""

    maps: tuple[Similitude, ...]
    dimension: int
    hausdorff_dim: float
    min_ratio: float
    enclosing_center: np.ndarray
    enclosing_radius: float
    osc_declared: bool
    system_class: str
    name: str = "custom"

    @property
    def branching(self) -> int:
        return len(self.maps)

    @property
    def modulus_eligible(self) -> bool:
        """Modulus experiments need dimension p > 1; word machinery does not."""
        return self.hausdorff_dim > 1.0


def build_ifs(maps, system_class="A1", osc_declared=False, name="custom"):
    """Validate a list of similitudes and derive the system metadata.

    Class declarations are checked structurally: A2 and above need equal
    ratios, A3 and above identity rotations.  Disjointness for A4 and the
    open set condition itself are caller assertions.
    """
    maps = tuple(maps)
    if len(maps) < 2:
        raise EmptyOrSingleton("a self-similar system needs at least two maps")
    if system_class not in SYSTEM_CLASSES:
        raise ClassViolation(f"unknown class {system_class!r}")
    dim = maps[0].dimension
    for f in maps:
        if f.dimension != dim:
            raise DimensionMismatch("maps with inconsistent ambient dimension")
        if f.ratio >= 1.0:
            raise RatioOutOfRange("system members must have ratio < 1")
    ratios = [f.ratio for f in maps]
    if system_class in ("A2", "A3", "A4"):
        if max(ratios) - min(ratios) > 1e-12:
            raise ClassViolation(f"class {system_class} requires equal ratios")
    if system_class in ("A3", "A4"):
        for f in maps:
            if np.max(np.abs(f.rotation - np.eye(dim))) > ORTHOGONALITY_TOL:
                raise ClassViolation(f"class {system_class} requires identity rotations")
    p = moran_dimension(ratios)
    center, radius = _enclosing_ball(maps)
    return IteratedFunctionSystem(
        maps=maps,
        dimension=dim,
        hausdorff_dim=p,
        min_ratio=min(ratios),
        enclosing_center=center,
        enclosing_radius=radius,
        osc_declared=bool(osc_declared),
        system_class=system_class,
        name=name,
    )


# --------------------------------------------------------------------------
# words


@dataclass(frozen=True)
class Word:
    """A finite index string with its cylinder data."""

    letters: tuple[int, ...]
    ratio_product: float
    measure_weight: float

    def __len__(self):
        return len(self.letters)


def _check_letters(ifs: IteratedFunctionSystem, letters) -> tuple[int, ...]:
    letters = tuple(int(x) for x in letters)
    m = ifs.branching
    for x in letters:
        if not 1 <= x <= m:
            raise LetterOutOfRange(f"letter {x} outside 1..{m}")
    return letters


def make_word(ifs: IteratedFunctionSystem, letters) -> Word:
    letters = _check_letters(ifs, letters)
    ratio = 1.0
    for x in letters:
        ratio *= ifs.maps[x - 1].ratio
    return Word(letters, ratio, ratio ** ifs.hausdorff_dim)


def compose_word(ifs: IteratedFunctionSystem, letters) -> Similitude:
    """F_w = F_{w_1} o F_{w_2} o ... o F_{w_l}; the identity for the empty word."""
    letters = _check_letters(ifs, letters)
    out = Similitude.identity(ifs.dimension)
    for x in letters:
        out = out.compose(ifs.maps[x - 1])
    return out


def representative_point(ifs: IteratedFunctionSystem, letters) -> np.ndarray:
    """F_w applied to the enclosing center; within ratio_product * R of all
    of the cylinder."""
    return compose_word(ifs, letters)(ifs.enclosing_center)


def diameter_bound(ifs: IteratedFunctionSystem) -> float:
    """2R for the enclosing ball; an upper bound for the attractor diameter."""
    return 2.0 * ifs.enclosing_radius


# --------------------------------------------------------------------------
# stopping sets


@dataclass(frozen=True)
class StoppingSet:
    """The antichain of words where the cumulative ratio first drops to <= 1/r."""

    r: float
    words: tuple[Word, ...]

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    @property
    def measure_total(self) -> float:
        return float(sum(w.measure_weight for w in self.words))

    @property
    def max_length(self) -> int:
        return max((len(w) for w in self.words), default=0)


def stopping_set(ifs: IteratedFunctionSystem, r, cap=DEFAULT_WORD_CAP) -> StoppingSet:
    """Enumerate words w with ratio(w) <= 1/r < ratio(parent of w).

    Depth-first expansion in lexicographic order.  Ties at ratio == 1/r are
    included (the comparison is exact on computed doubles, so membership at
    the boundary is bit sensitive).  The word count is bounded by
    (r / min_ratio)**p, which is checked against ``cap`` up front.
    """
    r = float(r)
    if r < 1.0:
        raise InvalidParams(f"resolution must be >= 1, got {r}")
    estimate = (r / ifs.min_ratio) ** ifs.hausdorff_dim
    if estimate > cap:
        raise ExplosionGuard(
            f"estimated stopping set size {estimate:.3e} exceeds cap {cap}")
    inv_r = 1.0 / r
    p = ifs.hausdorff_dim
    ratios = [f.ratio for f in ifs.maps]
    m = ifs.branching
    out = []
    stack = [((), 1.0)]
    while stack:
        letters, ratio = stack.pop()
        if ratio <= inv_r:
            out.append(Word(letters, ratio, ratio ** p))
        else:
            for j in range(m, 0, -1):  # reversed so letter 1 pops first
                stack.append((letters + (j,), ratio * ratios[j - 1]))
    return StoppingSet(r=r, words=tuple(out))


# --------------------------------------------------------------------------
# built-in fixtures and config files


def _translation_fixture(vertices, ratio, system_class, name):
    dim = len(vertices[0])
    eye = np.eye(dim)
    maps = [Similitude(ratio, eye, (1.0 - ratio) * np.asarray(v, dtype=float))
            for v in vertices]
    return build_ifs(maps, system_class=system_class, osc_declared=True, name=name)


def fixture(name: str) -> IteratedFunctionSystem:
    """Built-in systems: gasket, carpet, cantor-dust-3."""
    if name == "gasket":
        verts = [(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3.0) / 2.0)]
        return _translation_fixture(verts, 0.5, "A3", name)
    if name == "carpet":
        verts = [(i / 2.0, j / 2.0) for i in range(3) for j in range(3)
                 if (i, j) != (1, 1)]
        return _translation_fixture(verts, 1.0 / 3.0, "A3", name)
    if name == "cantor-dust-3":
        verts = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        return _translation_fixture(verts, 1.0 / 3.0, "A4", name)
    raise ConfigError(f"unknown fixture {name!r}")


FIXTURE_NAMES = ("gasket", "carpet", "cantor-dust-3")


def parse_ifs_config(cfg: dict, name="custom") -> IteratedFunctionSystem:
    """Build a system from a parsed config mapping.

    Expected fields: dimension, maps (each with ratio, rotation as a
    row-major list or the keyword "identity", translation), class,
    osc_declared.
    """
    try:
        dim = int(cfg["dimension"])
        entries = cfg["maps"]
        system_class = cfg.get("class", "A1")
        osc = bool(cfg.get("osc_declared", False))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad system config: {exc}") from exc
    maps = []
    for i, entry in enumerate(entries):
        try:
            ratio = float(entry["ratio"])
            rot = entry.get("rotation", "identity")
            if isinstance(rot, str):
                if rot != "identity":
                    raise ConfigError(f"map {i}: unknown rotation keyword {rot!r}")
                rotation = np.eye(dim)
            else:
                rotation = np.asarray(rot, dtype=float).reshape(dim, dim)
            translation = np.asarray(entry["translation"], dtype=float)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"bad map entry {i}: {exc}") from exc
        maps.append(Similitude(ratio, rotation, translation))
    try:
        return build_ifs(maps, system_class=system_class, osc_declared=osc, name=name)
    except (ClassViolation, DimensionMismatch, RatioOutOfRange, EmptyOrSingleton) as exc:
        raise ConfigError(str(exc)) from exc


def load_ifs(path) -> IteratedFunctionSystem:
    """Load a system from a JSON config file (see parse_ifs_config)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read system config {path}: {exc}") from exc
    return parse_ifs_config(cfg, name=str(path))


def resolve_system(spec: str) -> IteratedFunctionSystem:
    """Fixture name or path to a JSON config."""
    if spec in FIXTURE_NAMES:
        return fixture(spec)
    return load_ifs(spec)

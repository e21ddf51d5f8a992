"""
Closed-form univariate functions and their convex/concave decomposition.

Every function is a sum of primitive terms with exact first and second
derivatives. ``find_breakpoints`` scans the second derivative on a grid and
refines each sign change by bisection; the resulting
``PiecewiseDecomposition`` drives all formulations.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import DegenerateFunctionError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_GRID_N = 512
DEFAULT_ROOT_TOL = 1e-10
FLAT_TOL = 1e-9
MIN_SEGMENT_LENGTH = 1e-8


@dataclass(frozen=True)
class SineTerm:
    """amplitude * sin(frequency * x + phase)"""

    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0
    kind = "sine"

    def evaluate(self, x: np.ndarray, order: int) -> np.ndarray:
        arg = self.frequency * x + self.phase
        if order == 0:
            return self.amplitude * np.sin(arg)
        if order == 1:
            return self.amplitude * self.frequency * np.cos(arg)
        return -self.amplitude * self.frequency**2 * np.sin(arg)

    def scaled(self, k: float) -> "SineTerm":
        return SineTerm(k * self.amplitude, self.frequency, self.phase)

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class CosineTerm:
    """amplitude * cos(frequency * x + phase)"""

    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0
    kind = "cosine"

    def evaluate(self, x: np.ndarray, order: int) -> np.ndarray:
        arg = self.frequency * x + self.phase
        if order == 0:
            return self.amplitude * np.cos(arg)
        if order == 1:
            return -self.amplitude * self.frequency * np.sin(arg)
        return -self.amplitude * self.frequency**2 * np.cos(arg)

    def scaled(self, k: float) -> "CosineTerm":
        return CosineTerm(k * self.amplitude, self.frequency, self.phase)

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class LogisticTerm:
    """c / (1 + b * exp(-a * (x + d)))

    Evaluated through s = 1 / (1 + b exp(-a(x + d))), which gives
    f = c s, f' = c a s (1 - s) and f'' = c a^2 s (1 - s) (1 - 2 s).
    """

    a: float
    b: float
    c: float
    d: float
    kind = "logistic"

    def _s(self, x: np.ndarray) -> np.ndarray:
        if self.b <= 0.0:
            return np.ones_like(x, dtype=float)
        return expit(self.a * (x + self.d) - math.log(self.b))

    def evaluate(self, x: np.ndarray, order: int) -> np.ndarray:
        s = self._s(x)
        if order == 0:
            return self.c * s
        if order == 1:
            return self.c * self.a * s * (1.0 - s)
        return self.c * self.a**2 * s * (1.0 - s) * (1.0 - 2.0 * s)

    def scaled(self, k: float) -> "LogisticTerm":
        return LogisticTerm(self.a, self.b, k * self.c, self.d)

    def inflection(self) -> Optional[float]:
        """Point where b * exp(-a (x + d)) = 1, if it exists."""
        if self.b <= 0.0 or self.a == 0.0:
            return None
        return math.log(self.b) / self.a - self.d

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "a": self.a, "b": self.b, "c": self.c, "d": self.d}


@dataclass(frozen=True)
class PolynomialTerm:
    """sum_k coefficients[k] * x**k (ascending order)."""

    coefficients: Tuple[float, ...]
    kind = "polynomial"

    def evaluate(self, x: np.ndarray, order: int) -> np.ndarray:
        poly = np.polynomial.Polynomial(self.coefficients)
        if order:
            poly = poly.deriv(order)
        return poly(x)

    def scaled(self, k: float) -> "PolynomialTerm":
        return PolynomialTerm(tuple(k * c for c in self.coefficients))

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "coefficients": list(self.coefficients)}


@dataclass(frozen=True)
class SquaredCompositeTerm:
    """a * (sin(b x) + c x)^2"""

    a: float
    b: float
    c: float
    kind = "squared_composite"

    def evaluate(self, x: np.ndarray, order: int) -> np.ndarray:
        h = np.sin(self.b * x) + self.c * x
        if order == 0:
            return self.a * h**2
        dh = self.b * np.cos(self.b * x) + self.c
        if order == 1:
            return 2.0 * self.a * h * dh
        d2h = -self.b**2 * np.sin(self.b * x)
        return 2.0 * self.a * (dh**2 + h * d2h)

    def scaled(self, k: float) -> "SquaredCompositeTerm":
        return SquaredCompositeTerm(k * self.a, self.b, self.c)

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "a": self.a, "b": self.b, "c": self.c}


Term = Union[SineTerm, CosineTerm, LogisticTerm, PolynomialTerm, SquaredCompositeTerm]

TERM_KINDS = {
    "sine": SineTerm,
    "cosine": CosineTerm,
    "logistic": LogisticTerm,
    "polynomial": PolynomialTerm,
    "squared_composite": SquaredCompositeTerm,
}


def term_from_dict(record: Dict) -> Term:
    """Build a primitive term from its JSON record."""
    record = dict(record)
    kind = record.pop("kind", None)
    if kind not in TERM_KINDS:
        raise ValueError(f"Unknown term kind: {kind}")
    if kind == "polynomial":
        return PolynomialTerm(tuple(float(c) for c in record["coefficients"]))
    return TERM_KINDS[kind](**{k: float(v) for k, v in record.items()})


@dataclass(frozen=True)
class UnivariateFunction:
    """Sum of primitive terms."""

    terms: Tuple[Term, ...]
    name: str = field(default="", compare=False)

    def __call__(self, x: ArrayLike, order: int = 0) -> ArrayLike:
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        arr = np.asarray(x, dtype=float)
        total = np.zeros_like(arr, dtype=float)
        for term in self.terms:
            total = total + term.evaluate(arr, order)
        if np.ndim(total) == 0:
            return float(total)
        return total

    def scaled(self, k: float, name: Optional[str] = None) -> "UnivariateFunction":
        return UnivariateFunction(
            tuple(t.scaled(k) for t in self.terms),
            name=name if name is not None else f"{k:g}*{self.name or 'g'}",
        )

    def to_records(self) -> List[Dict]:
        return [t.to_dict() for t in self.terms]

    @classmethod
    def from_records(cls, records: Sequence[Dict], name: str = "") -> "UnivariateFunction":
        return cls(tuple(term_from_dict(r) for r in records), name=name)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "UnivariateFunction":
        """Load a function specification file (JSON list of term records)."""
        path = Path(path)
        with open(path, "r") as f:
            records = json.load(f)
        return cls.from_records(records, name=path.stem)

    def dump(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_records(), f, indent=2)


def evaluate(f: UnivariateFunction, x: float, order: int = 0) -> float:
    """Exact value of f, f' or f'' at x."""
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x}")
    return float(f(x, order))


class SegmentKind(str, Enum):
    CONVEX = "convex"
    CONCAVE = "concave"


@dataclass(frozen=True)
class PiecewiseDecomposition:
    """Breakpoints, segment kinds and secant slopes of a function on [l, u]."""

    breakpoints: Tuple[float, ...]
    segment_kinds: Tuple[SegmentKind, ...]
    secant_slopes: Tuple[float, ...]
    function: Optional[UnivariateFunction] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.breakpoints) < 2:
            raise DomainError("a decomposition needs at least two breakpoints")
        if len(self.segment_kinds) != len(self.breakpoints) - 1:
            raise DomainError("one kind per segment is required")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise DomainError(f"breakpoints must increase: {self.breakpoints}")

    @classmethod
    def from_breakpoints(
        cls,
        f: UnivariateFunction,
        breakpoints: Sequence[float],
        kinds: Sequence[SegmentKind],
    ) -> "PiecewiseDecomposition":
        points = tuple(float(b) for b in breakpoints)
        values = [float(f(b)) for b in points]
        slopes = tuple(
            (values[s + 1] - values[s]) / (points[s + 1] - points[s])
            for s in range(len(points) - 1)
        )
        return cls(points, tuple(SegmentKind(k) for k in kinds), slopes, f)

    @property
    def s_count(self) -> int:
        return len(self.segment_kinds)

    @property
    def lower(self) -> float:
        return self.breakpoints[0]

    @property
    def upper(self) -> float:
        return self.breakpoints[-1]

    @property
    def convex_segments(self) -> List[int]:
        return [s for s, k in enumerate(self.segment_kinds) if k == SegmentKind.CONVEX]

    @property
    def concave_segments(self) -> List[int]:
        return [s for s, k in enumerate(self.segment_kinds) if k == SegmentKind.CONCAVE]

    def is_convex(self, s: int) -> bool:
        return self.segment_kinds[s] == SegmentKind.CONVEX

    def segment_bounds(self, s: int) -> Tuple[float, float]:
        return self.breakpoints[s], self.breakpoints[s + 1]

    def segment_of(self, x: float) -> int:
        """Index of the segment containing x (left-closed, last one closed)."""
        idx = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return min(max(idx, 0), self.s_count - 1)

    def pattern(self) -> str:
        """Compact kind string, e.g. 'VAVA' (V convex, A concave)."""
        return "".join("V" if k == SegmentKind.CONVEX else "A" for k in self.segment_kinds)


def _bisect_root(
    f: UnivariateFunction, lo: float, hi: float, root_tol: float
) -> float:
    sign_lo = math.copysign(1.0, f(lo, 2))
    for _ in range(400):
        if hi - lo <= root_tol:
            break
        mid = 0.5 * (lo + hi)
        if math.copysign(1.0, f(mid, 2)) == sign_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _kind_at(f: UnivariateFunction, a: float, b: float) -> SegmentKind:
    return SegmentKind.CONVEX if f(0.5 * (a + b), 2) >= -FLAT_TOL else SegmentKind.CONCAVE


def _merge(
    f: UnivariateFunction, points: List[float]
) -> Tuple[List[float], List[SegmentKind]]:
    # Drop numerically void segments first, then fuse equal neighbours.
    changed = True
    while changed and len(points) > 2:
        changed = False
        for s in range(len(points) - 1):
            if points[s + 1] - points[s] < MIN_SEGMENT_LENGTH:
                drop = s + 1 if s + 1 < len(points) - 1 else s
                del points[drop]
                changed = True
                break

    kinds = [_kind_at(f, a, b) for a, b in zip(points, points[1:])]
    merged_points = [points[0]]
    merged_kinds: List[SegmentKind] = []
    for s, kind in enumerate(kinds):
        if merged_kinds and merged_kinds[-1] == kind:
            merged_points[-1] = points[s + 1]
        else:
            merged_kinds.append(kind)
            merged_points.append(points[s + 1])
    return merged_points, merged_kinds


def find_breakpoints(
    f: UnivariateFunction,
    l: float,
    u: float,
    grid_n: int = DEFAULT_GRID_N,
    root_tol: float = DEFAULT_ROOT_TOL,
) -> PiecewiseDecomposition:
    """Split [l, u] where f'' changes sign.

    Args:
        f: Function to decompose
        l: Lower domain bound
        u: Upper domain bound
        grid_n: Number of grid intervals scanned for sign changes of f''
        root_tol: Bisection stops once the bracketing interval is this small

    Returns:
        PiecewiseDecomposition with alternating convex/concave segments

    Raises:
        DomainError: if l >= u or grid_n < 8
        DegenerateFunctionError: if f'' stays within +-1e-9 on the grid
    """
    if not (l < u):
        raise DomainError(f"empty domain [{l}, {u}]")
    if grid_n < 8:
        raise DomainError(f"grid_n must be at least 8, got {grid_n}")

    grid = np.linspace(l, u, grid_n + 1)
    d2 = np.asarray(f(grid, 2), dtype=float)
    signs = np.where(d2 > FLAT_TOL, 1, np.where(d2 < -FLAT_TOL, -1, 0))
    nonzero = np.flatnonzero(signs)
    if nonzero.size == 0:
        raise DegenerateFunctionError(
            f"second derivative of {f.name or 'function'} vanishes on [{l}, {u}]"
        )

    roots: List[float] = []
    for k1, k2 in zip(nonzero, nonzero[1:]):
        if signs[k1] == signs[k2]:
            continue
        if k2 == k1 + 1:
            roots.append(_bisect_root(f, float(grid[k1]), float(grid[k2]), root_tol))
        else:
            # inflection sits on (a run of) sampled zeros
            roots.append(float(grid[(k1 + k2) // 2]))

    points, kinds = _merge(f, [float(l)] + roots + [float(u)])
    logger.debug(f"{f.name or 'function'} on [{l}, {u}]: breakpoints {points}")
    return PiecewiseDecomposition.from_breakpoints(f, points, kinds)


def decompose(
    f: UnivariateFunction,
    l: float,
    u: float,
    grid_n: int = DEFAULT_GRID_N,
    root_tol: float = DEFAULT_ROOT_TOL,
) -> PiecewiseDecomposition:
    """find_breakpoints, treating a linear function as one convex segment."""
    try:
        return find_breakpoints(f, l, u, grid_n=grid_n, root_tol=root_tol)
    except DegenerateFunctionError:
        logger.info(f"{f.name or 'function'} is linear on [{l}, {u}]; one convex segment")
        return PiecewiseDecomposition.from_breakpoints(f, [l, u], [SegmentKind.CONVEX])


def relaxed_eval(
    f: UnivariateFunction, d: PiecewiseDecomposition, x: ArrayLike
) -> ArrayLike:
    """Piecewise-convex relaxation: f on convex segments, secants on concave ones."""
    arr = np.asarray(x, dtype=float)
    slack = 1e-12 * max(1.0, abs(d.lower), abs(d.upper))
    if np.any(arr < d.lower - slack) or np.any(arr > d.upper + slack):
        raise DomainError(f"x outside [{d.lower}, {d.upper}]")
    points = np.asarray(d.breakpoints)
    seg = np.clip(np.searchsorted(points, arr, side="right") - 1, 0, d.s_count - 1)
    concave = np.array([not d.is_convex(s) for s in range(d.s_count)])[seg]
    left = points[seg]
    secant = np.asarray(f(left)) + np.asarray(d.secant_slopes)[seg] * (arr - left)
    values = np.where(concave, secant, np.asarray(f(arr)))
    if np.ndim(values) == 0:
        return float(values)
    return values


def cubic_concave_convex(
    scale: float, center: float, slope: float = 0.0, offset: float = 0.0
) -> UnivariateFunction:
    """scale (x - center)^3 + slope x + offset: concave left of center, convex right."""
    m = center
    coefficients = (
        offset - scale * m**3,
        slope + 3.0 * scale * m**2,
        -3.0 * scale * m,
        scale,
    )
    return UnivariateFunction((PolynomialTerm(coefficients),), name="cubic")


TWO_PI = 2.0 * math.pi

NAMED_FUNCTIONS: Dict[str, Tuple[UnivariateFunction, Tuple[float, float]]] = {
    "neg-sin": (UnivariateFunction((SineTerm(-1.0),), name="neg-sin"), (0.0, TWO_PI)),
    "sin": (UnivariateFunction((SineTerm(1.0),), name="sin"), (0.0, TWO_PI)),
    "nck-trig": (
        UnivariateFunction(
            (
                SineTerm(7.5, math.pi / 40.0, -math.pi / 4.0),
                CosineTerm(-15.0, math.pi / 80.0, -math.pi / 8.0),
                PolynomialTerm((19.5,)),
            ),
            name="nck-trig",
        ),
        (0.0, 100.0),
    ),
    "ufl-1": (
        UnivariateFunction((SquaredCompositeTerm(15.0, 2.0, 1.0),), name="ufl-1"),
        (0.0, 1.0),
    ),
    "ufl-2": (
        UnivariateFunction((SquaredCompositeTerm(25.0, 5.0, 5.0),), name="ufl-2"),
        (0.0, 1.0),
    ),
    "ufl-3": (
        UnivariateFunction((SquaredCompositeTerm(25.0, 10.0, 5.0),), name="ufl-3"),
        (0.0, 1.0),
    ),
}


def named_function(name: str) -> Tuple[UnivariateFunction, Tuple[float, float]]:
    """Look up a library function and its default domain."""
    if name not in NAMED_FUNCTIONS:
        raise ValueError(
            f"Unknown function: {name} (choose from {', '.join(sorted(NAMED_FUNCTIONS))})"
        )
    return NAMED_FUNCTIONS[name]


def logistic_function(a: float, b: float, c: float, d: float) -> UnivariateFunction:
    return UnivariateFunction((LogisticTerm(a, b, c, d),), name="logistic")

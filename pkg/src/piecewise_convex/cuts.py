"""
Perspective cuts: supporting hyperplanes of a PerspectiveTerm.

A cut reads z >= coef_x * x + coef_y * y + constant. In PERSPECTIVE mode the
constant is zero; TANGENT and BIG_M terms carry it.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

import numpy as np

from .errors import DomainError
from .formulation import PerspectiveTerm, TermMode

logger = logging.getLogger(__name__)

EPS_Y = 1e-6
EPS_CUT = 1e-6
DOMAIN_SLACK = 1e-9


@dataclass(frozen=True)
class Cut:
    coef_x: float
    coef_y: float
    q: float
    constant: float = 0.0
    violation: float = 0.0
    term: int = -1

    def rhs(self, x: float, y: float) -> float:
        return self.coef_x * x + self.coef_y * y + self.constant

    def row(self, t: PerspectiveTerm) -> Tuple[Dict[int, float], str, float]:
        """z - coef_x x - coef_y y >= constant as (coefs, sense, rhs)."""
        coefs: Dict[int, float] = {t.z: 1.0}
        coefs[t.x] = coefs.get(t.x, 0.0) - self.coef_x
        if self.coef_y != 0.0:
            coefs[t.y] = coefs.get(t.y, 0.0) - self.coef_y
        return coefs, ">=", self.constant


def make_cut(t: PerspectiveTerm, q: float, term: int = -1, violation: float = 0.0) -> Cut:
    """Cut tangent to the term's restricted function at per-unit load q.

    Raises:
        DomainError: if q lies outside [q_lo, q_hi]
    """
    slack = DOMAIN_SLACK * max(1.0, abs(t.q_lo), abs(t.q_hi))
    if not (t.q_lo - slack <= q <= t.q_hi + slack):
        raise DomainError(f"q={q} outside [{t.q_lo}, {t.q_hi}] for {t.name}")
    q = min(max(q, t.q_lo), t.q_hi)

    gq = float(t.g(q))
    slope = float(t.g(q, 1))
    intercept = gq - t.offset_value - slope * (q - t.anchor)

    if t.mode == TermMode.PERSPECTIVE:
        return Cut(slope, intercept, q, 0.0, violation, term)
    if t.mode == TermMode.TANGENT:
        return Cut(slope, 0.0, q, intercept, violation, term)
    big_m = max(0.0, intercept)
    return Cut(slope, big_m, q, intercept - big_m, violation, term)


def _clamp(t: PerspectiveTerm, q: float) -> float:
    return min(max(q, t.q_lo), t.q_hi)


def separate(
    t: PerspectiveTerm,
    x: float,
    y: float,
    z: float,
    eps_y: float = EPS_Y,
    eps_cut: float = EPS_CUT,
    term: int = -1,
) -> Optional[Cut]:
    """Most violated cut at an LP point, or None if the point is (nearly) feasible."""
    if t.mode == TermMode.TANGENT:
        candidates = [_clamp(t, t.anchor + x)]
    elif y > eps_y:
        candidates = [_clamp(t, t.anchor + x / y)]
        if t.mode == TermMode.BIG_M:
            candidates.append(_clamp(t, x))
    elif abs(x) <= eps_y:
        return None
    else:
        candidates = [0.5 * (t.q_lo + t.q_hi)]

    best: Optional[Cut] = None
    for q in candidates:
        cut = make_cut(t, q, term)
        violation = cut.rhs(x, y) - z
        if violation > eps_cut and (best is None or violation > best.violation):
            best = Cut(cut.coef_x, cut.coef_y, cut.q, cut.constant, violation, term)
    return best


def initial_cuts(t: PerspectiveTerm, k: int, term: int = -1) -> List[Cut]:
    """Cuts at k equally spaced per-unit loads, endpoints included."""
    if k < 2:
        raise ValueError(f"initial_cuts needs k >= 2, got {k}")
    return [make_cut(t, float(q), term) for q in np.linspace(t.q_lo, t.q_hi, k)]


class CutTrace:
    """Appends one 'node term q violation' line per accepted cut."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def record(self, node: int, cut: Cut) -> None:
        with open(self.path, "a") as f:
            f.write(f"{node} {cut.term} {cut.q:.17g} {cut.violation:.17g}\n")


class CutPool:
    """Cuts accepted along one root-to-node path, deduplicated by (term, q)."""

    def __init__(self, trace: Optional[CutTrace] = None):
        self.trace = trace
        self._cuts: List[Cut] = []
        self._keys: Set[Tuple[int, float]] = set()

    @staticmethod
    def key(cut: Cut) -> Tuple[int, float]:
        return cut.term, round(cut.q, 7)

    def __contains__(self, cut: Cut) -> bool:
        return self.key(cut) in self._keys

    def __len__(self) -> int:
        return len(self._cuts)

    def __iter__(self) -> Iterator[Cut]:
        return iter(self._cuts)

    def add(self, cut: Cut, node: int = 0) -> bool:
        key = self.key(cut)
        if key in self._keys:
            return False
        self._keys.add(key)
        self._cuts.append(cut)
        if self.trace is not None:
            self.trace.record(node, cut)
        return True

    def child(self) -> "CutPool":
        """Copy for a descendant node; cuts added later stay local to it."""
        pool = CutPool(self.trace)
        pool._cuts = list(self._cuts)
        pool._keys = set(self._keys)
        return pool

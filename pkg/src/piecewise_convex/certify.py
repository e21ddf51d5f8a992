"""
Acceptance suite: envelope, separation and equivalence checks on profiles,
solution-mapping checks, bound comparisons on instance batches, brute-force
agreement and randomized cut validity.

``run_certification`` returns one result dict per criterion
({"success": ..., "error": ...}) so a failing check never stops the matrix.
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cuts import make_cut
from .formulation import (
    Assignment,
    Formulation,
    PerspectiveTerm,
    TermMode,
    block_contribution,
    build_im,
    build_mcm,
    build_model,
    map_im_to_mcm,
)
from .harness import ExperimentSpec, run_experiment
from .oracles import (
    brute_force_minlp,
    envelope,
    neg_sin_envelope,
    neg_sin_im_profile,
    profile_problem,
    relaxation_profile,
)
from .problems import SplitMix64, gen_nck, gen_ufl, instance_problem, make_primal_hook
from .solver import SolveConfig, SolveStatus, branch_and_cut, solve_root_relaxation
from .univariate import (
    cubic_concave_convex,
    decompose,
    logistic_function,
    named_function,
)

logger = logging.getLogger(__name__)

BOUND_REL_TOL = 1e-6
PROFILE_CFG = SolveConfig(cut_eps=1e-9, feas_tol=1e-9, opt_tol=1e-9)


@dataclass(frozen=True)
class Scale:
    """Batch sizes for one certification run."""

    cubic_functions: int
    mapping_points: int
    equivalence_instances: int
    dominance_instances: int
    nck_sizes: Tuple[int, ...]
    seeds: int
    ufl_sizes: Tuple[Tuple[int, int], ...]
    tiny_instances: int
    cut_checks: int
    time_limit: float


FULL = Scale(20, 200, 30, 100, (10, 20, 50), 10, ((3, 6), (6, 12)), 25, 100_000, 60.0)
QUICK = Scale(5, 50, 6, 12, (10,), 3, ((3, 6),), 6, 10_000, 20.0)


def _close(a: float, b: float, rel: float = BOUND_REL_TOL) -> bool:
    return abs(a - b) <= rel * (1.0 + abs(a))


def _small_problem(k: int, seed: int):
    """Rotating small instances across the NCK and UFL families."""
    kind = k % 5
    if kind == 0:
        return instance_problem(gen_nck(2 + seed % 3, "logistic", seed))
    if kind == 1:
        return instance_problem(gen_nck(2 + seed % 3, "trig", seed))
    return instance_problem(gen_ufl(2, 3 + seed % 2, kind - 1, seed))


def _root_bound(p, formulation: str, cfg: SolveConfig, strengthened: bool = True) -> float:
    """Root bound in minimisation orientation."""
    return solve_root_relaxation(build_model(p, Formulation(formulation), strengthened), cfg).bound


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def envelope_functions():
    out = [named_function("neg-sin"), named_function("sin")]
    params = gen_nck(3, "logistic", 11).params
    out.extend((logistic_function(*p), (0.0, 100.0)) for p in params)
    out.extend(named_function(name) for name in ("ufl-1", "ufl-2", "ufl-3", "nck-trig"))
    return out


def check_envelope(scale: Scale) -> Tuple[bool, str]:
    worst = 0.0
    for f, (lo, hi) in envelope_functions():
        d = decompose(f, lo, hi)
        xs = np.linspace(lo, hi, 101)
        mcm = relaxation_profile(f, d, "mcm", xs, PROFILE_CFG)
        err = float(np.max(np.abs(mcm - envelope(f, d)(xs))))
        logger.info(f"envelope {f.name}: max error {err:.3g}")
        worst = max(worst, err)
    return worst <= 1e-4, f"max |MCM - envelope| = {worst:.3g}"


def check_separation(scale: Scale) -> Tuple[bool, str]:
    f, (lo, hi) = named_function("neg-sin")
    d = decompose(f, lo, hi)
    xs = np.linspace(lo, hi, 101)
    im = relaxation_profile(f, d, "im", xs, PROFILE_CFG)
    mcm = relaxation_profile(f, d, "mcm", xs, PROFILE_CFG)
    dense = np.linspace(lo, hi, 200_001)
    exact = float(np.max(neg_sin_envelope(dense) - neg_sin_im_profile(dense)))
    below = bool(np.all(im <= mcm + 1e-7))
    gap = float(np.max(mcm - im))
    ok = below and gap > 0.05 and gap >= 0.5 * exact
    return ok, f"IM <= MCM: {below}; grid max gap {gap:.4f} (exact {exact:.4f})"


def check_equivalence(scale: Scale) -> Tuple[bool, str]:
    rng = SplitMix64(2024)
    functions = [named_function("sin")]
    for _ in range(scale.cubic_functions):
        f = cubic_concave_convex(
            rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)
        )
        functions.append((f, (-1.0, 1.0)))
    worst = 0.0
    for f, (lo, hi) in functions:
        d = decompose(f, lo, hi)
        xs = np.linspace(lo, hi, 101)
        im = relaxation_profile(f, d, "im", xs, PROFILE_CFG)
        mcm = relaxation_profile(f, d, "mcm", xs, PROFILE_CFG)
        worst = max(worst, float(np.max(np.abs(im - mcm))))
    return worst <= 1e-5, f"max |IM - MCM| = {worst:.3g} over {len(functions)} functions"


def random_im_point(m_im, rng: SplitMix64) -> Optional[np.ndarray]:
    """Random point of a two-segment IM relaxation with z and t at their lower limits.

    The first segment is fixed on; the second is switched on to a random fraction.
    """
    blk = m_im.blocks[0]
    pts = blk.decomposition.breakpoints
    L = [pts[s + 1] - pts[s] for s in range(blk.decomposition.s_count)]
    values = np.array([v.lower for v in m_im.variables])
    y2 = rng.random()
    values[blk.y[0]] = 1.0
    values[blk.y[1]] = y2
    values[blk.x[0]] = rng.uniform(L[0] * y2, L[0])
    values[blk.x[1]] = rng.uniform(0.0, L[1] * y2)
    values[blk.var] = pts[0] + values[blk.x[0]] + values[blk.x[1]]
    for s, z in blk.z.items():
        t = m_im.terms[blk.terms[s]]
        values[z] = t.value(values[t.x], values[t.y])
    aux = 1 - blk.var
    values[aux] = block_contribution(m_im, values, blk)
    if m_im.max_violation(values) > 1e-9:
        return None
    return values


def check_mapping(scale: Scale) -> Tuple[bool, str]:
    """Mapped MCM points of concave-then-convex blocks stay feasible with t left at the IM value.

    The reversed (convex-then-concave) functions must exceed the IM contribution
    at some point.
    """
    rng = SplitMix64(77)
    checked, worst, worse, reversed_worse = 0, 0.0, 0, 0
    attempts = 0
    while checked < scale.mapping_points and attempts < 20 * scale.mapping_points:
        attempts += 1
        if checked % 10 == 0:
            f = cubic_concave_convex(rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 1.0))
            models = []
            for g in (f, f.scaled(-1.0, name="neg-cubic")):
                p = profile_problem(g, decompose(g, -1.0, 1.0))
                models.append((build_im(p), build_mcm(p)))
        counts = []
        for m_im, m_mcm in models:
            values = random_im_point(m_im, rng)
            if values is None:
                counts.append(None)
                continue
            mapped = map_im_to_mcm(Assignment.of(m_im, values), m_im, m_mcm)
            larger = 0
            for bi, bm in zip(m_im.blocks, m_mcm.blocks):
                im_c = block_contribution(m_im, values, bi)
                if block_contribution(m_mcm, mapped.values, bm) > im_c + 1e-9 * (1.0 + abs(im_c)):
                    larger += 1
            counts.append((larger, m_mcm.max_violation(mapped.values)))
        if counts[0] is None:
            continue
        worse += counts[0][0]
        worst = max(worst, counts[0][1])
        if counts[1] is not None:
            reversed_worse += counts[1][0]
        checked += 1
    ok = checked == scale.mapping_points and worst <= 1e-8 and worse == 0 and reversed_worse > 0
    return ok, (
        f"{checked} points, max MCM violation {worst:.3g}, {worse} larger contributions "
        f"({reversed_worse} on reversed functions)"
    )


def check_mcm_ccm(scale: Scale) -> Tuple[bool, str]:
    cfg = SolveConfig(cut_eps=1e-9)
    bad = []
    for k in range(scale.equivalence_instances):
        p = _small_problem(k, 100 + k)
        a, b = _root_bound(p, "mcm", cfg), _root_bound(p, "ccm", cfg)
        if not _close(a, b):
            bad.append((p.name, a, b))
    return not bad, f"{scale.equivalence_instances} instances, mismatches: {bad[:3]}"


def check_dominance(scale: Scale) -> Tuple[bool, str]:
    cfg = SolveConfig(cut_eps=1e-9)
    bad = []
    for k in range(scale.dominance_instances):
        p = _small_problem(k, 500 + k)
        im, mcm = _root_bound(p, "im", cfg), _root_bound(p, "mcm", cfg)
        if mcm < im - 1e-9 - BOUND_REL_TOL * (1.0 + abs(im)):
            bad.append((p.name, im, mcm))
    return not bad, f"{scale.dominance_instances} instances, MCM below IM: {bad[:3]}"


def check_logistic_table(scale: Scale) -> Tuple[bool, str]:
    spec = ExperimentSpec(
        family="nck-logistic", sizes=list(scale.nck_sizes), instances=scale.seeds, relax_only=True
    )
    frame = run_experiment(spec, SolveConfig(cut_eps=1e-9)).reports
    pivot = frame[frame["success"] == True].pivot_table(  # noqa: E712
        index=["size", "seed"], columns="formulation", values="root_bound"
    )
    diffs = [not _close(r["im"], r["mcm"]) for _, r in pivot.iterrows()]
    failures = int(frame["success"].eq(False).sum())
    return not any(diffs) and failures == 0, f"{len(pivot)} instances, {sum(diffs)} differ, {failures} failed"


def _table_rows(family: str, sizes, scale: Scale):
    spec = ExperimentSpec(family=family, sizes=list(sizes), instances=scale.seeds)
    return run_experiment(spec, SolveConfig(time_limit_seconds=scale.time_limit))


def check_trig_table(scale: Scale) -> Tuple[bool, str]:
    result = _table_rows("nck-trig", scale.nck_sizes, scale)
    notes, ok = [], True
    for row in result.rows:
        im, mcm = row.stats["im"].relax_gap, row.stats["mcm"].relax_gap
        ok &= mcm < im
        notes.append(f"{row.size}: {mcm:.3f} < {im:.3f}")
    flagged = int(sum(r.flagged for r in result.rows))
    ok &= flagged == 0
    return bool(ok), "; ".join(notes) + f"; flagged {flagged}"


def check_ufl_table(scale: Scale) -> Tuple[bool, str]:
    notes, ok = [], True
    for kind in (1, 2, 3):
        result = _table_rows(f"ufl-{kind}", scale.ufl_sizes, scale)
        for row in result.rows:
            im, mcm = row.stats["im"].relax_gap, row.stats["mcm"].relax_gap
            ok &= mcm <= im + 1e-6
            if kind == 3:
                ok &= im >= 2.0 * mcm
            notes.append(f"type {kind} {row.size}: MCM {mcm:.2f} / IM {im:.2f}")
    return bool(ok), "; ".join(notes)


def tiny_instances(count: int):
    out = []
    for k in range(count):
        if k % 3 == 2:
            out.append(gen_ufl(2, 3, 1 + k % 3, 900 + k))
        else:
            out.append(gen_nck(1 + (k // 3) % 3, "trig" if k % 2 else "logistic", 900 + k))
    return out


def _grid_for(inst) -> int:
    n = getattr(inst, "n", 1)
    return {1: 4001, 2: 1501}.get(n, 301)


def check_brute_force(scale: Scale) -> Tuple[bool, str]:
    bad = []
    for inst in tiny_instances(scale.tiny_instances):
        p = instance_problem(inst)
        report = branch_and_cut(build_mcm(p), SolveConfig(time_limit_seconds=scale.time_limit), make_primal_hook(inst))
        oracle = brute_force_minlp(p, _grid_for(inst), relaxed=True)
        if report.status != SolveStatus.OPTIMAL or oracle.infeasible:
            bad.append((inst.name, report.status.value, oracle.infeasible))
            continue
        if abs(report.incumbent_value - oracle.objective) > 1e-3 * max(1.0, abs(oracle.objective)):
            bad.append((inst.name, report.incumbent_value, oracle.objective))
    return not bad, f"{scale.tiny_instances} instances, disagreements: {bad[:3]}"


def term_family(name: str) -> List[PerspectiveTerm]:
    """Every term kind (PR, tangent, big-M) built for one library function."""
    f, (lo, hi) = named_function(name)
    p = profile_problem(f, decompose(f, lo, hi))
    terms: List[PerspectiveTerm] = []
    for m in (build_im(p), build_im(p, strengthened=False), build_mcm(p), build_mcm(p, strengthened=False)):
        terms.extend(m.terms)
    return terms


def cut_violations(terms: Sequence[PerspectiveTerm], checks: int, rng: SplitMix64) -> int:
    """Random (term, q, point) triples where a cut exceeds the term's value by more than 1e-9."""
    per_term = max(1, checks // max(1, len(terms)))
    bad = 0
    for t in terms:
        qs = [rng.uniform(t.q_lo, t.q_hi) for _ in range(per_term)]
        cuts = [make_cut(t, q) for q in qs]
        cx = np.array([c.coef_x for c in cuts])
        cy = np.array([c.coef_y for c in cuts])
        c0 = np.array([c.constant for c in cuts])
        p = np.array([rng.uniform(t.q_lo, t.q_hi) for _ in range(per_term)])
        if t.mode == TermMode.BIG_M:
            y = np.array([float(rng.random() < 0.5) for _ in range(per_term)])
        else:
            y = np.array([1.0 - rng.random() for _ in range(per_term)])
        if t.mode == TermMode.TANGENT:
            x = p - t.anchor
            value = np.asarray(t.g(p)) - t.offset_value
        else:
            x = (p - t.anchor) * y
            value = y * (np.asarray(t.g(p)) - t.offset_value)
        rhs = cx * x + cy * y + c0
        bad += int(np.sum(rhs - value > 1e-9 * np.maximum(1.0, np.abs(value))))
    return bad


def check_cut_validity(scale: Scale) -> Tuple[bool, str]:
    rng = SplitMix64(4242)
    counts = {}
    for name in ("neg-sin", "sin", "nck-trig", "ufl-1", "ufl-2", "ufl-3"):
        counts[name] = cut_violations(term_family(name), scale.cut_checks, rng)
    return not any(counts.values()), f"violations per family: {counts}"


def check_reversed_case(scale: Scale) -> Tuple[bool, str]:
    f, (lo, hi) = named_function("neg-sin")
    d = decompose(f, lo, hi)
    xs = np.linspace(lo, hi, 101)
    pr = relaxation_profile(f, d, "im", xs, PROFILE_CFG, strengthened=True)
    plain = relaxation_profile(f, d, "im", xs, PROFILE_CFG, strengthened=False)
    diff = float(np.max(np.abs(pr - plain)))
    return diff <= 1e-6, f"max |IM - IM plain| = {diff:.3g}"


CRITERIA: Dict[int, Tuple[str, Callable[[Scale], Tuple[bool, str]]]] = {
    1: ("MCM profile equals the convex envelope", check_envelope),
    2: ("IM separates from MCM on -sin", check_separation),
    3: ("IM equals MCM for concave-then-convex", check_equivalence),
    4: ("IM-to-MCM mapping", check_mapping),
    5: ("MCM and CCM root bounds agree", check_mcm_ccm),
    6: ("MCM root bound dominates IM", check_dominance),
    7: ("nck-logistic: equal IM/MCM root bounds", check_logistic_table),
    8: ("nck-trig: MCM root gap below IM", check_trig_table),
    9: ("ufl: MCM root gap below IM", check_ufl_table),
    10: ("branch-and-cut matches brute force", check_brute_force),
    11: ("perspective cut validity", check_cut_validity),
    12: ("perspective has no effect on reversed IM", check_reversed_case),
}


def run_certification(quick: bool = False, only: Optional[Sequence[int]] = None) -> List[Dict]:
    """Run the acceptance criteria and return one result record per criterion."""
    scale = QUICK if quick else FULL
    selected = sorted(only) if only else sorted(CRITERIA)
    results = []
    for number in selected:
        if number not in CRITERIA:
            results.append({"criterion": number, "name": "", "success": False, "error": "unknown criterion"})
            continue
        name, check = CRITERIA[number]
        start = time.perf_counter()
        try:
            passed, detail = check(scale)
            record = {"criterion": number, "name": name, "success": passed, "detail": detail}
        except Exception as e:
            logger.error(f"criterion {number} raised: {e}")
            record = {"criterion": number, "name": name, "success": False, "error": str(e)}
        record["seconds"] = time.perf_counter() - start
        logger.info(f"criterion {number}: {'pass' if record['success'] else 'fail'} in {record['seconds']:.1f} s")
        results.append(record)
    return results

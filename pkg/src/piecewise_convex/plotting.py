"""Relaxation-profile figures as SVG."""

import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .oracles import DEFAULT_PROFILE_POINTS, export_series, relaxation_profile  # noqa: E402
from .solver import SolveConfig  # noqa: E402
from .univariate import PiecewiseDecomposition, UnivariateFunction, relaxed_eval  # noqa: E402

logger = logging.getLogger(__name__)

IM_COLOR = "tab:blue"
MCM_COLOR = "tab:red"

plt.rcParams["svg.hashsalt"] = "piecewise-convex"
plt.rcParams["svg.fonttype"] = "none"
plt.rcParams["font.size"] = 9
plt.rcParams["figure.figsize"] = (6.0, 4.0)


def plot_profiles(
    f: UnivariateFunction,
    d: PiecewiseDecomposition,
    out: Union[str, Path],
    cfg: Optional[SolveConfig] = None,
    csv_path: Optional[Union[str, Path]] = None,
    points: int = DEFAULT_PROFILE_POINTS,
) -> Path:
    """Draw g (dotted), its relaxation with shaded epigraph, and both profiles.

    The same inputs always give the same SVG bytes.

    Args:
        f: Function to plot
        d: Its decomposition
        out: SVG path
        cfg: Settings for the profile relaxations
        csv_path: Also write the series as CSV
        points: Profile grid size

    Returns:
        Path of the written SVG
    """
    xs = np.linspace(d.lower, d.upper, points)
    dense = np.linspace(d.lower, d.upper, 8 * (points - 1) + 1)
    original = np.asarray(f(dense))
    relaxed = np.asarray(relaxed_eval(f, d, dense))
    im = relaxation_profile(f, d, "im", xs, cfg)
    mcm = relaxation_profile(f, d, "mcm", xs, cfg)

    fig, ax = plt.subplots()
    top = max(float(original.max()), float(relaxed.max()))
    top += 0.1 * max(1.0, top - float(relaxed.min()))
    ax.fill_between(dense, relaxed, top, color="0.9", linewidth=0, label="epigraph of relaxation")
    ax.plot(dense, original, linestyle=":", color="black", linewidth=1.2, label=f.name or "g")
    ax.plot(dense, relaxed, linestyle="-", color="black", linewidth=1.0, label="relaxation")
    ax.plot(xs, im, color=IM_COLOR, linewidth=1.6, label="IM")
    ax.plot(xs, mcm, color=MCM_COLOR, linewidth=1.6, linestyle="--", label="MCM")
    for b in d.breakpoints[1:-1]:
        ax.axvline(b, color="0.6", linewidth=0.6)
    ax.set_xlim(d.lower, d.upper)
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    ax.legend(loc="best", frameon=False)
    fig.tight_layout()

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"wrote {out}")

    if csv_path:
        export_series(csv_path, xs, im=im, mcm=mcm, relaxed=relaxed_eval(f, d, xs), original=f(xs))
    return out

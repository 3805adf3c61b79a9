"""Early/late phase comparison of a training run and its summary report."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

IMPROVED, WORSENED, UNCHANGED = "improved", "worsened", "unchanged"
CATEGORIES = (IMPROVED, WORSENED, UNCHANGED)
SHARE_WORDS = {IMPROVED: "increased", WORSENED: "decreased", UNCHANGED: "unchanged"}
EDGE_METRICS = ("total", "r_sidewalk", "r_ped", "r_veh", "r_park",
                "beta_sidewalk", "beta_veh", "beta_park")
CURVE_COLUMNS = ("episode", "scenario", "total", "r_sidewalk", "r_ped", "r_veh", "r_park")
EDGE_TABLE_COLUMNS = ("edge_id", "early", "late", "delta", "category", "relative_magnitude")
UNCHANGED_FRACTION = 0.01
REFERENCE_EPISODES = 150


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseComparison:
    metric: str
    edge_id: str
    early: float
    late: float
    delta: float
    category: str
    relative_magnitude: float


def phase_windows(n_episodes: int) -> tuple[range, range]:
    """First and last third of the run; 0-49 and 100-149 for 150 episodes."""
    if n_episodes < 1:
        raise AnalysisError("no episodes to analyse")
    w = max(n_episodes // 3, 1)
    return range(0, w), range(n_episodes - w, n_episodes)


def phase_means(
    series: Mapping[str, Sequence[float]], early: range, late: range
) -> dict[str, tuple[float, float, float]]:
    """Per-edge (early mean, late mean, late minus early)."""
    out = {}
    for edge, values in series.items():
        if max(early.stop, late.stop) > len(values) or min(early.start, late.start) < 0:
            raise AnalysisError(
                f"edge {edge}: window exceeds the {len(values)} available episodes"
            )
        if len(early) == 0 or len(late) == 0:
            raise AnalysisError("phase windows must be nonempty")
        e = math.fsum(values[i] for i in early) / len(early)
        l = math.fsum(values[i] for i in late) / len(late)
        out[edge] = (e, l, l - e)
    return out


def classify_edges(deltas: Mapping[str, float], epsilon: float) -> dict[str, tuple[str, float]]:
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    cats = {}
    for edge, d in deltas.items():
        cats[edge] = IMPROVED if d > epsilon else WORSENED if d < -epsilon else UNCHANGED
    mags = [abs(d) for d in deltas.values()]
    scale = math.fsum(mags) / len(mags) if mags else 0.0
    all_flat = all(c == UNCHANGED for c in cats.values())
    return {
        edge: (cats[edge], 0.0 if all_flat or scale == 0 else abs(d) / scale)
        for edge, d in deltas.items()
    }


def default_epsilon(early_means: Sequence[float]) -> float:
    vals = np.asarray(list(early_means), dtype=float)
    if len(vals) < 2:
        return 0.0
    return UNCHANGED_FRACTION * float(vals.std())


def compare_metric(
    metric: str, series: Mapping[str, Sequence[float]], early: range, late: range,
    epsilon: float | None = None,
) -> list[PhaseComparison]:
    means = phase_means(series, early, late)
    eps = default_epsilon([m[0] for m in means.values()]) if epsilon is None else epsilon
    classes = classify_edges({e: m[2] for e, m in means.items()}, eps)
    return [
        PhaseComparison(metric, e, m[0], m[1], m[2], classes[e][0], classes[e][1])
        for e, m in means.items()
    ]


def category_counts(comparisons: Sequence[PhaseComparison]) -> dict[str, int]:
    return {c: sum(pc.category == c for pc in comparisons) for c in CATEGORIES}


def format_share(count: int, total: int) -> str:
    noun = "edge" if count == 1 else "edges"
    return f"{count} {noun} ({100.0 * count / total:.1f}%)" if total else f"{count} {noun}"


# ---------------------------------------------------------------------------
# run-level statistics


def _check_metrics(rows: Sequence[Mapping]) -> list[dict]:
    if not rows:
        raise AnalysisError("metrics are empty")
    rows = sorted(rows, key=lambda r: int(r["episode"]))
    episodes = [int(r["episode"]) for r in rows]
    if episodes != list(range(len(rows))):
        raise AnalysisError("metrics are incomplete: episodes are not 0..n-1 without gaps")
    return [dict(r) for r in rows]


def summarize_run(rows: Sequence[Mapping]) -> dict:
    """Headline statistics of one run; every number is a pure function of ``rows``."""
    rows = _check_metrics(rows)
    col = lambda k: np.array([float(r[k]) for r in rows])
    total = col("total_reward")
    n = len(rows)
    early, late = phase_windows(n)
    phase = lambda v: (float(v[early.start:early.stop].mean()), float(v[late.start:late.stop].mean()))
    best = int(np.argmax(total))
    out = {
        "scenario": int(rows[0]["scenario"]),
        "seed": int(rows[0]["seed"]),
        "episodes": n,
        "early_window": (early.start, early.stop - 1),
        "late_window": (late.start, late.stop - 1),
        "initial": float(total[0]),
        "optimum": float(total[best]),
        "optimum_episode": best,
        "average_increase": float((total[-1] - total[0]) / (n - 1)) if n > 1 else 0.0,
        "optimum_gain": float(total[best] - total[0]),
        "total_early_late": phase(total),
        "sub_rewards": {},
        "row_shifts": {},
    }
    for part in ("r_sidewalk", "r_ped", "r_veh", "r_park"):
        v = col(f"{part}_sum")
        e, l = phase(v)
        out["sub_rewards"][part] = {"mean": float(v.mean()), "early": e, "late": l, "delta": l - e}
    for part in ("sidewalk", "veh", "park"):
        e, l = phase(col(f"mean_beta_{part}"))
        out["row_shifts"][part] = {
            "early": e, "late": l, "delta": l - e,
            "relative_pct": 100.0 * (l - e) / e if e else float("nan"),
            "sign": int(np.sign(l - e)),
        }
    return out


def edge_series(edge_rows: Sequence[Mapping], metric: str, n_episodes: int) -> dict[str, list[float]]:
    series: dict[str, list] = {}
    for r in edge_rows:
        series.setdefault(r["edge_id"], [None] * n_episodes)
        ep = int(r["episode"])
        if ep < n_episodes:
            series[r["edge_id"]][ep] = float(r[metric])
    for edge, vals in series.items():
        if any(v is None for v in vals):
            raise AnalysisError(f"edge metrics for {edge} are incomplete")
    return series


def curves(rows: Sequence[Mapping]) -> list[dict]:
    return [
        {"episode": int(r["episode"]), "scenario": int(r["scenario"]),
         "total": float(r["total_reward"]), "r_sidewalk": float(r["r_sidewalk_sum"]),
         "r_ped": float(r["r_ped_sum"]), "r_veh": float(r["r_veh_sum"]),
         "r_park": float(r["r_park_sum"])}
        for r in _check_metrics(rows)
    ]


# ---------------------------------------------------------------------------
# files


def read_rows(path: str | Path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise AnalysisError(f"cannot read {path}: {exc}") from exc


def write_rows(path: str | Path, columns: Sequence[str], rows: Sequence[Mapping]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def _cell(v) -> str:
    # repr keeps floats round-trippable, so reruns are byte-identical
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def render_summary(summary: dict, comparisons: Mapping[str, Sequence[PhaseComparison]],
                   header: str = "") -> str:
    s = summary
    lines = []
    if header:
        lines.append(header)
    e0, e1 = s["early_window"]
    l0, l1 = s["late_window"]
    lines.append(f"scenario {s['scenario']}, seed {s['seed']}, {s['episodes']} episodes")
    lines.append(f"early phase: episodes {e0}-{e1}; late phase: episodes {l0}-{l1}")
    if s["episodes"] != REFERENCE_EPISODES:
        lines.append(f"(windows are the first and last third of a {s['episodes']}-episode run)")
    lines.append("")
    lines.append("cumulative reward per episode (sum over all edges and slots)")
    lines.append(f"  initial            {s['initial']:.2f}")
    lines.append(f"  optimum            {s['optimum']:.2f} (episode {s['optimum_episode']})")
    lines.append(f"  average increase   {s['average_increase']:.4f} per episode, (last - first) / (n - 1)")
    lines.append(f"  optimum - initial  {s['optimum_gain']:.2f}")
    e, l = s["total_early_late"]
    lines.append(f"  early mean {e:.2f}, late mean {l:.2f}")
    lines.append("")
    lines.append("sub-reward sums per episode (mean over all episodes; early -> late)")
    for part, d in s["sub_rewards"].items():
        lines.append(f"  {part:<11} {d['mean']:10.2f}   {d['early']:.2f} -> {d['late']:.2f} ({d['delta']:+.2f})")
    lines.append("")
    lines.append("right-of-way shares (mean over edges and slots; early -> late)")
    for part, d in s["row_shifts"].items():
        sign = {1: "up", -1: "down", 0: "flat"}[d["sign"]]
        lines.append(f"  {part:<9} {d['early']:.4f} -> {d['late']:.4f} "
                     f"({d['relative_pct']:+.2f}% of the early share, {sign})")
    if comparisons:
        lines.append("")
        lines.append("per-edge categories (unchanged when |delta| <= 1% of the cross-edge "
                     "std of early means; per-edge values are sums over one day's slots)")
        for metric, comps in comparisons.items():
            counts = category_counts(comps)
            n = len(comps)
            # for shares a rise is not an improvement, just a shift
            words = SHARE_WORDS if metric.startswith("beta_") else dict(zip(CATEGORIES, CATEGORIES))
            lines.append(f"  {metric:<13} " + ", ".join(
                f"{words[c]} {format_share(counts[c], n)}" for c in CATEGORIES))
    return "\n".join(lines) + "\n"


def analyze_run(run_dir: str | Path, out_dir: str | Path | None = None,
                figures: bool = True) -> dict:
    """Write edges_<metric>.csv, curves.csv and summary.txt for a run directory."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "analysis"
    rows = read_rows(run_dir / "metrics.csv")
    summary = summarize_run(rows)
    n = summary["episodes"]
    early, late = phase_windows(n)
    comparisons: dict[str, list[PhaseComparison]] = {}
    edge_file = run_dir / "edge_metrics.csv"
    edge_rows = read_rows(edge_file) if edge_file.exists() else []
    out_dir.mkdir(parents=True, exist_ok=True)
    if edge_rows:
        for metric in EDGE_METRICS:
            comps = compare_metric(metric, edge_series(edge_rows, metric, n), early, late)
            comparisons[metric] = comps
            write_rows(out_dir / f"edges_{metric}.csv", EDGE_TABLE_COLUMNS, [
                {"edge_id": c.edge_id, "early": c.early, "late": c.late, "delta": c.delta,
                 "category": c.category, "relative_magnitude": c.relative_magnitude}
                for c in comps
            ])
    curve_rows = curves(rows)
    write_rows(out_dir / "curves.csv", CURVE_COLUMNS, curve_rows)
    (out_dir / "summary.txt").write_text(render_summary(summary, comparisons))
    if figures:
        from .plotting import plot_curves, plot_edge_deltas
        plot_curves(curve_rows, out_dir / "curves.png")
        for metric, comps in comparisons.items():
            plot_edge_deltas(comps, out_dir / f"edges_{metric}.png")
    return {"summary": summary, "comparisons": comparisons, "out_dir": out_dir}

"""Run configured sweeps and render their results."""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..covering import (AcceptanceSet, CoveringConfig, CoveringReport, DistortionMeasure,
                        monte_carlo_covering)
from ..errors import CovlabError
from ..multiterminal import Frontier, hamming_table, pair_distortion, region_sweep
from ..prob import FiniteDistribution, compose_markov
from .config import ExperimentConfig, distortion_table, parse_kernel_spec

CSV_COLUMNS = ("scenario_id", "n", "gamma", "trial", "m_n", "miss_prob", "baseline_d",
               "achieved_d", "fallback_rate", "distinct_codewords", "status")
REGION_COLUMNS = ("D", "R1", "R2", "sum_rate", "channel_hash")


@dataclass(frozen=True)
class PointResult:
    index: int
    n: int
    gamma: float
    report: CoveringReport | None
    error: str | None = None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass(frozen=True)
class RunManifest:
    config: dict
    scenario_id: str
    version: str
    wall_times: tuple[float, ...]
    rng_streams: dict

    def to_json(self) -> str:
        return json.dumps({"scenario_id": self.scenario_id, "version": self.version,
                           "config": self.config, "wall_time_s": list(self.wall_times),
                           "rng_streams": self.rng_streams}, indent=2, sort_keys=True)


@dataclass(frozen=True)
class RunResult:
    scenario_id: str
    points: tuple[PointResult, ...]
    manifest: RunManifest

    @property
    def partial(self) -> bool:
        return any(not p.ok for p in self.points)


def build_covering_inputs(cfg: ExperimentConfig):
    """Triple, acceptance set and distortion for a covering scenario.

    The source is read as ``(x1, x2)``; ``V = X1`` is the covered terminal and
    ``U = X2``, so ``P(u, v)`` is the transposed source table.
    """
    joint_uv = FiniteDistribution(cfg.source.weights.T)
    triple = compose_markov(joint_uv, cfg.kernel, 1)
    ku, _, kw = triple.sizes
    dist = DistortionMeasure.from_table(distortion_table(cfg, ku, kw))
    acc = cfg.values["acceptance"]
    if acc["kind"] == "full":
        a = AcceptanceSet.full()
    elif acc["kind"] == "distortion_threshold":
        a = AcceptanceSet.distortion_threshold(dist, acc["level"], acc["margin"])
    else:
        a = AcceptanceSet.density_typical(triple.joint_uw, acc["radius"])
    return triple, a, dist


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """One covering report per ``(n, gamma)`` sweep point; a point that fails
    (typically on a capacity limit) records its error and the rest still run."""
    triple, acceptance, dist = build_covering_inputs(cfg)
    sweep = cfg.values["sweep"]
    points = cfg.sweep_points()

    def one(i):
        n, gamma = points[i]
        t0 = time.perf_counter()
        try:
            cc = CoveringConfig(gamma=gamma, blocklength=n, trials=sweep["trials"], seed=sweep["seed"],
                                m_cap=sweep["m_cap"], method=sweep["method"])
            rep = monte_carlo_covering(triple, acceptance, dist, cc)
            return PointResult(i, n, gamma, rep, None, time.perf_counter() - t0)
        except (CovlabError, MemoryError) as e:
            return PointResult(i, n, gamma, None, f"{type(e).__name__}: {e}", time.perf_counter() - t0)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = tuple(pool.map(one, range(len(points))))
    else:
        results = tuple(one(i) for i in range(len(points)))
    streams = {f"n={n},gamma={g!r}": f"trial t uses SeedSequence(entropy={sweep['seed']}, spawn_key=(t,))"
               for n, g in points}
    manifest = RunManifest(cfg.echo(), cfg.scenario_id, __version__,
                           tuple(r.wall_time for r in results), streams)
    return RunResult(cfg.scenario_id, results, manifest)


def _fmt(x) -> str:
    return repr(float(x))


def emit_csv(run: RunResult) -> str:
    """One row per trial of each sweep point; a failed point gets a single
    row with status ``error``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in run.points:
        if not p.ok:
            w.writerow([run.scenario_id, p.n, _fmt(p.gamma), "", "", "", "", "", "", "", "error"])
            continue
        r = p.report
        for t in r.per_trial:
            w.writerow([run.scenario_id, p.n, _fmt(p.gamma), t.trial, r.m_used, _fmt(t.miss_prob),
                        _fmt(r.baseline_distortion), _fmt(t.achieved_distortion),
                        _fmt(t.fallback_rate), t.distinct_codewords, "ok"])
    return buf.getvalue()


def _nonincreasing(xs, slack) -> bool:
    return all(b <= a + slack for a, b in zip(xs, xs[1:]))


def trend_verdicts(run: RunResult, miss_slack: float = 0.02, excess_slack: float = 0.01) -> dict:
    """Per-gamma checks of the three covering conclusions along the n sweep."""
    out = {}
    ok = [p for p in run.points if p.ok]
    for g in sorted({p.gamma for p in ok}):
        pts = sorted((p for p in ok if p.gamma == g), key=lambda p: p.n)
        miss = [p.report.miss_prob for p in pts]
        exc = [p.report.distortion_excess for p in pts]
        out[g] = {
            "n": [p.n for p in pts],
            "cardinality": all(p.report.cardinality_ok for p in pts),
            "covering_trend": len(pts) > 1 and _nonincreasing(miss, miss_slack) and miss[-1] < miss[0],
            "excess_trend": _nonincreasing(exc, excess_slack),
            "miss": miss,
            "excess": exc,
        }
    return out


def emit_summary(run: RunResult) -> str:
    lines = [f"scenario {run.scenario_id}"]
    failed = [p for p in run.points if not p.ok]
    for g, v in trend_verdicts(run).items():
        lines.append(f"gamma={g!r} n={v['n']}")
        lines.append("  miss_prob: " + " ".join(f"{x:.6f}" for x in v["miss"]))
        lines.append("  distortion excess: " + " ".join(f"{x:+.6f}" for x in v["excess"]))
        for key, label in (("cardinality", "cardinality bound"), ("covering_trend", "covering trend"),
                           ("excess_trend", "distortion-excess trend")):
            lines.append(f"  {label}: {'PASS' if v[key] else 'FAIL'}")
    for p in failed:
        lines.append(f"point n={p.n} gamma={p.gamma!r}: error ({p.error})")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# region runs


def region_distortion(cfg: ExperimentConfig) -> np.ndarray:
    kx1, kx2 = cfg.source.shape
    kind = cfg.values["region"]["distortion"]
    if kind == "hamming_pair":
        return pair_distortion(hamming_table(kx1), hamming_table(kx2))
    if kind == "hamming_first":
        return pair_distortion(hamming_table(kx1), None, w1=1.0, kx2=kx2)
    if kind == "hamming_second":
        return pair_distortion(None, hamming_table(kx2), w2=1.0, kx1=kx1)
    raise CovlabError(f"unknown region distortion {kind!r}")


def run_region(cfg: ExperimentConfig, threads: int = 1) -> tuple[list[Frontier], RunManifest]:
    reg = cfg.values["region"]
    t = region_distortion(cfg)
    k2 = None if reg["k2"] is None else parse_kernel_spec(reg["k2"], cfg.base_dir)
    aux = tuple(reg["aux_sizes"]) if reg["aux_sizes"] is not None else None

    def one(d):
        t0 = time.perf_counter()
        fr = region_sweep(cfg.source, t, d, aux, reg["points"], k2_fixed=k2)
        return fr, time.perf_counter() - t0

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            res = list(pool.map(one, reg["target_d"]))
    else:
        res = [one(d) for d in reg["target_d"]]
    manifest = RunManifest(cfg.echo(), cfg.scenario_id, __version__, tuple(w for _, w in res),
                           {"region": "deterministic lattice sweep, no RNG"})
    return [f for f, _ in res], manifest


def emit_region_csv(frontiers: list[Frontier]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGION_COLUMNS)
    for fr in frontiers:
        for d, r1, r2, s, h in fr.csv_rows():
            w.writerow([_fmt(d), _fmt(r1), _fmt(r2), _fmt(s), h])
    return buf.getvalue()


def emit_region_summary(cfg: ExperimentConfig, frontiers: list[Frontier]) -> str:
    lines = [f"scenario {cfg.scenario_id} (lattice inner approximation of the region)"]
    for fr in frontiers:
        if not fr.feasible:
            lines.append(f"D={fr.target_d!r}: infeasible on this grid")
            continue
        lines.append(f"D={fr.target_d!r}: min R1 {fr.min_r1:.6f}, min R2 {fr.min_r2:.6f}, "
                     f"min sum {fr.min_sum_rate:.6f}, {len(fr.corners())} corners, "
                     f"{fr.evaluated} channel pairs")
    return "\n".join(lines) + "\n"

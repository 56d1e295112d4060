"""Surface-tension sweep harness: shared initial data, decreasing sigma,
discrete C^2-style distances, and a Rayleigh-Taylor-gated verdict.

Distances use the discrete H^2 norm as the computable stand-in for C^2
closeness, taking the sup over stored snapshot times.  The monotonicity
verdict is withheld whenever any member violates the requested sign
condition min(-d3 q) >= c0 somewhere along its run, since the sigma-uniform
behaviour is conditional on that bound.  Members run sequentially and
deterministically; they share the grid, time step, and snapshot cadence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .evolve import RunConfig, RunResult, run
from .grid import Grid
from .state import State

log = logging.getLogger(__name__)


def state_distance(a: State, b: State, grid: Grid) -> float:
    """|psi_a - psi_b|_{H2(Sigma)} + ||v_a - v_b||_{H2} + sum_j ||dF_j||_{H2}."""
    d = grid.sobolev_norm_fast(a.psi - b.psi, 2)
    d += float(np.sqrt(sum(
        grid.sobolev_norm_fast(a.v[i] - b.v[i], 2) ** 2 for i in range(3))))
    for j in range(3):
        d += float(np.sqrt(sum(
            grid.sobolev_norm_fast(a.F[j][i] - b.F[j][i], 2) ** 2
            for i in range(3))))
    return d


def run_distance(r1: RunResult, r2: RunResult) -> float:
    """Sup over shared snapshot times of the state distance."""
    if len(r1.snapshots) != len(r2.snapshots) or any(
            abs(t1 - t2) > 1e-12 for t1, t2 in
            zip(r1.snapshot_times, r2.snapshot_times)):
        raise ConfigError("sweep members must share snapshot times")
    return max(state_distance(a, b, r1.grid)
               for a, b in zip(r1.snapshots, r2.snapshots))


@dataclass
class SweepMember:
    sigma: float
    rt_min: float
    aborted: str | None
    result: RunResult


@dataclass
class SweepReport:
    members: list[SweepMember]
    pair_distances: list[tuple[float, float, float]]  # (sigma_i, sigma_j, d)
    rt_required: float
    rt_ok: bool
    monotone: bool | None
    verdict: str
    aborted: bool = False
    limit_distances: list[tuple[float, float]] = field(default_factory=list)

    def csv_rows(self):
        rows = ["sigma_i,sigma_j,distance,rt_min_i,verdict"]
        for (si, sj, d) in self.pair_distances:
            rt_i = next(m.rt_min for m in self.members if m.sigma == si)
            rows.append(f"{si:.6e},{sj:.6e},{d:.16e},{rt_i:.6e},{self.verdict}")
        for (si, d) in self.limit_distances:
            rt_i = next(m.rt_min for m in self.members if m.sigma == si)
            rows.append(f"{si:.6e},{0.0:.6e},{d:.16e},{rt_i:.6e},{self.verdict}")
        return rows

    def summary(self) -> str:
        lines = [
            "sigma sweep summary",
            f"  members: {[m.sigma for m in self.members]}",
            f"  rt requirement: min(-d3 q) >= {self.rt_required:g}"
            f" -> {'holds' if self.rt_ok else 'violated'}",
        ]
        for (si, sj, d) in self.pair_distances:
            lines.append(f"  d({si:g}, {sj:g}) = {d:.6e}")
        for (si, d) in self.limit_distances:
            lines.append(f"  d({si:g}, 0) = {d:.6e}")
        lines.append(f"  verdict: {self.verdict}")
        return "\n".join(lines)


def sweep_sigma(base: RunConfig, sigmas) -> SweepReport:
    """Run each sigma from shared initial data and measure pair distances.

    ``sigmas`` must be non-increasing and non-negative (equal entries are
    allowed and give zero distance); the monotonicity verdict only applies
    to strictly decreasing lists.
    """
    sigmas = [float(s) for s in sigmas]
    if any(s < 0 for s in sigmas):
        raise ConfigError("sigma values must be >= 0")
    if any(s2 > s1 for s1, s2 in zip(sigmas, sigmas[1:])):
        raise ConfigError("sigma list must be non-increasing")

    members: list[SweepMember] = []
    for s in sigmas:
        cfg = replace(base, init=replace(base.init, sigma=s))
        result = run(cfg)
        rt_min = min(d.rt_min for d in result.diagnostics)
        members.append(SweepMember(sigma=s, rt_min=rt_min,
                                   aborted=result.aborted, result=result))
        log.info("sweep member sigma=%g: rt_min=%.4f aborted=%s",
                 s, rt_min, result.aborted)

    aborted = any(m.aborted for m in members)
    pair = []
    if not aborted:
        for m1, m2 in zip(members, members[1:]):
            pair.append((m1.sigma, m2.sigma,
                         run_distance(m1.result, m2.result)))

    rt_ok = all(m.rt_min >= base.rt_c0 for m in members)
    strict = all(s1 > s2 for s1, s2 in zip(sigmas, sigmas[1:]))
    if aborted:
        verdict, monotone = "void (member aborted)", None
    elif not rt_ok:
        verdict, monotone = "withheld (sign condition violated)", None
    elif not strict:
        verdict, monotone = "trivial (non-strict sigma list)", None
    else:
        ds = [d for (_, _, d) in pair]
        monotone = all(d1 > d2 for d1, d2 in zip(ds, ds[1:]))
        verdict = "monotone decreasing" if monotone else "not monotone"
    return SweepReport(members=members, pair_distances=pair,
                       rt_required=base.rt_c0, rt_ok=rt_ok,
                       monotone=monotone, verdict=verdict, aborted=aborted)


def limit_compare(report: SweepReport, zero_result: RunResult) -> SweepReport:
    """Attach distances d(sigma_i, 0) against a completed sigma = 0 run."""
    if zero_result is None or zero_result.aborted:
        raise ConfigError("limit comparison needs a completed sigma = 0 run")
    if abs(zero_result.final.sigma) != 0.0:
        raise ConfigError("reference run must have sigma = 0")
    report.limit_distances = [
        (m.sigma, run_distance(m.result, zero_result))
        for m in report.members if m.sigma > 0.0]
    if report.rt_ok and report.limit_distances:
        ds = [d for (_, d) in report.limit_distances]
        decreasing = all(d1 > d2 for d1, d2 in zip(ds, ds[1:]))
        report.verdict = ("monotone decreasing"
                          if decreasing else "not monotone")
        report.monotone = decreasing
    elif not report.rt_ok:
        report.verdict = "withheld (sign condition violated)"
    return report

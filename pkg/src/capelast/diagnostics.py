"""Energies, the Rayleigh-Taylor monitor, and the lemma-check battery."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .good_unknowns import Calculus
from .graphmap import Cutoff, GraphMap, div_phi, dphi
from .grid import Grid
from .state import History, State

CSV_COLUMNS = ("t", "E_cons", "E_high", "div_v", "div_F", "FN_top",
               "v3_bot", "F3_bot", "rt_min", "dt")


@dataclass
class DiagnosticsRecord:
    t: float
    E_cons: float
    E_high: float
    div_v: float
    div_F: float
    FN_top: float
    v3_bot: float
    F3_bot: float
    rt_min: float
    dt: float

    def csv_row(self) -> str:
        return ",".join(f"{getattr(self, c):.16e}" for c in CSV_COLUMNS)


def conserved_energy(state: State, gm: GraphMap) -> float:
    """(1/2) sum_k int |F_k|^2 d3phi + (1/2) int |v|^2 d3phi
    + sigma int_Sigma sqrt(1 + |grad psi|^2)."""
    g = gm.grid
    e = 0.5 * g.quad_volume(sum(state.v[i] ** 2 for i in range(3)) * gm.d3phi)
    for j in range(3):
        e += 0.5 * g.quad_volume(
            sum(state.F[j][i] ** 2 for i in range(3)) * gm.d3phi)
    p1 = g.d_tan(state.psi, 1)
    p2 = g.d_tan(state.psi, 2)
    e += state.sigma * g.quad_surface(np.sqrt(1.0 + p1 * p1 + p2 * p2))
    return float(e)


def higher_energy(hist: History, gm: GraphMap, kmax: int = 1) -> float:
    """Truncated graded energy: sum over k <= kmax of the (4-k)-norms of
    dt^k of F, v, and sqrt(sigma) grad(psi), plus the pressure norms for
    k <= min(kmax, 3)."""
    hist.require(kmax + 1, f"higher energy with {kmax} time derivatives")
    grid = gm.grid
    calc = Calculus(hist, gm.cutoff, grid)
    sigma = hist.newest.sigma
    total = 0.0
    Sv = [calc.series(f"v{i+1}") for i in range(3)]
    SF = [[calc.series(f"f{i+1}{j+1}") for i in range(3)] for j in range(3)]
    Sq = calc.series("q")
    Spsi = calc.series("psi")
    for k in range(kmax + 1):
        s = 4 - k
        total += math.sqrt(sum(
            grid.sobolev_norm_fast(calc.dt(Sv[i], k)[-1], s) ** 2
            for i in range(3)))
        total += math.sqrt(sum(
            grid.sobolev_norm_fast(calc.dt(SF[j][i], k)[-1], s) ** 2
            for i in range(3) for j in range(3)))
        psik = calc.dt(Spsi, k)[-1]
        total += math.sqrt(sigma) * math.sqrt(
            grid.sobolev_norm_fast(grid.d_tan(psik, 1), s) ** 2
            + grid.sobolev_norm_fast(grid.d_tan(psik, 2), s) ** 2)
        if k <= 3:
            total += grid.sobolev_norm_fast(calc.dt(Sq, k)[-1], s)
    return float(total)


@dataclass
class RTRecord:
    rt_min: float
    holds: bool


def rt_monitor(q: np.ndarray, gm: GraphMap, grid: Grid,
               c0_req: float) -> RTRecord:
    """min over the top plane of -d3(q), and whether it clears c0_req."""
    rt = -grid.d_vert(q)[:, :, 0]
    rt_min = float(rt.min())
    return RTRecord(rt_min=rt_min, holds=bool(rt_min >= c0_req))


# -- lemma residuals -----------------------------------------------------------

def commutation_residual(f: np.ndarray, gm: GraphMap, i: int, j: int) -> float:
    """|| [d_i^phi, d_j^phi] f ||_0 relative to ||f||_2."""
    g = gm.grid
    resid = dphi(dphi(f, j, gm), i, gm) - dphi(dphi(f, i, gm), j, gm)
    return g.norm0(resid) / max(g.sobolev_norm(f, 2), 1e-300)


def ibp_residual(f: np.ndarray, h: np.ndarray, gm: GraphMap, i: int) -> float:
    """Defect of int (d_i^phi f) h d3phi + int f (d_i^phi h) d3phi against
    the surface terms, relative; the bottom term uses the outward normal."""
    g = gm.grid
    lhs = (g.quad_volume(dphi(f, i, gm) * h * gm.d3phi)
           + g.quad_volume(f * dphi(h, i, gm) * gm.d3phi))
    surf = g.quad_surface(f[:, :, 0] * h[:, :, 0] * gm.N[i - 1])
    if i == 3:
        surf += g.quad_surface(f[:, :, -1] * h[:, :, -1] * (-1.0))
    return abs(lhs - surf) / (1.0 + abs(lhs) + abs(surf))


def transport_residual(hist: History, cutoff: Cutoff, grid: Grid,
                       fieldkey="q", node: int | None = None) -> float:
    """Defect of d/dt int f d3phi = int (D_t^phi f + f div^phi v) d3phi.

    The time derivative of the integral uses the stored-slice interpolant;
    when the kinematic and bottom conditions hold and div^phi v = 0 the
    correction term vanishes and this is the transport theorem.
    """
    calc = Calculus(hist, cutoff, grid)
    if node is None:
        node = len(hist) // 2  # interior node: most accurate differencing
    S = calc.series(fieldkey)
    integrals = np.array([
        grid.quad_volume(S[k] * calc.gms[k].d3phi) for k in range(len(hist))])
    from .good_unknowns import fornberg_weights
    w = fornberg_weights(calc.times[node], calc.times, 1)
    dIdt = float(w @ integrals)
    Dt = calc.material_series(S)[node]
    corr = S[node] * div_phi(hist[node].v, calc.gms[node])
    rhs = grid.quad_volume((Dt + corr) * calc.gms[node].d3phi)
    return abs(dIdt - rhs) / (1.0 + abs(dIdt) + abs(rhs))


def lemma_checks(hist: History, gm: GraphMap, grid: Grid) -> list[dict]:
    """One residual row per lemma instance over the stored data.

    Commutation and integration by parts run on the newest slice's fields;
    transport runs over the whole history.
    """
    rows = []
    X1, X2, X3 = grid.mesh_volume()
    probe = np.cos(X1) * np.cos(X2) * np.exp(X3)
    probe2 = np.sin(X2) * (1.0 + X3) ** 2
    for (i, j) in ((1, 2), (1, 3), (2, 3)):
        rows.append({"lemma": "commutation", "case": f"d{i}^phi,d{j}^phi",
                     "residual": commutation_residual(probe, gm, i, j)})
    for i in (1, 2, 3):
        rows.append({"lemma": "integration_by_parts", "case": f"i={i}",
                     "residual": ibp_residual(probe, probe2, gm, i)})
    for key in ("q", "v1"):
        if len(hist) >= 5:
            rows.append({"lemma": "transport", "case": f"field={key}",
                         "residual": transport_residual(
                             hist, gm.cutoff, grid, key)})
    return rows

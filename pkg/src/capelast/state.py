"""One time slice of the unknowns, initial data, and constraint residuals.

The deformation tensor is stored column-wise: ``F[j]`` is the j-th column
as a stacked vector field, since the evolution and every constraint act on
columns.  ``State.psi_t`` is normally None, meaning the kinematic value
v . N is used wherever the time derivative of the surface is needed;
manufactured test states may carry an explicit override.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import fieldio
from .elliptic import pressure_rhs, project_divfree, solve_poisson_phi
from .errors import ConfigError, InsufficientHistoryError
from .graphmap import (
    Cutoff,
    GraphMap,
    build_graphmap,
    div_phi,
    make_cutoff,
    mean_curvature,
)
from .grid import Grid, make_grid


@dataclass
class State:
    t: float
    psi: np.ndarray          # (nx, ny)
    v: np.ndarray            # (3, nx, ny, nz)
    F: np.ndarray            # (3, 3, nx, ny, nz), F[j] = column j
    q: np.ndarray            # (nx, ny, nz)
    sigma: float
    psi_t: np.ndarray | None = None

    def copy(self) -> "State":
        return State(t=self.t, psi=self.psi.copy(), v=self.v.copy(),
                     F=self.F.copy(), q=self.q.copy(), sigma=self.sigma,
                     psi_t=None if self.psi_t is None else self.psi_t.copy())

    def surface_velocity(self, grid: Grid) -> np.ndarray:
        """dt(psi): the explicit override if present, else v . N on Sigma."""
        if self.psi_t is not None:
            return self.psi_t
        d1 = grid.d_tan(self.psi, 1)
        d2 = grid.d_tan(self.psi, 2)
        vtop = self.v[:, :, :, 0]
        return -vtop[0] * d1 - vtop[1] * d2 + vtop[2]

    def graphmap(self, cutoff: Cutoff, grid: Grid) -> GraphMap:
        return build_graphmap(self.psi, self.surface_velocity(grid),
                              cutoff, grid)


def zero_state(grid: Grid, sigma: float) -> State:
    n = (grid.nx, grid.ny, grid.nz)
    return State(t=0.0, psi=np.zeros(n[:2]), v=np.zeros((3,) + n),
                 F=np.zeros((3, 3) + n), q=np.zeros(n), sigma=sigma)


@dataclass
class ConstraintResiduals:
    div_v: float
    div_F: float
    FN_top: float
    F3_bottom: float
    v3_bottom: float

    def as_dict(self):
        return dict(div_v=self.div_v, div_F=self.div_F, FN_top=self.FN_top,
                    F3_bottom=self.F3_bottom, v3_bottom=self.v3_bottom)

    def max(self) -> float:
        return max(self.div_v, self.div_F, self.FN_top, self.F3_bottom,
                   self.v3_bottom)


def constraint_residuals(state: State, gm: GraphMap) -> ConstraintResiduals:
    g = gm.grid
    div_v = g.norm0(div_phi(state.v, gm))
    div_F = 0.0
    FN = 0.0
    F3b = 0.0
    for j in range(3):
        div_F = max(div_F, g.norm0(div_phi(state.F[j], gm)))
        top = state.F[j][:, :, :, 0]
        FN = max(FN, float(np.abs(top[0] * gm.N[0] + top[1] * gm.N[1]
                                  + top[2] * gm.N[2]).max()))
        F3b = max(F3b, float(np.abs(state.F[j][2][:, :, -1]).max()))
    v3b = float(np.abs(state.v[2][:, :, -1]).max())
    return ConstraintResiduals(div_v=div_v, div_F=div_F, FN_top=FN,
                               F3_bottom=F3b, v3_bottom=v3b)


# -- initial data ------------------------------------------------------------

@dataclass
class InitSpec:
    """Recipe bundle for one run; everything a State needs at t = 0."""

    nx: int = 16
    ny: int = 16
    nz: int = 9
    b: float = 1.0
    sigma: float = 0.1
    delta0: float | None = None
    psi_modes: tuple = ()            # (kx, ky, amp, phase) entries
    v_recipe: object = None
    F_recipes: tuple = (None, None, None)
    seed: int = 0
    dealias: bool = True
    strict_cutoff: bool = False
    project: bool = True
    pressure_tol: float = 1e-11

    def make_grid(self) -> Grid:
        return make_grid(self.nx, self.ny, self.nz, self.b,
                         dealias=self.dealias)

    def build_psi0(self, grid: Grid) -> np.ndarray:
        X1, X2 = grid.mesh_surface()
        psi = np.zeros((grid.nx, grid.ny))
        for kx, ky, amp, phase in self.psi_modes:
            psi += amp * np.cos(kx * X1 + ky * X2 + phase)
        return psi


def build_initial_data(spec: InitSpec, grid: Grid | None = None):
    """Construct (state, gm, cutoff) satisfying the compatibility constraints.

    Recipes are projected to divergence-free fields, the bottom conditions
    v3 = F_3j = 0 are imposed on the bottom plane, and the initial pressure
    solves the elliptic problem with the capillary Dirichlet datum on top
    and the Neumann datum from the momentum balance below.
    """
    if grid is None:
        grid = spec.make_grid()
    psi0 = spec.build_psi0(grid)
    delta0 = spec.delta0 if spec.delta0 is not None else grid.b / 8.0
    cutoff = make_cutoff(grid, delta0, float(np.abs(psi0).max()),
                         strict=spec.strict_cutoff)
    zero_surf = np.zeros((grid.nx, grid.ny))
    gm0 = build_graphmap(psi0, zero_surf, cutoff, grid)

    def realize(recipe):
        if recipe is None:
            return np.zeros((3, grid.nx, grid.ny, grid.nz))
        field = recipe.build(grid, gm0)
        if spec.project:
            field = project_divfree(field, gm0, grid, tol=spec.pressure_tol)
        field[2][:, :, -1] = 0.0
        return field

    v = realize(spec.v_recipe)
    F = np.stack([realize(r) for r in spec.F_recipes])

    state = State(t=0.0, psi=psi0, v=v, F=F,
                  q=np.zeros((grid.nx, grid.ny, grid.nz)), sigma=spec.sigma)
    gm = state.graphmap(cutoff, grid)
    pr = pressure_rhs(v, F, gm)
    dir_top = -spec.sigma * mean_curvature(psi0, grid)
    state.q = solve_poisson_phi(pr.rhs, dir_top, pr.neu_bottom, gm, grid,
                                tol=spec.pressure_tol)
    return state, gm, cutoff


# -- history -----------------------------------------------------------------

class History:
    """Ring buffer of recent states at uniform spacing, oldest first."""

    def __init__(self, maxlen: int = 5):
        if maxlen < 5:
            raise ConfigError(f"history length must be >= 5, got {maxlen}")
        self._dq: deque[State] = deque(maxlen=maxlen)

    def push(self, state: State):
        if len(self._dq) >= 1:
            last = self._dq[-1].t
            if state.t <= last:
                raise ConfigError("history times must increase")
        if len(self._dq) >= 2:
            dt0 = self._dq[1].t - self._dq[0].t
            dt = state.t - self._dq[-1].t
            if abs(dt - dt0) > 1e-9 * max(1.0, abs(dt0)):
                raise ConfigError("history spacing must stay uniform")
        self._dq.append(state)

    def __len__(self):
        return len(self._dq)

    def __getitem__(self, i) -> State:
        return self._dq[i]

    @property
    def maxlen(self):
        return self._dq.maxlen

    @property
    def newest(self) -> State:
        if not self._dq:
            raise InsufficientHistoryError("history is empty")
        return self._dq[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self._dq])

    @property
    def dt(self) -> float:
        if len(self._dq) < 2:
            raise InsufficientHistoryError("need two slices for a spacing")
        return self._dq[1].t - self._dq[0].t

    def require(self, nslices: int, what: str = "operation"):
        if len(self._dq) < nslices:
            raise InsufficientHistoryError(
                f"{what} needs {nslices} stored slices, have {len(self._dq)}")

    def graphmaps(self, cutoff: Cutoff, grid: Grid) -> list[GraphMap]:
        return [s.graphmap(cutoff, grid) for s in self._dq]


# -- serialization ------------------------------------------------------------

_FIELD_FILES = {
    "psi": ("psi.fld", 2),
    "q": ("q.fld", 3),
    **{f"v{i+1}": (f"v{i+1}.fld", 3) for i in range(3)},
    **{f"f{i+1}{j+1}": (f"f{i+1}{j+1}.fld", 3)
       for i in range(3) for j in range(3)},
}


def save_state(state: State, grid: Grid, out_dir: str):
    """One dump file per field plus a JSON manifest."""
    os.makedirs(out_dir, exist_ok=True)
    dims = (grid.nx, grid.ny, grid.nz, grid.b)
    fieldio.write_field(os.path.join(out_dir, "psi.fld"), state.psi, *dims)
    fieldio.write_field(os.path.join(out_dir, "q.fld"), state.q, *dims)
    for i in range(3):
        fieldio.write_field(os.path.join(out_dir, f"v{i+1}.fld"),
                            state.v[i], *dims)
        for j in range(3):
            fieldio.write_field(os.path.join(out_dir, f"f{i+1}{j+1}.fld"),
                                state.F[j][i], *dims)
    fieldio.write_manifest(os.path.join(out_dir, "manifest.json"), {
        "t": state.t, "sigma": state.sigma,
        "b": grid.b, "nx": grid.nx, "ny": grid.ny, "nz": grid.nz,
        "fields": sorted(_FIELD_FILES),
    })


def load_state(in_dir: str):
    """Returns (state, grid) reconstructed from a dump directory."""
    manifest = fieldio.read_manifest(os.path.join(in_dir, "manifest.json"))
    grid = make_grid(manifest["nx"], manifest["ny"], manifest["nz"],
                     manifest["b"])
    psi, _ = fieldio.read_field(os.path.join(in_dir, "psi.fld"))
    q, _ = fieldio.read_field(os.path.join(in_dir, "q.fld"))
    v = np.stack([fieldio.read_field(os.path.join(in_dir, f"v{i+1}.fld"))[0]
                  for i in range(3)])
    F = np.empty((3, 3, grid.nx, grid.ny, grid.nz))
    for i in range(3):
        for j in range(3):
            F[j, i] = fieldio.read_field(
                os.path.join(in_dir, f"f{i+1}{j+1}.fld"))[0]
    state = State(t=float(manifest["t"]), psi=psi, v=v, F=F, q=q,
                  sigma=float(manifest["sigma"]))
    return state, grid

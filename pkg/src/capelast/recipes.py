"""Initial-field recipes.

A recipe builds one vector field on the grid.  The ``stream`` recipe uses
the twisted derivatives of a scalar potential that is constant on the
confining boundaries, which makes the result divergence-free and tangential
up to operator-commutator error; the projection in the initializer removes
the rest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graphmap import GraphMap, dphi
from .grid import Grid


def _zprofile(name: str, grid: Grid) -> np.ndarray:
    x3 = grid.x3
    b = grid.b
    if name == "one":
        return np.ones_like(x3)
    if name == "linear":
        return (x3 + b) / b
    if name == "sinh":
        return np.sinh(x3 + b) / np.sinh(b)
    if name == "confined":
        # vanishes at both planes, peak 1 mid-depth
        return -4.0 * x3 * (x3 + b) / (b * b)
    raise ConfigError(f"unknown vertical profile {name!r}")


@dataclass
class ShearRecipe:
    """component ``comp`` = amp * cos(k * x_dep + phase) * profile(x3)."""

    comp: int            # 1..3
    dep_axis: int        # 1 or 2
    k: int = 1
    amp: float = 0.1
    phase: float = 0.0
    profile: str = "one"

    def build(self, grid: Grid, gm: GraphMap) -> np.ndarray:
        X1, X2, _ = grid.mesh_volume()
        Xd = X1 if self.dep_axis == 1 else X2
        out = np.zeros((3, grid.nx, grid.ny, grid.nz))
        out[self.comp - 1] = (self.amp * np.cos(self.k * Xd + self.phase)
                              * _zprofile(self.profile, grid)[None, None, :])
        return out


@dataclass
class StreamRecipe:
    """(d3^phi theta, 0, -d1^phi theta) for theta = amp sin(k x1 + phase) mu(x3).

    ``plane="yz"`` swaps the roles of x1 and x2.  With mu(0) = 0 the field is
    tangential to the top surface exactly; with mu(-b) = 0 the bottom is
    impermeable exactly.
    """

    amp: float = 0.1
    k: int = 1
    phase: float = 0.0
    profile: str = "sinh"
    plane: str = "xz"

    def build(self, grid: Grid, gm: GraphMap) -> np.ndarray:
        X1, X2, _ = grid.mesh_volume()
        tan_axis = 1 if self.plane == "xz" else 2
        Xt = X1 if tan_axis == 1 else X2
        theta = (self.amp * np.sin(self.k * Xt + self.phase)
                 * _zprofile(self.profile, grid)[None, None, :])
        out = np.zeros((3, grid.nx, grid.ny, grid.nz))
        out[tan_axis - 1] = dphi(theta, 3, gm)
        out[2] = -dphi(theta, tan_axis, gm)
        return out


@dataclass
class RandomRecipe:
    """Band-limited random field; reproducible from the seed."""

    amp: float = 0.05
    kmax: int = 2
    seed: int = 0
    profile: str = "confined"

    def build(self, grid: Grid, gm: GraphMap) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        X1, X2, _ = grid.mesh_volume()
        mu = _zprofile(self.profile, grid)[None, None, :]
        out = np.zeros((3, grid.nx, grid.ny, grid.nz))
        for c in range(3):
            f = np.zeros_like(X1)
            for _ in range(3):
                k1 = int(rng.integers(-self.kmax, self.kmax + 1))
                k2 = int(rng.integers(-self.kmax, self.kmax + 1))
                f += rng.normal() * np.cos(k1 * X1 + k2 * X2
                                           + rng.uniform(0, 2 * np.pi))
            out[c] = self.amp * f * mu
        return out


def parse_recipe(text: str):
    """Parse ``name`` or ``name: key=val, key=val`` into a recipe object."""
    text = text.strip()
    if not text or text == "none":
        return None
    if ":" in text:
        name, _, argstr = text.partition(":")
    else:
        name, argstr = text, ""
    name = name.strip().lower()
    kwargs = {}
    for piece in argstr.replace(";", ",").split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "=" not in piece:
            raise ConfigError(f"bad recipe argument {piece!r} in {text!r}")
        key, _, val = piece.partition("=")
        key = key.strip()
        val = val.strip()
        if key in ("comp", "dep_axis", "k", "kmax", "seed"):
            kwargs[key] = int(val)
        elif key in ("amp", "phase"):
            kwargs[key] = float(val)
        else:
            kwargs[key] = val
    try:
        if name == "shear":
            return ShearRecipe(**kwargs)
        if name == "stream":
            return StreamRecipe(**kwargs)
        if name == "random":
            return RandomRecipe(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad arguments for recipe {name!r}: {exc}") from exc
    raise ConfigError(f"unknown recipe {name!r}")


def recipe_to_text(recipe) -> str:
    if recipe is None:
        return "none"
    name = {ShearRecipe: "shear", StreamRecipe: "stream",
            RandomRecipe: "random"}[type(recipe)]
    args = ", ".join(f"{k}={v}" for k, v in vars(recipe).items())
    return f"{name}: {args}"

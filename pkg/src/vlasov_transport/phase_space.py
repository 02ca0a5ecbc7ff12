"""Phase-space grids, initial data families, and lattice interpolation.

The state of the kinetic system lives on a tensor-product grid in (x, v):
a particle density f(x, v) sampled on the full lattice and a force field
B(x) sampled on the spatial axis alone.  Initial data comes from small
closed-form families (compactly supported product bumps for f, and
bump/Gaussian/uniform profiles for B) so that solvers can re-evaluate the
exact initial state at arbitrary off-grid points.

Interpolation is piecewise cubic with a 4-point Lagrange stencil per axis.
It reproduces polynomials of degree <= 3 per axis exactly and returns the
stored value bitwise when queried at a node.  Queries outside a density
lattice read as zero (densities are compactly supported with a two-cell
zero collar); queries outside a force-field profile are an error, because
the field has no meaningful extension beyond the truncated domain.  A
monotone-clipped variant limits each result to the range of the enclosing
cell's corner values, which preserves sign and sup bounds at the cost of
formal order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

__all__ = [
    "DomainExitError",
    "PhaseGrid",
    "DensityField",
    "TransportField",
    "InitialDataSpec",
    "BumpDensity",
    "ZeroDensity",
    "BumpField",
    "GaussianField",
    "UniformField",
    "ZeroField",
    "build_phase_grid",
    "sample_initial_data",
    "interpolate",
    "interp_profile",
    "interp_lattice",
]

# Queries within this fraction of a cell of a node snap onto the node, so
# node lookups are exact even when coordinates carry float noise.
_NODE_SNAP = 1e-8
# Out-of-range slack, in cell units, before a profile query is an error.
_RANGE_SLACK = 1e-9


class DomainExitError(RuntimeError):
    """A query left the truncated domain where a field is defined."""


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform tensor-product grid on [x_min, x_max] x [v_min, v_max]."""

    x_min: float
    x_max: float
    v_min: float
    v_max: float
    nx: int
    nv: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.v_min < self.v_max):
            raise ValueError("grid bounds must be strictly increasing")
        if self.nx < 4 or self.nv < 4:
            raise ValueError("grid needs at least 4 nodes per axis")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dv(self) -> float:
        return (self.v_max - self.v_min) / (self.nv - 1)

    @cached_property
    def x_nodes(self) -> np.ndarray:
        nodes = np.linspace(self.x_min, self.x_max, self.nx)
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def v_nodes(self) -> np.ndarray:
        nodes = np.linspace(self.v_min, self.v_max, self.nv)
        nodes.setflags(write=False)
        return nodes


def build_phase_grid(x_min, x_max, v_min, v_max, nx, nv) -> PhaseGrid:
    return PhaseGrid(float(x_min), float(x_max), float(v_min), float(v_max),
                     int(nx), int(nv))


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DensityField:
    """Density lattice of shape (nx, nv) at a fixed time."""

    grid: PhaseGrid
    values: np.ndarray
    time: float

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        if self.values.shape != (self.grid.nx, self.grid.nv):
            raise ValueError("density lattice shape does not match grid")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True)
class TransportField:
    """Force field sampled on the spatial axis of a grid at a fixed time."""

    grid: PhaseGrid
    values: np.ndarray
    time: float

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        if self.values.shape != (self.grid.nx,):
            raise ValueError("field profile shape does not match grid x-axis")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


# ---------------------------------------------------------------------------
# initial data families


def _bump(z: np.ndarray, power: int = 2) -> np.ndarray:
    # (1 - z^2)^power on |z| < 1, zero outside; C^(power-1) across the
    # support edge.
    core = np.clip(1.0 - z * z, 0.0, None)
    if power == 2:
        return core * core
    return core ** power


def _bump_prime(z: np.ndarray, power: int = 2) -> np.ndarray:
    core = np.clip(1.0 - z * z, 0.0, None)
    if power == 2:
        return -4.0 * z * core
    return -2.0 * power * z * core ** (power - 1)


@dataclass(frozen=True)
class BumpDensity:
    """Product bump A * (1-((x-cx)/w)^2)^p_+ * (1-((v-cv)/w)^2)^p_+.

    power p >= 2 sets the smoothness across the support edge (C^(p-1));
    the default quartic profile is the least smooth member.
    """

    amplitude: float
    center_x: float
    center_v: float
    width: float
    power: int = 2

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bump width must be positive")
        if not isinstance(self.power, int) or self.power < 2:
            raise ValueError("bump power must be an integer >= 2")

    def value(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.amplitude \
            * _bump((x - self.center_x) / self.width, self.power) \
            * _bump((v - self.center_v) / self.width, self.power)

    def dx(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return (self.amplitude / self.width) \
            * _bump_prime((x - self.center_x) / self.width, self.power) \
            * _bump((v - self.center_v) / self.width, self.power)

    def dv(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return (self.amplitude / self.width) \
            * _bump((x - self.center_x) / self.width, self.power) \
            * _bump_prime((v - self.center_v) / self.width, self.power)

    @property
    def support(self):
        w = self.width
        return ((self.center_x - w, self.center_x + w),
                (self.center_v - w, self.center_v + w))

    @property
    def sup_norm(self) -> float:
        return abs(self.amplitude)

    def scaled(self, u: float) -> "BumpDensity":
        # Data-level change of frame: (x, v) -> ((u+1)x, (u+1)v - u).
        a = u + 1.0
        if a == 0.0:
            raise ValueError("scaling parameter u = -1 is not invertible")
        return BumpDensity(self.amplitude, self.center_x / a,
                           (self.center_v + u) / a, self.width / abs(a),
                           self.power)


@dataclass(frozen=True)
class ZeroDensity:
    def value(self, x, v):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(v)).shape)

    dx = value
    dv = value

    @property
    def support(self):
        return None

    @property
    def sup_norm(self) -> float:
        return 0.0

    def scaled(self, u: float) -> "ZeroDensity":
        return self


@dataclass(frozen=True)
class BumpField:
    """Compactly supported field profile A * (1-(x/w)^2)^2_+."""

    amplitude: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bump width must be positive")

    def value(self, x):
        return self.amplitude * _bump(np.asarray(x, dtype=float) / self.width)

    def derivative(self, x):
        return (self.amplitude / self.width) \
            * _bump_prime(np.asarray(x, dtype=float) / self.width)

    @property
    def sup_norm(self) -> float:
        return abs(self.amplitude)

    @property
    def derivative_sup(self) -> float:
        # max of |4z(1-z^2)| on [0, 1] sits at z = 1/sqrt(3).
        return abs(self.amplitude) / self.width * 8.0 / (3.0 * math.sqrt(3.0))

    def scaled(self, u: float) -> "BumpField":
        a = u + 1.0
        if a == 0.0:
            raise ValueError("scaling parameter u = -1 is not invertible")
        return BumpField(self.amplitude / a, self.width / abs(a))


@dataclass(frozen=True)
class GaussianField:
    """Smooth non-compact profile A * exp(-(x/w)^2)."""

    amplitude: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("gaussian width must be positive")

    def value(self, x):
        z = np.asarray(x, dtype=float) / self.width
        return self.amplitude * np.exp(-z * z)

    def derivative(self, x):
        z = np.asarray(x, dtype=float) / self.width
        return self.amplitude * (-2.0 * z / self.width) * np.exp(-z * z)

    @property
    def sup_norm(self) -> float:
        return abs(self.amplitude)

    @property
    def derivative_sup(self) -> float:
        return abs(self.amplitude) / self.width * math.sqrt(2.0 / math.e)

    def scaled(self, u: float) -> "GaussianField":
        a = u + 1.0
        if a == 0.0:
            raise ValueError("scaling parameter u = -1 is not invertible")
        return GaussianField(self.amplitude / a, self.width / abs(a))


@dataclass(frozen=True)
class UniformField:
    amplitude: float

    def value(self, x):
        return np.full(np.shape(np.asarray(x, dtype=float)), self.amplitude)

    def derivative(self, x):
        return np.zeros(np.shape(np.asarray(x, dtype=float)))

    @property
    def sup_norm(self) -> float:
        return abs(self.amplitude)

    @property
    def derivative_sup(self) -> float:
        return 0.0

    def scaled(self, u: float) -> "UniformField":
        a = u + 1.0
        if a == 0.0:
            raise ValueError("scaling parameter u = -1 is not invertible")
        return UniformField(self.amplitude / a)


@dataclass(frozen=True)
class ZeroField:
    def value(self, x):
        return np.zeros(np.shape(np.asarray(x, dtype=float)))

    derivative = value

    @property
    def sup_norm(self) -> float:
        return 0.0

    @property
    def derivative_sup(self) -> float:
        return 0.0

    def scaled(self, u: float) -> "ZeroField":
        return self


_DENSITY_FAMILIES = ("zero", "bump")
_FIELD_FAMILIES = ("zero", "bump", "gaussian", "uniform")


@dataclass(frozen=True)
class InitialDataSpec:
    """Closed-form initial state: a density family and a field family."""

    f0_family: str = "bump"
    f0_amplitude: float = 1.0
    f0_center_x: float = 0.0
    f0_center_v: float = 0.0
    f0_width: float = 0.5
    f0_power: int = 2
    b0_family: str = "bump"
    b0_amplitude: float = 0.5
    b0_width: float = 1.0

    def __post_init__(self):
        if self.f0_family not in _DENSITY_FAMILIES:
            raise ValueError(f"unknown density family {self.f0_family!r}")
        if self.b0_family not in _FIELD_FAMILIES:
            raise ValueError(f"unknown field family {self.b0_family!r}")
        self.density()
        self.field()

    def density(self):
        if self.f0_family == "zero":
            return ZeroDensity()
        return BumpDensity(self.f0_amplitude, self.f0_center_x,
                           self.f0_center_v, self.f0_width, self.f0_power)

    def field(self):
        if self.b0_family == "zero":
            return ZeroField()
        if self.b0_family == "uniform":
            return UniformField(self.b0_amplitude)
        if self.b0_family == "gaussian":
            return GaussianField(self.b0_amplitude, self.b0_width)
        return BumpField(self.b0_amplitude, self.b0_width)

    def scaled(self, u: float) -> "InitialDataSpec":
        """Spec for the rescaled data (closed under every family here)."""
        fam = self.density().scaled(u)
        fld = self.field().scaled(u)
        kwargs = {}
        if isinstance(fam, BumpDensity):
            kwargs.update(f0_amplitude=fam.amplitude, f0_center_x=fam.center_x,
                          f0_center_v=fam.center_v, f0_width=fam.width,
                          f0_power=fam.power)
        if isinstance(fld, (BumpField, GaussianField)):
            kwargs.update(b0_amplitude=fld.amplitude, b0_width=fld.width)
        elif isinstance(fld, UniformField):
            kwargs.update(b0_amplitude=fld.amplitude)
        return replace(self, **kwargs)


def sample_initial_data(spec: InitialDataSpec, grid: PhaseGrid):
    """Sample (f0, B0) on the grid.

    The density support must sit strictly inside the grid with a margin of
    two cells per axis, so the sampled lattice carries a zero collar on the
    outermost two rows and columns.
    """
    fam = spec.density()
    box = fam.support
    if box is not None:
        (x_lo, x_hi), (v_lo, v_hi) = box
        dx, dv = grid.dx, grid.dv
        if not (x_lo > grid.x_min + 2 * dx and x_hi < grid.x_max - 2 * dx
                and v_lo > grid.v_min + 2 * dv and v_hi < grid.v_max - 2 * dv):
            raise ValueError(
                "density support must lie strictly inside the grid "
                "with a two-cell margin per axis")
    f_values = fam.value(grid.x_nodes[:, None], grid.v_nodes[None, :])
    b_values = spec.field().value(grid.x_nodes)
    return (DensityField(grid, f_values, 0.0),
            TransportField(grid, b_values, 0.0))


# ---------------------------------------------------------------------------
# interpolation


def _stencil(coord: np.ndarray, n: int):
    """Stencil start index and the four Lagrange weights per query.

    coord is the query position in units of the spacing, measured from the
    first node.  Positions within _NODE_SNAP of a node are snapped so node
    queries return the stored value exactly.
    """
    nearest = np.rint(coord)
    coord = np.where(np.abs(coord - nearest) <= _NODE_SNAP, nearest, coord)
    cell = np.floor(coord).astype(np.int64)
    np.clip(cell, 0, n - 2, out=cell)
    start = np.clip(cell - 1, 0, n - 4)
    u = coord - start
    w0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0
    w1 = u * (u - 2.0) * (u - 3.0) / 2.0
    w2 = -u * (u - 1.0) * (u - 3.0) / 2.0
    w3 = u * (u - 1.0) * (u - 2.0) / 6.0
    return cell, start, (w0, w1, w2, w3)


def interp_profile(x0: float, dx: float, values: np.ndarray, xq,
                   out_of_range: str = "error", monotone: bool = False):
    """Cubic interpolation of a 1D profile at query points xq.

    out_of_range: "error" raises DomainExitError, "zero" reads 0 outside.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    xq = np.asarray(xq, dtype=float)
    scalar = xq.ndim == 0
    q = np.atleast_1d(xq)
    coord = (q - x0) / dx
    outside = (coord < -_RANGE_SLACK) | (coord > (n - 1) + _RANGE_SLACK)
    if np.any(outside):
        if out_of_range == "error":
            worst = q[outside]
            raise DomainExitError(
                f"profile query outside [{x0}, {x0 + (n - 1) * dx}]: "
                f"min {worst.min():.6g}, max {worst.max():.6g}")
        coord = np.clip(coord, 0.0, float(n - 1))
    else:
        coord = np.clip(coord, 0.0, float(n - 1))
    cell, start, weights = _stencil(coord, n)
    out = np.zeros_like(coord)
    for k, w in enumerate(weights):
        out += w * values[start + k]
    if monotone:
        lo = np.minimum(values[cell], values[cell + 1])
        hi = np.maximum(values[cell], values[cell + 1])
        out = np.clip(out, lo, hi)
    if out_of_range == "zero":
        out = np.where(outside, 0.0, out)
    return out[0] if scalar else out.reshape(xq.shape)


def interp_lattice(grid: PhaseGrid, values: np.ndarray, xq, vq,
                   monotone: bool = False):
    """Cubic tensor-product interpolation of a density lattice.

    Queries outside the grid rectangle read as zero: densities carry their
    compact support with them, so the zero extension is exact.
    """
    values = np.asarray(values, dtype=float)
    xq = np.asarray(xq, dtype=float)
    vq = np.asarray(vq, dtype=float)
    shape = np.broadcast(xq, vq).shape
    qx = np.broadcast_to(xq, shape).reshape(-1)
    qv = np.broadcast_to(vq, shape).reshape(-1)
    cx = (qx - grid.x_min) / grid.dx
    cv = (qv - grid.v_min) / grid.dv
    outside = ((cx < -_RANGE_SLACK) | (cx > (grid.nx - 1) + _RANGE_SLACK)
               | (cv < -_RANGE_SLACK) | (cv > (grid.nv - 1) + _RANGE_SLACK))
    cx = np.clip(cx, 0.0, float(grid.nx - 1))
    cv = np.clip(cv, 0.0, float(grid.nv - 1))
    cell_x, start_x, wx = _stencil(cx, grid.nx)
    cell_v, start_v, wv = _stencil(cv, grid.nv)
    out = np.zeros_like(cx)
    for k in range(4):
        row = start_x + k
        for l in range(4):
            out += wx[k] * wv[l] * values[row, start_v + l]
    if monotone:
        corners = np.stack([values[cell_x, cell_v],
                            values[cell_x + 1, cell_v],
                            values[cell_x, cell_v + 1],
                            values[cell_x + 1, cell_v + 1]])
        out = np.clip(out, corners.min(axis=0), corners.max(axis=0))
    out = np.where(outside, 0.0, out)
    out = out.reshape(shape)
    return float(out) if shape == () else out


def interpolate(field, *coords, monotone: bool = False):
    """Interpolate a DensityField at (x, v) or a TransportField at (x,).

    Density queries outside the grid read zero.  Field queries outside the
    spatial axis raise DomainExitError.
    """
    if isinstance(field, DensityField):
        if len(coords) != 2:
            raise TypeError("density interpolation takes coordinates (x, v)")
        return interp_lattice(field.grid, field.values, coords[0], coords[1],
                              monotone=monotone)
    if isinstance(field, TransportField):
        if len(coords) != 1:
            raise TypeError("field interpolation takes a single coordinate x")
        return interp_profile(field.grid.x_min, field.grid.dx, field.values,
                              coords[0], out_of_range="error",
                              monotone=monotone)
    raise TypeError(f"cannot interpolate object of type {type(field)!r}")

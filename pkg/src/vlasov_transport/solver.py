"""Solution engines for the coupled density/field transport system.

The system couples a kinetic equation for the density f

    df/dt + v df/dx + B df/dv = 0,      f(0) = f0,

to a unit-speed transport equation for the force field B whose source is
the velocity moment of f.  Two engines build discrete solution histories
on a shared grid and uniform time levels:

* solve_picard runs successive approximation.  Each iterate solves the
  linear kinetic equation against the previous field history by backward
  characteristics (the density is the initial family evaluated at the foot
  points, with no lattice interpolation of f at all), then rebuilds the
  field levels from the new moments via the line-integral representation.
  Iteration stops when the sup norm over all levels of both successive
  differences drops below a tolerance.

* solve_direct marches level to level.  Each step predicts the next field
  with the current moment used twice, advects the density one step against
  the predicted field (one semi-Lagrangian lattice interpolation per
  step), then applies one trapezoid corrector with the new moment.

Both engines confine the expensive characteristic tracing to an active
region around the density support.  Outside it the density is exactly
zero: a trajectory whose velocity stays too far from the support velocity
band, or whose position cannot reach the support spatially in the time
available, cannot carry mass.  The bounds use the measured field sup, so
the filter is exact, not a heuristic.

majorant_existence_time integrates the scalar comparison ODE

    F'(t) = C (1 + t F)^2,    F(0) = C,

whose finite blow-up time caps the interval on which the a priori
estimates above are known to close.  C = 0 never blows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Sequence

import numpy as np

from .characteristics import LatticeFieldHistory, trace_states
from .field_solve import MomentProfile, density_moment, field_from_history, \
    advance_field
from .phase_space import (DensityField, InitialDataSpec, PhaseGrid,
                          TransportField, interp_lattice, sample_initial_data)

__all__ = [
    "SolutionHistory",
    "PicardTrace",
    "MajorantResult",
    "advect_density",
    "picard_step",
    "solve_picard",
    "solve_direct",
    "majorant_existence_time",
]


@dataclass(frozen=True)
class SolutionHistory:
    """Density and field levels at uniform time spacing dt from t = 0."""

    grid: PhaseGrid
    dt: float
    f_levels: tuple
    b_levels: tuple
    initial_data: InitialDataSpec | None = None

    def __post_init__(self):
        if len(self.f_levels) != len(self.b_levels) or not self.f_levels:
            raise ValueError("history needs matching nonempty level lists")

    @property
    def n_levels(self) -> int:
        return len(self.f_levels)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_levels)

    @property
    def t_final(self) -> float:
        return self.dt * (self.n_levels - 1)

    def field_history(self) -> LatticeFieldHistory:
        return LatticeFieldHistory(
            self.grid, np.stack([b.values for b in self.b_levels]), self.dt)


@dataclass(frozen=True)
class PicardTrace:
    """Successive-difference record of a Picard run."""

    field_diffs: tuple
    density_diffs: tuple
    iterations: int
    converged: bool


@dataclass(frozen=True)
class MajorantResult:
    c: float
    cap: float
    blowup_time: float
    times: np.ndarray
    values: np.ndarray

    @property
    def blew_up(self) -> bool:
        return math.isfinite(self.blowup_time)


def _levels_for(t_total: float, dt: float) -> int:
    if dt <= 0 or t_total <= 0:
        raise ValueError("horizon and dt must be positive")
    steps = t_total / dt
    k = round(steps)
    if k < 1 or abs(steps - k) > 1e-12 * max(1.0, steps):
        raise ValueError(f"dt = {dt} does not divide the horizon {t_total}")
    return k + 1


def _support_mask(grid: PhaseGrid, box, t: float, b_max: float,
                  pad_cells: float = 2.0) -> np.ndarray:
    """Nodes whose backward foot point can land in the box.

    Along any trajectory the velocity change over [0, t] is at most
    t * b_max, so the foot lies in x - t*v +- t^2 * b_max and the foot
    velocity in v +- t * b_max.  The signed window matters: it also keeps
    every intermediate position inside the hull of the node and the foot
    range, so masked trajectories never query the field outside the grid
    (an unsigned |v|-ball would trace nodes whose feet provably exit).
    """
    (x_lo, x_hi), (v_lo, v_hi) = box
    grow = t * b_max * (1.0 + 1e-9) + 1e-12
    pad_v = pad_cells * grid.dv
    v_ok = ((grid.v_nodes >= v_lo - grow - pad_v)
            & (grid.v_nodes <= v_hi + grow + pad_v))
    wiggle = t * t * b_max * (1.0 + 1e-9) + pad_cells * grid.dx + 1e-12
    foot = grid.x_nodes[:, None] - t * grid.v_nodes[None, :]
    x_ok = (foot + wiggle >= x_lo) & (foot - wiggle <= x_hi)
    return x_ok & v_ok[None, :]


def advect_density(f0, grid: PhaseGrid, field, t: float, substeps: int,
                   active: bool = True) -> DensityField:
    """Solve the linear kinetic equation at time t for a given field.

    f0 is an initial-data family (value callable, support box, sup norm);
    the result evaluates f0 at the backward foot points, so the sup norm
    of the output never exceeds the sup norm of f0.
    """
    if t == 0.0:
        values = f0.value(grid.x_nodes[:, None], grid.v_nodes[None, :])
        return DensityField(grid, values, 0.0)
    box = getattr(f0, "support", None)
    if box is None and getattr(f0, "sup_norm", None) == 0.0:
        return DensityField(grid, np.zeros((grid.nx, grid.nv)), t)
    b_max = field.sup_bound() if active else None
    values = np.zeros((grid.nx, grid.nv))
    if box is not None and b_max is not None:
        mask = _support_mask(grid, box, t, b_max)
        if not mask.any():
            return DensityField(grid, values, t)
        xg = np.broadcast_to(grid.x_nodes[:, None], mask.shape)[mask]
        vg = np.broadcast_to(grid.v_nodes[None, :], mask.shape)[mask]
        x0, v0 = trace_states(xg, vg, t, 0.0, field, substeps)
        values[mask] = f0.value(x0, v0)
    else:
        xg = np.broadcast_to(grid.x_nodes[:, None], (grid.nx, grid.nv))
        vg = np.broadcast_to(grid.v_nodes[None, :], (grid.nx, grid.nv))
        x0, v0 = trace_states(xg, vg, t, 0.0, field, substeps)
        values = f0.value(x0, v0)
    return DensityField(grid, values, t)


def picard_step(prev_history: LatticeFieldHistory, f0, b0, grid: PhaseGrid,
                n_levels: int, dt: float, monotone: bool = False,
                substeps_per_dt: int = 1):
    """One successive-approximation sweep against a frozen field history.

    Returns the new density levels and the field levels rebuilt from their
    moments.  Level k advects over [0, k dt] with k * substeps_per_dt RK4
    substeps, so every interval between stored field levels is resolved.
    """
    f_levels = []
    b_levels = []
    moments: list[MomentProfile] = []
    for k in range(n_levels):
        t_k = k * dt
        f_k = advect_density(f0, grid, prev_history, t_k,
                             max(1, k * substeps_per_dt))
        f_levels.append(f_k)
        moments.append(density_moment(f_k))
        b_levels.append(field_from_history(b0.value, list(moments), t_k,
                                           monotone=monotone))
    return f_levels, b_levels


def solve_picard(spec: InitialDataSpec, grid: PhaseGrid, t_final: float,
                 dt: float, tol: float = 1e-8, max_iter: int = 25,
                 initial_iterate: str = "constant", monotone: bool = False,
                 substeps_per_dt: int = 1):
    """Successive approximation until the iterates are tol-Cauchy.

    initial_iterate selects the zeroth field history: "constant" freezes
    B0 in time, "transported" uses the source-free shift B0(x - t).  Both
    must converge to the same history; the choice is a uniqueness probe.
    Returns (SolutionHistory, PicardTrace).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    n_levels = _levels_for(t_final, dt)
    f0 = spec.density()
    b0 = spec.field()
    f0_field, b0_field = sample_initial_data(spec, grid)
    if initial_iterate == "constant":
        b_stack = np.tile(b0_field.values, (n_levels, 1))
    elif initial_iterate == "transported":
        b_stack = np.stack([b0.value(grid.x_nodes - k * dt)
                            for k in range(n_levels)])
    else:
        raise ValueError(f"unknown initial iterate {initial_iterate!r}")
    f_stack = np.tile(f0_field.values[None, :, :], (n_levels, 1, 1))
    field_diffs = []
    density_diffs = []
    converged = False
    f_levels = [f0_field] * n_levels
    b_levels = [TransportField(grid, b_stack[k], k * dt)
                for k in range(n_levels)]
    for _ in range(max_iter):
        prev = LatticeFieldHistory(grid, b_stack, dt)
        f_levels, b_levels = picard_step(prev, f0, b0, grid, n_levels, dt,
                                         monotone=monotone,
                                         substeps_per_dt=substeps_per_dt)
        new_b = np.stack([b.values for b in b_levels])
        new_f = np.stack([f.values for f in f_levels])
        field_diffs.append(float(np.max(np.abs(new_b - b_stack))))
        density_diffs.append(float(np.max(np.abs(new_f - f_stack))))
        b_stack, f_stack = new_b, new_f
        if max(field_diffs[-1], density_diffs[-1]) < tol:
            converged = True
            break
    history = SolutionHistory(grid, dt, tuple(f_levels), tuple(b_levels),
                              initial_data=spec)
    trace = PicardTrace(tuple(field_diffs), tuple(density_diffs),
                        len(field_diffs), converged)
    return history, trace


def solve_direct(spec: InitialDataSpec, grid: PhaseGrid, t_final: float,
                 dt: float, monotone: bool = False) -> SolutionHistory:
    """March level to level with one predictor-corrector pass per step.

    Per step: predict B(t+dt) from the transport update with rho(t) used
    for both trapezoid ends, advect the density one semi-Lagrangian step
    against the predicted field, then correct B(t+dt) with the trapezoid
    of rho(t) and the new moment.  The density advection interpolates the
    previous lattice once per step (cubic, or monotone-clipped).

    The engine carries a certified support box with the lattice: per step
    the box grows by the exact reachability of the flow (velocity changes
    by at most dt * sup|B|), and nodes outside it are set to exact zero.
    The true density vanishes there, so this only removes interpolation
    tails; without it the occupied region would spread by the stencil
    width every step regardless of the flow.
    """
    n_levels = _levels_for(t_final, dt)
    b0 = spec.field()
    f_k, b_k = sample_initial_data(spec, grid)
    f_levels = [f_k]
    b_levels = [b_k]
    rho_k = density_moment(f_k)
    box = spec.density().support
    for k in range(n_levels - 1):
        t = k * dt

        def inflow(y, _t=t):
            return b0.value(np.asarray(y, dtype=float) - _t)

        b_pred = advance_field(b_k, rho_k, rho_k, dt, inflow=inflow,
                               monotone=monotone)
        step_hist = LatticeFieldHistory(
            grid, np.stack([b_k.values, b_pred.values]), dt, t0=t)
        f_next, box = _advect_lattice_step(f_k, box, step_hist, dt, monotone)
        rho_next = density_moment(f_next)
        b_next = advance_field(b_k, rho_k, rho_next, dt, inflow=inflow,
                               monotone=monotone)
        f_levels.append(f_next)
        b_levels.append(b_next)
        f_k, b_k, rho_k = f_next, b_next, rho_next
    return SolutionHistory(grid, dt, tuple(f_levels), tuple(b_levels),
                           initial_data=spec)


def _grow_box(box, dt: float, b_max: float):
    """Reachable support box after one step under a field bounded by b_max.

    Velocities drift by at most dt * b_max, so the v-range widens by that
    on both sides; each x edge then moves with its own signed velocity
    bound (one-sided data translates instead of inflating, which keeps
    the box on the grid for long one-directional runs).
    """
    (x_lo, x_hi), (v_lo, v_hi) = box
    grow_v = dt * b_max * (1.0 + 1e-9) + 1e-12
    v_lo, v_hi = v_lo - grow_v, v_hi + grow_v
    slop = dt * max(abs(v_lo), abs(v_hi)) * 1e-9 + 1e-12
    return (x_lo + dt * v_lo - slop, x_hi + dt * v_hi + slop), (v_lo, v_hi)


def _advect_lattice_step(f_k: DensityField, box,
                         step_hist: LatticeFieldHistory, dt: float,
                         monotone: bool):
    """One backward semi-Lagrangian step of the density lattice.

    box certifies the support of f_k; returns (next level, grown box).
    Nodes outside the grown box are exactly zero by the reachability
    bound, so only nodes inside it are traced.
    """
    grid = f_k.grid
    t_next = f_k.time + dt
    values = np.zeros_like(f_k.values)
    if box is None:
        return DensityField(grid, values, t_next), None
    new_box = _grow_box(box, dt, step_hist.sup_bound())
    (x_lo, x_hi), (v_lo, v_hi) = new_box
    in_x = (grid.x_nodes >= x_lo) & (grid.x_nodes <= x_hi)
    in_v = (grid.v_nodes >= v_lo) & (grid.v_nodes <= v_hi)
    mask = in_x[:, None] & in_v[None, :]
    if mask.any():
        xg = np.broadcast_to(grid.x_nodes[:, None], mask.shape)[mask]
        vg = np.broadcast_to(grid.v_nodes[None, :], mask.shape)[mask]
        xf, vf = trace_states(xg, vg, t_next, f_k.time, step_hist, 1)
        values[mask] = interp_lattice(grid, f_k.values, xf, vf,
                                      monotone=monotone)
    return DensityField(grid, values, t_next), new_box


def majorant_existence_time(c: float, cap: float, ds: float = 1e-3,
                            horizon: float = 50.0) -> MajorantResult:
    """Integrate F' = C (1 + t F)^2, F(0) = C until the cap or the horizon.

    Returns the trajectory and the cap-crossing time (linear interpolation
    between the last sample below the cap and the first at or above it),
    or blowup_time = inf if the cap is never reached before the horizon.
    """
    if c < 0:
        raise ValueError("majorant constant must be nonnegative")
    if cap <= c:
        raise ValueError("cap must exceed the initial value F(0) = C")
    if ds <= 0 or horizon <= 0:
        raise ValueError("step size and horizon must be positive")

    def rhs(t, f):
        w = 1.0 + t * f
        return c * w * w

    times = [0.0]
    values = [c]
    t, f = 0.0, c
    blowup = math.inf
    n_steps = int(math.ceil(horizon / ds))
    for k in range(n_steps):
        h = min(ds, horizon - t)
        if h <= 0:
            break
        k1 = rhs(t, f)
        k2 = rhs(t + 0.5 * h, f + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, f + 0.5 * h * k2)
        k4 = rhs(t + h, f + h * k3)
        f_next = f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_next = t + h
        if not math.isfinite(f_next):
            # Blow-up inside the step overflowed the stages; the crossing
            # is somewhere in (t, t + h], report the step end.
            blowup = t_next
            break
        if f_next >= cap:
            times.append(t_next)
            values.append(f_next)
            blowup = t + h * (cap - f) / (f_next - f)
            break
        times.append(t_next)
        values.append(f_next)
        t, f = t_next, f_next
    return MajorantResult(c, cap, blowup, np.asarray(times),
                          np.asarray(values))

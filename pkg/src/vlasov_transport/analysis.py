"""Diagnostics and structure checks on solution histories.

Everything here consumes a SolutionHistory after the fact: support
tracking, conserved-quantity drift, finite-difference residuals of the
governing equations, derivative representations along characteristics,
the one-parameter change of frame that rescales solutions, a
monotonicity check for sign-definite scenarios, and a square-root modulus
of continuity table for the field.  None of it feeds back into the
solvers; failures here are findings, not exceptions, except where the
input data violates an explicit hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .characteristics import trace_backward_sampled
from .field_solve import density_moment, trapezoid_uniform
from .phase_space import (DensityField, PhaseGrid, TransportField,
                          interp_lattice, interp_profile)
from .solver import SolutionHistory, MajorantResult, _support_mask

__all__ = [
    "ScenarioHypothesisError",
    "DiagnosticsTrace",
    "ScenarioReport",
    "ContinuationReport",
    "HolderReport",
    "velocity_support",
    "support_infimum",
    "compute_diagnostics",
    "derivative_rep_check",
    "transform_rectangle",
    "transform_density_level",
    "transform_field_level",
    "scaling_transform",
    "pde_residual",
    "scenario_monotone_check",
    "continuation_indicator",
    "holder_quotient",
]


class ScenarioHypothesisError(ValueError):
    """The data fed to a scenario check violates the scenario hypotheses.

    Distinct from a failed check: the check never ran.
    """


def _threshold_for(f: DensityField, threshold: float | None) -> float:
    if threshold is None:
        return 1e-12 * f.sup_norm()
    if threshold < 0:
        raise ValueError("support threshold must be nonnegative")
    return threshold


def velocity_support(f: DensityField, threshold: float | None = None) -> float:
    """Radius of the velocity support: max |v| with |f(x, v)| > threshold.

    Returns 0.0 for an empty support.
    """
    threshold = _threshold_for(f, threshold)
    occupied = np.any(np.abs(f.values) > threshold, axis=0)
    if not occupied.any():
        return 0.0
    return float(np.max(np.abs(f.grid.v_nodes[occupied])))


def support_infimum(f: DensityField, threshold: float | None = None) -> float:
    """Lowest velocity carrying mass; +inf when the lattice is empty."""
    threshold = _threshold_for(f, threshold)
    occupied = np.any(np.abs(f.values) > threshold, axis=0)
    if not occupied.any():
        return math.inf
    return float(np.min(f.grid.v_nodes[occupied]))


@dataclass(frozen=True)
class DiagnosticsTrace:
    """Per-level scalar diagnostics of a solution history."""

    times: np.ndarray
    density_sup: np.ndarray
    field_sup: np.ndarray
    field_min: np.ndarray
    field_max: np.ndarray
    mass: np.ndarray
    support_radius: np.ndarray      # running max over levels so far
    support_inf: np.ndarray
    dxf_sup: np.ndarray
    dvf_sup: np.ndarray
    dxb_sup: np.ndarray

    COLUMNS = ("time", "density_sup", "field_sup", "field_min", "field_max",
               "mass", "support_radius", "support_inf", "dxf_sup", "dvf_sup",
               "dxb_sup")

    def rows(self):
        cols = (self.times, self.density_sup, self.field_sup, self.field_min,
                self.field_max, self.mass, self.support_radius,
                self.support_inf, self.dxf_sup, self.dvf_sup, self.dxb_sup)
        for k in range(self.times.size):
            yield tuple(float(c[k]) for c in cols)


def compute_diagnostics(solution: SolutionHistory,
                        threshold: float | None = None) -> DiagnosticsTrace:
    grid = solution.grid
    f0_sup = solution.f_levels[0].sup_norm()
    thr = 1e-12 * f0_sup if threshold is None else threshold
    n = solution.n_levels
    out = {name: np.zeros(n) for name in DiagnosticsTrace.COLUMNS[1:]}
    running = 0.0
    for k in range(n):
        f = solution.f_levels[k]
        b = solution.b_levels[k]
        out["density_sup"][k] = f.sup_norm()
        out["field_sup"][k] = b.sup_norm()
        out["field_min"][k] = float(b.values.min())
        out["field_max"][k] = float(b.values.max())
        out["mass"][k] = float(trapezoid_uniform(
            trapezoid_uniform(f.values, grid.dv, axis=1), grid.dx, axis=0))
        running = max(running, velocity_support(f, thr))
        out["support_radius"][k] = running
        out["support_inf"][k] = support_infimum(f, thr)
        out["dxf_sup"][k] = float(np.max(np.abs(
            np.gradient(f.values, grid.dx, axis=0, edge_order=2))))
        out["dvf_sup"][k] = float(np.max(np.abs(
            np.gradient(f.values, grid.dv, axis=1, edge_order=2))))
        out["dxb_sup"][k] = float(np.max(np.abs(
            np.gradient(b.values, grid.dx, edge_order=2))))
    return DiagnosticsTrace(times=solution.times, **out)


def derivative_rep_check(solution: SolutionHistory, t: float,
                         substeps_per_dt: int = 1):
    """Compare lattice derivatives of f(t) against their path-integral form.

    Along the backward characteristics,

        dvf(t, x, v) = dvf0(X(0), V(0)) - int_0^t dxf(s, X(s), V(s)) ds,
        dxf(t, x, v) = dxf0(X(0), V(0))
                       - int_0^t (dxB dvf)(s, X(s), V(s)) ds.

    The left sides are centered finite differences of the stored lattice,
    the right sides trapezoid quadratures over the stored levels with the
    integrands interpolated at the recorded path points.  Returns the two
    sup-norm residuals (dvf first), taken over the nodes whose trajectory
    can meet the density support; everywhere else both sides vanish.
    """
    if solution.initial_data is None:
        raise ValueError("history carries no initial data family")
    grid = solution.grid
    dt = solution.dt
    m = round(t / dt)
    if m < 1 or abs(t - m * dt) > 1e-9 * max(1.0, t) or m >= solution.n_levels:
        raise ValueError("t must be a stored level time past 0")
    f0 = solution.initial_data.density()
    box = f0.support
    hist = solution.field_history()
    if box is None:
        return 0.0, 0.0
    pad = ((box[0][0] - grid.dx, box[0][1] + grid.dx),
           (box[1][0] - grid.dv, box[1][1] + grid.dv))
    mask = _support_mask(grid, pad, t, hist.sup_bound())
    if not mask.any():
        return 0.0, 0.0
    xg = np.broadcast_to(grid.x_nodes[:, None], mask.shape)[mask]
    vg = np.broadcast_to(grid.v_nodes[None, :], mask.shape)[mask]
    sample_times = dt * np.arange(m, -1, -1)
    xs, vs = trace_backward_sampled(xg, vg, t, sample_times, hist,
                                    substeps_per_dt)
    xs, vs = xs[::-1], vs[::-1]      # ascending level order 0..m

    gx = np.empty((m + 1, xg.size))
    gv = np.empty((m + 1, xg.size))
    for k in range(m + 1):
        f_k = solution.f_levels[k]
        dxf_k = np.gradient(f_k.values, grid.dx, axis=0, edge_order=2)
        dvf_k = np.gradient(f_k.values, grid.dv, axis=1, edge_order=2)
        dxb_k = np.gradient(solution.b_levels[k].values, grid.dx,
                            edge_order=2)
        gx[k] = interp_lattice(grid, dxf_k, xs[k], vs[k])
        gv[k] = interp_profile(grid.x_min, grid.dx, dxb_k, xs[k],
                               out_of_range="error") \
            * interp_lattice(grid, dvf_k, xs[k], vs[k])
    rep_dv = f0.dv(xs[0], vs[0]) - trapezoid_uniform(gx, dt, axis=0)
    rep_dx = f0.dx(xs[0], vs[0]) - trapezoid_uniform(gv, dt, axis=0)

    f_t = solution.f_levels[m]
    fd_dv = np.gradient(f_t.values, grid.dv, axis=1, edge_order=2)[mask]
    fd_dx = np.gradient(f_t.values, grid.dx, axis=0, edge_order=2)[mask]
    return (float(np.max(np.abs(fd_dv - rep_dv))),
            float(np.max(np.abs(fd_dx - rep_dx))))


def transform_rectangle(grid: PhaseGrid, u: float, times) -> PhaseGrid:
    """Largest rectangle whose preimage under the frame map stays inside
    grid at every time in times (node counts preserved).

    The preimage of (x, v) at time t is ((u+1)x - ut, (u+1)v - u); the
    admissible x-interval is affine in t, so endpoint times suffice.
    """
    a = u + 1.0
    if a == 0.0:
        raise ValueError("scaling parameter u = -1 is not invertible")
    x_lo, x_hi = -math.inf, math.inf
    for t in times:
        lo = (grid.x_min + u * t) / a
        hi = (grid.x_max + u * t) / a
        lo, hi = min(lo, hi), max(lo, hi)
        x_lo, x_hi = max(x_lo, lo), min(x_hi, hi)
    v_pair = ((grid.v_min + u) / a, (grid.v_max + u) / a)
    v_lo, v_hi = min(v_pair), max(v_pair)
    if not (x_lo < x_hi and v_lo < v_hi):
        raise ValueError(f"scaling u = {u} leaves no valid sub-rectangle")
    return PhaseGrid(x_lo, x_hi, v_lo, v_hi, grid.nx, grid.nv)


def transform_density_level(f: DensityField, new_grid: PhaseGrid,
                            u: float) -> DensityField:
    a = u + 1.0
    xq = a * new_grid.x_nodes - u * f.time
    vq = a * new_grid.v_nodes - u
    values = interp_lattice(f.grid, f.values, xq[:, None], vq[None, :])
    return DensityField(new_grid, values, f.time)


def transform_field_level(b: TransportField, new_grid: PhaseGrid,
                          u: float) -> TransportField:
    a = u + 1.0
    xq = np.clip(a * new_grid.x_nodes - u * b.time,
                 b.grid.x_min, b.grid.x_max)
    values = (1.0 / a) * interp_profile(b.grid.x_min, b.grid.dx, b.values, xq)
    return TransportField(new_grid, values, b.time)


def scaling_transform(solution: SolutionHistory, u: float) -> SolutionHistory:
    """Rescale a history by the one-parameter change of frame.

    The transformed pair

        f'(t, x, v) = f(t, (u+1)x - ut, (u+1)v - u),
        B'(t, x)    = (u+1)^{-1} B(t, (u+1)x - ut)

    solves the same system whenever (f, B) does and u + 1 > 0.  The
    density equation is preserved for every u != -1, but when u + 1 < 0
    the velocity axis reverses orientation: the moment of f' is |u+1|^{-1}
    times the mapped moment while the field term carries the signed
    factor, so the transformed field solves its equation with the sign of
    the source flipped.  u = -1 is excluded.  The output lives on the
    largest rectangle whose preimage stays inside the source grid for
    every stored time (same node counts); an empty rectangle is an error.
    u = 0 reproduces the input lattices bitwise.
    """
    grid = solution.grid
    new_grid = transform_rectangle(grid, u, (0.0, solution.t_final))
    f_levels = []
    b_levels = []
    for k in range(solution.n_levels):
        f_levels.append(transform_density_level(solution.f_levels[k],
                                                new_grid, u))
        b_levels.append(transform_field_level(solution.b_levels[k],
                                              new_grid, u))
    data = None
    if solution.initial_data is not None:
        data = solution.initial_data.scaled(u)
    return SolutionHistory(new_grid, solution.dt, tuple(f_levels),
                           tuple(b_levels), initial_data=data)


def pde_residual(solution: SolutionHistory, density_floor: float = 1e-10):
    """Centered finite-difference residuals of both governing equations.

    Returns (density_residual, field_residual): sup of

        df/dt + v df/dx + B df/dv        over interior nodes and levels
                                         where |f| > density_floor,
        dB/dt + dB/dx - rho              over interior nodes and levels.

    Needs at least three stored levels for the centered time difference.
    """
    if solution.n_levels < 3:
        raise ValueError("residuals need at least three time levels")
    grid = solution.grid
    dt = solution.dt
    f = np.stack([lv.values for lv in solution.f_levels])
    b = np.stack([lv.values for lv in solution.b_levels])
    rho = np.stack([density_moment(lv).values for lv in solution.f_levels])

    interior = f[1:-1, 1:-1, 1:-1]
    dtf = (f[2:, 1:-1, 1:-1] - f[:-2, 1:-1, 1:-1]) / (2.0 * dt)
    dxf = (f[1:-1, 2:, 1:-1] - f[1:-1, :-2, 1:-1]) / (2.0 * grid.dx)
    dvf = (f[1:-1, 1:-1, 2:] - f[1:-1, 1:-1, :-2]) / (2.0 * grid.dv)
    res_f = dtf + grid.v_nodes[None, None, 1:-1] * dxf \
        + b[1:-1, 1:-1, None] * dvf
    carrying = np.abs(interior) > density_floor
    density_res = float(np.max(np.abs(res_f[carrying]))) if carrying.any() \
        else 0.0

    dtb = (b[2:, 1:-1] - b[:-2, 1:-1]) / (2.0 * dt)
    dxb = (b[1:-1, 2:] - b[1:-1, :-2]) / (2.0 * grid.dx)
    field_res = float(np.max(np.abs(dtb + dxb - rho[1:-1, 1:-1])))
    return density_res, field_res


@dataclass(frozen=True)
class ScenarioReport:
    passed: bool
    field_min: float
    field_min_tol: float
    support_infima: tuple
    max_support_drop: float
    support_drop_tol: float

    def __bool__(self):
        return self.passed


def scenario_monotone_check(solution: SolutionHistory,
                            field_min_tol: float = 1e-8,
                            support_drop_tol: float | None = None,
                            threshold: float | None = None) -> ScenarioReport:
    """Check the sign-definite scenario: B stays nonnegative and the lowest
    occupied velocity never falls.

    Hypotheses on the data (checked first, violations raise
    ScenarioHypothesisError): f(0) >= 0 with velocity support strictly
    above 1, and B(0) >= 0.
    """
    f0 = solution.f_levels[0]
    b0 = solution.b_levels[0]
    thr = _threshold_for(f0, threshold)
    if float(f0.values.min()) < 0.0:
        raise ScenarioHypothesisError("initial density must be nonnegative")
    inf0 = support_infimum(f0, thr)
    if not inf0 > 1.0:
        raise ScenarioHypothesisError(
            f"initial velocity support must sit above 1 (found {inf0})")
    if float(b0.values.min()) < 0.0:
        raise ScenarioHypothesisError("initial field must be nonnegative")

    if support_drop_tol is None:
        support_drop_tol = solution.grid.dv * (1.0 + 1e-9)
    field_min = min(float(b.values.min()) for b in solution.b_levels)
    infima = tuple(support_infimum(f, thr) for f in solution.f_levels)
    drops = [infima[k] - infima[k + 1] for k in range(len(infima) - 1)
             if math.isfinite(infima[k]) and math.isfinite(infima[k + 1])]
    max_drop = max(drops) if drops else 0.0
    passed = (field_min >= -field_min_tol) and (max_drop <= support_drop_tol)
    return ScenarioReport(passed, field_min, field_min_tol, infima,
                          max_drop, support_drop_tol)


@dataclass(frozen=True)
class ContinuationReport:
    """Growth of the derivative sum against a cap and an optional envelope."""

    times: np.ndarray
    derivative_sum: np.ndarray
    cap: float
    flagged: bool
    first_flagged_level: int | None

    def __bool__(self):
        # Truthy when continuation looks safe.
        return not self.flagged


def continuation_indicator(trace: DiagnosticsTrace, cap: float | None = None,
                           majorant: MajorantResult | None = None
                           ) -> ContinuationReport:
    """Flag blow-up suspicion from the growth of |dxf| + |dvf| sups.

    The cap defaults to 10^3 times the level-0 sum (or an absolute 1.0
    floor if that sum vanishes).  With a majorant supplied, levels past
    its blow-up time or above its envelope are flagged as well.
    """
    series = trace.dxf_sup + trace.dvf_sup
    if cap is None:
        base = series[0] if series.size and series[0] > 0 else 1.0
        cap = 1e3 * base
    flagged_levels = series > cap
    if majorant is not None:
        t_ok = majorant.times[-1]
        envelope = np.interp(trace.times, majorant.times, majorant.values,
                             right=math.inf)
        beyond = trace.times > t_ok + 1e-12
        flagged_levels = flagged_levels | beyond | (series > envelope)
    if flagged_levels.any():
        first = int(np.argmax(flagged_levels))
        return ContinuationReport(trace.times, series, float(cap), True,
                                  first)
    return ContinuationReport(trace.times, series, float(cap), False, None)


@dataclass(frozen=True)
class HolderReport:
    """sup_x,t |B(t, x+h) - B(t, x)| and the h^{1/2} quotients, both axes."""

    space_offsets: np.ndarray
    space_sup: np.ndarray
    space_quotient: np.ndarray
    time_offsets: np.ndarray
    time_sup: np.ndarray
    time_quotient: np.ndarray


def _offset_cells(offsets, spacing: float, limit: int, axis_name: str):
    cells = []
    for h in offsets:
        m = h / spacing
        m_int = round(m)
        if m_int < 1 or abs(m - m_int) > 1e-6 * max(1.0, abs(m)):
            raise ValueError(
                f"{axis_name} offset {h} is not a positive multiple of the "
                f"{axis_name} spacing {spacing}")
        if m_int > limit:
            raise ValueError(
                f"{axis_name} offset {h} exceeds half the {axis_name} extent")
        cells.append(m_int)
    return cells


def holder_quotient(b_levels: Sequence[TransportField], dt: float,
                    space_offsets=None, time_offsets=None) -> HolderReport:
    """Square-root modulus table for a stack of field levels.

    Offsets must be positive multiples of the spacing on their axis and at
    most half the extent.  Defaults pick dyadic cell counts 1, 2, 4, ...
    up to half the axis.  The sup for each offset runs jointly over all
    levels and all valid positions.
    """
    if not b_levels:
        raise ValueError("need at least one field level")
    grid = b_levels[0].grid
    stack = np.stack([b.values for b in b_levels])
    n_levels = stack.shape[0]

    def dyadic(limit):
        out = [1]
        while out[-1] * 2 <= limit:
            out.append(out[-1] * 2)
        return out

    x_limit = (grid.nx - 1) // 2
    if space_offsets is None:
        space_cells = dyadic(x_limit)
    else:
        space_cells = _offset_cells(space_offsets, grid.dx, x_limit, "space")
    t_limit = (n_levels - 1) // 2
    if time_offsets is None:
        time_cells = dyadic(t_limit) if t_limit >= 1 else []
    else:
        if t_limit < 1:
            raise ValueError("time offsets need at least three levels")
        time_cells = _offset_cells(time_offsets, dt, t_limit, "time")

    hs = np.array([m * grid.dx for m in space_cells])
    h_sup = np.array([float(np.max(np.abs(stack[:, m:] - stack[:, :-m])))
                      for m in space_cells])
    taus = np.array([m * dt for m in time_cells])
    t_sup = np.array([float(np.max(np.abs(stack[m:] - stack[:-m])))
                      for m in time_cells])
    return HolderReport(hs, h_sup, h_sup / np.sqrt(hs),
                        taus, t_sup,
                        t_sup / np.sqrt(taus) if taus.size else t_sup)

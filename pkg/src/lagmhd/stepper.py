"""Semi-implicit time stepping for the Lagrangian planar MHD system.

One step solves, in order, three tridiagonal systems (longitudinal velocity,
transverse velocity, transverse field; coefficients lagged at the old J and
old h) and then applies exact pointwise exponential updates for the pressure
and the Jacobian.  Vacuum (rho0 = 0) needs no special treatment: the velocity
solves degenerate to discrete elliptic balances which stay nonsingular as long
as rho0 is positive somewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import solve_banded

from .model import FOUR_PI, Params, State
from .spatial import ddy, face_average

BLOWUP_LIMIT = 1e12
SERIES_CUTOFF = 1e-8


class StepError(RuntimeError):
    """Base class for failures inside a time step."""


class SolverError(StepError):
    """A tridiagonal system could not be assembled or solved safely."""


class BlowUpError(StepError):
    """Some field became non-finite or exceeded the magnitude limit."""


@dataclass(frozen=True)
class StepConfig:
    dt_max: float = 1e-2
    cfl_fraction: float = 0.5
    t_end: float = 1.0
    output_every: int = 10
    rho_floor_policy: str = "none"

    def __post_init__(self):
        if not (math.isfinite(self.dt_max) and self.dt_max > 0):
            raise ValueError(f"dt_max must be positive, got {self.dt_max!r}")
        if not (0 < self.cfl_fraction <= 1):
            raise ValueError(f"cfl_fraction must lie in (0, 1], got {self.cfl_fraction!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be finite and nonnegative, got {self.t_end!r}")
        if int(self.output_every) != self.output_every or self.output_every < 1:
            raise ValueError(f"output_every must be a positive integer, got {self.output_every!r}")
        if self.rho_floor_policy != "none":
            raise ValueError("rho_floor_policy only supports 'none': density floors would "
                             "remove the vacuum regions being simulated")


@dataclass
class TridiagonalSystem:
    """Rows ``lower[i] x[i-1] + main[i] x[i] + upper[i] x[i+1] = rhs[i]``.

    ``lower[0]`` and ``upper[-1]`` are ignored.  ``rhs`` may carry a trailing
    axis of independent right-hand sides.
    """

    lower: np.ndarray
    main: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def solve(self) -> np.ndarray:
        if not np.all(np.isfinite(self.main)) or np.any(self.main <= 0):
            bad = int(np.argmin(np.where(np.isfinite(self.main), self.main, -np.inf)))
            raise SolverError(f"tridiagonal main diagonal nonpositive at node {bad}")
        n = self.main.size
        ab = np.zeros((3, n))
        ab[0, 1:] = self.upper[:-1]
        ab[1] = self.main
        ab[2, :-1] = self.lower[1:]
        try:
            return solve_banded((1, 1), ab, self.rhs, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"tridiagonal solve failed: {exc}") from exc


def diffusion_system(mass: np.ndarray, coef: np.ndarray, J: np.ndarray, dy: float,
                     rhs: np.ndarray) -> TridiagonalSystem:
    """Assemble ``mass * x - coef * div_flux(x, J) = rhs`` with the Neumann end closure."""
    k = 1.0 / (dy * dy * face_average(J))
    n = J.size
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.zeros(n)
    lower[1:-1] = k[:-1]
    upper[1:-1] = k[1:]
    diag[1:-1] = -(k[:-1] + k[1:])
    upper[0] = 2.0 * k[0]
    diag[0] = -2.0 * k[0]
    lower[-1] = 2.0 * k[-1]
    diag[-1] = -2.0 * k[-1]
    return TridiagonalSystem(lower=-coef * lower, main=mass - coef * diag,
                             upper=-coef * upper, rhs=rhs)


def solve_dirichlet(system: TridiagonalSystem) -> np.ndarray:
    """Solve with homogeneous Dirichlet values at both ends.

    The end unknowns are dropped and set to exactly zero afterwards; a full
    solve with identity end rows would let pivoting leak round-off into them.
    """
    inner = TridiagonalSystem(lower=system.lower[1:-1].copy(), main=system.main[1:-1],
                              upper=system.upper[1:-1].copy(), rhs=system.rhs[1:-1])
    out = np.zeros_like(system.rhs, dtype=np.float64)
    out[1:-1] = inner.solve()
    return out


def exp_relaxation_weight(z: np.ndarray) -> np.ndarray:
    """``(1 - exp(-z)) / z`` with its series ``1 - z/2`` for ``|z| < 1e-8``."""
    z = np.asarray(z, dtype=np.float64)
    small = np.abs(z) < SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    with np.errstate(over="ignore"):
        out = -np.expm1(-safe) / safe
    return np.where(small, 1.0 - 0.5 * z, out)


def heating_rate(vel_rate, shear_rate, field_rate, params: Params) -> np.ndarray:
    """Viscous and Ohmic heating ``(gamma-1)(lam|u_y/J|^2 + mu|w_y/J|^2 + nu/4pi |h_y/J|^2)``."""
    return (params.gamma - 1.0) * (params.lam * vel_rate**2
                                   + params.mu * np.sum(shear_rate**2, axis=1)
                                   + params.nu / FOUR_PI * np.sum(field_rate**2, axis=1))


def step(state: State, params: Params, dt: float,
         sources: Callable[[float], dict] | None = None) -> State:
    """Advance ``state`` by ``dt`` and return the new state.

    ``sources(t)`` may return additive forcing arrays keyed ``"u"``, ``"w"``,
    ``"h"`` and ``"P"`` evaluated at the new time level; it is used for
    manufactured-solution runs only.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    rho0 = state.rho0
    if not np.any(rho0 > 0):
        raise SolverError("velocity solves are singular: rho0 vanishes at every node")
    dy = state.grid.dy
    J, u, w, h, P = state.J, state.u, state.w, state.h, state.P
    t_new = state.t + dt
    forcing = sources(t_new) if sources is not None else {}
    mass = rho0 / dt

    h_y = ddy(h, dy)
    rhs_u = mass * u - ddy(P, dy) - np.sum(h * h_y, axis=1) / FOUR_PI
    if "u" in forcing:
        rhs_u = rhs_u + forcing["u"]
    u_new = diffusion_system(mass, params.lam, J, dy, rhs_u).solve()

    rhs_w = mass[:, None] * w + h_y / FOUR_PI
    if "w" in forcing:
        rhs_w = rhs_w + forcing["w"]
    w_new = diffusion_system(mass, params.mu, J, dy, rhs_w).solve()

    vel_rate = ddy(u_new, dy) / J
    shear_rate = ddy(w_new, dy) / J[:, None]
    rhs_h = h / dt + shear_rate
    if "h" in forcing:
        rhs_h = rhs_h + forcing["h"]
    h_system = diffusion_system(1.0 / dt + vel_rate, params.nu / J, J, dy, rhs_h)
    h_new = solve_dirichlet(h_system)

    field_rate = ddy(h_new, dy) / J[:, None]
    heat = heating_rate(vel_rate, shear_rate, field_rate, params)
    if "P" in forcing:
        heat = heat + forcing["P"]
    z = params.gamma * vel_rate * dt
    with np.errstate(over="ignore", invalid="ignore"):
        P_new = np.exp(-z) * P + exp_relaxation_weight(z) * dt * heat
        J_new = J * np.exp(dt * vel_rate)

    new = State(t=t_new, J=J_new, u=u_new, w=w_new, h=h_new, P=P_new, rho0=rho0, grid=state.grid)
    _check_blowup(new)
    return new


def _check_blowup(state: State):
    for name in ("J", "u", "w", "h", "P"):
        arr = getattr(state, name)
        if not np.all(np.isfinite(arr)):
            raise BlowUpError(f"{name} became non-finite at t = {state.t:.6g}")
        peak = float(np.max(np.abs(arr)))
        if peak > BLOWUP_LIMIT:
            raise BlowUpError(f"|{name}| reached {peak:.3e} at t = {state.t:.6g}")
    if not np.all(state.J > 0):
        raise BlowUpError(f"J underflowed to zero at t = {state.t:.6g}")


def select_dt(state: State, params: Params, config: StepConfig) -> float:
    """Step size ``cfl * min(dt_max, 0.1/max|u_y/J|, 0.1/max(gamma u_y/J))``."""
    rate = ddy(state.u, state.grid.dy) / state.J
    dt = config.dt_max
    peak = float(np.max(np.abs(rate)))
    if peak > 0:
        dt = min(dt, 0.1 / peak)
    decay = float(np.max(params.gamma * rate))
    if decay > 0:
        dt = min(dt, 0.1 / decay)
    return config.cfl_fraction * dt


@dataclass
class RunResult:
    state: State
    steps: int
    failure: str | None = None


def run(initial: State, params: Params, config: StepConfig,
        sinks: Iterable[Callable] = (), recorder=None,
        sources: Callable[[float], dict] | None = None,
        on_step: Callable[[State], None] | None = None) -> RunResult:
    """Integrate from ``initial.t`` to ``config.t_end``.

    Every ``output_every`` steps, and at step 0 and the final step, a
    diagnostics record is built by ``recorder`` (a
    :class:`lagmhd.diagnostics.Recorder`, created on demand) and passed to each
    sink as ``sink(record, state)``.  A failing step ends the run with
    ``failure`` set and the last good state returned.  ``on_step`` sees every
    accepted state, including the ones between outputs.
    """
    from .diagnostics import Recorder

    sinks = list(sinks)
    if recorder is None and sinks:
        recorder = Recorder(initial, params)

    def emit(s):
        if recorder is None:
            return
        record = recorder.record(s)
        for sink in sinks:
            sink(record, s)

    state = initial
    steps = 0
    emit(state)
    if config.t_end <= initial.t:
        return RunResult(state, 0)
    last_emitted = 0
    while state.t < config.t_end:
        dt = select_dt(state, params, config)
        remaining = config.t_end - state.t
        if dt >= remaining or remaining - dt < 1e-12 * max(1.0, config.t_end):
            dt = remaining
        try:
            nxt = step(state, params, dt, sources)
        except StepError as exc:
            if last_emitted != steps:
                emit(state)
            return RunResult(state, steps, failure=str(exc))
        steps += 1
        if dt == remaining:
            nxt.t = config.t_end
        state = nxt
        if on_step is not None:
            on_step(state)
        if steps % config.output_every == 0 or state.t >= config.t_end:
            emit(state)
            last_emitted = steps
    return RunResult(state, steps)

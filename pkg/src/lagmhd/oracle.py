"""Independent verification backends.

* :func:`explicit_reference_step`: forward Euler on all five equations with
  the same spatial operators as the production stepper.  Only valid for
  strictly positive rho0 (it divides the momentum equations by rho0).
* Manufactured solutions: closed-form profiles whose source terms are derived
  symbolically, so that adding them to the stepper makes the profiles exact.
* :func:`convergence_study`: measures spatial and temporal orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp

from .model import FOUR_PI, Grid, Params, State
from .spatial import ddy, div_flux, l2
from .stepper import heating_rate, step

FIELDS = ("J", "u", "w", "h", "P")


def explicit_stable_dt(state: State, params: Params) -> float:
    """Largest forward-Euler step admitted by the diffusive stability rule.

    ``0.4 dy^2 min(min(rho0 J)/lam, min(rho0 J)/mu, min(J^2)/nu)``.
    """
    dy = state.grid.dy
    rj = float(np.min(state.rho0 * state.J))
    jj = float(np.min(state.J**2))
    return 0.4 * dy * dy * min(rj / params.lam, rj / params.mu, jj / params.nu)


def explicit_reference_step(state: State, params: Params, dt: float) -> State:
    """Forward-Euler update of all five equations (no vacuum allowed)."""
    if not np.all(state.rho0 > 0):
        raise ValueError("explicit reference step needs rho0 > 0 at every node")
    limit = explicit_stable_dt(state, params)
    if dt > limit:
        raise ValueError(f"dt = {dt:.3e} exceeds the explicit stability limit {limit:.3e}")
    dy = state.grid.dy
    J, u, w, h, P, rho0 = state.J, state.u, state.w, state.h, state.P, state.rho0
    h_y = ddy(h, dy)
    v = ddy(u, dy) / J
    wr = ddy(w, dy) / J[:, None]
    hr = h_y / J[:, None]

    u_t = (params.lam * div_flux(u, J, dy) - ddy(P, dy) - np.sum(h * h_y, axis=1) / FOUR_PI) / rho0
    w_t = (params.mu * div_flux(w, J, dy) + h_y / FOUR_PI) / rho0[:, None]
    h_t = -v[:, None] * h + wr + params.nu / J[:, None] * div_flux(h, J, dy)
    P_t = -params.gamma * v * P + heating_rate(v, wr, hr, params)

    h_new = h + dt * h_t
    h_new[[0, -1]] = 0.0
    return State(t=state.t + dt, J=J + dt * v * J, u=u + dt * u_t, w=w + dt * w_t,
                 h=h_new, P=P + dt * P_t, rho0=rho0, grid=state.grid)


def explicit_reference_run(state: State, params: Params, t_end: float, dt: float) -> State:
    """Chain explicit steps of size at most ``dt`` until ``t_end``, landing on it exactly."""
    n = max(1, math.ceil((t_end - state.t) / dt - 1e-9))
    h = (t_end - state.t) / n
    for _ in range(n):
        state = explicit_reference_step(state, params, h)
    state.t = t_end
    return state


def fixed_step_run(state: State, params: Params, t_end: float, dt: float) -> State:
    """Production stepper with a uniform step, landing on ``t_end`` exactly."""
    n = max(1, math.ceil((t_end - state.t) / dt - 1e-9))
    h = (t_end - state.t) / n
    for _ in range(n):
        state = step(state, params, h)
    state.t = t_end
    return state


def relative_gap(a: State, b: State) -> dict[str, float]:
    """Per-field relative L2 gap ``|a - b| / |b|`` (absolute when ``|b| = 0``)."""
    dy = b.grid.dy
    out = {}
    for name in FIELDS:
        fa, fb = getattr(a, name), getattr(b, name)
        scale = l2(fb, dy)
        gap = l2(fa - fb, dy)
        out[name] = gap / scale if scale > 0 else gap
    return out


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

_y, _t = sp.symbols("y t", real=True)


def _compile(exprs: dict[str, sp.Expr]) -> dict:
    # common-subexpression elimination keeps the source functions cheap per step
    return {k: sp.lambdify((_y, _t), ex, "numpy", cse=True) for k, ex in exprs.items()}


@dataclass(frozen=True)
class ManufacturedCase:
    """Closed-form profiles on ``[-L, L]`` with a Gaussian envelope.

    ``J* = 1 + a_J sin(t) phi'(y)`` and ``u* = a_J cos(t) phi(y)`` with
    ``phi = exp(-(y/width)^2)``, so ``J*_t = u*_y`` holds identically.  The
    remaining profiles are trigonometric-in-time multiples of the envelope.
    ``amplitude`` scales every perturbation; zero gives the rest state.
    """

    name: str = "default"
    amplitude: float = 1.0
    half_width: float = 8.0
    width: float = 1.5
    rho_width: float = 2.0
    t_final: float = 0.1
    params: Params = field(default_factory=Params)

    def __post_init__(self):
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite and nonnegative")
        if math.exp(-(self.half_width / self.width) ** 2) > 1e-12:
            raise ValueError("envelope does not vanish at the domain ends")

    @cached_property
    def expressions(self) -> dict[str, sp.Expr]:
        a = sp.Float(self.amplitude)
        s = _y / sp.Float(self.width)
        phi = sp.exp(-s**2)
        return {
            "rho0": sp.exp(-(_y / sp.Float(self.rho_width)) ** 2),
            "J": 1 + a * sp.Float(0.3) * sp.sin(_t) * sp.diff(phi, _y),
            "u": a * sp.Float(0.3) * sp.cos(_t) * phi,
            "w1": a * sp.Float(0.2) * sp.cos(_t) * phi,
            "w2": a * sp.Float(0.1) * sp.sin(2 * _t) * s * phi,
            "h1": a * sp.Float(0.5) * (1 + sp.sin(_t) / 2) * phi,
            "h2": a * sp.Float(0.3) * sp.cos(_t) * s * phi,
            "P": a * sp.Float(0.5) * (1 + sp.Float(0.3) * sp.sin(_t)) * phi,
        }

    @cached_property
    def source_expressions(self) -> dict[str, sp.Expr]:
        """Left side minus right side of each equation on the profiles."""
        e = self.expressions
        p = self.params
        lam, mu, nu, gam = (sp.Float(p.lam), sp.Float(p.mu), sp.Float(p.nu), sp.Float(p.gamma))
        four_pi = 4 * sp.pi
        J, u, P, rho0 = e["J"], e["u"], e["P"], e["rho0"]
        w = (e["w1"], e["w2"])
        h = (e["h1"], e["h2"])
        d = lambda f: sp.diff(f, _y)  # noqa: E731
        v = d(u) / J
        hhy = sum(hc * d(hc) for hc in h)
        out = {
            "J": sp.diff(J, _t) - d(u),
            "u": rho0 * sp.diff(u, _t) + d(P) + hhy / four_pi - lam * d(v),
            "P": (sp.diff(P, _t) + gam * v * P
                  - (gam - 1) * (lam * v**2 + mu * sum((d(wc) / J) ** 2 for wc in w)
                                 + nu / four_pi * sum((d(hc) / J) ** 2 for hc in h))),
        }
        for k in range(2):
            out[f"w{k + 1}"] = rho0 * sp.diff(w[k], _t) - d(h[k]) / four_pi - mu * d(d(w[k]) / J)
            out[f"h{k + 1}"] = (sp.diff(h[k], _t) + v * h[k] - d(w[k]) / J
                                - nu / J * d(d(h[k]) / J))
        return out

    @cached_property
    def _exact_fns(self):
        return _compile(self.expressions)

    @cached_property
    def _source_fns(self):
        return _compile(self.source_expressions)

    def profiles(self, y: np.ndarray, t: float) -> dict[str, np.ndarray]:
        y = np.asarray(y, dtype=np.float64)
        return {k: np.broadcast_to(fn(y, t), y.shape).astype(np.float64)
                for k, fn in self._exact_fns.items()}

    def exact_state(self, grid: Grid, t: float) -> State:
        f = self.profiles(grid.y, t)
        return State(t=t, J=f["J"], u=f["u"], w=np.column_stack([f["w1"], f["w2"]]),
                     h=np.column_stack([f["h1"], f["h2"]]), P=f["P"], rho0=f["rho0"], grid=grid)


def mms_sources(case: ManufacturedCase, y: np.ndarray, t: float) -> dict[str, np.ndarray]:
    """Per-equation forcing at ``(y, t)``: keys ``J``, ``u``, ``w`` (N, 2), ``h`` (N, 2), ``P``."""
    y = np.asarray(y, dtype=np.float64)
    vals = {k: np.broadcast_to(fn(y, t), y.shape).astype(np.float64)
            for k, fn in case._source_fns.items()}
    return {
        "J": vals["J"],
        "u": vals["u"],
        "w": np.column_stack([vals["w1"], vals["w2"]]),
        "h": np.column_stack([vals["h1"], vals["h2"]]),
        "P": vals["P"],
    }


def manufactured_run(case: ManufacturedCase, n_nodes: int, dt: float) -> dict[str, float]:
    """Integrate the forced system to ``case.t_final`` and return per-field L2 errors."""
    grid = Grid(case.half_width, n_nodes)
    y = grid.y
    state = case.exact_state(grid, 0.0)
    n_steps = max(1, int(round(case.t_final / dt)))
    dt = case.t_final / n_steps
    forcing = lambda t: mms_sources(case, y, t)  # noqa: E731
    for k in range(n_steps):
        state = step(state, case.params, dt, sources=forcing)
        state.t = (k + 1) * dt
    exact = case.exact_state(grid, case.t_final)
    return {name: l2(getattr(state, name) - getattr(exact, name), grid.dy) for name in FIELDS}


FLOOR = 1e-12


@dataclass
class OrderStudy:
    """Errors per refinement level and fitted log-log slopes per field."""

    kind: str
    levels: list[float]
    errors: dict[str, list[float]]
    orders: dict[str, float | str]
    monotone: bool
    band: tuple[float, float]

    @property
    def floor(self) -> bool:
        return all(o == "floor" for o in self.orders.values())

    @property
    def within_band(self) -> bool:
        lo, hi = self.band
        return all(o == "floor" or lo <= o <= hi for o in self.orders.values())

    def as_dict(self) -> dict:
        return {"kind": self.kind, "levels": self.levels, "errors": self.errors,
                "orders": self.orders, "monotone": self.monotone, "band": list(self.band),
                "within_band": self.within_band, "verdict": self.verdict}

    @property
    def verdict(self) -> str:
        if self.floor:
            return "floor"
        if not self.monotone:
            return "non-monotone"
        return "pass" if self.within_band else "fail"


def fit_order(h: list[float], err: list[float]) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def _study(kind, levels, steps, errors_by_level, band):
    errors = {name: [e[name] for e in errors_by_level] for name in FIELDS}
    orders: dict[str, float | str] = {}
    monotone = True
    for name, errs in errors.items():
        if max(errs) < FLOOR:
            orders[name] = "floor"
            continue
        orders[name] = fit_order(steps, errs)
        if any(b >= a for a, b in zip(errs, errs[1:])):
            monotone = False
    return OrderStudy(kind=kind, levels=list(levels), errors=errors, orders=orders,
                      monotone=monotone, band=band)


@dataclass
class OrderReport:
    case: str
    spatial: OrderStudy
    temporal: OrderStudy

    @property
    def ok(self) -> bool:
        return all(s.verdict in ("pass", "floor") for s in (self.spatial, self.temporal))

    def as_dict(self) -> dict:
        return {"case": self.case, "spatial": self.spatial.as_dict(),
                "temporal": self.temporal.as_dict(), "ok": self.ok}


def convergence_study(case: ManufacturedCase, grids=(128, 256, 512), dts=(4e-3, 2e-3, 1e-3),
                      spatial_dt: float = 2e-5, temporal_nodes: int = 2049,
                      executor=None) -> OrderReport:
    """Spatial order at fixed tiny ``spatial_dt``; temporal order on a fixed fine grid.

    ``executor`` (a ``concurrent.futures`` executor) fans the independent runs
    out; results are identical to the sequential path.
    """
    grids = [int(n) for n in grids]
    dts = [float(d) for d in dts]
    if len(grids) < 3 or len(dts) < 3:
        raise ValueError("need >= 3 refinement levels for both grids and dts")
    if any(b <= a for a, b in zip(grids, grids[1:])):
        raise ValueError("grids must be strictly increasing")
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("dts must be strictly decreasing")
    jobs = [(n, spatial_dt) for n in grids] + [(temporal_nodes, d) for d in dts]
    if executor is None:
        results = [manufactured_run(case, n, d) for n, d in jobs]
    else:
        results = list(executor.map(lambda job: manufactured_run(case, *job), jobs))
    spacing = [2.0 * case.half_width / (n - 1) for n in grids]
    spatial = _study("spatial", grids, spacing, results[:len(grids)], (1.7, 2.3))
    temporal = _study("temporal", dts, dts, results[len(grids):], (0.7, 1.3))
    return OrderReport(case.name, spatial, temporal)


CASES = {
    "default": lambda: ManufacturedCase(),
    "zero": lambda: ManufacturedCase(name="zero", amplitude=0.0),
}

"""Per-output scalar monitors: energy, Jacobian bound, norm series, interpolation
inequalities and identity residuals."""

from __future__ import annotations

import math
import queue
import threading
from dataclasses import astuple, dataclass, fields

import numpy as np

from .fluxes import (DEFAULT_MASK_REL, ReconstructionAccumulator, compute_F, compute_G,
                     definitional_residual, field_rate, h_squared, residual_F_equation,
                     residual_G_equation, residual_h2_norm, shear_rate, vacuum_mask)
from .model import EIGHT_PI, Params, State, compute_E0, compute_J_lower_bound
from .spatial import ddy, l2, magnitude, norms, trapz

# relative slack allowed on each discrete inequality link
MONITOR_TOL = 0.05
INEQUALITIES = ("binf", "fin", "ginf", "h24", "phy")


def total_energy(state: State, params: Params) -> float:
    dens = (0.5 * state.rho0 * state.u**2
            + 0.5 * state.rho0 * np.sum(state.w**2, axis=1)
            + state.J * h_squared(state) / EIGHT_PI
            + state.J * state.P / (params.gamma - 1.0))
    return float(trapz(dens, state.grid.dy))


@dataclass(frozen=True)
class JBoundCheck:
    min_J: float
    satisfied: bool


def check_J_bound(state: State, J_bar: float) -> JBoundCheck:
    min_J = float(np.min(state.J))
    return JBoundCheck(min_J, min_J >= J_bar)


@dataclass(frozen=True)
class Inequality:
    """Chain ``lhs <= mid <= rhs`` evaluated with discrete norms.

    ``mid`` is ``None`` for single-link inequalities.  ``extra`` holds an
    optional weighted link ``(lower, upper)`` that must also hold.
    """

    lhs: float
    mid: float | None
    rhs: float
    extra: tuple[float, float] | None = None

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def satisfied(self) -> bool:
        links = [(self.lhs, self.rhs)] if self.mid is None else [(self.lhs, self.mid),
                                                                 (self.mid, self.rhs)]
        if self.extra is not None:
            links.append(self.extra)
        return all(hi - lo >= -MONITOR_TOL * hi for lo, hi in links)


def _sup_chain(f, dy, weighted_pair=None):
    """``|f|_inf^2 <= int |d|f|^2/dy| <= 2 |f|_2 |f_y|_2`` for a field vanishing at an end."""
    sq = magnitude(f) ** 2
    fy = ddy(f, dy)
    return Inequality(lhs=float(sq.max()),
                      mid=float(trapz(np.abs(ddy(sq, dy)), dy)),
                      rhs=2.0 * l2(f, dy) * l2(fy, dy),
                      extra=weighted_pair)


def inequality_monitors(state: State, params: Params, rho_bar: float | None = None,
                        J_bar: float | None = None,
                        mask_rel: float = DEFAULT_MASK_REL) -> dict[str, Inequality]:
    """Evaluate the five interpolation inequalities used for the a priori bounds.

    The density-weighted links of the F and G chains use the explicit
    constant ``2 sqrt(rho_bar / J_bar)`` and are restricted to the non-vacuum
    mask.  ``rho_bar`` and ``J_bar`` default to ``max rho0`` and ``min J``.
    """
    dy = state.grid.dy
    J = state.J
    rho0 = state.rho0
    rho_bar = float(rho0.max()) if rho_bar is None else rho_bar
    J_bar = float(J.min()) if J_bar is None else J_bar
    mask = vacuum_mask(rho0, mask_rel)
    inside = mask.astype(np.float64)
    inv_rho = np.divide(inside, rho0, out=np.zeros_like(rho0), where=mask)

    def weighted_link(f):
        fy = ddy(f, dy)
        plain = 2.0 * l2(f, dy, inside) * l2(fy, dy, inside)
        bound = (2.0 * math.sqrt(rho_bar / J_bar) * l2(f, dy, inside * J)
                 * l2(fy, dy, inv_rho)) if rho_bar > 0 else 0.0
        return (plain, bound)

    h = state.h
    hy = ddy(h, dy)
    binf = _sup_chain(h, dy)
    binf = Inequality(lhs=binf.lhs, mid=binf.mid, rhs=2.0 * l2(h, dy, J) * l2(hy, dy, 1.0 / J))

    F = compute_F(state, params)
    G = compute_G(state, params)
    hs = h_squared(state)
    h24 = Inequality(lhs=float(np.max(hs) ** 2), mid=None,
                     rhs=2.0 * float(trapz(np.abs(ddy(hs, dy)) * hs, dy)))
    q = field_rate(state)
    phy = Inequality(lhs=float(np.max(magnitude(q)) ** 2), mid=None,
                     rhs=2.0 * float(trapz(magnitude(q) * magnitude(ddy(q, dy)), dy)))
    return {
        "binf": binf,
        "fin": _sup_chain(F, dy, weighted_link(F)),
        "ginf": _sup_chain(G, dy, weighted_link(G)),
        "h24": h24,
        "phy": phy,
    }


@dataclass
class DiagnosticsRecord:
    """One row of ``diagnostics.csv``; field order is the column order."""

    t: float
    energy: float
    energy_rel_drift: float
    J_min: float
    J_max: float
    J_bar: float
    sqrt_rho0_u_l2: float
    sqrt_rho0_w_l2: float
    sqrt_J_h_l2: float
    hy_over_sqrt_J_l2: float
    wy_over_sqrt_J_l2: float
    sqrt_J_F_l2: float
    sqrt_J_G_l2: float
    P_linf: float
    P_l1: float
    Jy_l2: float
    Py_l2: float
    F_linf: float
    G_linf: float
    h_linf: float
    slack_binf: float
    slack_fin: float
    slack_ginf: float
    slack_h24: float
    slack_phy: float
    monitors_ok: int
    J_bound_ok: int
    int_hy_over_sqrt_J_sq: float
    int_Fy_over_sqrt_rho0_sq: float
    int_Gy_over_sqrt_rho0_sq: float
    definitional: float
    residual_h2: float
    residual_F: float
    residual_G: float
    mask_fraction: float
    recon_J_mismatch: float
    recon_Jh2_mismatch: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> tuple:
        return astuple(self)


NAN = float("nan")


class Recorder:
    """Context for building records along one trajectory.

    Holds E0, the Jacobian lower bound, the previous output state (for the
    time-difference residuals), the running reconstructions and the running
    time integrals of the dissipation norms.  ``residuals`` and
    ``reconstructions`` switch those (comparatively costly) columns off; they
    are then written as NaN.
    """

    def __init__(self, initial: State, params: Params, mask_rel: float = DEFAULT_MASK_REL,
                 residuals: bool = True, reconstructions: bool = True):
        self.params = params
        self.mask_rel = mask_rel
        self.residuals = residuals
        self.reconstructions = reconstructions
        self.E0 = compute_E0(initial, params)
        self.mass = float(trapz(initial.rho0, initial.grid.dy))
        self.J_bar = compute_J_lower_bound(self.mass, self.E0, params)
        self.rho_bar = float(initial.rho0.max())
        self.prev: State | None = None
        self.recon = ReconstructionAccumulator(params)
        self.integrals = np.zeros(3)
        self._rates: np.ndarray | None = None
        self.records: list[DiagnosticsRecord] = []

    def dissipation_rates(self, state: State) -> np.ndarray:
        dy = state.grid.dy
        mask = vacuum_mask(state.rho0, self.mask_rel)
        inv_rho = np.divide(1.0, state.rho0, out=np.zeros_like(state.rho0), where=mask)
        Fy = ddy(compute_F(state, self.params), dy)
        Gy = ddy(compute_G(state, self.params), dy)
        return np.array([
            l2(ddy(state.h, dy), dy, 1.0 / state.J) ** 2,
            l2(Fy, dy, inv_rho) ** 2,
            l2(Gy, dy, inv_rho) ** 2,
        ])

    def record(self, state: State) -> DiagnosticsRecord:
        rec = make_record(self.prev, state, self.params, self)
        self.records.append(rec)
        self.prev = state
        return rec


def make_record(prev: State | None, next: State, params: Params, context: Recorder) -> DiagnosticsRecord:
    """Fill every record field for ``next``; residuals are NaN when ``prev`` is None.

    Advances the running integrals and reconstructions held by ``context``.
    """
    s = next
    dy = s.grid.dy
    J = s.J
    energy = total_energy(s, params)
    E0 = context.E0
    drift = abs(energy - E0) / E0 if E0 > 0 else abs(energy - E0)

    rates = context.dissipation_rates(s)
    if context._rates is not None and prev is not None:
        context.integrals += 0.5 * (next.t - prev.t) * (context._rates + rates)
    context._rates = rates
    if context.reconstructions:
        context.recon.add(s)
        recon_J, recon_Jh2 = context.recon.J_mismatch(), context.recon.Jh2_mismatch()
    else:
        recon_J = recon_Jh2 = NAN

    F = compute_F(s, params)
    G = compute_G(s, params)
    monitors = inequality_monitors(s, params, context.rho_bar, context.J_bar, context.mask_rel)
    jcheck = check_J_bound(s, context.J_bar)
    defs = definitional_residual(s, params)

    if prev is None or not context.residuals:
        r_h2 = r_F = r_G = frac = NAN
    else:
        r_h2 = residual_h2_norm(prev, s, params)
        rep_F = residual_F_equation(prev, s, params, context.mask_rel)
        rep_G = residual_G_equation(prev, s, params, context.mask_rel)
        r_F, r_G, frac = rep_F.l2, rep_G.l2, rep_G.mask_fraction

    return DiagnosticsRecord(
        t=float(s.t),
        energy=energy,
        energy_rel_drift=drift,
        J_min=float(J.min()),
        J_max=float(J.max()),
        J_bar=context.J_bar,
        sqrt_rho0_u_l2=l2(s.u, dy, s.rho0),
        sqrt_rho0_w_l2=l2(s.w, dy, s.rho0),
        sqrt_J_h_l2=l2(s.h, dy, J),
        hy_over_sqrt_J_l2=l2(ddy(s.h, dy), dy, 1.0 / J),
        wy_over_sqrt_J_l2=l2(ddy(s.w, dy), dy, 1.0 / J),
        sqrt_J_F_l2=l2(F, dy, J),
        sqrt_J_G_l2=l2(G, dy, J),
        P_linf=norms(s.P, dy)["linf"],
        P_l1=norms(s.P, dy)["l1"],
        Jy_l2=l2(ddy(J, dy), dy),
        Py_l2=l2(ddy(s.P, dy), dy),
        F_linf=norms(F, dy)["linf"],
        G_linf=norms(G, dy)["linf"],
        h_linf=norms(s.h, dy)["linf"],
        slack_binf=monitors["binf"].slack,
        slack_fin=monitors["fin"].slack,
        slack_ginf=monitors["ginf"].slack,
        slack_h24=monitors["h24"].slack,
        slack_phy=monitors["phy"].slack,
        monitors_ok=int(all(m.satisfied for m in monitors.values())),
        J_bound_ok=int(jcheck.satisfied),
        int_hy_over_sqrt_J_sq=float(context.integrals[0]),
        int_Fy_over_sqrt_rho0_sq=float(context.integrals[1]),
        int_Gy_over_sqrt_rho0_sq=float(context.integrals[2]),
        definitional=max(defs.values()),
        residual_h2=r_h2,
        residual_F=r_F,
        residual_G=r_G,
        mask_fraction=frac,
        recon_J_mismatch=recon_J,
        recon_Jh2_mismatch=recon_Jh2,
    )


class QueuedSink:
    """Run ``sink(record, state)`` on a worker thread behind a bounded queue.

    ``put`` blocks when the queue is full, so a slow consumer throttles the
    solver instead of losing records.  Call :meth:`close` to drain and join.
    """

    def __init__(self, sink, maxsize: int = 16):
        self.sink = sink
        self._queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self._error: BaseException | None = None
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._thread.start()

    def _drain(self):
        while True:
            item = self._queue.get()
            if item is None:
                return
            try:
                self.sink(*item)
            except BaseException as exc:  # surfaced on close()
                self._error = exc

    def __call__(self, record, state):
        self._queue.put((record, state))

    def close(self):
        self._queue.put(None)
        self._thread.join()
        if self._error is not None:
            raise self._error

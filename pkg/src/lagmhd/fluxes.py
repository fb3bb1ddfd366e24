"""Effective viscous fluxes, identity residuals and reconstructions.

Everything here is a diagnostic of stored states: time derivatives are
backward differences of state pairs, time integrals are trapezoid sums over a
state history.  Equations that divide by rho0 are evaluated only on the
non-vacuum mask ``rho0 >= rel * max(rho0)`` (interior nodes only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import EIGHT_PI, FOUR_PI, Params, State
from .spatial import cumulative_from_left, ddy, div_flux, l2, trapezoid_weights, weighted_div_flux

DEFAULT_MASK_REL = 1e-8


@dataclass
class FluxFields:
    F: np.ndarray
    G: np.ndarray
    A: np.ndarray


def velocity_rate(state: State) -> np.ndarray:
    """``u_y / J`` at the nodes."""
    return ddy(state.u, state.grid.dy) / state.J


def shear_rate(state: State) -> np.ndarray:
    return ddy(state.w, state.grid.dy) / state.J[:, None]


def field_rate(state: State) -> np.ndarray:
    return ddy(state.h, state.grid.dy) / state.J[:, None]


def h_squared(state: State) -> np.ndarray:
    return np.sum(state.h**2, axis=1)


def compute_F(state: State, params: Params) -> np.ndarray:
    """Transverse effective viscous flux ``mu w_y/J + h/(4 pi)``."""
    return params.mu * shear_rate(state) + state.h / FOUR_PI


def compute_G(state: State, params: Params) -> np.ndarray:
    """Effective viscous flux ``lam u_y/J - P - |h|^2/(8 pi)``."""
    return params.lam * velocity_rate(state) - state.P - h_squared(state) / EIGHT_PI


def compute_A(state: State, params: Params) -> np.ndarray:
    """Integrating-factor weight ``-rho0 u / lam``."""
    return -state.rho0 * state.u / params.lam


def flux_fields(state: State, params: Params) -> FluxFields:
    return FluxFields(F=compute_F(state, params), G=compute_G(state, params),
                      A=compute_A(state, params))


def definitional_residual(state: State, params: Params) -> dict[str, float]:
    """Max-abs residuals of the flux definitions and of the pressure-equation rewrite.

    These are tautologies of the formulas above; a nonzero value beyond
    round-off flags transcription drift or corrupted input.  Non-finite input
    yields ``inf``.
    """
    v = velocity_rate(state)
    hs = h_squared(state)
    G = compute_G(state, params)
    F = compute_F(state, params)
    wr = shear_rate(state)
    hr = field_rate(state)
    g, lam, mu, nu = params.gamma, params.lam, params.mu, params.nu
    P = state.P

    g_def = lam * v - G - P - hs / EIGHT_PI
    f_def = mu * wr + state.h / FOUR_PI - F
    direct = -g * v * P + (g - 1.0) * (lam * v**2 + mu * np.sum(wr**2, axis=1)
                                       + nu / FOUR_PI * np.sum(hr**2, axis=1))
    rewritten = (-(P + 0.5 * (2.0 - g) * G + (2.0 - g) / (16.0 * np.pi) * hs) ** 2 / lam
                 + g**2 / (4.0 * lam) * (G + hs / EIGHT_PI) ** 2
                 + (g - 1.0) / mu * np.sum((F - state.h / FOUR_PI) ** 2, axis=1)
                 + nu * (g - 1.0) / FOUR_PI * np.sum(hr**2, axis=1))

    def scaled(res, *terms):
        if not all(np.all(np.isfinite(t)) for t in (res, *terms)):
            return float("inf")
        scale = max(1.0, *(float(np.max(np.abs(t))) for t in terms))
        return float(np.max(np.abs(res))) / scale

    return {
        "G": scaled(g_def, lam * v, P, hs),
        "F": scaled(f_def, mu * wr, state.h),
        "P_rewrite": scaled(direct - rewritten, direct, rewritten),
    }


def vacuum_mask(rho0: np.ndarray, rel: float = DEFAULT_MASK_REL) -> np.ndarray:
    """Interior nodes whose density and both neighbours exceed ``rel * max(rho0)``."""
    rho0 = np.asarray(rho0)
    peak = float(rho0.max()) if rho0.size else 0.0
    dense = rho0 >= rel * peak if peak > 0 else np.zeros(rho0.shape, dtype=bool)
    mask = dense.copy()
    mask[1:-1] &= dense[:-2] & dense[2:]
    mask[[0, -1]] = False
    return mask


@dataclass
class ResidualReport:
    l2: float
    linf: float
    mask_fraction: float
    residual: np.ndarray

    def as_dict(self) -> dict:
        return {"l2": self.l2, "linf": self.linf, "mask_fraction": self.mask_fraction}


def _masked_report(res: np.ndarray, mask: np.ndarray, dy: float) -> ResidualReport:
    # values outside the mask may be huge or non-finite; they are discarded
    with np.errstate(over="ignore", invalid="ignore"):
        mag = np.sqrt(np.sum(res**2, axis=1)) if res.ndim == 2 else np.abs(res)
    mag = np.where(mask, mag, 0.0)
    wts = trapezoid_weights(mag.size, dy)
    frac = float(mask.mean()) if mask.size else 0.0
    if not mask.any():
        return ResidualReport(0.0, 0.0, frac, res)
    return ResidualReport(float(np.sqrt(np.sum(wts * mag**2))), float(mag.max()), frac, res)


def _time_step(prev: State, next: State) -> float:
    dt = next.t - prev.t
    if not dt > 0:
        raise ValueError(f"state pair must have increasing times, got {prev.t} -> {next.t}")
    return dt


def residual_h2(prev: State, next: State, params: Params) -> np.ndarray:
    """Pointwise residual of ``u_y/J = (d/dt int rho0 u + P + |h|^2/8pi) / lam`` on ``next``."""
    dt = _time_step(prev, next)
    dy = next.grid.dy
    momentum_rate = (cumulative_from_left(next.rho0 * next.u, dy)
                     - cumulative_from_left(prev.rho0 * prev.u, dy)) / dt
    return velocity_rate(next) - (momentum_rate + next.P + h_squared(next) / EIGHT_PI) / params.lam


def residual_h2_norm(prev: State, next: State, params: Params) -> float:
    return l2(residual_h2(prev, next, params), next.grid.dy)


def residual_F_equation(prev: State, next: State, params: Params,
                        mask_rel: float = DEFAULT_MASK_REL) -> ResidualReport:
    """Masked residual of the evolution equation satisfied by F."""
    dt = _time_step(prev, next)
    dy = next.grid.dy
    J = next.J[:, None]
    F_new = compute_F(next, params)
    F_old = compute_F(prev, params)
    v = velocity_rate(next)[:, None]
    with np.errstate(invalid="ignore", over="ignore"):
        diffusion = params.mu / J * weighted_div_flux(F_new, next.rho0, dy)
        rhs = (-v * F_new + shear_rate(next) / FOUR_PI
               + params.nu / (FOUR_PI * J) * div_flux(next.h, next.J, dy))
        res = (F_new - F_old) / dt - diffusion - rhs
    return _masked_report(res, vacuum_mask(next.rho0, mask_rel), dy)


def residual_G_equation(prev: State, next: State, params: Params,
                        mask_rel: float = DEFAULT_MASK_REL) -> ResidualReport:
    """Masked residual of the evolution equation satisfied by G."""
    dt = _time_step(prev, next)
    dy = next.grid.dy
    g, lam, mu, nu = params.gamma, params.lam, params.mu, params.nu
    J = next.J
    G_new = compute_G(next, params)
    G_old = compute_G(prev, params)
    v = velocity_rate(next)
    hs = h_squared(next)
    wy = ddy(next.w, dy)
    hr = field_rate(next)
    with np.errstate(invalid="ignore", over="ignore"):
        diffusion = lam / J * weighted_div_flux(G_new, next.rho0, dy)
        rhs = (-g * v * G_new
               + (2.0 - g) / EIGHT_PI * v * hs
               - (g - 1.0) * mu * np.sum(shear_rate(next) ** 2, axis=1)
               - np.sum(next.h * wy, axis=1) / (FOUR_PI * J)
               - nu / FOUR_PI * ((g - 1.0) * np.sum(hr**2, axis=1)
                                 + np.sum(next.h * div_flux(next.h, J, dy), axis=1) / J))
        res = (G_new - G_old) / dt - diffusion - rhs
    return _masked_report(res, vacuum_mask(next.rho0, mask_rel), dy)


class ReconstructionAccumulator:
    """Running trapezoid-in-time reconstructions of J and of J|h|^2.

    The J|h|^2 formula has the kernel ``exp(Psi(t) - Psi(s))`` with
    ``Psi = int_{-L}^y A``; it factorises, so only ``int exp(-Psi) f ds`` has
    to be carried and each state is visited once.  ``Psi`` stays bounded by
    ``sqrt(2 |rho0|_1 E0) / lam``, so the split exponentials cannot overflow.
    """

    def __init__(self, params: Params):
        self.params = params
        self.count = 0
        self._last = None

    def _terms(self, state: State):
        p = self.params
        dy = state.grid.dy
        hs = h_squared(state)
        stretch = (compute_G(state, p) + state.P + hs / EIGHT_PI) / p.lam
        psi = cumulative_from_left(compute_A(state, p), dy)
        jh2 = state.J * hs
        forcing = (2.0 * p.nu * np.sum(state.h * div_flux(state.h, state.J, dy), axis=1)
                   + 2.0 * np.sum(ddy(state.w, dy) * state.h, axis=1)
                   - (state.P + hs / EIGHT_PI) * jh2 / p.lam)
        return stretch, psi, np.exp(-psi) * forcing

    def add(self, state: State):
        stretch, psi, weighted = self._terms(state)
        if self.count == 0:
            self.J0 = state.J.copy()
            self.base = np.exp(-psi) * state.J * h_squared(state)
            self.int_stretch = np.zeros_like(stretch)
            self.int_forcing = np.zeros_like(weighted)
        else:
            t_prev, s_prev, w_prev = self._last
            dt = state.t - t_prev
            if not dt > 0:
                raise ValueError("history must have strictly increasing times")
            self.int_stretch = self.int_stretch + 0.5 * dt * (s_prev + stretch)
            self.int_forcing = self.int_forcing + 0.5 * dt * (w_prev + weighted)
        self._last = (state.t, stretch, weighted)
        self._psi = psi
        self.state = state
        self.count += 1

    def J(self) -> np.ndarray:
        return self.J0 * np.exp(self.int_stretch)

    def Jh2(self) -> np.ndarray:
        return np.exp(self._psi) * (self.base + self.int_forcing)

    def J_mismatch(self) -> float:
        """Relative sup-norm gap between reconstructed and evolved J."""
        J = self.state.J
        return float(np.max(np.abs(self.J() - J)) / np.max(np.abs(J)))

    def Jh2_mismatch(self) -> float:
        """Relative L2 gap between reconstructed and direct J|h|^2 (absolute if the latter is 0)."""
        dy = self.state.grid.dy
        direct = self.state.J * h_squared(self.state)
        gap = l2(self.Jh2() - direct, dy)
        scale = l2(direct, dy)
        return gap / scale if scale > 0 else gap


def _accumulate(history: Iterable[State], params: Params) -> ReconstructionAccumulator:
    acc = ReconstructionAccumulator(params)
    for s in history:
        acc.add(s)
    if acc.count == 0:
        raise ValueError("history is empty")
    return acc


def reconstruct_J(history: Iterable[State], params: Params) -> np.ndarray:
    """``J0 exp((1/lam) int_0^t (G + P + |h|^2/8pi) ds)`` over the stored history."""
    return _accumulate(history, params).J()


def reconstruct_Jh2(history: Iterable[State], params: Params) -> np.ndarray:
    """Integrating-factor reconstruction of ``J|h|^2`` at the last history time."""
    return _accumulate(history, params).Jh2()


def reconstruct_flow_map(state: State, anchor: float | None = None) -> np.ndarray:
    """Eulerian positions ``eta = anchor + int_{-L}^y J``; ``anchor`` defaults to ``-L``."""
    left = -state.grid.half_width if anchor is None else anchor
    return left + cumulative_from_left(state.J, state.grid.dy)


def flow_map_velocity_gap(prev: State, next: State) -> float:
    """Relative L2 gap between the backward-differenced flow map and the velocity.

    The left end of the truncated line is anchored, so the map moves with the
    velocity relative to that end: the comparison is against ``u - u[0]``.
    """
    dt = _time_step(prev, next)
    dy = next.grid.dy
    eta_t = (reconstruct_flow_map(next) - reconstruct_flow_map(prev)) / dt
    rel_u = next.u - next.u[0]
    scale = l2(rel_u, dy)
    gap = l2(eta_t - rel_u, dy)
    return gap / scale if scale > 0 else gap

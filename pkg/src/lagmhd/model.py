"""Domain types, initial-data families and closed-form constants.

The planar MHD system is written in Lagrangian mass-fixed labels ``y`` on a
truncated line ``[-L, L]``.  A :class:`State` carries the five evolved fields
(J, u, w, h, P) together with the frozen initial density ``rho0``; ``w`` and
``h`` are transverse 2-vectors stored with shape ``(N, 2)``.

Gaussian units are kept literally: the magnetic coupling factor is ``4*pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

FOUR_PI = 4.0 * math.pi
EIGHT_PI = 8.0 * math.pi

FAMILY_KINDS = ("gaussian_vacuum", "compact_support", "point_vacuum", "positive_floor", "all_zero")

# far-field compatibility tolerance for h0 and P0 at y = +-L
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Params:
    """Physical constants: viscosities ``lam`` (longitudinal), ``mu`` (shear),
    magnetic resistivity ``nu`` and adiabatic index ``gamma``."""

    lam: float = 1.0
    mu: float = 1.0
    nu: float = 1.0
    gamma: float = 5.0 / 3.0

    def __post_init__(self):
        for name in ("lam", "mu", "nu"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 1):
            raise ValueError(f"gamma must exceed 1, got {self.gamma!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform node-centred mesh on ``[-half_width, half_width]``."""

    half_width: float
    n_nodes: int

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise ValueError(f"n_nodes must be an integer >= 3, got {self.n_nodes!r}")

    @property
    def dy(self) -> float:
        return 2.0 * self.half_width / (self.n_nodes - 1)

    @property
    def y(self) -> np.ndarray:
        nodes = -self.half_width + np.arange(self.n_nodes) * self.dy
        nodes[-1] = self.half_width
        return nodes


@dataclass
class State:
    """One time level of the Lagrangian system.

    ``rho0`` is frozen: it is stored read-only and shared between the states
    produced by the stepper.
    """

    t: float
    J: np.ndarray
    u: np.ndarray
    w: np.ndarray
    h: np.ndarray
    P: np.ndarray
    rho0: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        n = self.grid.n_nodes
        for name, shape in (("J", (n,)), ("u", (n,)), ("w", (n, 2)), ("h", (n, 2)),
                            ("P", (n,)), ("rho0", (n,))):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)
        if self.rho0.flags.writeable:
            self.rho0 = self.rho0.copy()
            self.rho0.flags.writeable = False

    def copy(self) -> State:
        return replace(self, J=self.J.copy(), u=self.u.copy(), w=self.w.copy(),
                       h=self.h.copy(), P=self.P.copy())

    def check_admissible(self):
        """Raise ``ValueError`` unless J > 0, P >= 0, rho0 >= 0 and all fields finite."""
        for name in ("J", "u", "w", "h", "P", "rho0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        if not np.all(self.J > 0):
            raise ValueError("J must be positive at every node")
        if not np.all(self.P >= 0):
            raise ValueError("P must be nonnegative at every node")
        if not np.all(self.rho0 >= 0):
            raise ValueError("rho0 must be nonnegative at every node")


def _bump(y, width):
    return np.exp(-((y / width) ** 2))


def _odd_bump(y, width):
    return (y / width) * np.exp(-((y / width) ** 2))


@dataclass(frozen=True)
class InitialFamily:
    """Parametrised initial data.

    The density profile is selected by ``kind``:

    * ``gaussian_vacuum``: ``rho_amp * exp(-(y/rho_width)^2)`` (far-field vacuum)
    * ``compact_support``: ``rho_amp * max(0, 1 - (y/rho_width)^2)``, or a top hat
      of the same support when ``rho_profile == "top_hat"``
    * ``point_vacuum``: ``rho_amp * (y/w)^2 exp(-(y/w)^2)``, vanishing at y = 0
    * ``positive_floor``: ``rho_floor + rho_amp * exp(-(y/rho_width)^2)``
    * ``all_zero``: gaussian density with u = w = h = P = 0

    Velocity, field and pressure share the Gaussian envelope shapes: the first
    transverse component is even, the second odd, ``u0`` is odd.
    """

    kind: str = "gaussian_vacuum"
    rho_amp: float = 1.0
    rho_width: float = 1.0
    rho_floor: float = 0.1
    rho_profile: str = "parabolic"
    P_amp: float = 1.0
    P_width: float = 1.0
    u_amp: float = 0.0
    u_width: float = 1.0
    w_amp: tuple[float, float] = (0.0, 0.0)
    w_width: float = 1.0
    h_amp: tuple[float, float] = (0.0, 0.0)
    h_width: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown initial family {self.kind!r}; expected one of {FAMILY_KINDS}")
        if self.rho_profile not in ("parabolic", "top_hat"):
            raise ValueError(f"rho_profile must be 'parabolic' or 'top_hat', got {self.rho_profile!r}")
        object.__setattr__(self, "w_amp", tuple(float(a) for a in self.w_amp))
        object.__setattr__(self, "h_amp", tuple(float(a) for a in self.h_amp))
        if len(self.w_amp) != 2 or len(self.h_amp) != 2:
            raise ValueError("w_amp and h_amp must have two components")
        values = [self.rho_amp, self.rho_width, self.rho_floor, self.P_amp, self.P_width,
                  self.u_amp, self.u_width, self.w_width, self.h_width, *self.w_amp, *self.h_amp]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("initial family parameters must be finite")
        for name in ("rho_width", "P_width", "u_width", "w_width", "h_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rho_amp < 0 or self.rho_floor < 0 or self.P_amp < 0:
            raise ValueError("rho_amp, rho_floor and P_amp must be nonnegative")

    def rho_bound(self) -> float:
        """Upper bound of the density profile (the constant rho-bar)."""
        if self.kind == "point_vacuum":
            return self.rho_amp / math.e
        if self.kind == "positive_floor":
            return self.rho_floor + self.rho_amp
        return self.rho_amp

    def density(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        s = y / self.rho_width
        if self.kind in ("gaussian_vacuum", "all_zero"):
            return self.rho_amp * np.exp(-s**2)
        if self.kind == "compact_support":
            if self.rho_profile == "top_hat":
                # left limit at the jump nodes y = +-rho_width
                return np.where((s > -1.0) & (s <= 1.0), self.rho_amp, 0.0)
            return self.rho_amp * np.maximum(0.0, 1.0 - s**2)
        if self.kind == "point_vacuum":
            return self.rho_amp * s**2 * np.exp(-s**2)
        return self.rho_floor + self.rho_amp * np.exp(-s**2)


def sample_initial_state(family: InitialFamily, grid: Grid) -> State:
    """Sample ``family`` at the grid nodes and return the t = 0 state with J = 1."""
    y = grid.y
    n = grid.n_nodes
    rho0 = family.density(y)
    w = np.zeros((n, 2))
    h = np.zeros((n, 2))
    if family.kind == "all_zero":
        u = np.zeros(n)
        P = np.zeros(n)
    else:
        u = family.u_amp * _odd_bump(y, family.u_width)
        P = family.P_amp * _bump(y, family.P_width)
        w[:, 0] = family.w_amp[0] * _bump(y, family.w_width)
        w[:, 1] = family.w_amp[1] * _odd_bump(y, family.w_width)
        h[:, 0] = family.h_amp[0] * _bump(y, family.h_width)
        h[:, 1] = family.h_amp[1] * _odd_bump(y, family.h_width)

    for name, arr in (("h0", np.abs(h[[0, -1]])), ("P0", np.abs(P[[0, -1]]))):
        if np.any(arr > BOUNDARY_TOL):
            raise ValueError(f"{name} does not vanish at y = +-L (max {arr.max():.3e}); "
                             f"widen the domain or narrow the profile")
    state = State(t=0.0, J=np.ones(n), u=u, w=w, h=h, P=P, rho0=rho0, grid=grid)
    state.check_admissible()
    return state


def compute_E0(state: State, params: Params) -> float:
    """Initial energy: kinetic + magnetic + internal, by trapezoid quadrature."""
    from .spatial import trapz

    dens = (0.5 * state.rho0 * state.u**2
            + 0.5 * state.rho0 * np.sum(state.w**2, axis=1)
            + np.sum(state.h**2, axis=1) / EIGHT_PI
            + state.P / (params.gamma - 1.0))
    return float(trapz(dens, state.grid.dy))


def compute_J_lower_bound(rho0_mass: float, E0: float, params: Params) -> float:
    """Lower bound ``exp(-(2 sqrt 2 / lam) sqrt(mass * E0))`` for the Jacobian."""
    if rho0_mass < 0 or E0 < 0:
        raise ValueError("rho0_mass and E0 must be nonnegative")
    return math.exp(-(2.0 * math.sqrt(2.0) / params.lam) * math.sqrt(rho0_mass * E0))

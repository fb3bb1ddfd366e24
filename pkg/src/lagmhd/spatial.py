"""Finite-difference operators, quadrature and norms on the uniform grid.

Fields are plain numpy arrays whose first axis runs over the grid nodes; a
trailing axis of length 2 holds transverse vector components.  Every operator
is linear in its field argument.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid


def ddy(f: np.ndarray, dy: float) -> np.ndarray:
    """Second-order centred derivative, one-sided 3-point stencils at the ends."""
    return np.gradient(f, dy, axis=0, edge_order=2)


def face_average(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a[1:] + a[:-1])


def div_flux(phi: np.ndarray, J: np.ndarray, dy: float) -> np.ndarray:
    """Flux-form ``(phi_y / J)_y``.

    Face fluxes ``(phi[i+1] - phi[i]) / (dy * J_face)`` with arithmetic face
    averages of J are differenced across faces.  At the two end nodes the
    outer flux is taken as zero (homogeneous Neumann closure on a half cell),
    which makes the operator the exact negative adjoint of the face gradient
    under trapezoid weights.
    """
    J = np.asarray(J, dtype=np.float64)
    if not np.all(J > 0):
        raise ValueError("div_flux needs a strictly positive coefficient J")
    return _flux_divergence(phi, face_average(J), dy)


def _flux_divergence(phi, coef_face, dy):
    if phi.ndim == 2:
        coef_face = coef_face[:, None]
    q = np.diff(phi, axis=0) / (dy * coef_face)
    out = np.empty_like(phi, dtype=np.float64)
    out[1:-1] = (q[1:] - q[:-1]) / dy
    out[0] = 2.0 * q[0] / dy
    out[-1] = -2.0 * q[-1] / dy
    return out


def weighted_div_flux(phi: np.ndarray, coef: np.ndarray, dy: float) -> np.ndarray:
    """``(phi_y / coef)_y`` for a nonnegative coefficient such as rho0.

    Faces where the averaged coefficient vanishes give ``inf``/``nan``;
    callers mask those nodes out.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        return _flux_divergence(phi, face_average(np.asarray(coef, dtype=np.float64)), dy)


def trapz(f: np.ndarray, dy: float) -> np.ndarray:
    """Composite trapezoid rule over the whole grid (along axis 0)."""
    f = np.asarray(f, dtype=np.float64)
    return dy * (np.sum(f, axis=0) - 0.5 * (f[0] + f[-1]))


def trapezoid_weights(n: int, dy: float) -> np.ndarray:
    wts = np.full(n, dy)
    wts[0] = wts[-1] = 0.5 * dy
    return wts


def cumulative_from_left(f: np.ndarray, dy: float) -> np.ndarray:
    """Running trapezoid integral from the left end; zero at the first node."""
    return cumulative_trapezoid(np.asarray(f, dtype=np.float64), dx=dy, axis=0, initial=0.0)


def magnitude(f: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean length of a vector field; identity (abs) on scalars."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 2:
        return np.sqrt(np.sum(f**2, axis=1))
    return np.abs(f)


def norms(f: np.ndarray, dy: float, weight: np.ndarray | None = None) -> dict[str, float]:
    """Trapezoid L1, L2 and max norms of ``|f|``.

    With ``weight`` the L2 entry is ``(integral weight * |f|^2 dy)^(1/2)``; the
    L1 and max entries stay unweighted.
    """
    mag = magnitude(f)
    sq = mag**2
    if weight is not None:
        weight = np.asarray(weight, dtype=np.float64)
        if np.any(weight < 0):
            raise ValueError("norm weight must be nonnegative")
        sq = weight * sq
    return {
        "l1": float(trapz(mag, dy)),
        "l2": float(np.sqrt(max(trapz(sq, dy), 0.0))),
        "linf": float(mag.max()) if mag.size else 0.0,
    }


def l2(f: np.ndarray, dy: float, weight: np.ndarray | None = None) -> float:
    return norms(f, dy, weight)["l2"]

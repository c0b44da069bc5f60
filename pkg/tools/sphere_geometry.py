#!/usr/bin/env python3
"""
sphere_geometry.py - Pointwise geometry of the unit sphere S^{m-1} in R^m

Closest-point projection P(xi) = xi/|xi| with its first and second
derivatives, the sphere exponential map and deterministic tangent frames.
Every operation has a single-vector form and a batched form acting on rows.

Usage:
    from sphere_geometry import closest_point_projection, sphere_exp

    u = closest_point_projection([2.0, 0.0, 0.0])
    v = sphere_exp(u, [0.0, 0.5, 0.0])
"""

import numpy as np


EPS_SING = 1e-10
EXP_SERIES_THRESHOLD = 1e-8
TANGENCY_TOL = 1e-10


class SingularProjectionError(ValueError):
    """Projection evaluated at (or too close to) the origin."""

    def __init__(self, message: str, element: int = None):
        super().__init__(message)
        self.element = element


class TangencyError(ValueError):
    """Vector is not tangent to the sphere at its base point."""
    pass


def _check_norm(norm: float, xi) -> None:
    if norm <= EPS_SING:
        raise SingularProjectionError(
            f"Projection is singular at {np.asarray(xi).tolist()} (|xi| = {norm:.3e})")


def closest_point_projection(xi) -> np.ndarray:
    """Return xi/|xi|."""
    xi = np.asarray(xi, dtype=float)
    norm = float(np.linalg.norm(xi))
    _check_norm(norm, xi)
    return xi / norm


def projection_jacobian(xi) -> np.ndarray:
    """dP(xi) = (I - xi_hat xi_hat^T) / |xi|."""
    xi = np.asarray(xi, dtype=float)
    norm = float(np.linalg.norm(xi))
    _check_norm(norm, xi)
    unit = xi / norm
    return (np.eye(xi.size) - np.outer(unit, unit)) / norm


def projection_second_derivative(xi, w, z) -> np.ndarray:
    """Symmetric second derivative d^2P(xi)[w, z]."""
    xi = np.asarray(xi, dtype=float)
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    norm = float(np.linalg.norm(xi))
    _check_norm(norm, xi)
    unit = xi / norm
    dp = (np.eye(xi.size) - np.outer(unit, unit)) / norm
    dp_w = dp @ w
    dp_z = dp @ z
    return -((unit @ z) * dp_w + (unit @ w) * dp_z + (w @ dp_z) * unit) / norm


def sphere_exp(x, v) -> np.ndarray:
    """
    Exponential map exp_x(v) = cos|v| x + sin|v|/|v| v.

    Raises:
        TangencyError: if x . v exceeds the tangency tolerance
    """
    result = sphere_exp_rows(np.asarray(x, dtype=float)[None, :],
                             np.asarray(v, dtype=float)[None, :])
    return result[0]


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis of T_x S^{m-1}, one basis vector per row."""
    frames = tangent_frames(np.asarray(x, dtype=float)[None, :])
    return frames[0].T


# =============================================================================
# Batched forms (one point per row)
# =============================================================================

def project_rows(values: np.ndarray) -> np.ndarray:
    """Row-wise projection. Raises SingularProjectionError on the first tiny row."""
    norms = np.linalg.norm(values, axis=-1)
    small = norms <= EPS_SING
    if np.any(small):
        index = int(np.argmax(small.ravel()))
        flat = values.reshape(-1, values.shape[-1])
        _check_norm(float(norms.ravel()[index]), flat[index])
    return values / norms[..., None]


def sphere_exp_rows(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise exponential map with the small-step series expansion."""
    offending = np.abs(np.einsum('ij,ij->i', x, v))
    if np.any(offending > TANGENCY_TOL * np.maximum(1.0, np.linalg.norm(v, axis=1))):
        row = int(np.argmax(offending))
        raise TangencyError(
            f"Vector {v[row].tolist()} is not tangent at {x[row].tolist()} "
            f"(x.v = {offending[row]:.3e})")
    length = np.linalg.norm(v, axis=1)
    small = length < EXP_SERIES_THRESHOLD
    safe = np.where(small, 1.0, length)
    cos_part = np.where(small, 1.0 - 0.5 * length ** 2, np.cos(length))
    sinc_part = np.where(small, 1.0 - length ** 2 / 6.0, np.sin(length) / safe)
    return cos_part[:, None] * x + sinc_part[:, None] * v


def tangent_frames(x: np.ndarray) -> np.ndarray:
    """
    Per-row tangent frames, shape (N, m, m-1): column k is the k-th basis vector.

    m=2 rotates by +90 degrees; m=3 orthonormalizes the coordinate axis least
    aligned with x and completes the frame with a cross product.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    count, m = x.shape
    if m == 2:
        return np.stack([-x[:, 1], x[:, 0]], axis=1)[:, :, None]
    if m != 3:
        raise ValueError(f"Tangent frames are implemented for m in (2, 3), got m={m}")
    axis = np.argmin(np.abs(x), axis=1)
    first = -x * x[np.arange(count), axis][:, None]
    first[np.arange(count), axis] += 1.0
    first /= np.linalg.norm(first, axis=1)[:, None]
    second = np.cross(x, first)
    return np.stack([first, second], axis=2)

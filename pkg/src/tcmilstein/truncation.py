"""Radial state truncation used to tame super-linear coefficient growth.

A monomial growth bound mu(u) = c*u**m dominates the coefficient suprema on
balls, and a shrinking-controlled schedule kappa(h) = h**(-eps) sets the
projection radius mu_inverse(kappa(h)).  Coefficients are evaluated at the
radially projected state, which caps their magnitude at kappa(h) whenever mu
dominates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TruncationConfig:
    """Growth bound mu(u) = mu_coeff * u**mu_exponent and schedule kappa.

    ``kappa(h) = h**(-epsilon)`` by default; with ``kappa_floor_enabled`` the
    schedule is clamped from below at mu(1) so that kappa maps into
    [mu(1), inf).  ``epsilon`` must lie in (0, 1/4], which guarantees
    h**(1/4) * kappa(h) <= kappa_hat on (0, 1] with kappa_hat = max(1, mu(1)).
    """

    mu_coeff: float
    mu_exponent: float
    epsilon: float
    kappa_floor_enabled: bool = False

    def __post_init__(self):
        if self.mu_coeff <= 0.0:
            raise ValueError(f"mu_coeff must be positive, got {self.mu_coeff}")
        if self.mu_exponent <= 0.0:
            raise ValueError(f"mu_exponent must be positive, got {self.mu_exponent}")
        if not 0.0 < self.epsilon <= 0.25:
            raise ValueError(f"epsilon must lie in (0, 1/4], got {self.epsilon}")

    @property
    def kappa_hat(self) -> float:
        return max(1.0, self.mu(1.0))

    def mu(self, u):
        return self.mu_coeff * np.asarray(u, dtype=float) ** self.mu_exponent

    def mu_inverse(self, v):
        return (np.asarray(v, dtype=float) / self.mu_coeff) ** (1.0 / self.mu_exponent)

    def kappa(self, h):
        h = np.asarray(h, dtype=float)
        if np.any(h <= 0.0) or np.any(h > 1.0):
            raise ValueError("step size must lie in (0,1]")
        k = h ** (-self.epsilon)
        if self.kappa_floor_enabled:
            k = np.maximum(k, self.mu(1.0))
        return k if k.ndim else float(k)


def truncation_radius(cfg: TruncationConfig, h: float) -> float:
    """Projection radius mu_inverse(kappa(h)); grows as h shrinks."""
    return float(cfg.mu_inverse(cfg.kappa(h)))


def project(x, radius: float) -> np.ndarray:
    """Radial projection onto the closed ball of the given radius.

    Acts on the last axis.  States inside the ball are returned unchanged
    (bitwise), the zero vector maps to itself, and anything outside is
    rescaled to norm ``radius``.
    """
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        norm = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    if not np.all(np.isfinite(norm)):
        # squared norm overflowed; rescale by the largest component first
        m = np.abs(x).max(axis=-1, keepdims=True)
        safe = np.maximum(m, np.finfo(float).tiny)
        unit = x / safe
        norm = m * np.sqrt((unit * unit).sum(axis=-1, keepdims=True))
    scale = np.ones_like(norm)
    np.divide(radius, norm, out=scale, where=norm > radius)
    return x * scale


def diffusion_gradient_product(g_val, jac) -> np.ndarray:
    """Sum over l of g^l times column l of the diffusion Jacobian.

    ``g_val`` has shape (..., d) and ``jac`` shape (..., d, d) with
    jac[..., i, l] = d g^i / d y^l.
    """
    g_val = np.asarray(g_val, dtype=float)
    jac = np.asarray(jac, dtype=float)
    return (jac * g_val[..., None, :]).sum(axis=-1)


def truncated_coefficients(problem, cfg: TruncationConfig, h: float, t, x):
    """Drift, diffusion and its gradient product, all evaluated at the
    projected state.

    Returns the triple (f_h, g_h, Lg_h).  Each magnitude is bounded by
    kappa(h) whenever mu dominates the coefficient suprema on balls.
    """
    z = project(x, truncation_radius(cfg, h))
    f_val = problem.f(t, z)
    g_val = problem.g(t, z)
    lg_val = diffusion_gradient_product(g_val, problem.g_jac(t, z))
    return f_val, g_val, lg_val

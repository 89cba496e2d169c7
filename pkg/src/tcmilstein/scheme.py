"""SDE problem interface and the truncated one-step schemes.

The state equation is dY = f(t, Y) dE + g(t, Y) dW(E) with a single scalar
driving Wiener process, stepped on the first-passage grid of the clock.
Because the inverse clock jumps by exactly h between consecutive grid nodes,
the update over [tau_n, tau_{n+1}] reads

    X_{n+1} = X_n + f_h(tau_n, X_n) h + g_h(tau_n, X_n) dW_n
              + 1/2 Lg_h(tau_n, X_n) (dW_n^2 - h)

with dW_n = W((n+1)h) - W(nh) and coefficients evaluated at the radially
projected state.  Dropping the last term gives the Euler-Maruyama variant.

All steppers are pure and broadcast over leading axes, so a batch of
trajectories can be advanced in lockstep with identical per-trajectory
arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericOverflowError
from .subordinator import TimeChangeGrid
from .truncation import TruncationConfig, diffusion_gradient_product, truncated_coefficients


class SchemeTag(enum.Enum):
    TRUNCATED_MILSTEIN = "milstein"
    TRUNCATED_EM = "em"


@dataclass(frozen=True, eq=False)
class SdeProblem:
    """Coefficients and metadata of one state equation.

    ``f`` and ``g`` map (t, y) to a d-vector; ``g_jac`` returns the full
    diffusion Jacobian with entry [i, l] = d g^i / d y^l.  All three must be
    numpy-vectorized: t of shape (...) or scalar with y of shape (..., d)
    yields (..., d) (and (..., d, d) for the Jacobian).

    ``alpha`` is the polynomial growth exponent of the spatial regularity
    condition, ``gamma_f``/``gamma_g`` the temporal Hoelder exponents in
    (0, 1].  ``exact_solution``, when present, maps arrays of inverse-clock
    values e and driving Brownian values w = W(e) to exact states; it is
    used as a reference oracle instead of a fine numerical path.
    """

    name: str
    d: int
    f: Callable
    g: Callable
    g_jac: Callable
    y0: np.ndarray
    alpha: float
    gamma_f: float
    gamma_g: float
    T: float = 1.0
    exact_solution: Optional[Callable] = None

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=float).reshape(self.d)
        y0.setflags(write=False)
        object.__setattr__(self, "y0", y0)
        if not 0.0 < self.gamma_f <= 1.0 or not 0.0 < self.gamma_g <= 1.0:
            raise ValueError("Hoelder exponents must lie in (0,1]")
        if self.T <= 0.0:
            raise ValueError("horizon must be positive")

    def check_gradients(self, rng: np.random.Generator, samples: int = 64, box: float = 2.0,
                        tol_scale: float = 1e-6) -> None:
        """Compare g_jac against central finite differences of g.

        Raises AssertionError when any entry differs by more than
        tol_scale * (1 + |entry|); catches transcription errors in
        hand-derived gradients.
        """
        delta = 1e-6
        t = rng.uniform(0.0, self.T, samples)
        y = rng.uniform(-box, box, (samples, self.d))
        jac = np.asarray(self.g_jac(t, y), dtype=float)
        for l in range(self.d):
            e_l = np.zeros(self.d)
            e_l[l] = delta
            fd = (np.asarray(self.g(t, y + e_l)) - np.asarray(self.g(t, y - e_l))) / (2 * delta)
            err = np.abs(fd - jac[..., l])
            bound = tol_scale * (1.0 + np.abs(jac[..., l]))
            if not np.all(err <= bound):
                worst = float(err.max())
                raise AssertionError(
                    f"diffusion gradient column {l} disagrees with finite differences "
                    f"(max deviation {worst:.3e})"
                )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States X_{tau_0}..X_{tau_N} on one time-change grid."""

    grid: TimeChangeGrid
    states: np.ndarray
    scheme_tag: SchemeTag


def lg(problem: SdeProblem, t, y) -> np.ndarray:
    """Gradient correction term: sum over l of g^l(t,y) G^l(t,y)."""
    return diffusion_gradient_product(problem.g(t, y), problem.g_jac(t, y))


def milstein_step(problem: SdeProblem, trunc_cfg: TruncationConfig, h: float,
                  tau_n, x_n, dw) -> np.ndarray:
    """One truncated Milstein update; broadcasts over leading axes."""
    f_h, g_h, lg_h = truncated_coefficients(problem, trunc_cfg, h, tau_n, x_n)
    dw = np.asarray(dw, dtype=float)[..., None]
    return x_n + f_h * h + g_h * dw + 0.5 * lg_h * (dw * dw - h)


def em_step(problem: SdeProblem, trunc_cfg: TruncationConfig, h: float,
            tau_n, x_n, dw) -> np.ndarray:
    """One truncated Euler-Maruyama update (no gradient correction)."""
    f_h, g_h, _ = truncated_coefficients(problem, trunc_cfg, h, tau_n, x_n)
    dw = np.asarray(dw, dtype=float)[..., None]
    return x_n + f_h * h + g_h * dw


_STEPPERS = {
    SchemeTag.TRUNCATED_MILSTEIN: milstein_step,
    SchemeTag.TRUNCATED_EM: em_step,
}


def simulate_path(problem: SdeProblem, trunc_cfg: TruncationConfig, grid: TimeChangeGrid,
                  wiener, scheme_tag: SchemeTag = SchemeTag.TRUNCATED_MILSTEIN) -> Trajectory:
    """Advance the chosen stepper over the grid from X_0 = Y0.

    ``wiener`` must hold the N increments W((n+1)h) - W(nh) for
    n = 0..N-1.  Deterministic given (grid, wiener).
    """
    dw = np.asarray(wiener, dtype=float)
    if dw.shape != (grid.N,):
        raise ValueError(
            f"wiener increment count mismatch: grid needs {grid.N}, got shape {dw.shape}"
        )
    step = _STEPPERS[scheme_tag]
    states = np.empty((grid.N + 1, problem.d))
    x = problem.y0
    states[0] = x
    for n in range(grid.N):
        x = step(problem, trunc_cfg, grid.h, grid.tau[n], x, dw[n])
        if not np.all(np.isfinite(x)):
            raise NumericOverflowError(
                f"non-finite state in problem '{problem.name}' at step {n + 1} "
                f"(tau={grid.tau[n + 1]:.6g})"
            )
        states[n + 1] = x
    states.setflags(write=False)
    return Trajectory(grid=grid, states=states, scheme_tag=scheme_tag)

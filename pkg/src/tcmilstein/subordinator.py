"""Random clocks: increment sampling, first-passage grids, discretized inverse.

The driving clock is a strictly increasing Levy process D with D(0) = 0.  Its
sample path is discretized on the internal grid t_i = i*h by accumulating
i.i.d. increments distributed as D(h).  The accumulated jump times
tau_i = D_h(t_i) form a random grid on physical time, and the discretized
inverse clock

    E_h(t) = (min{n : D_h(t_n) > t} - 1) * h

is piecewise constant, right-continuous, and satisfies E_h(tau_i) = i*h.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError

DEFAULT_MAX_NODES = 100_000_000


class SubordinatorFamily(enum.Enum):
    STABLE = "stable"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class SubordinatorModel:
    """Parametric family of the driving clock D.

    ``STABLE`` is the one-sided alpha-stable subordinator with Laplace
    transform E[exp(-lam * D(t))] = exp(-t * scale * lam**alpha) for
    alpha in (0, 1).  ``DETERMINISTIC`` is the degenerate clock D(t) = t,
    which collapses the time change to the identity and is used as an
    exact classical oracle.
    """

    family: SubordinatorFamily
    alpha: float = 0.9
    scale: float = 1.0

    def __post_init__(self):
        if self.family is SubordinatorFamily.STABLE:
            if not 0.0 < self.alpha < 1.0:
                raise ValueError(f"stable index must lie in (0,1), got {self.alpha}")
        if self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @classmethod
    def stable(cls, alpha: float = 0.9, scale: float = 1.0) -> "SubordinatorModel":
        return cls(SubordinatorFamily.STABLE, alpha=alpha, scale=scale)

    @classmethod
    def deterministic(cls) -> "SubordinatorModel":
        return cls(SubordinatorFamily.DETERMINISTIC)

    def describe(self) -> str:
        if self.family is SubordinatorFamily.DETERMINISTIC:
            return "deterministic"
        return f"stable(alpha={self.alpha:g}, scale={self.scale:g})"


def sample_increments(
    model: SubordinatorModel, h: float, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` i.i.d. increments distributed as D(h).

    The stable draw uses the uniform-exponential transformation for
    one-sided stable laws: with U uniform on (0, pi] and W standard
    exponential,

        S = sin(a*U) / sin(U)**(1/a) * (sin((1-a)*U) / W)**((1-a)/a)

    has Laplace transform exp(-lam**a), and D(h) = (h*scale)**(1/a) * S.
    Correctness is pinned by the Laplace-transform oracle in the tests, so
    the sampler is replaceable.
    """
    if h <= 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    if model.family is SubordinatorFamily.DETERMINISTIC:
        return np.full(size, float(h))
    a = model.alpha
    u = np.pi * (1.0 - rng.random(size))  # uniform on (0, pi], avoids sin(0)
    w = np.maximum(rng.standard_exponential(size), np.finfo(float).tiny)
    s = np.sin(a * u) / np.sin(u) ** (1.0 / a)
    s *= (np.sin((1.0 - a) * u) / w) ** ((1.0 - a) / a)
    return (h * model.scale) ** (1.0 / a) * s


def sample_increment(model: SubordinatorModel, h: float, rng: np.random.Generator) -> float:
    """Draw one increment distributed as D(h); exactly h for the deterministic clock."""
    return float(sample_increments(model, h, 1, rng)[0])


@dataclass(frozen=True, eq=False)
class TimeChangeGrid:
    """First-passage grid of the discretized clock.

    ``tau`` holds tau_0 = 0 < tau_1 < ... < tau_{N+1} with
    tau_N <= T < tau_{N+1}, so the grid always contains one node past the
    horizon.  Immutable after construction; safe to share across threads.
    """

    h: float
    tau: np.ndarray
    T: float

    @property
    def N(self) -> int:
        return len(self.tau) - 2

    @classmethod
    def from_nodes(cls, h: float, tau: np.ndarray, T: float) -> "TimeChangeGrid":
        tau = np.asarray(tau, dtype=float)
        if tau.ndim != 1 or len(tau) < 2:
            raise ValueError("grid needs at least the nodes tau_0 and tau_1")
        if tau[0] != 0.0:
            raise ValueError("grid must start at tau_0 = 0")
        if not np.all(np.diff(tau) > 0.0):
            raise ValueError("grid nodes must be strictly increasing")
        if not (tau[-2] <= T < tau[-1]):
            raise ValueError(
                f"stopping rule violated: need tau_N <= T < tau_N+1, "
                f"got tau_N={tau[-2]}, T={T}, tau_N+1={tau[-1]}"
            )
        tau.setflags(write=False)
        return cls(h=h, tau=tau, T=T)


def build_time_change_grid(
    model: SubordinatorModel,
    h: float,
    T: float,
    rng: np.random.Generator,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> TimeChangeGrid:
    """Accumulate increments D_h(t_i) = D_h(t_{i-1}) + Delta_i until the
    horizon is bracketed, i.e. T in [D_h(t_N), D_h(t_{N+1})).

    Raises ResourceLimitError if the grid would exceed ``max_nodes`` nodes.
    """
    if not 0.0 < h <= 1.0:
        raise ValueError(f"step size must lie in (0,1], got {h}")
    if T <= 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    blocks: list[np.ndarray] = []
    count = 0
    block = max(256, int(1.1 * T / h) + 16)
    while True:
        if count >= max_nodes:
            raise ResourceLimitError(
                f"grid construction exceeded {max_nodes} nodes before covering T={T}"
            )
        n = min(block, max_nodes - count)
        draw = sample_increments(model, h, n, rng)
        if not np.all(draw > 0.0):
            raise ValueError("subordinator increments must be strictly positive")
        blocks.append(draw)
        count += n
        block *= 2
        # Cumulate over everything drawn so far so the loop guard and the
        # final bracketing use identical float arithmetic.
        deltas = blocks[0] if len(blocks) == 1 else np.concatenate(blocks)
        cum = np.cumsum(deltas)
        if cum[-1] > T:
            break
    # cum[i] = tau_{i+1}; pos counts the nodes tau_1..tau_pos that are <= T,
    # so N = pos and cum[pos] is the first node beyond the horizon.
    pos = int(np.searchsorted(cum, T, side="right"))
    tau = np.concatenate(([0.0], cum[: pos + 1]))
    return TimeChangeGrid.from_nodes(h=h, tau=tau, T=T)


def inverse_index(grid: TimeChangeGrid, t) -> np.ndarray | int:
    """Index i with tau_i <= t < tau_{i+1} (right-continuous convention)."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0.0) or np.any(tt > grid.T):
        raise ValueError(f"query time outside [0, {grid.T}]")
    idx = np.searchsorted(grid.tau, tt, side="right") - 1
    return idx if tt.ndim else int(idx)


def evaluate_inverse(grid: TimeChangeGrid, t) -> np.ndarray | float:
    """Discretized inverse clock E_h(t) = i*h for t in [tau_i, tau_{i+1})."""
    idx = inverse_index(grid, t)
    out = np.asarray(idx) * grid.h
    return out if np.asarray(t).ndim else float(out)

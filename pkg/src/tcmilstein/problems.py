"""Benchmark problems and sampling diagnostics for the regularity conditions.

The two polynomial benchmarks have super-linear spatial growth and only
Hoelder-continuous time dependence, which is what limits the strong order of
the scheme.  ``check_assumptions`` falsifies the structural conditions the
convergence analysis needs by brute-force sampling: it never proves a
condition, it only reports "not violated on this sample".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .scheme import SdeProblem
from .truncation import diffusion_gradient_product

ASSUMPTION_IDS = (
    "polynomial_lipschitz",
    "monotone_coupling",
    "coercivity",
    "derivative_growth",
    "temporal_hoelder",
)

_DESCRIPTIONS = {
    "polynomial_lipschitz": "|df| v |dg| v |dLg| <= C (1+|x|^a+|y|^a) |x-y|",
    "monotone_coupling": "(x-y).(f(x)-f(y)) + (5p-1)|g(x)-g(y)|^2 <= K |x-y|^2",
    "coercivity": "x.f(x) + (5q-1)|g(x)|^2 <= K1 (1+|x|^2)",
    "derivative_growth": "|Df| v |D2f| v |Dg| v |D2g| <= M' (1+|x|^(a+1))",
    "temporal_hoelder": "|f(s,x)-f(t,x)| <= H (1+|x|^(a+1)) |s-t|^gamma (and g)",
}


def _bridge(t):
    # time weight t(1-t); clamped so roundoff just outside [0,1] cannot
    # produce a negative base under fractional powers
    t = np.asarray(t, dtype=float)
    return np.maximum(t * (1.0 - t), 0.0)


def example1() -> SdeProblem:
    """Scalar benchmark: dY = ([t(1-t)]^(1/4) Y - Y^5) dE + t(1-t) Y^2 dW(E), Y(0)=1."""

    def f(t, y):
        c = _bridge(t) ** 0.25
        return np.asarray(c)[..., None] * y - y**5

    def g(t, y):
        return np.asarray(_bridge(t))[..., None] * y**2

    def g_jac(t, y):
        return (2.0 * np.asarray(_bridge(t))[..., None] * y)[..., None]

    return SdeProblem(
        name="example1",
        d=1,
        f=f,
        g=g,
        g_jac=g_jac,
        y0=np.array([1.0]),
        alpha=4.0,
        gamma_f=0.25,
        gamma_g=1.0,
        T=1.0,
    )


def example2() -> SdeProblem:
    """Two-dimensional benchmark with cross-coupled quintic drift.

    dX1 = ([t(1-t)]^(1/5) X1 - X2^5) dE + [t(1-t)]^(1/2) X2^2 dW(E)
    dX2 = ([t(1-t)]^(1/5) X2 - X1^5) dE + [t(1-t)]^(1/2) X1^2 dW(E)

    started from (1, 1).
    """

    def f(t, x):
        c = np.asarray(_bridge(t) ** 0.2)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([c * x1 - x2**5, c * x2 - x1**5], axis=-1)

    def g(t, x):
        c = np.asarray(np.sqrt(_bridge(t)))
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([c * x2**2, c * x1**2], axis=-1)

    def g_jac(t, x):
        c = np.asarray(np.sqrt(_bridge(t)))
        x1, x2 = x[..., 0], x[..., 1]
        zero = np.zeros(np.broadcast(c, x1).shape)
        row1 = np.stack([zero, 2.0 * c * x2], axis=-1)
        row2 = np.stack([2.0 * c * x1, zero], axis=-1)
        return np.stack([row1, row2], axis=-2)

    return SdeProblem(
        name="example2",
        d=2,
        f=f,
        g=g,
        g_jac=g_jac,
        y0=np.array([1.0, 1.0]),
        alpha=4.0,
        gamma_f=0.2,
        gamma_g=0.5,
        T=1.0,
    )


def gbm(drift: float = 0.1, vol: float = 0.2, y0: float = 1.0, T: float = 1.0) -> SdeProblem:
    """Geometric Brownian motion, the classical-limit oracle problem.

    Carries the closed-form solution y0 * exp((drift - vol^2/2) e + vol w) as
    a function of the inverse clock value e and the driving Brownian value
    w = W(e); with the deterministic clock this is the textbook solution.
    """

    def f(t, y):
        return drift * y

    def g(t, y):
        return vol * y

    def g_jac(t, y):
        return (vol * np.ones_like(y))[..., None]

    def exact(e, w):
        e = np.asarray(e, dtype=float)
        w = np.asarray(w, dtype=float)
        return (y0 * np.exp((drift - 0.5 * vol * vol) * e + vol * w))[..., None]

    return SdeProblem(
        name="gbm",
        d=1,
        f=f,
        g=g,
        g_jac=g_jac,
        y0=np.array([y0]),
        alpha=1.0,
        gamma_f=1.0,
        gamma_g=1.0,
        T=T,
        exact_solution=exact,
    )


_BUILTIN = {"example1": example1, "example2": example2, "gbm": gbm}


def by_name(name: str) -> SdeProblem:
    try:
        return _BUILTIN[name]()
    except KeyError:
        raise ValueError(f"unknown problem '{name}'; choose from {sorted(_BUILTIN)}") from None


@dataclass(frozen=True)
class SamplingSpec:
    """Controls for the assumption diagnostics.

    ``candidates`` maps assumption ids to candidate constants; ids without a
    candidate get a fitted constant (the observed worst-case ratio), which by
    construction cannot be violated.
    """

    radius: float
    samples: int
    p: float = 3.0
    q: float = 3.0
    seed: int = 0
    candidates: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"box radius must be positive, got {self.radius}")
        if self.samples < 1000:
            raise ValueError(f"need at least 1000 samples, got {self.samples}")
        if self.p <= 2.0 or self.q <= 2.0:
            raise ValueError("moment parameters p and q must exceed 2")
        if self.candidates is not None:
            unknown = set(self.candidates) - set(ASSUMPTION_IDS)
            if unknown:
                raise ValueError(f"unknown assumption ids in candidates: {sorted(unknown)}")


@dataclass(frozen=True, eq=False)
class AssumptionReport:
    assumption: str
    description: str
    samples: int
    max_ratio: float
    constant: float
    fitted: bool
    violated: bool
    witness: tuple


def _norm(v):
    return np.sqrt((np.asarray(v) ** 2).sum(axis=-1))


def _report(aid, n, ratios, witnesses, candidates) -> AssumptionReport:
    i = int(np.argmax(ratios))
    max_ratio = float(ratios[i])
    witness = tuple(float(w) for w in np.atleast_1d(witnesses[i]).ravel())
    cand = None if candidates is None else candidates.get(aid)
    if cand is None:
        constant, fitted, violated = max_ratio, True, False
    else:
        constant, fitted, violated = float(cand), False, max_ratio > cand
    return AssumptionReport(
        assumption=aid,
        description=_DESCRIPTIONS[aid],
        samples=n,
        max_ratio=max_ratio,
        constant=constant,
        fitted=fitted,
        violated=violated,
        witness=witness,
    )


def _fd_first(func, t, x, delta):
    """Frobenius norm of the Jacobian of func wrt x, by central differences."""
    d = x.shape[-1]
    acc = 0.0
    for l in range(d):
        e_l = np.zeros(d)
        e_l[l] = delta
        col = (np.asarray(func(t, x + e_l)) - np.asarray(func(t, x - e_l))) / (2 * delta)
        acc = acc + (col**2).sum(axis=-1)
    return np.sqrt(acc)


def _fd_second(func, t, x, delta):
    """Frobenius norm of the second-derivative tensor of func wrt x."""
    d = x.shape[-1]
    base = np.asarray(func(t, x))
    acc = 0.0
    for l in range(d):
        e_l = np.zeros(d)
        e_l[l] = delta
        diag = (np.asarray(func(t, x + e_l)) - 2 * base + np.asarray(func(t, x - e_l))) / delta**2
        acc = acc + (diag**2).sum(axis=-1)
        for m in range(l + 1, d):
            e_m = np.zeros(d)
            e_m[m] = delta
            cross = (
                np.asarray(func(t, x + e_l + e_m))
                - np.asarray(func(t, x + e_l - e_m))
                - np.asarray(func(t, x - e_l + e_m))
                + np.asarray(func(t, x - e_l - e_m))
            ) / (4 * delta**2)
            acc = acc + 2 * (cross**2).sum(axis=-1)
    return np.sqrt(acc)


def check_assumptions(problem: SdeProblem, spec: SamplingSpec) -> list[AssumptionReport]:
    """Sample the defining ratio of each structural condition over a box.

    Draws (t, s, x, y) uniformly on [0,T]^2 x [-radius, radius]^(2d) and
    reports, per condition, the worst observed ratio against a candidate
    constant (violated if exceeded) or a fitted one.  Deterministic given
    the seed; a longer run with the same seed extends the same sample.
    """
    rng = np.random.default_rng(spec.seed)
    n, d, r = spec.samples, problem.d, spec.radius
    raw = rng.random((n, 2 + 2 * d))
    t = raw[:, 0] * problem.T
    s = raw[:, 1] * problem.T
    x = (2.0 * raw[:, 2 : 2 + d] - 1.0) * r
    y = (2.0 * raw[:, 2 + d : 2 + 2 * d] - 1.0) * r

    fx, fy = np.asarray(problem.f(t, x)), np.asarray(problem.f(t, y))
    gx, gy = np.asarray(problem.g(t, x)), np.asarray(problem.g(t, y))
    lgx = diffusion_gradient_product(gx, problem.g_jac(t, x))
    lgy = diffusion_gradient_product(gy, problem.g_jac(t, y))

    diff = x - y
    dist = _norm(diff)
    ok = dist > 0.0  # discard coincident pairs (measure zero)
    norm_x = _norm(x)
    axy = 1.0 + norm_x**problem.alpha + _norm(y) ** problem.alpha
    reports = []

    # growth-weighted Lipschitz ratio for f, g and the gradient product
    num = np.maximum(_norm(fx - fy), np.maximum(_norm(gx - gy), _norm(lgx - lgy)))
    ratio = num[ok] / (axy[ok] * dist[ok])
    wit = np.concatenate([t[ok, None], x[ok], y[ok]], axis=1)
    reports.append(_report("polynomial_lipschitz", n, ratio, wit, spec.candidates))

    # one-sided monotonicity of the pair (f, g)
    inner = (diff * (fx - fy)).sum(axis=-1)
    ratio = (inner[ok] + (5 * spec.p - 1) * _norm(gx - gy)[ok] ** 2) / dist[ok] ** 2
    reports.append(_report("monotone_coupling", n, ratio, wit, spec.candidates))

    # coercivity in x alone
    ratio = ((x * fx).sum(axis=-1) + (5 * spec.q - 1) * _norm(gx) ** 2) / (1.0 + norm_x**2)
    wit_x = np.concatenate([t[:, None], x], axis=1)
    reports.append(_report("coercivity", n, ratio, wit_x, spec.candidates))

    # derivative growth via finite differences (first: central, second: stencil)
    d1, d2 = 1e-6, 1e-4
    mag = np.maximum(
        np.maximum(_fd_first(problem.f, t, x, d1), _fd_first(problem.g, t, x, d1)),
        np.maximum(_fd_second(problem.f, t, x, d2), _fd_second(problem.g, t, x, d2)),
    )
    ratio = mag / (1.0 + norm_x ** (problem.alpha + 1))
    reports.append(_report("derivative_growth", n, ratio, wit_x, spec.candidates))

    # temporal Hoelder regularity at the problem's stated exponents
    ok_t = np.abs(s - t) > 0.0
    fs = np.asarray(problem.f(s, x))
    gs = np.asarray(problem.g(s, x))
    denom = 1.0 + norm_x ** (problem.alpha + 1)
    gap = np.abs(s - t)
    ratio = np.maximum(
        _norm(fs - fx) / (denom * gap**problem.gamma_f),
        _norm(gs - gx) / (denom * gap**problem.gamma_g),
    )[ok_t]
    wit_ts = np.concatenate([t[ok_t, None], s[ok_t, None], x[ok_t]], axis=1)
    reports.append(_report("temporal_hoelder", n, ratio, wit_ts, spec.candidates))
    return reports

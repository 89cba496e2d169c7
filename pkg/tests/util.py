"""Small problem factories shared across test modules."""

import numpy as np

from tcmilstein import SdeProblem, TruncationConfig


def wide_trunc(epsilon: float = 0.02) -> TruncationConfig:
    """Truncation config whose radius is far beyond anything a test visits."""
    return TruncationConfig(mu_coeff=1e-8, mu_exponent=1.0, epsilon=epsilon)


def zero_problem(d: int = 1) -> SdeProblem:
    def f(t, y):
        return np.zeros_like(y)

    def g(t, y):
        return np.zeros_like(y)

    def g_jac(t, y):
        return np.zeros(y.shape + (d,))

    return SdeProblem(name="zero", d=d, f=f, g=g, g_jac=g_jac, y0=np.full(d, 1.5),
                      alpha=1.0, gamma_f=1.0, gamma_g=1.0)


def drift_only(lam: float = 1.0, d: int = 1) -> SdeProblem:
    """dY = -lam * Y dE, no diffusion."""

    def f(t, y):
        return -lam * y

    def g(t, y):
        return np.zeros_like(y)

    def g_jac(t, y):
        return np.zeros(y.shape + (d,))

    return SdeProblem(name="drift_only", d=d, f=f, g=g, g_jac=g_jac, y0=np.ones(d),
                      alpha=1.0, gamma_f=1.0, gamma_g=1.0)


def additive_noise(c: float = 0.7, d: int = 1) -> SdeProblem:
    """f = 0, g constant in the state, so the gradient correction vanishes."""

    def f(t, y):
        return np.zeros_like(y)

    def g(t, y):
        return np.full_like(y, c)

    def g_jac(t, y):
        return np.zeros(y.shape + (d,))

    return SdeProblem(name="additive", d=d, f=f, g=g, g_jac=g_jac, y0=np.zeros(d),
                      alpha=1.0, gamma_f=1.0, gamma_g=1.0)


def quintic_drift(sign: float = 1.0) -> SdeProblem:
    """dY = sign * Y^5 dE; the + sign violates one-sided monotonicity."""

    def f(t, y):
        return sign * y**5

    def g(t, y):
        return np.zeros_like(y)

    def g_jac(t, y):
        return np.zeros(y.shape + (1,))

    return SdeProblem(name="quintic", d=1, f=f, g=g, g_jac=g_jac, y0=np.ones(1),
                      alpha=4.0, gamma_f=1.0, gamma_g=1.0)

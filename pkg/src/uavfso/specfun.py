"""Scalar special functions used by the channel PDF and the capacity expressions.

All functions are pure maps of Python floats. Heavy lifting is delegated to
``scipy.special``; the wrappers add argument validation and the scaled forms
the capacity code needs to stay clear of overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class SpecialFunctionError(ArithmeticError):
    """Raised when an evaluation does not produce a finite result."""


@dataclass(frozen=True)
class QApproxCoefficients:
    """Weights and exponents of the three-term exponential Q approximation."""

    a: tuple[float, float, float] = (5.0 / 24.0, 4.0 / 24.0, 1.0 / 24.0)
    a_prime: tuple[float, float, float] = (2.0, 11.0 / 20.0, 0.5)

    def __post_init__(self):
        if len(self.a) != 3 or len(self.a_prime) != 3:
            raise ValueError("exactly three terms are required")
        if min(self.a) <= 0 or min(self.a_prime) <= 0:
            raise ValueError("all weights and exponents must be strictly positive")

    def pairs(self):
        return tuple(zip(self.a, self.a_prime))


Q_APPROX = QApproxCoefficients()


def _finite(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return x


def erf(x: float) -> float:
    return float(special.erf(_finite("x", x)))


def erfc(x: float) -> float:
    return float(special.erfc(_finite("x", x)))


def q_function(x: float) -> float:
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt(2)) / 2``."""
    return float(special.ndtr(-_finite("x", x)))


def log_q_function(x: float) -> float:
    """``log Q(x)``, accurate far into the upper tail."""
    return float(special.log_ndtr(-_finite("x", x)))


def q_approx(x: float, coeffs: QApproxCoefficients = Q_APPROX) -> float:
    """Three-term exponential approximation ``sum_i a_i exp(-a'_i x^2)``.

    Only defined for ``x >= 0``; the approximation is one-sided.
    """
    x = _finite("x", x)
    if x < 0:
        raise ValueError(f"q_approx is one-sided, x must be >= 0 (got {x})")
    return sum(a * math.exp(-ap * x * x) for a, ap in coeffs.pairs())


def log_q_approx_even(x, coeffs: QApproxCoefficients = Q_APPROX):
    """``log sum_i a_i exp(-a'_i x^2)`` for any real ``x`` (vectorised).

    This is the even extension that the closed-form capacity derivation
    integrates over the whole real line.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(coeffs.a)
    ap = np.asarray(coeffs.a_prime)
    terms = np.log(a) - np.multiply.outer(x * x, ap)
    return special.logsumexp(terms, axis=-1)


def gamma(s: float) -> float:
    return float(special.gamma(_finite("s", s)))


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Non-normalised upper incomplete gamma ``Gamma(s, x)`` for ``s > 0``."""
    s = _finite("s", s)
    x = _finite("x", x)
    if s <= 0:
        raise ValueError(f"s must be > 0, got {s}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    return float(special.gammaincc(s, x) * special.gamma(s))


def log_upper_incomplete_gamma(s: float, x: float) -> float:
    """``log Gamma(s, x)``; stays finite where ``Gamma(s, x)`` underflows."""
    s = _finite("s", s)
    x = _finite("x", x)
    if s <= 0:
        raise ValueError(f"s must be > 0, got {s}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    q = special.gammaincc(s, x)
    if q > 1e-280:
        return float(math.log(q) + special.gammaln(s))
    # Gamma(s, x) = exp(-x) x^s U(1, 1 + s, x)
    return -x + s * math.log(x) + math.log(_hyperu(1.0, 1.0 + s, x))


def scaled_upper_incomplete_gamma(s: float, x: float) -> float:
    """``exp(x) * Gamma(s, x)``, finite for arbitrarily large ``x``."""
    s = _finite("s", s)
    x = _finite("x", x)
    if s <= 0:
        raise ValueError(f"s must be > 0, got {s}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0:
        return float(special.gamma(s))
    if x < 50:
        return float(math.exp(x) * special.gammaincc(s, x) * special.gamma(s))
    return float(x**s * _hyperu(1.0, 1.0 + s, x))


def _hyperu(a: float, b: float, z: float) -> float:
    u = float(special.hyperu(a, b, z))
    if not math.isfinite(u) or u <= 0:
        u = _hyperu_integral(a, b, z)
    return u


def _hyperu_integral(a: float, b: float, z: float) -> float:
    """Tricomi U from its Laplace-type integral (requires ``a > 0``)."""
    if a <= 0:
        raise SpecialFunctionError(f"integral representation needs a > 0 (a={a}, b={b}, z={z})")

    # t = s / z puts the exponential decay on unit scale
    def f(s):
        return math.exp((a - 1) * math.log(s) + (b - a - 1) * math.log1p(s / z) - s) if s > 0 else (
            1.0 if a == 1 else 0.0)

    val, err = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    if not math.isfinite(val) or val <= 0:
        raise SpecialFunctionError(f"U({a}, {b}, {z}) did not converge")
    return val * z**(-a) / special.gamma(a)


# exp-sinh nodes on (0, inf); step 1/32 resolves s^n e^-s to ~1e-14 for n <= 25
_DE_STEP = 1.0 / 32.0
_de_t = np.arange(-6.0, 6.0 + _DE_STEP / 2, _DE_STEP)
_de_s = np.exp(0.5 * np.pi * np.sinh(_de_t))
_de_w = _DE_STEP * 0.5 * np.pi * np.cosh(_de_t) * _de_s
_de_keep = (_de_s > 1e-200) & (_de_s < 1500.0)
_DE_NODES = _de_s[_de_keep]
_DE_LOG_NODES = np.log(_DE_NODES)
_DE_WEIGHTS = _de_w[_de_keep]
FAMILY_MAX_ORDER = 25

# w_j s_j^n e^(-s_j) per order n, scaled by the peak n^n e^-n; every moment of
# the family is then one dot product with sqrt(1 + s / z)
_FAMILY_N = np.arange(FAMILY_MAX_ORDER + 1, dtype=float)
_FAMILY_LOG_PEAK = np.where(_FAMILY_N > 0, _FAMILY_N * np.log(np.maximum(_FAMILY_N, 1.0)) - _FAMILY_N,
                            0.0)
_FAMILY_TABLE = _DE_WEIGHTS * np.exp(np.outer(_FAMILY_N, _DE_LOG_NODES) - _DE_NODES
                                     - _FAMILY_LOG_PEAK[:, None])


def log_sqrt_laplace_moments(n_max: int, z):
    """``ln int_0^inf t^n sqrt(1 + t) exp(-z t) dt`` for ``n = 0..n_max``.

    These equal ``ln(n! U(n+1, n+5/2, z))``. Evaluated by double-exponential
    quadrature after ``t = s / z``. A scalar ``z`` gives shape ``(n_max+1,)``,
    an array of ``k`` values shape ``(k, n_max+1)``.
    """
    zs = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(zs)):
        raise ValueError(f"z must be finite, got {z!r}")
    if np.any(zs <= 0):
        raise ValueError(f"z must be > 0, got {z!r}")
    if not 0 <= n_max <= FAMILY_MAX_ORDER:
        raise ValueError(f"n_max must lie in [0, {FAMILY_MAX_ORDER}], got {n_max}")
    flat = np.atleast_1d(zs)
    g = np.sqrt(1.0 + _DE_NODES[:, None] / flat[None, :])
    total = _FAMILY_TABLE[:n_max + 1] @ g
    n = _FAMILY_N[:n_max + 1, None]
    out = (_FAMILY_LOG_PEAK[:n_max + 1, None] + np.log(total) - (n + 1.0) * np.log(flat)).T
    return out[0] if zs.ndim == 0 else out


def log_whittaker_family_scaled(n_max: int, z):
    """``ln(exp(z/2) W_{-(2n-1)/4, (2n+3)/4}(z))`` for ``n = 0..n_max``.

    This is the one-parameter family met by every Whittaker function in the
    closed-form capacity; ``W = exp(-z/2) z^((2n+5)/4) U(n+1, n+5/2, z)``.
    Vectorised over ``z`` like :func:`log_sqrt_laplace_moments`.
    """
    lg = log_sqrt_laplace_moments(n_max, z)
    n = _FAMILY_N[:n_max + 1]
    logz = np.log(np.asarray(z, dtype=float))[..., None]
    return lg - special.gammaln(n + 1.0) + (2.0 * n + 5.0) / 4.0 * logz


def _family_order(a: float, b: float):
    # (a, b) = (-(2n-1)/4, (2n+3)/4) for integer n >= 0
    n = 0.5 - 2.0 * a
    if n >= 0 and n == int(n) and abs(b - (2.0 * n + 3.0) / 4.0) < 1e-15 and n <= FAMILY_MAX_ORDER:
        return int(n)
    return None


def whittaker_w_scaled(a: float, b: float, z: float) -> float:
    """``exp(z / 2) * W_{a,b}(z)`` for real ``a``, ``b`` and ``z > 0``.

    Uses ``W_{a,b}(z) = exp(-z/2) z^(b+1/2) U(b - a + 1/2, 1 + 2b, z)`` with
    ``|b|`` (W is even in its second index). The ``a = b - 1/2`` family reduces
    to the upper incomplete gamma function, the capacity family to
    :func:`log_whittaker_family_scaled`, anything else goes to ``hyperu``.
    """
    a = _finite("a", a)
    b = abs(_finite("b", b))
    z = _finite("z", z)
    if z <= 0:
        raise ValueError(f"z must be > 0, got {z}")
    n = _family_order(a, b)
    if n is not None:
        return float(np.exp(log_whittaker_family_scaled(n, z)[n]))
    ua = b - a + 0.5
    ub = 1.0 + 2.0 * b
    if ua == 1.0:
        # U(1, 1 + s, z) = z^-s e^z Gamma(s, z) with s = 2b
        s = 2.0 * b
        if s > 0:
            return z**(b + 0.5) * z**(-s) * scaled_upper_incomplete_gamma(s, z)
    u = float(special.hyperu(ua, ub, z))
    if not math.isfinite(u) or u == 0.0:
        try:
            u = _hyperu_integral(ua, ub, z)
        except SpecialFunctionError as exc:
            raise SpecialFunctionError(f"W_{{{a},{b}}}({z}) failed: {exc}") from exc
    val = z**(b + 0.5) * u
    if not math.isfinite(val):
        raise SpecialFunctionError(f"W_{{{a},{b}}}({z}) is not finite")
    return val


def whittaker_w(a: float, b: float, z: float) -> float:
    """Whittaker function ``W_{a,b}(z)`` for real indices and ``z > 0``."""
    return whittaker_w_scaled(a, b, z) * math.exp(-0.5 * float(z))


def whittaker_w_integral(a: float, b: float, z: float) -> float:
    """``W_{a,b}(z)`` by direct quadrature of its integral representation.

    Slow; needs ``|b| - a + 1/2 > 0``. Kept as the reference path for
    :func:`whittaker_w`.
    """
    b = abs(b)
    if z <= 0:
        raise ValueError(f"z must be > 0, got {z}")
    p = b - a - 0.5
    q = b + a - 0.5
    if p <= -1:
        raise SpecialFunctionError(f"integral representation diverges for a={a}, b={b}")

    def f(t):
        if t == 0:
            return 1.0 if p == 0 else 0.0
        return math.exp(p * math.log(t) + q * math.log1p(t / z) - t)

    val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=400)
    log_pref = a * math.log(z) - 0.5 * z - special.gammaln(p + 1)
    return val * math.exp(log_pref)

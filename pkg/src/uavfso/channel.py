"""Hovering UAV-to-UAV optical channel: parameters, derived constants and PDF.

The channel gain ``h`` has a point mass at zero (angle-of-arrival outage)
plus a continuous part that is itself an integral over the angle of arrival
``theta``. The continuous part multiplies a factor
``exp((Z^2/2 sigma_p^2 - 1/2 sigma_theta^2) theta^2)`` that overflows for any
realistic link, so every integrand here is assembled in log-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import integrate, special

from . import specfun


class ParameterError(ValueError):
    """An input violates a physical or model constraint.

    ``name`` is the offending field so callers (the CLI in particular) can
    report it without parsing the message.
    """

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name


class InvalidDensityError(ArithmeticError):
    """The series truncation produced an invalid distribution."""


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LinkParameters:
    """Physical inputs of one link, strictly in SI units (m, rad).

    Defaults are the simulation setup of the reference scenario with
    ``w_z = 2 m``, ``sigma_theta = 5 mrad`` and ``theta_fov = 25 mrad``.
    """

    wavelength: float = 1550e-9
    aperture_radius: float = 0.05
    beam_width: float = 2.0
    link_length: float = 200.0
    attenuation: float = 0.1
    log_irradiance_variance: float = 0.1
    position_sd: float = 0.25
    orientation_sd: float = 5e-3
    fov_angle: float = 25e-3
    series_order: int = 10

    def __post_init__(self):
        for name in ("wavelength", "aperture_radius", "beam_width", "link_length",
                     "position_sd", "orientation_sd", "fov_angle"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterError(name, f"must be a finite positive number, got {v!r}")
        if not 0 < self.attenuation <= 1:
            raise ParameterError("attenuation", f"must lie in (0, 1], got {self.attenuation!r}")
        if not (math.isfinite(self.log_irradiance_variance) and self.log_irradiance_variance >= 0):
            raise ParameterError("log_irradiance_variance",
                                 f"must be >= 0, got {self.log_irradiance_variance!r}")
        if self.fov_angle >= math.pi / 2:
            raise ParameterError("fov_angle", f"must be below pi/2 rad, got {self.fov_angle!r}")
        if isinstance(self.series_order, bool) or int(self.series_order) != self.series_order \
                or self.series_order < 0:
            raise ParameterError("series_order", f"must be a nonnegative integer, got {self.series_order!r}")
        object.__setattr__(self, "series_order", int(self.series_order))

    def replace(self, **changes) -> "LinkParameters":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return LinkParameters(**values)

    @property
    def fov_ratio(self) -> float:
        return self.fov_angle / self.orientation_sd


@dataclass(frozen=True)
class DerivedChannelConstants:
    nu: float
    a0: float
    w_z_eq_sq: float
    gamma_sq: float
    log_c_a: float
    c_b: float
    c_c: float
    fov_ratio: float
    h_weights: np.ndarray = field(repr=False)

    @property
    def c_a(self) -> float:
        """May overflow to ``inf`` for wide beams; prefer :attr:`log_c_a`."""
        try:
            return math.exp(self.log_c_a)
        except OverflowError:
            return math.inf


def derive_constants(p: LinkParameters) -> DerivedChannelConstants:
    nu = math.sqrt(math.pi) * p.aperture_radius / (math.sqrt(2.0) * p.beam_width)
    erf_nu = specfun.erf(nu)
    a0 = erf_nu**2
    # w_eq^2 = w_z^2 sqrt(pi) erf(nu) / (2 nu exp(-nu^2)); keep exp(nu^2) in log form
    log_w_eq_sq = 2.0 * math.log(p.beam_width) + math.log(math.sqrt(math.pi) * erf_nu / (2.0 * nu)) \
        + nu * nu
    if log_w_eq_sq > 700.0:
        raise ParameterError("beam_width", f"{p.beam_width!r} m is too narrow for aperture radius "
                                           f"{p.aperture_radius!r} m (equivalent width overflows)")
    w_eq_sq = math.exp(log_w_eq_sq)
    gamma_sq = w_eq_sq / (8.0 * p.position_sd**2)
    s2 = p.log_irradiance_variance
    log_a0_hl = math.log(a0 * p.attenuation)
    log_c_a = math.log(gamma_sq) - gamma_sq * log_a0_hl + 2.0 * s2 * gamma_sq * (1.0 + gamma_sq)
    c_b = 2.0 * s2 * w_eq_sq * (1.0 + 2.0 * gamma_sq)
    c_c = 4.0 * s2 * w_eq_sq**2
    return DerivedChannelConstants(
        nu=nu, a0=a0, w_z_eq_sq=w_eq_sq, gamma_sq=gamma_sq, log_c_a=log_c_a,
        c_b=c_b, c_c=c_c, fov_ratio=p.fov_ratio, h_weights=h_weights(p),
    )


def _log_h_weight(m: int, order: int, x: float) -> float:
    # x = theta_fov^2 / (2 sigma_theta^2)
    return (-m * math.log(2.0) + (1 - 2 * m) * math.log(order)
            + specfun.log_upper_incomplete_gamma(m + 1, x)
            + special.gammaln(order + m) - special.gammaln(order - m + 1)
            - 2.0 * special.gammaln(m + 1))


def h_weight(m: int, p: LinkParameters) -> float:
    """FOV weight ``H(m)`` of the outage series, ``0 <= m <= M``.

    ``H(m) = 2^-m M^(1-2m) Gamma(m+1, G^2/2) Gamma(M+m) /
    (Gamma(M-m+1) Gamma(m+1)^2)`` with ``G = theta_fov / sigma_theta``.
    """
    if int(m) != m or m < 0:
        raise ParameterError("m", f"must be a nonnegative integer, got {m!r}")
    m = int(m)
    order = p.series_order
    if m > order:
        raise ParameterError("m", f"index {m} exceeds series order M={order}")
    if order == 0:
        # Gamma(M + m) has a pole; the series degenerates to nothing
        return 0.0
    x = 0.5 * p.fov_ratio**2
    return math.exp(_log_h_weight(m, order, x))


def h_weights(p: LinkParameters) -> np.ndarray:
    """``H(0..M)`` as an array (vectorised :func:`h_weight`)."""
    order = p.series_order
    if order == 0:
        return np.zeros(1)
    m = np.arange(order + 1, dtype=float)
    x = 0.5 * p.fov_ratio**2
    q = special.gammaincc(m + 1.0, x)
    log_inc = np.log(np.where(q > 1e-280, q, 1.0)) + special.gammaln(m + 1.0)
    for j in np.nonzero(q <= 1e-280)[0]:
        log_inc[j] = specfun.log_upper_incomplete_gamma(j + 1.0, x)
    log_w = (-m * math.log(2.0) + (1.0 - 2.0 * m) * math.log(order) + log_inc
             + special.gammaln(order + m) - special.gammaln(order - m + 1.0)
             - 2.0 * special.gammaln(m + 1.0))
    return np.exp(log_w)


def outage_mass(p: LinkParameters, *, check: bool = True) -> float:
    """Weight of the ``delta(h)`` atom, ``sum_m H(m) m! / 2``.

    Raises :class:`InvalidDensityError` when the truncated series exceeds one,
    which flags an inadmissible ``(M, G)`` combination. Nothing is clamped.
    """
    w = h_weights(p)
    mass = float(sum(w[m] * math.factorial(m) for m in range(len(w))) / 2.0)
    if check and mass > 1.0 + 1e-9:
        raise InvalidDensityError(
            f"outage mass {mass:.6g} > 1 for M={p.series_order}, G={p.fov_ratio:.6g}")
    return mass


def outage_mass_convergence(p: LinkParameters) -> float:
    """Relative change in the outage mass when the series order goes M -> M+1."""
    m0 = outage_mass(p, check=False)
    m1 = outage_mass(p.replace(series_order=p.series_order + 1), check=False)
    if m0 == 0.0:
        return 0.0 if m1 == 0.0 else math.inf
    return abs(m1 - m0) / m0


# ---------------------------------------------------------------------------
# log-space integrand pieces shared with the capacity module
# ---------------------------------------------------------------------------

def log_gain_ceiling(c: DerivedChannelConstants, p: LinkParameters) -> float:
    """``ln(A0 h_l)``: the largest mean channel gain."""
    return math.log(c.a0 * p.attenuation)


def theta_upper_limit(p: LinkParameters) -> float:
    return 20.0 * max(p.orientation_sd, p.position_sd / p.link_length)


def aoa_bracket(theta, c: DerivedChannelConstants, p: LinkParameters):
    """``1 - exp(-theta^2 / 2 s^2) sum_m H(m) (theta^2 / s^2)^m`` (vectorised)."""
    v = np.asarray(theta, dtype=float) ** 2 / p.orientation_sd**2
    series = np.polynomial.polynomial.polyval(v, c.h_weights)
    return 1.0 - np.exp(-0.5 * v) * series


def q_argument_parts(theta, c: DerivedChannelConstants, p: LinkParameters):
    """Offset and spread of the Q argument.

    The Q-function argument is ``(W u + b(theta)) / sqrt(D(theta))`` with
    ``u = ln(h / A0 h_l)``, ``W = w_eq^2``, ``b = 6 Z^2 theta^2 + C_b`` and
    ``D = 32 sigma_p^2 Z^2 theta^2 + C_c``. Returns ``(b, sqrt(D))``.
    """
    t2 = np.asarray(theta, dtype=float) ** 2
    z2 = p.link_length**2
    b = 6.0 * z2 * t2 + c.c_b
    d = 32.0 * p.position_sd**2 * z2 * t2 + c.c_c
    return b, np.sqrt(d)


def growth_rate(p: LinkParameters) -> float:
    """Coefficient of ``theta^2`` in the exponential growth factor."""
    return p.link_length**2 / (2.0 * p.position_sd**2) - 1.0 / (2.0 * p.orientation_sd**2)


def log_pdf_integrand(h: float, theta, c: DerivedChannelConstants, p: LinkParameters):
    """Log of the theta-integrand of the continuous density at gain ``h``.

    Returns ``-inf`` where the AoA bracket is not positive.
    """
    theta = np.asarray(theta, dtype=float)
    u = math.log(h) - log_gain_ceiling(c, p)
    b, sd = q_argument_parts(theta, c, p)
    x = (c.w_z_eq_sq * u + b) / sd
    bracket = aoa_bracket(theta, c, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_br = np.where(bracket > 0, np.log(np.where(bracket > 0, bracket, 1.0)), -np.inf)
        log_theta = np.log(theta / p.orientation_sd**2)
    return (c.log_c_a + (c.gamma_sq - 1.0) * math.log(h) + log_theta + log_br
            + growth_rate(p) * theta**2 + special.log_ndtr(-x))


def _integrate_peaked(log_f, lo: float, hi: float, *, rtol: float, n_scan: int = 801,
                      drop: float = 60.0):
    """Integrate ``exp(log_f)`` over ``[lo, hi]`` with the peak factored out.

    ``log_f`` must accept arrays. A dense scan locates the peak and trims
    the interval to where the integrand is within ``exp(-drop)`` of it.
    Returns ``(log_peak, integral_of_exp(log_f - log_peak))``.
    """
    grid = np.linspace(lo, hi, n_scan)
    vals = log_f(grid)
    finite = np.isfinite(vals)
    if not finite.any():
        return -math.inf, 0.0
    k = int(np.argmax(np.where(finite, vals, -np.inf)))
    peak = float(vals[k])
    keep = np.nonzero(vals > peak - drop)[0]
    a = grid[max(keep[0] - 1, 0)]
    b = grid[min(keep[-1] + 1, n_scan - 1)]

    def f(t):
        return math.exp(float(log_f(np.array([t]))[0]) - peak)

    pts = [grid[k]] if a < grid[k] < b else None
    val, err = integrate.quad(f, a, b, points=pts, epsabs=0.0, epsrel=rtol, limit=200)
    if not math.isfinite(val) or err > max(10 * rtol * abs(val), 1e-300):
        raise QuadratureError(f"no convergence on [{a:.6g}, {b:.6g}] (value {val!r}, error {err!r})")
    return peak, val


def pdf_continuous(h: float, p: LinkParameters, c: DerivedChannelConstants | None = None,
                   *, rtol: float = 1e-8) -> float:
    """Continuous part of the channel-gain density at ``h > 0``."""
    if not (h > 0 and math.isfinite(h)):
        raise ParameterError("h", f"density support is h > 0, got {h!r}")
    c = derive_constants(p) if c is None else c
    try:
        peak, val = _integrate_peaked(lambda t: log_pdf_integrand(h, t, c, p),
                                      0.0, theta_upper_limit(p), rtol=rtol)
    except QuadratureError as exc:
        raise QuadratureError(f"pdf at h={h!r}: {exc}") from exc
    if val == 0.0:
        return 0.0
    return math.exp(peak + math.log(val)) if peak + math.log(val) < 709 else math.inf


@dataclass(frozen=True)
class ChannelPdf:
    """Mixed distribution of the channel gain: outage atom plus density."""

    params: LinkParameters
    constants: DerivedChannelConstants
    outage_mass: float
    support_floor: float
    support_ceiling: float

    def continuous_density(self, h: float) -> float:
        return pdf_continuous(h, self.params, self.constants)

    def continuous_mass(self, *, rtol: float = 1e-6) -> float:
        """``int_0^inf`` of the continuous density, integrated in ``ln h``."""
        lo = math.log(self.support_floor)
        hi = math.log(self.support_ceiling)

        def g(u):
            h = math.exp(u)
            return pdf_continuous(h, self.params, self.constants) * h

        # the density is sharply peaked in ln h; seed quad with a scan
        grid = np.linspace(lo, hi, 121)
        vals = np.array([g(u) for u in grid])
        top = int(np.argmax(vals))
        val, err = integrate.quad(g, lo, hi, points=[grid[top]], epsabs=0.0, epsrel=rtol, limit=200)
        return val

    def total_mass(self) -> float:
        return self.outage_mass + self.continuous_mass()


def channel_pdf(p: LinkParameters) -> ChannelPdf:
    c = derive_constants(p)
    log_ceiling = log_gain_ceiling(c, p)
    sigma = math.sqrt(p.log_irradiance_variance)
    # upper tail is log-normal with log-irradiance sd 2 sigma
    upper = log_ceiling + 16.0 * sigma + 1.0
    # lower tail decays like h^gamma^2 once the pointing offset is exhausted
    theta_max = 8.0 * p.orientation_sd
    lower = (log_ceiling - 2.0 * p.link_length**2 * theta_max**2 / c.w_z_eq_sq
             - 60.0 / c.gamma_sq - 16.0 * sigma)
    return ChannelPdf(params=p, constants=c, outage_mass=outage_mass(p),
                      support_floor=math.exp(lower), support_ceiling=math.exp(upper))

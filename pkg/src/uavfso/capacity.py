"""Ergodic capacity of the UAV-to-UAV link along several independent paths.

``capacity_exact``
    Nested quadrature of ``ln(1 + S h^2)`` against the channel density.
``capacity_highsnr_oracle``
    Nested quadrature of the high-SNR integrand ``ln(S h^2)``, with either the
    exact Q-function or its three-term exponential approximation.
``capacity_highsnr_analytic``
    The exact-Q high-SNR capacity reduced to moments of the AoA weight.
``capacity_closed_form`` / ``capacity_large_fov``
    Whittaker / incomplete-gamma expressions of the four one-dimensional
    integrals left after the Gaussian integral over ``ln h``.

Here ``S = R^2 P_t^2 / sigma_n^2``. Everything is in nats internally.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, special

from . import specfun
from .channel import (
    DerivedChannelConstants,
    LinkParameters,
    ParameterError,
    QuadratureError,
    aoa_bracket,
    channel_pdf,
    derive_constants,
    growth_rate,
    log_gain_ceiling,
    outage_mass,
    q_argument_parts,
    theta_upper_limit,
)

log = logging.getLogger(__name__)

ELECTRON_CHARGE = 1.602176634e-19
LN2 = math.log(2.0)

CORRECTED = "corrected"
PUBLISHED = "published"
# prefactor printed in the published I11 expression; the exact value is 2
PUBLISHED_I11_CONSTANT = 1.722


def nats_to_bits(x: float) -> float:
    return x / LN2


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class NoiseModel:
    """Receiver and background-light parameters.

    Units follow the background-power formula: optical bandwidth in um,
    spectral radiance in W/(cm^2 um sr) and lens area in cm^2.
    """

    transmit_power: float
    lens_area_cm2: float
    responsivity: float = 0.6
    pd_bandwidth: float = 1e9
    optical_bandwidth_um: float = 0.01
    spectral_radiance: float = 1e-3
    electron_charge: float = ELECTRON_CHARGE

    def __post_init__(self):
        for name in ("transmit_power", "lens_area_cm2", "responsivity", "pd_bandwidth",
                     "optical_bandwidth_um", "spectral_radiance", "electron_charge"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(name, f"must be a finite positive number, got {v!r}")

    @classmethod
    def for_link(cls, p: LinkParameters, transmit_power: float, **kwargs) -> "NoiseModel":
        """Noise model whose lens area is the aperture of ``p`` (radius in cm)."""
        area = math.pi * (100.0 * p.aperture_radius) ** 2
        return cls(transmit_power=transmit_power, lens_area_cm2=area, **kwargs)

    def check_link(self, p: LinkParameters):
        area = math.pi * (100.0 * p.aperture_radius) ** 2
        if abs(self.lens_area_cm2 - area) > 1e-12 * area:
            raise ParameterError("lens_area_cm2",
                                 f"{self.lens_area_cm2!r} cm^2 does not match aperture radius "
                                 f"{p.aperture_radius!r} m ({area!r} cm^2)")

    def replace(self, **changes) -> "NoiseModel":
        values = dict(self.__dict__)
        values.update(changes)
        return NoiseModel(**values)


def background_power(n: NoiseModel, fov_angle: float) -> float:
    """Background power in W: ``(pi/4) B_o N_b A_a theta_fov^2``."""
    if fov_angle < 0:
        raise ParameterError("fov_angle", f"must be >= 0, got {fov_angle!r}")
    return math.pi / 4.0 * n.optical_bandwidth_um * n.spectral_radiance * n.lens_area_cm2 * fov_angle**2


def noise_variance(n: NoiseModel, fov_angle: float) -> float:
    """Receiver noise variance ``2 B_e R e P_b`` in A^2."""
    return 2.0 * n.pd_bandwidth * n.responsivity * n.electron_charge * background_power(n, fov_angle)


def log_snr_scale(p: LinkParameters, n: NoiseModel) -> float:
    """``ln(R^2 P_t^2 / sigma_n^2)``."""
    var = noise_variance(n, p.fov_angle)
    return 2.0 * math.log(n.responsivity * n.transmit_power) - math.log(var)


def high_snr_warning(p: LinkParameters, n: NoiseModel, threshold: float = 10.0,
                     c: DerivedChannelConstants | None = None) -> str | None:
    """Message if the SNR at ``h = A0 h_l`` is below ``threshold``, else ``None``."""
    c = derive_constants(p) if c is None else c
    log_snr = log_snr_scale(p, n) + 2.0 * log_gain_ceiling(c, p)
    if log_snr <= math.log(threshold):
        return (f"SNR at h=A0*h_l is {math.exp(log_snr):.4g} <= {threshold:g}; "
                "high-SNR paths are outside their validity range")
    return None


# ---------------------------------------------------------------------------
# high-SNR kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HighSnrKernel:
    """Constants of the three Gaussian terms left after integrating over ``ln h``.

    Arrays are indexed by the Q-approximation term ``i``. ``log_k2`` holds
    ``ln K2_i`` (K2 itself underflows for wide beams). ``slope`` is the
    coefficient ``(4 - 12 a'_i) Z^2 / (a'_i w_eq^2)`` and ``offset`` the shift
    ``s0`` inside ``sqrt(theta^2 + s0)``.
    """

    k1: float
    a: np.ndarray
    a_prime: np.ndarray
    log_k2: np.ndarray
    k3: np.ndarray
    k4: np.ndarray
    k4_prime: np.ndarray
    slope: np.ndarray
    offset: np.ndarray
    j2_slope: np.ndarray
    j2_intercept: np.ndarray
    variant: str = CORRECTED
    _j1: tuple = field(default=(0.0, 0.0), repr=False)

    @property
    def k2(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_k2)

    def j1(self, theta):
        c2, c0 = self._j1
        return c2 * np.asarray(theta, dtype=float) ** 2 + c0

    def j2(self, i: int, theta):
        return self.j2_slope[i] * np.asarray(theta, dtype=float) ** 2 + self.j2_intercept[i]


def build_kernel(c: DerivedChannelConstants, p: LinkParameters, n: NoiseModel, *,
                 variant: str = CORRECTED,
                 coeffs: specfun.QApproxCoefficients = specfun.Q_APPROX) -> HighSnrKernel:
    """Assemble ``K1..K4``, ``K4'`` and the ``J`` functions.

    ``variant="corrected"`` uses ``J2 = (16 sp^2 Z^2 theta^2 + C_c/2) / (a' w_eq^4)``,
    which is what completing the square on the Q-function argument gives.
    ``variant="published"`` keeps ``C_c`` in place of ``C_c / 2`` as printed.
    """
    if variant not in (CORRECTED, PUBLISHED):
        raise ValueError(f"unknown variant {variant!r}")
    n.check_link(p)
    if noise_variance(n, p.fov_angle) <= 0:
        raise ParameterError("noise", "noise variance must be positive")
    w = c.w_z_eq_sq
    z2 = p.link_length**2
    sp2 = p.position_sd**2
    st2 = p.orientation_sd**2
    g2 = c.gamma_sq
    log_ceiling = log_gain_ceiling(c, p)
    a = np.asarray(coeffs.a, dtype=float)
    ap = np.asarray(coeffs.a_prime, dtype=float)

    k1 = log_snr_scale(p, n)
    cc_j2 = c.c_c / 2.0 if variant == CORRECTED else c.c_c
    j2_slope = 16.0 * sp2 * z2 / (ap * w**2)
    j2_intercept = cc_j2 / (ap * w**2)
    j1 = (6.0 * z2 / w, c.c_b / w - log_ceiling)

    # exp(gamma^4 J2(0)/2 - gamma^2 J1(0)) split off from the theta dependence
    const_exp = g2**2 * j2_intercept / 2.0 - g2 * c.c_b / w
    log_k2 = (np.log(a) + c.log_c_a + g2 * log_ceiling + const_exp
              + 0.5 * np.log(2.0 * math.pi * j2_slope) - math.log(st2))
    k3 = k1 + 2.0 * g2 * j2_intercept - 2.0 * c.c_b / w + 2.0 * log_ceiling
    k4 = (6.0 * ap - 1.0) * z2 / (8.0 * ap * sp2) + 1.0 / (2.0 * st2) - z2 / (2.0 * sp2)
    if np.any(k4 <= 0):
        raise ParameterError("K4", f"non-positive K4 {k4.tolist()} makes the capacity integral diverge")
    k4_prime = k4 + 1.0 / (2.0 * st2)
    slope = (4.0 - 12.0 * ap) * z2 / (ap * w)
    offset = j2_intercept / j2_slope
    return HighSnrKernel(k1=k1, a=a, a_prime=ap, log_k2=log_k2, k3=k3, k4=k4,
                         k4_prime=k4_prime, slope=slope, offset=offset,
                         j2_slope=j2_slope, j2_intercept=j2_intercept,
                         variant=variant, _j1=j1)


# ---------------------------------------------------------------------------
# closed form
# ---------------------------------------------------------------------------

def _signed(log_mag: float, sign: float) -> float:
    if sign == 0 or log_mag == -math.inf:
        return 0.0
    if log_mag > 709.0:
        return math.copysign(math.inf, sign)
    return math.copysign(math.exp(log_mag), sign)


def _log_wsc(n_max: int, z: float) -> np.ndarray:
    """``ln(exp(z/2) W)`` over the family ``W_{-(2n-1)/4, (2n+3)/4}(z)``, ``n <= n_max``."""
    try:
        return specfun.log_whittaker_family_scaled(n_max, z)
    except (specfun.SpecialFunctionError, ValueError) as exc:
        raise specfun.SpecialFunctionError(
            f"Whittaker W family up to n={n_max} at z={z!r}: {exc}") from exc


def i11_closed_terms(k: HighSnrKernel, *, published: bool = False, family=None) -> np.ndarray:
    """Per-``i`` terms of I11 (Whittaker ``W_{-1/4,-5/4}``, family order 1)."""
    out = np.empty(3)
    pref = 0.5 if not published else PUBLISHED_I11_CONSTANT / 4.0
    if family is None:
        family = _log_wsc(1, k.k4 * k.offset)
    for i in range(3):
        s0, k4 = k.offset[i], k.k4[i]
        lm = (k.log_k2[i] + math.log(abs(k.slope[i]) * pref) + 0.75 * math.log(s0)
              - 1.75 * math.log(k4) + family[i][1])
        out[i] = _signed(lm, k.slope[i])
    return out


def i12_closed_terms(k: HighSnrKernel) -> np.ndarray:
    out = np.empty(3)
    for i in range(3):
        z = k.k4[i] * k.offset[i]
        lm = (k.log_k2[i] + math.log(abs(k.k3[i]) / 2.0) - 1.5 * math.log(k.k4[i])
              + math.log(specfun.scaled_upper_incomplete_gamma(1.5, z)))
        out[i] = _signed(lm, k.k3[i])
    return out


def _outage_family(k: HighSnrKernel, p: LinkParameters, published: bool) -> np.ndarray:
    kk = k.k4 if published else k.k4_prime
    return _log_wsc(p.series_order + 1, kk * k.offset)


def _outage_closed(k: HighSnrKernel, c: DerivedChannelConstants, p: LinkParameters, *,
                   first: bool, published: bool, family=None) -> np.ndarray:
    """Per-(i, m) terms of I21 (``first``) or I22; shape ``(3, M + 1)``.

    I21 uses ``W_{-(2m+1)/4, -(2m+5)/4}`` (family order ``m + 1``) and I22
    ``W_{-(2m-1)/4, -(2m+3)/4}`` (order ``m``).
    """
    order = p.series_order
    hm = np.asarray(c.h_weights, dtype=float)
    live = hm > 0
    if not live.any():
        return np.zeros((3, order + 1))
    m = np.arange(order + 1, dtype=float)
    shift = 1 if first else 0
    if family is None:
        family = _outage_family(k, p, published)
    kk = k.k4 if published else k.k4_prime
    lead = k.slope if first else k.k3
    s0 = k.offset
    with np.errstate(divide="ignore"):
        # (i, m) grid: i down the rows, m along the columns
        lm = ((k.log_k2 + np.log(np.abs(lead) / 2.0))[:, None]
              + np.log(np.where(live, hm, 1.0)) + special.gammaln(m + 1 + shift)
              - 2 * m * math.log(p.orientation_sd)
              + np.outer(np.log(s0), (2 * m + 1 + 2 * shift) / 4.0)
              - np.outer(np.log(kk), (2 * m + 5 + 2 * shift) / 4.0)
              + family[:, shift:shift + order + 1])
    with np.errstate(over="ignore"):
        vals = np.where(lm > 709.0, np.inf, np.exp(np.minimum(lm, 709.0)))
    return np.where(live & (lead != 0)[:, None], np.sign(lead)[:, None] * vals, 0.0)


def i21_closed_terms(k, c, p, *, published: bool = False) -> np.ndarray:
    return _outage_closed(k, c, p, first=True, published=published)


def i22_closed_terms(k, c, p, *, published: bool = False) -> np.ndarray:
    return _outage_closed(k, c, p, first=False, published=published)


@dataclass(frozen=True)
class ClosedFormTerms:
    i11: float
    i12: float
    i21: float
    i22: float

    @property
    def i1(self) -> float:
        return self.i11 + self.i12

    @property
    def i2(self) -> float:
        return self.i21 + self.i22

    @property
    def capacity(self) -> float:
        return (self.i11 + self.i12) - (self.i21 + self.i22)


def closed_form_terms(k: HighSnrKernel, c: DerivedChannelConstants, p: LinkParameters, *,
                      published: bool = False) -> ClosedFormTerms:
    """``I11, I12, I21, I22`` from their closed forms.

    ``published=True`` reproduces the printed expressions: the 1.722
    prefactor in I11 and ``K4`` (instead of ``K4'``) in I21 and I22.
    Combine with ``build_kernel(..., variant="published")`` for the fully
    literal form.
    """
    if not np.any(c.h_weights > 0):
        i11 = float(i11_closed_terms(k, published=published).sum())
        i12 = float(i12_closed_terms(k).sum())
        return ClosedFormTerms(i11=i11, i12=i12, i21=0.0, i22=0.0)
    # one family evaluation covers I11 (argument K4 s0) and the outage terms
    kk = k.k4 if published else k.k4_prime
    both = _log_wsc(p.series_order + 1, np.concatenate([k.k4 * k.offset, kk * k.offset]))
    family = both[3:]
    return ClosedFormTerms(
        i11=float(i11_closed_terms(k, published=published, family=both[:3]).sum()),
        i12=float(i12_closed_terms(k).sum()),
        i21=float(_outage_closed(k, c, p, first=True, published=published, family=family).sum()),
        i22=float(_outage_closed(k, c, p, first=False, published=published, family=family).sum()),
    )


def capacity_closed_form(p: LinkParameters, n: NoiseModel, *, variant: str = CORRECTED) -> float:
    c = derive_constants(p)
    k = build_kernel(c, p, n, variant=variant)
    return closed_form_terms(k, c, p, published=(variant == PUBLISHED)).capacity


def capacity_large_fov(p: LinkParameters, n: NoiseModel, *, variant: str = CORRECTED) -> float:
    """``I11 + I12`` only: the outage terms dropped, valid when ``G`` is large."""
    c = derive_constants(p)
    k = build_kernel(c, p, n, variant=variant)
    return float(i11_closed_terms(k, published=(variant == PUBLISHED)).sum()
                 + i12_closed_terms(k).sum())


# ---------------------------------------------------------------------------
# one-dimensional quadrature twins of the closed forms
# ---------------------------------------------------------------------------

def _gauss_moment(n: int, s0: float, kk: float, rtol: float = 1e-12) -> float:
    """``int_0^inf theta^(2n+1) sqrt(theta^2 + s0) exp(-kk theta^2) d theta``."""
    scale = 1.0 / math.sqrt(kk)

    # theta = scale * s keeps the integrand on unit scale
    def f(s):
        th = scale * s
        return s ** (2 * n + 1) * math.sqrt(th * th + s0) * math.exp(-s * s)

    peak = math.sqrt(n + 0.5)
    val, err = integrate.quad(f, 0.0, peak + 40.0, points=[peak], epsabs=0.0, epsrel=rtol, limit=200)
    return val * scale ** (2 * n + 2)


def i11_quadrature_terms(k: HighSnrKernel) -> np.ndarray:
    return np.array([math.exp(k.log_k2[i]) * k.slope[i] * _gauss_moment(1, k.offset[i], k.k4[i])
                     if k.log_k2[i] > -700 else 0.0 for i in range(3)])


def i12_quadrature_terms(k: HighSnrKernel) -> np.ndarray:
    return np.array([math.exp(k.log_k2[i]) * k.k3[i] * _gauss_moment(0, k.offset[i], k.k4[i])
                     if k.log_k2[i] > -700 else 0.0 for i in range(3)])


def _outage_quadrature(k, c, p, first: bool) -> np.ndarray:
    order = p.series_order
    out = np.zeros((3, order + 1))
    st2 = p.orientation_sd**2
    for i in range(3):
        if k.log_k2[i] < -700:
            continue
        k2 = math.exp(k.log_k2[i])
        lead = k.slope[i] if first else k.k3[i]
        for m in range(order + 1):
            hm = c.h_weights[m]
            if hm == 0.0:
                continue
            moment = _gauss_moment(m + 1 if first else m, k.offset[i], k.k4_prime[i])
            out[i, m] = k2 * lead * hm * moment / st2**m
    return out


def i21_quadrature_terms(k, c, p) -> np.ndarray:
    return _outage_quadrature(k, c, p, first=True)


def i22_quadrature_terms(k, c, p) -> np.ndarray:
    return _outage_quadrature(k, c, p, first=False)


def quadrature_terms(k: HighSnrKernel, c: DerivedChannelConstants, p: LinkParameters) -> ClosedFormTerms:
    return ClosedFormTerms(
        i11=float(i11_quadrature_terms(k).sum()),
        i12=float(i12_quadrature_terms(k).sum()),
        i21=float(i21_quadrature_terms(k, c, p).sum()),
        i22=float(i22_quadrature_terms(k, c, p).sum()),
    )


# ---------------------------------------------------------------------------
# nested-quadrature oracles
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = legendre.leggauss(24)


def _panel_integral(log_f, g, lo: float, hi: float, panels: int):
    """Composite Gauss-Legendre of ``exp(log_f)`` and ``exp(log_f) * g``.

    Returns ``(log_scale, mass, first)`` with both integrals divided by
    ``exp(log_scale)``.
    """
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    lf = log_f(x)
    top = float(np.max(lf))
    wf = w * np.exp(lf - top)
    return top, float(np.sum(wf)), float(np.sum(wf * g(x)))


def _inner_integral(log_f, g, lo: float, hi: float, *, rtol: float = 1e-10):
    """Self-checking composite rule: double the panel count until two agree.

    Returns ``(log_scale, mass, first)`` as :func:`_panel_integral`.
    """
    panels = max(8, int(math.ceil((hi - lo) / 4.0)))
    top, m0, f0 = _panel_integral(log_f, g, lo, hi, panels)
    for _ in range(8):
        panels *= 2
        top2, m1, f1 = _panel_integral(log_f, g, lo, hi, panels)
        r = math.exp(top2 - top)
        m1, f1 = m1 * r, f1 * r
        if abs(m1 - m0) <= rtol * m1 and abs(f1 - f0) <= rtol * (abs(f1) + m1):
            return top, m1, f1
        m0, f0 = m1, f1
    raise QuadratureError(f"inner integral on [{lo:.6g}, {hi:.6g}] did not converge")


def _conditional_expectation(theta: float, c: DerivedChannelConstants, p: LinkParameters,
                             log_q, g_of_logh, q_kind: str):
    """Mass and first moment of ``g(ln h)`` for the slice at AoA ``theta``.

    Integrates the density's ``h``-integrand in the standardised Q argument
    ``x``; ``ln h = ln(A0 h_l) + (sd x - b) / w_eq^2``. Returns
    ``(log_mass, expectation)`` where ``mass`` excludes the AoA factor
    ``(theta / s^2) * bracket``.
    """
    w = c.w_z_eq_sq
    b, sd = q_argument_parts(theta, c, p)
    b = float(b)
    sd = float(sd)
    kx = c.gamma_sq * sd / w
    ceiling = log_gain_ceiling(c, p)
    base = c.log_c_a + c.gamma_sq * ceiling + growth_rate(p) * theta**2 + math.log(sd / w)

    def log_h(x):
        return ceiling + (sd * x - b) / w

    def log_f(x):
        return base + c.gamma_sq * (sd * x - b) / w + log_q(x)

    if q_kind == "exact":
        hi = kx + 14.0
        lo = min(-12.0, kx - 80.0 / max(kx, 1e-3))
    else:
        hi = kx + 14.0
        lo = min(-12.0, kx - 14.0 / math.sqrt(0.5))
    top, mass, first = _inner_integral(log_f, lambda x: g_of_logh(log_h(x)), lo, hi)
    if mass <= 0:
        return -math.inf, 0.0
    return top + math.log(mass), first / mass


def _aoa_outer(p: LinkParameters, c: DerivedChannelConstants, slice_value, *, rtol: float) -> float:
    st2 = p.orientation_sd**2
    t_max = theta_upper_limit(p)

    def f(theta):
        if theta == 0.0:
            return 0.0
        br = float(aoa_bracket(theta, c, p))
        if br <= 0.0:
            return 0.0
        log_mass, e = slice_value(theta)
        if log_mass == -math.inf:
            return 0.0
        return theta / st2 * br * math.exp(log_mass) * e

    val, err = integrate.quad(f, 0.0, t_max, points=[p.orientation_sd, 2 * p.orientation_sd],
                              epsabs=0.0, epsrel=rtol, limit=200)
    if not math.isfinite(val):
        raise QuadratureError(f"AoA integral did not converge (value {val!r})")
    return val


def capacity_exact(p: LinkParameters, n: NoiseModel, *, method: str = "conditional",
                   rtol: float = 1e-8) -> float:
    """Ergodic capacity ``E[ln(1 + S h^2)]`` in nats.

    The outage atom sits at ``h = 0`` and contributes nothing. ``method``
    selects the integration order: ``"conditional"`` (AoA outer, gain inner)
    or ``"pdf"`` (gain outer over :func:`~uavfso.channel.pdf_continuous`).
    """
    n.check_link(p)
    c = derive_constants(p)
    log_s = log_snr_scale(p, n)
    if method == "pdf":
        return _capacity_exact_via_pdf(p, c, log_s)
    if method != "conditional":
        raise ValueError(f"unknown method {method!r}")

    def g(lh):
        return np.logaddexp(0.0, log_s + 2.0 * lh)

    def slice_value(theta):
        return _conditional_expectation(theta, c, p, _log_q_exact, g, "exact")

    return _aoa_outer(p, c, slice_value, rtol=rtol)


def _log_q_exact(x):
    return special.log_ndtr(-x)


def _capacity_exact_via_pdf(p: LinkParameters, c: DerivedChannelConstants, log_s: float) -> float:
    from .channel import pdf_continuous

    cp = channel_pdf(p)
    lo, hi = math.log(cp.support_floor), math.log(cp.support_ceiling)

    def f(u):
        h = math.exp(u)
        return float(np.logaddexp(0.0, log_s + 2.0 * u)) * pdf_continuous(h, p, c) * h

    grid = np.linspace(lo, hi, 121)
    top = grid[int(np.argmax([f(u) for u in grid]))]
    val, err = integrate.quad(f, lo, hi, points=[top], epsabs=0.0, epsrel=1e-7, limit=200)
    return val


def capacity_highsnr_oracle(p: LinkParameters, n: NoiseModel, *, use_q_approx: bool = False,
                            coeffs: specfun.QApproxCoefficients = specfun.Q_APPROX,
                            rtol: float = 1e-8) -> float:
    """High-SNR capacity ``E[ln(S h^2)]`` by nested quadrature, in nats.

    With ``use_q_approx`` the Q-function is replaced by the three-term
    exponential sum extended evenly to negative arguments, which is exactly
    the integrand the closed form integrates.
    """
    n.check_link(p)
    c = derive_constants(p)
    log_s = log_snr_scale(p, n)

    def g(lh):
        return log_s + 2.0 * lh

    if use_q_approx:
        def log_q(x):
            return specfun.log_q_approx_even(x, coeffs)
        kind = "approx"
    else:
        log_q = _log_q_exact
        kind = "exact"

    def slice_value(theta):
        return _conditional_expectation(theta, c, p, log_q, g, kind)

    return _aoa_outer(p, c, slice_value, rtol=rtol)


def capacity_highsnr_analytic(p: LinkParameters, n: NoiseModel) -> float:
    """Exact-Q high-SNR capacity from the moments of the AoA weight.

    Conditioned on the AoA the gain integral is available in closed form:
    the slice mass is ``exp(-theta^2 / 2 s^2)`` times the density
    normalisation and ``E[ln h | theta] = ln(A0 h_l) - 2 sigma^2 - 1/gamma^2
    - 2 Z^2 theta^2 / w_eq^2``. Only ``sum_m H(m) m!`` and
    ``sum_m H(m) (m+1)!`` remain.
    """
    n.check_link(p)
    c = derive_constants(p)
    s2 = p.log_irradiance_variance
    st2 = p.orientation_sd**2
    weights = c.h_weights
    fact = np.array([math.factorial(m) for m in range(len(weights))], dtype=float)
    mass = 1.0 - float(np.sum(weights * fact)) / 2.0
    second = 2.0 * st2 - st2 * float(np.sum(weights * fact * np.arange(1, len(weights) + 1))) / 2.0
    const = (log_snr_scale(p, n) + 2.0 * log_gain_ceiling(c, p)
             - 4.0 * s2 - 2.0 / c.gamma_sq)
    return const * mass - 4.0 * p.link_length**2 / c.w_z_eq_sq * second


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

PATHS = ("exact", "oracle", "closed_form", "large_fov")


@dataclass
class CapacityReport:
    """Capacities of one parameter point, in nats, with derived views."""

    exact_nats: float | None = None
    highsnr_oracle_nats: float | None = None
    highsnr_oracle_qapprox_nats: float | None = None
    closed_form_nats: float | None = None
    large_fov_nats: float | None = None
    i_terms: ClosedFormTerms | None = None
    warnings: list[str] = field(default_factory=list)

    def nats(self) -> dict[str, float]:
        values = {
            "exact": self.exact_nats,
            "oracle": self.highsnr_oracle_nats,
            "oracle_qapprox": self.highsnr_oracle_qapprox_nats,
            "closed_form": self.closed_form_nats,
            "large_fov": self.large_fov_nats,
        }
        return {k: v for k, v in values.items() if v is not None}

    def bits(self) -> dict[str, float]:
        return {k: nats_to_bits(v) for k, v in self.nats().items()}

    def deltas(self) -> dict[tuple[str, str], float]:
        """Pairwise relative differences ``|a - b| / |b|``."""
        vals = self.nats()
        out = {}
        names = list(vals)
        for i, x in enumerate(names):
            for y in names[i + 1:]:
                ref = vals[y]
                out[(x, y)] = abs(vals[x] - ref) / abs(ref) if ref else math.inf
        return out


def evaluate(p: LinkParameters, n: NoiseModel, paths=PATHS, *, snr_threshold: float = 10.0) -> CapacityReport:
    """Evaluate the requested capacity paths at one parameter point."""
    unknown = set(paths) - set(PATHS) - {"oracle_qapprox"}
    if unknown:
        raise ValueError(f"unknown capacity paths: {sorted(unknown)}")
    c = derive_constants(p)
    report = CapacityReport()
    warn = high_snr_warning(p, n, snr_threshold, c)
    if warn and any(x != "exact" for x in paths):
        report.warnings.append(warn)
    if "exact" in paths:
        report.exact_nats = capacity_exact(p, n)
    if "oracle" in paths:
        report.highsnr_oracle_nats = capacity_highsnr_oracle(p, n)
    if "oracle_qapprox" in paths:
        report.highsnr_oracle_qapprox_nats = capacity_highsnr_oracle(p, n, use_q_approx=True)
    if "closed_form" in paths or "large_fov" in paths:
        k = build_kernel(c, p, n)
        terms = closed_form_terms(k, c, p)
        report.i_terms = terms
        if "closed_form" in paths:
            report.closed_form_nats = terms.capacity
        if "large_fov" in paths:
            report.large_fov_nats = terms.i1
    mass = outage_mass(p)
    log.debug("outage mass %.6g at G=%.4g", mass, p.fov_ratio)
    return report

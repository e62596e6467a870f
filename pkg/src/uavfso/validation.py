"""Oracle-versus-closed-form checks behind ``uavfso validate``.

Each check returns a :class:`Check` with the worst observed value and the
limit it is held to. Nothing here loosens a limit; a failing check is
reported as failing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import capacity as cap
from . import specfun
from .capacity import NoiseModel, dbm_to_watts
from .channel import LinkParameters, channel_pdf, derive_constants
from .sweep import SweepSpec, argmax_1d

MRAD = 1e-3
SIGMA_GRID = (2 * MRAD, 7 * MRAD, 10 * MRAD)
BEAM_GRID = (0.5, 2.0, 4.0)
PDF_SIGMA_GRID = (2 * MRAD, 5 * MRAD, 10 * MRAD)
PDF_FOV_GRID = (5 * MRAD, 20 * MRAD, 40 * MRAD)
REFERENCE_FOV = 25 * MRAD
REFERENCE_POWER_DBM = 10.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""


def _rel(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(b), 1e-300)
    return np.where((a == 0) & (b == 0), 0.0, np.abs(a - b) / scale)


def reference_points(base: LinkParameters):
    """The 3x3 (sigma_theta, w_z) grid at the reference FOV."""
    for st in SIGMA_GRID:
        for wz in BEAM_GRID:
            yield base.replace(orientation_sd=st, beam_width=wz, fov_angle=REFERENCE_FOV)


def _noise(p: LinkParameters, template: NoiseModel | None, power_dbm=REFERENCE_POWER_DBM):
    pt = dbm_to_watts(power_dbm)
    if template is None:
        return NoiseModel.for_link(p, pt)
    return template.replace(transmit_power=pt,
                            lens_area_cm2=math.pi * (100.0 * p.aperture_radius) ** 2)


def check_algebra(base: LinkParameters, noise=None, max_m: int = 5, limit: float = 1e-6) -> Check:
    """Closed form of every (I, i, m) term against 1-D quadrature of its integral."""
    worst, where = 0.0, ""
    for p in reference_points(base):
        c = derive_constants(p)
        k = cap.build_kernel(c, p, _noise(p, noise))
        pairs = {
            "I11": (cap.i11_closed_terms(k), cap.i11_quadrature_terms(k)),
            "I12": (cap.i12_closed_terms(k), cap.i12_quadrature_terms(k)),
            "I21": (cap.i21_closed_terms(k, c, p)[:, :max_m + 1],
                    cap.i21_quadrature_terms(k, c, p)[:, :max_m + 1]),
            "I22": (cap.i22_closed_terms(k, c, p)[:, :max_m + 1],
                    cap.i22_quadrature_terms(k, c, p)[:, :max_m + 1]),
        }
        for name, (closed, quad) in pairs.items():
            err = float(np.max(_rel(closed, quad)))
            if err > worst:
                worst = err
                where = (f"{name} at sigma_theta={p.orientation_sd / MRAD:g} mrad, "
                         f"w_z={p.beam_width:g} m")
    return Check("algebra_closed_vs_1d_quadrature", worst, limit, worst <= limit, where)


def _grid_gap(base, noise, use_q_approx: bool):
    worst, where = 0.0, ""
    for p in reference_points(base):
        n = _noise(p, noise)
        closed = cap.capacity_closed_form(p, n)
        oracle = cap.capacity_highsnr_oracle(p, n, use_q_approx=use_q_approx)
        err = abs(closed - oracle) / abs(oracle)
        if err > worst:
            worst = err
            where = f"sigma_theta={p.orientation_sd / MRAD:g} mrad, w_z={p.beam_width:g} m"
    return worst, where


def check_closed_vs_qapprox_oracle(base, noise=None, limit: float = 5e-3) -> Check:
    worst, where = _grid_gap(base, noise, True)
    return Check("closed_vs_2d_quadrature_qapprox", worst, limit, worst <= limit, where)


def qapprox_dense_error(lo: float = 0.5, hi: float = 5.0, step: float = 1e-3):
    """Largest relative error of the Q approximation on a dense grid: ``(x, err)``."""
    x = np.arange(lo, hi + step / 2, step)
    q = specfun.special.ndtr(-x)
    approx = np.exp(specfun.log_q_approx_even(x))
    err = np.abs(approx - q) / q
    i = int(np.argmax(err))
    return float(x[i]), float(err[i])


def check_closed_vs_exact_q_oracle(base, noise=None, limit: float = 0.03) -> Check:
    worst, where = _grid_gap(base, noise, False)
    x, err = qapprox_dense_error()
    detail = f"{where}; Q-approx dense max rel error {err:.4g} at x={x:.3f}"
    return Check("closed_vs_2d_quadrature_exact_q", worst, limit, worst <= limit, detail)


def check_pdf_normalization(base, limit: float = 1e-3) -> Check:
    worst, where = 0.0, ""
    for st in PDF_SIGMA_GRID:
        for fov in PDF_FOV_GRID:
            p = base.replace(orientation_sd=st, fov_angle=fov)
            err = abs(channel_pdf(p).total_mass() - 1.0)
            if err >= worst:
                worst = err
                where = f"sigma_theta={st / MRAD:g} mrad, theta_fov={fov / MRAD:g} mrad"
    return Check("pdf_normalization", worst, limit, worst <= limit, where)


def check_large_fov(base, noise=None, limit: float = 0.02) -> list[Check]:
    st = 7 * MRAD
    p = base.replace(orientation_sd=st, fov_angle=3.6 * st, beam_width=2.0)
    n = _noise(p, noise)
    closed = cap.capacity_closed_form(p, n)
    large = cap.capacity_large_fov(p, n)
    err = abs(large - closed) / abs(closed)
    out = [Check("large_fov_at_G_3.6", err, limit, err <= limit)]

    ratios = []
    st = 4 * MRAD
    for g in range(1, 11):
        q = base.replace(orientation_sd=st, fov_angle=g * st, beam_width=2.0)
        c = derive_constants(q)
        k = cap.build_kernel(c, q, _noise(q, noise))
        t = cap.closed_form_terms(k, c, q)
        ratios.append(abs(t.i2 / t.i1))
    mono = all(b < a or b == 0.0 for a, b in zip(ratios, ratios[1:]))
    out.append(Check("I2_over_I1_decreasing_in_G", ratios[-1], ratios[0], mono,
                     "ratios " + " ".join(f"{r:.3g}" for r in ratios)))
    return out


def check_high_snr_gap(base, noise=None) -> Check:
    p = base.replace(fov_angle=REFERENCE_FOV)
    gaps = []
    for dbm in (0.0, 10.0, 20.0, 30.0):
        n = _noise(p, noise, dbm)
        exact = cap.capacity_exact(p, n)
        high = cap.capacity_highsnr_oracle(p, n)
        gaps.append(abs(high - exact) / abs(exact))
    mono = all(b < a for a, b in zip(gaps, gaps[1:]))
    return Check("exact_vs_highsnr_gap_decreasing", gaps[-1], gaps[0], mono,
                 "gaps " + " ".join(f"{g:.3g}" for g in gaps))


def beam_optimum(base, sigma_theta: float, noise=None, path: str = "exact", count: int = 25):
    p = base.replace(orientation_sd=sigma_theta, fov_angle=REFERENCE_FOV)
    spec = SweepSpec("w_z", 0.2, 6.0, count, link=p, noise=_noise(p, noise), paths=(path,))
    return argmax_1d(spec, path=path)


def check_figure_values(base, noise=None) -> list[Check]:
    opts = {st: beam_optimum(base, st, noise) for st in SIGMA_GRID}
    w10 = opts[10 * MRAD]
    out = [Check("optimum_w_z_sigma_10mrad", w10.value, 0.25,
                 abs(w10.value - 3.0) <= 0.25 and not w10.at_boundary,
                 f"|w* - 3 m| <= 0.25 m, capacity {w10.capacity_bits:.4g} bits")]
    p2 = base.replace(orientation_sd=2 * MRAD, fov_angle=REFERENCE_FOV, beam_width=3.0)
    at3 = cap.nats_to_bits(cap.capacity_exact(p2, _noise(p2, noise)))
    gap = opts[2 * MRAD].capacity_bits - at3
    out.append(Check("capacity_w_z_3m_sigma_2mrad", at3, 0.5, abs(at3 - 11.2) <= 0.5,
                     "target 11.2 bits"))
    out.append(Check("design_gap_sigma_10_vs_2mrad", gap, 0.5, abs(gap - 3.3) <= 0.5,
                     "target 3.3 bits"))
    ws = [opts[st].value for st in SIGMA_GRID]
    interior = not any(o.at_boundary for o in opts.values())
    out.append(Check("optimum_w_z_nondecreasing", ws[-1], ws[0],
                     all(b >= a for a, b in zip(ws, ws[1:])) and interior,
                     "w* " + " ".join(f"{w:.3f}" for w in ws)))
    return out


def check_timing(base, noise=None) -> list[Check]:
    p = base.replace(fov_angle=REFERENCE_FOV)
    n = _noise(p, noise)
    best = math.inf
    for _ in range(20):
        t0 = time.perf_counter()
        cap.capacity_closed_form(p, n)
        best = min(best, time.perf_counter() - t0)
    slow = 0.0
    for pt in reference_points(base):
        t0 = time.perf_counter()
        cap.capacity_highsnr_oracle(pt, _noise(pt, noise))
        slow = max(slow, time.perf_counter() - t0)
    return [Check("closed_form_seconds", best, 1e-3, best < 1e-3),
            Check("oracle_point_seconds", slow, 1.0, slow < 1.0)]


def run_all(base: LinkParameters | None = None, noise: NoiseModel | None = None, *,
            quick: bool = False) -> list[Check]:
    """Every check; ``quick`` skips the beam-width sweeps on the exact path."""
    base = base or LinkParameters()
    checks = [
        check_algebra(base, noise),
        check_closed_vs_qapprox_oracle(base, noise),
        check_closed_vs_exact_q_oracle(base, noise),
        check_pdf_normalization(base),
        *check_large_fov(base, noise),
        check_high_snr_gap(base, noise),
        *check_timing(base, noise),
    ]
    if not quick:
        checks += check_figure_values(base, noise)
    return checks

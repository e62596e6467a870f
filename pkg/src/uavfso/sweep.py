"""Parameter sweeps and 1-D capacity maximisation over the tunable parameters."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import capacity as cap
from .capacity import NoiseModel, dbm_to_watts, nats_to_bits
from .channel import LinkParameters

# swept name -> (which record, field)
SWEEPABLE = {
    "w_z": ("link", "beam_width"),
    "theta_fov": ("link", "fov_angle"),
    "sigma_theta": ("link", "orientation_sd"),
    "P_t": ("noise", "transmit_power"),
}

# ranges covered by the reference simulation setup; P_t is unbounded
DEFAULT_BOUNDS = {
    "w_z": (0.2, 6.0),
    "theta_fov": (1e-3, 40e-3),
    "sigma_theta": (1e-3, 12e-3),
}

PATH_FUNCTIONS = {
    "exact": cap.capacity_exact,
    "oracle": cap.capacity_highsnr_oracle,
    "oracle_qapprox": lambda p, n: cap.capacity_highsnr_oracle(p, n, use_q_approx=True),
    "closed_form": cap.capacity_closed_form,
    "large_fov": cap.capacity_large_fov,
}


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter over ``count`` evenly spaced points in ``[lo, hi]``.

    Lengths are in m and angles in rad; ``P_t`` is swept in dBm.
    ``noise.transmit_power`` is ignored when ``P_t`` is the swept parameter.
    """

    parameter: str
    lo: float
    hi: float
    count: int = 25
    link: LinkParameters = field(default_factory=LinkParameters)
    noise: NoiseModel | None = None
    paths: tuple[str, ...] = ("closed_form",)
    allow_out_of_range: bool = False

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise SweepError(f"cannot sweep {self.parameter!r}; choose from {sorted(SWEEPABLE)}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise SweepError("sweep bounds must be finite")
        if self.lo > self.hi:
            raise SweepError(f"lo={self.lo!r} exceeds hi={self.hi!r}")
        if self.count < 0 or (self.lo < self.hi and self.count == 1):
            raise SweepError(f"count must be 0 or >= 2 for a proper range, got {self.count!r}")
        bad = set(self.paths) - set(PATH_FUNCTIONS)
        if bad:
            raise SweepError(f"unknown paths {sorted(bad)}")
        bounds = DEFAULT_BOUNDS.get(self.parameter)
        if bounds and not self.allow_out_of_range:
            tol = 1e-12 * max(abs(bounds[1]), 1.0)
            if self.lo < bounds[0] - tol or self.hi > bounds[1] + tol:
                raise SweepError(f"{self.parameter} range [{self.lo}, {self.hi}] leaves "
                                 f"[{bounds[0]}, {bounds[1]}]; pass allow_out_of_range to override")
        if self.parameter != "P_t" and self.noise is None:
            raise SweepError("a noise model (with transmit power) is required")

    def values(self) -> np.ndarray:
        """Grid values; ``count=0`` gives an empty sweep and ``lo == hi`` one point."""
        if self.count == 0:
            return np.empty(0)
        if self.lo == self.hi:
            return np.array([float(self.lo)])
        return np.linspace(self.lo, self.hi, self.count)

    def point(self, value: float) -> tuple[LinkParameters, NoiseModel]:
        """Link and noise records at one grid value."""
        kind, name = SWEEPABLE[self.parameter]
        link = self.link
        noise = self.noise
        if kind == "link":
            link = link.replace(**{name: float(value)})
        if noise is None:
            noise = NoiseModel.for_link(link, dbm_to_watts(value))
        elif self.parameter == "P_t":
            noise = noise.replace(transmit_power=dbm_to_watts(value))
        return link, noise


@dataclass(frozen=True)
class SweepRow:
    value: float
    nats: dict[str, float]
    warnings: tuple[str, ...] = ()
    error: str | None = None

    @property
    def bits(self) -> dict[str, float]:
        return {k: nats_to_bits(v) for k, v in self.nats.items()}


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    paths: tuple[str, ...]
    rows: tuple[SweepRow, ...]

    def argmax(self, path: str) -> int | None:
        """Index of the best row for ``path``; ties go to the smaller value."""
        best, best_i = -math.inf, None
        for i, row in enumerate(self.rows):
            v = row.nats.get(path)
            if v is not None and math.isfinite(v) and v > best:
                best, best_i = v, i
        return best_i

    @property
    def ok(self) -> bool:
        return all(r.error is None for r in self.rows)


def evaluate_point(spec: SweepSpec, value: float) -> SweepRow:
    """Capacities of every requested path at one grid value; failures are captured."""
    try:
        link, noise = spec.point(value)
        warnings = []
        if any(pth != "exact" for pth in spec.paths):
            w = cap.high_snr_warning(link, noise)
            if w:
                warnings.append(w)
        nats = {}
        for path in spec.paths:
            nats[path] = float(PATH_FUNCTIONS[path](link, noise))
        return SweepRow(value=float(value), nats=nats, warnings=tuple(warnings))
    except (ArithmeticError, ValueError) as exc:
        return SweepRow(value=float(value), nats={}, error=f"{type(exc).__name__}: {exc}")


def _evaluate_star(args):
    return evaluate_point(*args)


def grid_sweep(spec: SweepSpec, *, workers: int | None = None) -> SweepResult:
    """Evaluate every grid point; rows come back in ascending parameter order.

    With ``workers > 1`` points are spread over a process pool. Each point is
    a pure function of the spec, so the result does not depend on scheduling.
    """
    values = spec.values()
    if workers and workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_star, [(spec, v) for v in values]))
    else:
        rows = [evaluate_point(spec, v) for v in values]
    rows.sort(key=lambda r: r.value)
    return SweepResult(parameter=spec.parameter, paths=tuple(spec.paths), rows=tuple(rows))


INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a: float, b: float, *, tol: float = 1e-4, max_iter: int = 200):
    """Maximise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass(frozen=True)
class Optimum:
    parameter: str
    value: float
    capacity_bits: float
    coarse_value: float
    coarse_bits: float
    at_boundary: bool
    result: SweepResult | None = None


def argmax_1d(spec: SweepSpec, *, path: str | None = None, refine: bool = True,
              objective=None, tol: float | None = None, workers: int | None = None) -> Optimum:
    """Coarse grid maximum of one capacity path, optionally golden-section refined.

    Refinement only searches the two grid cells around the coarse maximum
    (local unimodality) and never returns a value below the coarse best.
    ``objective`` (value -> bits) replaces the capacity path, mainly for tests.
    A maximum on the first or last grid point is flagged ``at_boundary``.
    """
    path = path or spec.paths[0]
    if objective is None:
        if path not in PATH_FUNCTIONS:
            raise SweepError(f"unknown path {path!r}")
        sub = SweepSpec(parameter=spec.parameter, lo=spec.lo, hi=spec.hi, count=spec.count,
                        link=spec.link, noise=spec.noise, paths=(path,),
                        allow_out_of_range=spec.allow_out_of_range)
        result = grid_sweep(sub, workers=workers)

        def objective(v):
            row = evaluate_point(sub, v)
            if row.error:
                return -math.inf
            return row.bits[path]

        values = np.array([r.value for r in result.rows])
        bits = np.array([r.bits.get(path, -math.inf) for r in result.rows])
    else:
        result = None
        values = spec.values()
        bits = np.array([objective(v) for v in values])

    if not np.isfinite(bits).any():
        raise SweepError(f"no grid point produced a finite capacity on path {path!r}")
    k = int(np.argmax(np.where(np.isfinite(bits), bits, -np.inf)))
    coarse_value, coarse_bits = float(values[k]), float(bits[k])
    boundary = len(values) > 1 and k in (0, len(values) - 1)
    best_value, best_bits = coarse_value, coarse_bits
    if refine and len(values) > 2:
        a = values[max(k - 1, 0)]
        b = values[min(k + 1, len(values) - 1)]
        tol = tol if tol is not None else 1e-3 * (values[1] - values[0])
        x, fx = golden_section_max(objective, float(a), float(b), tol=tol)
        if fx > best_bits:
            best_value, best_bits = float(x), float(fx)
    return Optimum(parameter=spec.parameter, value=best_value, capacity_bits=best_bits,
                   coarse_value=coarse_value, coarse_bits=coarse_bits,
                   at_boundary=boundary, result=result)


@dataclass(frozen=True)
class WorstCaseDesign:
    design_beam_width: float
    capacity_at_design_bits: float
    best_beam_width: float
    max_capacity_bits: float

    @property
    def gap_bits(self) -> float:
        return self.max_capacity_bits - self.capacity_at_design_bits


def penalty_of_worst_case_design(sigma_theta_worst: float, sigma_theta_actual: float,
                                 link: LinkParameters, noise: NoiseModel, *,
                                 path: str = "exact", lo: float = 0.2, hi: float = 6.0,
                                 count: int = 25, refine: bool = True) -> WorstCaseDesign:
    """Cost of tuning ``w_z`` for the worst orientation jitter.

    The beam width is optimised under ``sigma_theta_worst`` and then used
    under ``sigma_theta_actual``; the result compares it with the best beam
    width for the actual jitter.
    """
    def optimum(sigma):
        spec = SweepSpec("w_z", lo, hi, count, link=link.replace(orientation_sd=sigma),
                         noise=noise, paths=(path,))
        return argmax_1d(spec, path=path, refine=refine)

    worst = optimum(sigma_theta_worst)
    actual_link = link.replace(orientation_sd=sigma_theta_actual, beam_width=worst.value)
    at_design = nats_to_bits(PATH_FUNCTIONS[path](actual_link, noise))
    if sigma_theta_worst == sigma_theta_actual:
        best_w, best_bits = worst.value, at_design
    else:
        best = optimum(sigma_theta_actual)
        best_w, best_bits = best.value, best.capacity_bits
        if at_design > best_bits:
            best_w, best_bits = worst.value, at_design
    return WorstCaseDesign(design_beam_width=worst.value, capacity_at_design_bits=at_design,
                           best_beam_width=best_w, max_capacity_bits=best_bits)

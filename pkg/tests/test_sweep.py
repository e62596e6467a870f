import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavfso import capacity as cap
from uavfso import sweep
from uavfso.capacity import NoiseModel, dbm_to_watts
from uavfso.channel import LinkParameters
from uavfso.sweep import SweepError, SweepSpec


def spec_for(param, lo, hi, count=5, paths=("closed_form",), **kw):
    link = kw.pop("link", LinkParameters())
    noise = None if param == "P_t" else NoiseModel.for_link(link, dbm_to_watts(10.0))
    return SweepSpec(param, lo, hi, count, link=link, noise=noise, paths=paths, **kw)


def test_power_sweep_strictly_increasing():
    res = sweep.grid_sweep(spec_for("P_t", 0.0, 40.0, 41, paths=("closed_form", "exact")))
    for path in ("closed_form", "exact"):
        vals = [r.nats[path] for r in res.rows]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    assert res.argmax("exact") == len(res.rows) - 1


def test_single_point_matches_direct_evaluation():
    link = LinkParameters()
    res = sweep.grid_sweep(spec_for("w_z", 2.5, 2.5, 1, paths=("exact", "closed_form")))
    assert len(res.rows) == 1
    p = link.replace(beam_width=2.5)
    n = NoiseModel.for_link(p, dbm_to_watts(10.0))
    assert res.rows[0].nats["exact"] == cap.capacity_exact(p, n)
    assert res.rows[0].nats["closed_form"] == cap.capacity_closed_form(p, n)


def test_empty_sweep():
    res = sweep.grid_sweep(spec_for("w_z", 1.0, 2.0, 0))
    assert res.rows == ()
    assert res.argmax("closed_form") is None


@pytest.mark.parametrize("kwargs,msg", [
    (dict(param="w_z", lo=3.0, hi=2.0), "exceeds"),
    (dict(param="w_z", lo=0.1, hi=2.0), "leaves"),
    (dict(param="theta_fov", lo=1e-3, hi=60e-3), "leaves"),
    (dict(param="w_z", lo=1.0, hi=2.0, count=1), "count"),
    (dict(param="h_l", lo=0.1, hi=0.2), "cannot sweep"),
    (dict(param="w_z", lo=1.0, hi=2.0, paths=("fast",)), "unknown paths"),
])
def test_invalid_specs(kwargs, msg):
    with pytest.raises(SweepError, match=msg):
        spec_for(**kwargs)


def test_out_of_range_override():
    s = spec_for("w_z", 0.1, 8.0, 3, allow_out_of_range=True)
    assert len(sweep.grid_sweep(s).rows) == 3


def test_order_independence_and_parallel_assembly():
    s = spec_for("theta_fov", 5e-3, 40e-3, 9, paths=("closed_form", "large_fov"))
    serial = sweep.grid_sweep(s)
    values = list(s.values())
    random.Random(3).shuffle(values)
    shuffled = sorted((sweep.evaluate_point(s, v) for v in values), key=lambda r: r.value)
    assert tuple(shuffled) == serial.rows
    assert sweep.grid_sweep(s, workers=3) == serial


def test_point_failure_recorded_and_sweep_continues(monkeypatch):
    def flaky(p, n):
        if p.beam_width > 1.5:
            raise ArithmeticError("synthetic failure")
        return 1.0

    monkeypatch.setitem(sweep.PATH_FUNCTIONS, "closed_form", flaky)
    res = sweep.grid_sweep(spec_for("w_z", 1.0, 2.0, 5))
    assert len(res.rows) == 5
    assert [r.error is None for r in res.rows] == [True, True, True, False, False]
    assert "synthetic failure" in res.rows[-1].error
    assert not res.ok


def test_low_snr_rows_carry_warning():
    res = sweep.grid_sweep(spec_for("P_t", -30.0, 10.0, 2))
    assert res.rows[0].warnings and not res.rows[1].warnings


# --- argmax --------------------------------------------------------------------

def test_constant_objective_returns_lo():
    s = spec_for("w_z", 0.5, 4.0, 8)
    opt = sweep.argmax_1d(s, objective=lambda v: 1.0)
    assert opt.value == 0.5
    assert opt.at_boundary


def test_interior_quadratic_refined():
    s = spec_for("w_z", 0.2, 6.0, 25)
    opt = sweep.argmax_1d(s, objective=lambda v: -(v - 2.345) ** 2)
    assert not opt.at_boundary
    assert opt.value == pytest.approx(2.345, abs=1e-3)
    assert opt.capacity_bits >= opt.coarse_bits


def test_boundary_maximum_flagged():
    s = spec_for("w_z", 0.2, 6.0, 25)
    opt = sweep.argmax_1d(s, objective=lambda v: v)
    assert opt.at_boundary and opt.coarse_value == 6.0


def test_no_refine_returns_grid_point():
    s = spec_for("w_z", 0.2, 6.0, 25)
    opt = sweep.argmax_1d(s, objective=lambda v: -(v - 2.345) ** 2, refine=False)
    assert opt.value in list(s.values())


@given(st.floats(0.2, 6.0), st.floats(0.1, 5.0), st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_refinement_never_below_coarse(center, width, wiggle):
    s = spec_for("w_z", 0.2, 6.0, 25)

    def f(v):
        return -((v - center) / width) ** 2 + 0.3 * math.sin(wiggle * 7.0 * v)

    opt = sweep.argmax_1d(s, objective=f)
    grid_best = max(f(v) for v in s.values())
    assert opt.capacity_bits >= grid_best
    assert 0.2 <= opt.value <= 6.0


def test_golden_section_max():
    x, fx = sweep.golden_section_max(lambda v: -(v - 0.3) ** 2, 0.0, 1.0, tol=1e-9)
    assert x == pytest.approx(0.3, abs=1e-8)


def test_argmax_on_closed_form_path():
    s = spec_for("theta_fov", 1e-3, 40e-3, 14, paths=("closed_form",))
    opt = sweep.argmax_1d(s)
    res = sweep.grid_sweep(s)
    assert opt.coarse_value == res.rows[res.argmax("closed_form")].value
    assert opt.capacity_bits >= opt.coarse_bits


# --- worst-case design -----------------------------------------------------------

def test_penalty_same_sigma_zero_gap():
    link = LinkParameters()
    n = NoiseModel.for_link(link, dbm_to_watts(10.0))
    r = sweep.penalty_of_worst_case_design(7e-3, 7e-3, link, n, count=9, refine=False)
    assert r.gap_bits == 0.0


@pytest.mark.parametrize("worst,actual", [(10e-3, 5e-3), (4e-3, 9e-3)])
def test_penalty_gap_nonnegative(worst, actual):
    link = LinkParameters()
    n = NoiseModel.for_link(link, dbm_to_watts(10.0))
    r = sweep.penalty_of_worst_case_design(worst, actual, link, n, count=9)
    assert r.gap_bits >= 0.0
    assert r.max_capacity_bits >= r.capacity_at_design_bits

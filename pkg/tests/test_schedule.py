import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zzedit.schedule import (
    NoiseSchedule,
    alpha_bar_at,
    build_linear_schedule,
    refine_schedule,
)

from .oracles import cumprod_alpha_bar, mp_cumprod_alpha_bar

# Frozen from the arbitrary-precision running product over 1000 linearly
# spaced betas in [1e-4, 0.02].
ALPHA_BAR_1000 = 4.0358297653756833e-05


def test_level_zero_is_exactly_one():
    s = build_linear_schedule(50)
    assert s.alpha_bar[0] == 1.0


def test_single_factor_first_base_step():
    s = build_linear_schedule(1000)
    assert s.alpha_bar[1] == pytest.approx(0.9999, abs=1e-15)


def test_terminal_value_matches_product_oracle():
    oracle = cumprod_alpha_bar(1000, 1e-4, 0.02)
    s = build_linear_schedule(50)
    assert s.alpha_bar[50] == pytest.approx(oracle[-1], rel=1e-12)
    assert s.alpha_bar[50] == pytest.approx(ALPHA_BAR_1000, rel=1e-12)
    # and the frozen constant itself against the high-precision product
    hp = float(mp_cumprod_alpha_bar(1000, "0.0001", "0.02")[-1])
    assert ALPHA_BAR_1000 == pytest.approx(hp, rel=1e-15)


def test_all_levels_match_product_oracle():
    oracle = cumprod_alpha_bar(1000, 1e-4, 0.02)
    s = build_linear_schedule(50)
    for t in range(1, 51):
        assert s.alpha_bar[t] == pytest.approx(oracle[20 * t], rel=1e-12)


def test_even_stride_base_index():
    s = build_linear_schedule(50)
    assert list(s.base_index) == list(range(20, 1001, 20))
    assert s.base_index[-1] == s.base_resolution


@given(
    beta_start=st.floats(1e-6, 0.01),
    spread=st.floats(1.0, 50.0),
    T=st.sampled_from([1, 2, 4, 5, 10, 20, 25, 40, 50, 100, 125, 200, 250, 500, 1000]),
)
@settings(max_examples=60, deadline=None)
def test_strictly_decreasing_for_valid_params(beta_start, spread, T):
    beta_end = min(beta_start * spread, 0.999)
    s = build_linear_schedule(T, beta_start=beta_start, beta_end=beta_end)
    assert s.alpha_bar[0] == 1.0
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert np.all(s.alpha_bar > 0) and np.all(s.alpha_bar <= 1.0)
    assert np.all(np.diff(s.base_index) > 0)


def test_doubling_T_is_superset_refinement():
    coarse = build_linear_schedule(25)
    fine = build_linear_schedule(50)
    assert set(coarse.base_index).issubset(set(fine.base_index))
    # shared base indices carry identical coefficients
    for t in range(1, 26):
        assert coarse.alpha_bar[t] == fine.alpha_bar[2 * t]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(T=0),
        dict(T=-3),
        dict(T=7),  # does not divide 1000
        dict(T=2000),  # exceeds base resolution
        dict(T=50, beta_start=0.0),
        dict(T=50, beta_start=0.3, beta_end=0.2),
        dict(T=50, beta_end=1.0),
    ],
)
def test_invalid_construction_rejected(kwargs):
    with pytest.raises(ValueError):
        build_linear_schedule(**kwargs)


def test_alpha_bar_at_bounds(schedule_50):
    assert alpha_bar_at(schedule_50, 0) == 1.0
    assert alpha_bar_at(schedule_50, 50) == pytest.approx(ALPHA_BAR_1000, rel=1e-12)
    with pytest.raises(ValueError):
        alpha_bar_at(schedule_50, 51)
    with pytest.raises(ValueError):
        alpha_bar_at(schedule_50, -1)


def test_json_round_trip(schedule_50):
    payload = json.loads(schedule_50.to_json())
    assert payload == {
        "T": 50,
        "base_resolution": 1000,
        "beta_start": 1e-4,
        "beta_end": 0.02,
    }
    again = NoiseSchedule.from_json(schedule_50.to_json())
    assert np.array_equal(again.alpha_bar, schedule_50.alpha_bar)


def test_schedule_arrays_immutable(schedule_50):
    with pytest.raises(ValueError):
        schedule_50.alpha_bar[3] = 0.5


def test_refinement_preserves_base_points(schedule_50):
    fine = refine_schedule(schedule_50, 10)
    assert fine.T == fine.base_resolution == 10000
    # every original base point keeps its exact coefficient
    for t in range(0, 51, 10):
        if t == 0:
            assert fine.alpha_bar[0] == 1.0
        else:
            assert fine.alpha_bar[10 * schedule_50.base_index[t - 1]] == (
                pytest.approx(schedule_50.alpha_bar[t], rel=1e-15)
            )
    assert np.all(np.diff(fine.alpha_bar) < 0)


def test_refine_factor_validation(schedule_50):
    with pytest.raises(ValueError):
        refine_schedule(schedule_50, 0)

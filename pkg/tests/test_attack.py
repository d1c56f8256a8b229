"""Eavesdropper statistics, sign calibration and decision rule."""

import numpy as np
import pytest

from kljnsim.attack import (
    AttackStat,
    DecisionSign,
    attack_stat,
    calibrate_sign,
    decide_pair,
    eve_decide,
    mean_square_window,
    ms_current_imbalance,
    ms_voltage_imbalance,
    signs_from_calibration,
)
from kljnsim.line import TrialWaveforms
from kljnsim.protocol import BitState, PhysicalConfig, ScenarioKind, SearchParams, run_bep_trial

CFG = PhysicalConfig()
FAST = SearchParams(record_len=2**18)
TF = CFG.fly_time


def _wf(v_a, v_b, i_a=None, i_b=None, dt=CFG.dt):
    v_a = np.asarray(v_a, dtype=float)
    v_b = np.asarray(v_b, dtype=float)
    i_a = v_a / CFG.z0 if i_a is None else np.asarray(i_a, dtype=float)
    i_b = v_b / CFG.z0 if i_b is None else np.asarray(i_b, dtype=float)
    return TrialWaveforms(dt, np.zeros_like(v_a), np.zeros_like(v_b), v_a, v_b, i_a, i_b)


class TestMeanSquareWindow:
    def test_constant_series(self):
        assert mean_square_window(np.full(100, 3.0), 50 * CFG.dt, CFG.dt) == 9.0

    def test_alternating_full_window(self):
        assert mean_square_window(np.array([1.0, -1.0, 1.0, -1.0]), 4 * CFG.dt, CFG.dt) == 1.0

    def test_alternating_zero_and_a(self):
        series = np.tile([0.0, 2.0], 500)
        assert mean_square_window(series, 1000 * CFG.dt, CFG.dt) == pytest.approx(2.0)

    def test_window_is_half_open(self):
        series = np.array([1.0, 1.0, 100.0])
        assert mean_square_window(series, 2 * CFG.dt, CFG.dt) == 1.0

    def test_window_longer_than_series_raises(self):
        with pytest.raises(ValueError):
            mean_square_window(np.zeros(10), 11 * CFG.dt, CFG.dt)

    def test_sub_sample_window_raises(self):
        with pytest.raises(ValueError):
            mean_square_window(np.zeros(10), 0.4 * CFG.dt, CFG.dt)


class TestImbalances:
    def test_identical_ends_give_zero(self):
        x = np.random.default_rng(1).normal(size=300)
        wf = _wf(x, x)
        assert ms_voltage_imbalance(wf, 2 * TF) == 0.0
        assert ms_current_imbalance(wf, 2 * TF) == 0.0

    def test_swapping_ends_negates_exactly(self):
        rng = np.random.default_rng(2)
        va, vb = rng.normal(size=300), rng.normal(size=300)
        fwd = _wf(va, vb)
        rev = _wf(vb, va)
        assert ms_voltage_imbalance(rev, TF) == -ms_voltage_imbalance(fwd, TF)
        assert ms_current_imbalance(rev, TF) == -ms_current_imbalance(fwd, TF)

    def test_first_fly_time_sign_agreement_on_trials(self):
        # v = z0*i at both ends before the first arrival, so the two
        # statistics are exact scalar multiples within that window
        for seed in range(5):
            wf = run_bep_trial(ScenarioKind.NO_DEFENSE, BitState.HL, CFG, seed,
                               duration=2 * TF, params=FAST)
            stat = attack_stat(wf, TF)
            assert stat.rho_u == pytest.approx(CFG.z0**2 * stat.rho_i, rel=1e-12)

    def test_attack_stat_window_count(self):
        wf = run_bep_trial(ScenarioKind.NO_DEFENSE, BitState.HL, CFG, 1,
                           duration=2 * TF, params=FAST)
        assert attack_stat(wf, TF).window_samples == CFG.dt_divisor


class TestSignsFromCalibration:
    def test_strong_mean_is_informative(self):
        rho = np.full(100, 2.0) + np.random.default_rng(0).normal(0, 0.1, 100)
        sign = signs_from_calibration(rho, -rho, ScenarioKind.NO_DEFENSE, TF)
        assert sign.sign_u == 1 and sign.sign_i == -1

    def test_near_zero_mean_is_uninformative(self):
        rho = np.random.default_rng(1).normal(0, 1.0, 400)
        sign = signs_from_calibration(rho, rho, ScenarioKind.ZERO_START_SLOPE_MATCHED, TF)
        assert sign.sign_u == 0 and sign.sign_i == 0

    def test_needs_two_trials(self):
        with pytest.raises(ValueError):
            signs_from_calibration(np.array([1.0]), np.array([1.0]), ScenarioKind.NO_DEFENSE, TF)


class TestCalibrateSign:
    def test_rejects_small_n_cal(self):
        with pytest.raises(ValueError):
            calibrate_sign(ScenarioKind.NO_DEFENSE, TF, CFG, 10, 1, FAST)

    def test_no_defense_signs_informative_and_equal(self):
        sign = calibrate_sign(ScenarioKind.NO_DEFENSE, TF, CFG, 50, 1, FAST)
        assert sign.sign_u != 0
        assert sign.sign_u == sign.sign_i

    def test_deterministic(self):
        a = calibrate_sign(ScenarioKind.NO_DEFENSE, TF, CFG, 50, 2, FAST)
        b = calibrate_sign(ScenarioKind.NO_DEFENSE, TF, CFG, 50, 2, FAST)
        assert a == b


class TestEveDecide:
    def test_positive_rho_positive_sign(self):
        stat = AttackStat(rho_u=1.0, rho_i=1.0, tau=TF, window_samples=100)
        sign = DecisionSign(1, 1, ScenarioKind.NO_DEFENSE, TF)
        rng = np.random.default_rng(0)
        assert eve_decide(stat, sign, "voltage", rng) == BitState.HL

    def test_negative_rho_positive_sign(self):
        stat = AttackStat(rho_u=-1.0, rho_i=-1.0, tau=TF, window_samples=100)
        sign = DecisionSign(1, 1, ScenarioKind.NO_DEFENSE, TF)
        rng = np.random.default_rng(0)
        assert eve_decide(stat, sign, "current", rng) == BitState.LH

    def test_rejects_unknown_channel(self):
        stat = AttackStat(1.0, 1.0, TF, 100)
        sign = DecisionSign(1, 1, ScenarioKind.NO_DEFENSE, TF)
        with pytest.raises(ValueError):
            eve_decide(stat, sign, "volts", np.random.default_rng(0))

    def test_zero_rho_is_fair_coin(self):
        stat = AttackStat(0.0, 0.0, TF, 100)
        sign = DecisionSign(1, 1, ScenarioKind.NO_DEFENSE, TF)
        rng = np.random.default_rng(7)
        n = 10_000
        hl = sum(eve_decide(stat, sign, "voltage", rng) == BitState.HL for _ in range(n))
        # 0.5 within 3 binomial standard errors
        assert abs(hl / n - 0.5) < 3 * 0.5 / n**0.5

    def test_uninformative_sign_is_fair_coin(self):
        stat = AttackStat(5.0, 5.0, TF, 100)
        sign = DecisionSign(0, 0, ScenarioKind.ZERO_START_SLOPE_MATCHED, TF)
        rng = np.random.default_rng(8)
        n = 10_000
        hl = sum(eve_decide(stat, sign, "voltage", rng) == BitState.HL for _ in range(n))
        assert abs(hl / n - 0.5) < 3 * 0.5 / n**0.5


class TestDecidePair:
    def test_shares_one_coin_when_undecidable(self):
        stat = AttackStat(1.0, 1.0, TF, 100)
        sign = DecisionSign(0, 0, ScenarioKind.ZERO_START_SLOPE_MATCHED, TF)
        rng = np.random.default_rng(9)
        for _ in range(200):
            guess_v, guess_i = decide_pair(stat, sign, rng)
            assert guess_v == guess_i

    def test_informative_signs_use_statistics(self):
        stat = AttackStat(2.0, -3.0, TF, 100)
        sign = DecisionSign(1, 1, ScenarioKind.NO_DEFENSE, TF)
        guess_v, guess_i = decide_pair(stat, sign, np.random.default_rng(0))
        assert guess_v == BitState.HL and guess_i == BitState.LH

    def test_mirrored_trial_flips_decisions(self):
        rng = np.random.default_rng(3)
        va, vb = rng.normal(size=200), rng.normal(size=200)
        sign = DecisionSign(1, 1, ScenarioKind.NO_DEFENSE, TF)
        stat = attack_stat(_wf(va, vb), TF)
        mirrored = attack_stat(_wf(vb, va), TF)
        assert mirrored.rho_u == -stat.rho_u and mirrored.rho_i == -stat.rho_i
        g = decide_pair(stat, sign, np.random.default_rng(0))
        m = decide_pair(mirrored, sign, np.random.default_rng(0))
        assert {g[0], m[0]} == {BitState.HL, BitState.LH}
        assert {g[1], m[1]} == {BitState.HL, BitState.LH}

"""Experiment harness: repeated independent trials, success-rate estimation,
steady-state validation, reproducible seeding.

Seeding scheme: every trial owns the stream
``SeedSequence(master_seed, spawn_key=(scenario, phase, trial_index))`` with
phase 0 for calibration and 1 for evaluation trials, so calibration and
evaluation never share a stream, results do not depend on worker count or
scheduling, and the same master seed reproduces a summary bit for bit.

Each trial is one cold-start transient of the longest requested observation
window; the statistics for shorter windows are prefixes of the same run, so
the per-window estimates of one scenario are correlated across windows but
individually valid.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attack import signs_from_calibration, DecisionSign
from .line import _propagate, run_transient
from .noise import synthesize_record
from .protocol import (
    BitState,
    PhysicalConfig,
    ScenarioKind,
    SearchParams,
    prepare_generators,
    resultant_resistances,
)

__all__ = [
    "ExperimentSummary",
    "SteadyStateReport",
    "run_experiment",
    "standard_error",
    "trial_waveforms",
    "validate_steady_state",
]

_PHASE_CAL = 0
_PHASE_EVAL = 1


def standard_error(p: float, n: int) -> float:
    """Binomial standard error sqrt(p*(1-p)/n) of an estimated probability."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class _TrialResult:
    rho_u: np.ndarray       # per requested window
    rho_i: np.ndarray
    coins: np.ndarray       # one uniform draw per window, shared by both channels
    state: BitState
    loosened: bool


def _run_trial(
    config: PhysicalConfig,
    scenario: ScenarioKind,
    phase: int,
    trial: int,
    master_seed: int,
    tau_steps: tuple[int, ...],
    params: SearchParams,
    random_state: bool,
) -> _TrialResult:
    ss = np.random.SeedSequence(master_seed, spawn_key=(int(scenario), phase, trial))
    drive_seed, state_seed, coin_seed = ss.spawn(3)
    if phase == _PHASE_CAL or not random_state:
        state = BitState.HL
    else:
        state = BitState.HL if np.random.default_rng(state_seed).random() < 0.5 else BitState.LH
    n_steps = max(tau_steps)
    drive_a, drive_b = prepare_generators(scenario, state, config, drive_seed, n_steps, params)
    r_a, r_b = state.resistors(config)
    wf = run_transient(config, drive_a.as_input(), r_a, drive_b.as_input(), r_b, n_steps)
    cum_u = np.cumsum(wf.v_a * wf.v_a - wf.v_b * wf.v_b)
    cum_i = np.cumsum(wf.i_a * wf.i_a - wf.i_b * wf.i_b)
    idx = np.asarray(tau_steps) - 1
    rho_u = cum_u[idx] / np.asarray(tau_steps, dtype=float)
    rho_i = cum_i[idx] / np.asarray(tau_steps, dtype=float)
    coins = np.random.default_rng(coin_seed).random(len(tau_steps))
    return _TrialResult(rho_u, rho_i, coins, state, drive_a.loosened or drive_b.loosened)


def _run_chunk(args) -> list[_TrialResult]:
    config, scenario, phase, lo, hi, master_seed, tau_steps, params, random_state = args
    return [
        _run_trial(config, scenario, phase, t, master_seed, tau_steps, params, random_state)
        for t in range(lo, hi)
    ]


def _collect(
    config: PhysicalConfig,
    scenario: ScenarioKind,
    phase: int,
    n: int,
    master_seed: int,
    tau_steps: tuple[int, ...],
    params: SearchParams,
    random_state: bool,
    jobs: int,
) -> list[_TrialResult]:
    if jobs <= 1 or n < 2 * jobs:
        return _run_chunk(
            (config, scenario, phase, 0, n, master_seed, tau_steps, params, random_state)
        )
    chunk = max(8, math.ceil(n / (4 * jobs)))
    tasks = [
        (config, scenario, phase, lo, min(lo + chunk, n), master_seed, tau_steps, params,
         random_state)
        for lo in range(0, n, chunk)
    ]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_chunk, tasks))
    return [r for part in parts for r in part]


@dataclass
class ExperimentSummary:
    """Per-window attack success estimates for one scenario.

    decisions_v / decisions_i hold one guess-correctness flag per
    (evaluation trial, window) when the experiment was asked to keep them.
    """

    scenario: ScenarioKind
    taus: np.ndarray
    p_ev: np.ndarray
    se_v: np.ndarray
    p_ei: np.ndarray
    se_i: np.ndarray
    n_trials: int
    n_cal: int
    master_seed: int
    loosened_fraction: float
    signs: list[DecisionSign]
    decisions_v: np.ndarray | None = field(default=None, repr=False)
    decisions_i: np.ndarray | None = field(default=None, repr=False)

    def csv_lines(self) -> list[str]:
        lines = ["scenario,tau_s,p_ev,se_v,p_ei,se_i,n,loosened_fraction"]
        for j, tau in enumerate(self.taus):
            lines.append(
                f"{int(self.scenario)},{tau:.6g},{self.p_ev[j]:.4f},{self.se_v[j]:.4f},"
                f"{self.p_ei[j]:.4f},{self.se_i[j]:.4f},{self.n_trials},"
                f"{self.loosened_fraction:.4f}"
            )
        return lines

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.csv_lines()) + "\n")


def trial_waveforms(
    config: PhysicalConfig,
    scenario: ScenarioKind,
    trial: int,
    master_seed: int,
    duration: float,
    params: SearchParams = SearchParams(),
    state: BitState = BitState.HL,
):
    """Waveforms of one evaluation-phase trial, on the same stream derivation
    run_experiment uses (useful for dumping what an experiment actually saw)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(int(scenario), _PHASE_EVAL, trial))
    drive_seed = ss.spawn(3)[0]
    n_steps = int(round(duration / config.dt))
    drive_a, drive_b = prepare_generators(scenario, state, config, drive_seed, n_steps, params)
    r_a, r_b = state.resistors(config)
    return run_transient(config, drive_a.as_input(), r_a, drive_b.as_input(), r_b, n_steps)


def _decide(sign: int, rho: float, coin: float) -> bool:
    """True = guess HL (per calibrated sign; fair coin when undecidable)."""
    if sign == 0 or rho == 0.0:
        return coin < 0.5
    return sign * rho > 0


def run_experiment(
    config: PhysicalConfig,
    scenario: ScenarioKind,
    tau_list,
    n_trials: int,
    master_seed: int,
    n_cal: int = 200,
    params: SearchParams = SearchParams(),
    random_state: bool = False,
    jobs: int = 1,
    keep_decisions: bool = False,
) -> ExperimentSummary:
    """Calibrate Eve's signs, then estimate her per-window success probability.

    Evaluation trials arrange the HL state unless ``random_state`` is set,
    in which case each trial draws HL or LH from its own stream.  A guess is
    correct when it names the trial's actual state; the two channels share
    one fallback coin per (trial, window).
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    taus = np.asarray(list(tau_list), dtype=float)
    if len(taus) == 0:
        raise ValueError("tau_list must be nonempty")
    dt = config.dt
    tau_steps = []
    for tau in taus:
        steps = tau / dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
            raise ValueError(f"tau={tau} is not a positive multiple of dt={dt}")
        tau_steps.append(int(round(steps)))
    tau_steps = tuple(tau_steps)

    cal = _collect(config, scenario, _PHASE_CAL, n_cal, master_seed, tau_steps, params,
                   False, jobs)
    signs = [
        signs_from_calibration(
            np.array([r.rho_u[j] for r in cal]),
            np.array([r.rho_i[j] for r in cal]),
            scenario,
            taus[j],
        )
        for j in range(len(taus))
    ]

    ev = _collect(config, scenario, _PHASE_EVAL, n_trials, master_seed, tau_steps, params,
                  random_state, jobs)
    n_tau = len(taus)
    ok_v = np.zeros((n_trials, n_tau), dtype=bool)
    ok_i = np.zeros((n_trials, n_tau), dtype=bool)
    for t, res in enumerate(ev):
        actual_hl = res.state == BitState.HL
        for j in range(n_tau):
            guess_v = _decide(signs[j].sign_u, res.rho_u[j], res.coins[j])
            guess_i = _decide(signs[j].sign_i, res.rho_i[j], res.coins[j])
            ok_v[t, j] = guess_v == actual_hl
            ok_i[t, j] = guess_i == actual_hl
    p_ev = ok_v.mean(axis=0)
    p_ei = ok_i.mean(axis=0)
    return ExperimentSummary(
        scenario=scenario,
        taus=taus,
        p_ev=p_ev,
        se_v=np.array([standard_error(p, n_trials) for p in p_ev]),
        p_ei=p_ei,
        se_i=np.array([standard_error(p, n_trials) for p in p_ei]),
        n_trials=n_trials,
        n_cal=n_cal,
        master_seed=master_seed,
        loosened_fraction=float(np.mean([r.loosened for r in ev])),
        signs=signs,
        decisions_v=ok_v if keep_decisions else None,
        decisions_i=ok_i if keep_decisions else None,
    )


@dataclass
class SteadyStateReport:
    """Measured long-run wire statistics against the lumped-model identities."""

    duration: float
    n_segments: int
    ms_voltage: float
    ms_voltage_se: float
    ms_voltage_theory: float
    ms_current: float
    ms_current_se: float
    ms_current_theory: float
    hl_lh_voltage_diff: float
    hl_lh_voltage_diff_se: float
    hl_lh_current_diff: float
    hl_lh_current_diff_se: float
    mean_power: float
    mean_power_se: float
    level_tolerance: float
    sigma_limit: float

    @property
    def voltage_ok(self) -> bool:
        return abs(self.ms_voltage / self.ms_voltage_theory - 1.0) <= self.level_tolerance

    @property
    def current_ok(self) -> bool:
        return abs(self.ms_current / self.ms_current_theory - 1.0) <= self.level_tolerance

    @property
    def hl_lh_ok(self) -> bool:
        return (
            abs(self.hl_lh_voltage_diff) <= self.sigma_limit * self.hl_lh_voltage_diff_se
            and abs(self.hl_lh_current_diff) <= self.sigma_limit * self.hl_lh_current_diff_se
        )

    @property
    def power_ok(self) -> bool:
        return abs(self.mean_power) <= self.sigma_limit * self.mean_power_se

    @property
    def all_ok(self) -> bool:
        return self.voltage_ok and self.current_ok and self.hl_lh_ok and self.power_ok

    def render(self) -> str:
        def flag(ok: bool) -> str:
            return "pass" if ok else "FAIL"

        rel_v = self.ms_voltage / self.ms_voltage_theory - 1.0
        rel_i = self.ms_current / self.ms_current_theory - 1.0
        lines = [
            f"steady state over {self.duration:g} s per state ({self.n_segments} segments)",
            f"  wire <v^2>: {self.ms_voltage:.6e} +- {self.ms_voltage_se:.2e} V^2 | "
            f"lumped 4kT*Rp*B = {self.ms_voltage_theory:.6e} V^2 | "
            f"rel dev {rel_v:+.4f} (tol {self.level_tolerance:.2%}) [{flag(self.voltage_ok)}]",
            f"  wire <i^2>: {self.ms_current:.6e} +- {self.ms_current_se:.2e} A^2 | "
            f"lumped 4kT*B/Rs = {self.ms_current_theory:.6e} A^2 | "
            f"rel dev {rel_i:+.4f} (tol {self.level_tolerance:.2%}) [{flag(self.current_ok)}]",
            f"  HL-LH <v^2> diff: {self.hl_lh_voltage_diff:+.3e} "
            f"({abs(self.hl_lh_voltage_diff) / self.hl_lh_voltage_diff_se:.2f} se), "
            f"<i^2> diff: {self.hl_lh_current_diff:+.3e} "
            f"({abs(self.hl_lh_current_diff) / self.hl_lh_current_diff_se:.2f} se) "
            f"[{flag(self.hl_lh_ok)}]",
            f"  mean power flow at A: {self.mean_power:+.3e} +- {self.mean_power_se:.2e} W "
            f"[{flag(self.power_ok)}]",
        ]
        return "\n".join(lines)


def _steady_segments(
    config: PhysicalConfig,
    state: BitState,
    n_seg: int,
    seg_samples: int,
    discard: int,
    chunks_per_seg: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-chunk means of v^2, i^2 (end-averaged) and v*i at A."""
    r_a, r_b = state.resistors(config)
    sig_a, sig_b = config.sigma(r_a), config.sigma(r_b)
    v2, i2, p = [], [], []
    state_key = 0 if state == BitState.HL else 1
    for k in range(n_seg):
        ss = np.random.SeedSequence(seed, spawn_key=(90, state_key, k))
        seed_a, seed_b = ss.spawn(2)
        rec_a = synthesize_record(seed_a, seg_samples, config.dt, config.bandwidth, sig_a)
        rec_b = synthesize_record(seed_b, seg_samples, config.dt, config.bandwidth, sig_b)
        v_a, v_b, i_a, i_b = _propagate(
            rec_a.samples, rec_b.samples, r_a, r_b, config.z0, config.dt_divisor
        )
        kept = seg_samples - discard
        chunk = kept // chunks_per_seg
        for c in range(chunks_per_seg):
            sl = slice(discard + c * chunk, discard + (c + 1) * chunk)
            v2.append(0.5 * (np.mean(v_a[sl] ** 2) + np.mean(v_b[sl] ** 2)))
            i2.append(0.5 * (np.mean(i_a[sl] ** 2) + np.mean(i_b[sl] ** 2)))
            p.append(np.mean(v_a[sl] * i_a[sl]))
    return np.array(v2), np.array(i2), np.array(p)


def validate_steady_state(
    config: PhysicalConfig,
    duration: float,
    seed: int,
    level_tolerance: float = 0.02,
    sigma_limit: float = 3.0,
) -> SteadyStateReport:
    """Long-run check of the passive-security identities.

    Runs ``duration`` seconds of equilibrated HL exchange (and the same of
    LH) in independent cold-start segments, discarding the settle window of
    each, and compares the wire mean squares against the lumped-model levels
    4kT*Rp*B and 4kT*B/Rs, the HL-LH difference against zero, and the mean
    power flow against zero.
    """
    min_duration = 1000.0 / config.bandwidth
    if duration < min_duration:
        raise ValueError(
            f"duration {duration} s is below the minimum {min_duration} s (1000/B)"
        )
    gamma_prod = ((config.r_h - config.z0) / (config.r_h + config.z0)) * (
        (config.r_l - config.z0) / (config.r_l + config.z0)
    )
    settle = 2.0 * config.fly_time / max(1e-12, 1.0 - abs(gamma_prod))
    seg_samples = 2**21
    seg_duration = seg_samples * config.dt
    n_seg = max(1, round(duration / seg_duration))
    discard = min(seg_samples // 4, int(round(30.0 * settle / config.dt)))
    chunks_per_seg = 4 if n_seg < 8 else 1

    v2_hl, i2_hl, p_hl = _steady_segments(
        config, BitState.HL, n_seg, seg_samples, discard, chunks_per_seg, seed
    )
    v2_lh, i2_lh, _ = _steady_segments(
        config, BitState.LH, n_seg, seg_samples, discard, chunks_per_seg, seed
    )

    def mean_se(x: np.ndarray) -> tuple[float, float]:
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(len(x)))

    v2, v2_se = mean_se(v2_hl)
    i2, i2_se = mean_se(i2_hl)
    power, power_se = mean_se(p_hl)
    v2l, v2l_se = mean_se(v2_lh)
    i2l, i2l_se = mean_se(i2_lh)
    r_p, r_s = resultant_resistances(config.r_h, config.r_l)
    scale = 4.0 * config.boltzmann * config.temperature * config.bandwidth
    return SteadyStateReport(
        duration=n_seg * seg_duration,
        n_segments=n_seg,
        ms_voltage=v2,
        ms_voltage_se=v2_se,
        ms_voltage_theory=scale * r_p,
        ms_current=i2,
        ms_current_se=i2_se,
        ms_current_theory=scale / r_s,
        hl_lh_voltage_diff=v2 - v2l,
        hl_lh_voltage_diff_se=math.hypot(v2_se, v2l_se),
        hl_lh_current_diff=i2 - i2l,
        hl_lh_current_diff_se=math.hypot(i2_se, i2l_se),
        mean_power=power,
        mean_power_se=power_se,
        level_tolerance=level_tolerance,
        sigma_limit=sigma_limit,
    )

"""Eavesdropper's transient statistics and calibrated decision rule.

Eve monitors both cable ends and compares windowed mean squares: the
decision statistic for a window of length tau is the mean square at Alice's
end minus the mean square at Bob's end, computed separately for voltage and
current.  The averaging window is half-open, [0, tau), so at tau equal to
one fly time the first arriving wave sample is excluded and the cold-start
proportionality v = z0*i makes the voltage and current statistics exact
scalar multiples of each other.

Which sign of the statistic indicates HL is not hard-coded: with kiloohm
resistors on a 50-ohm cable the H side *launches* the smaller wave, and for
longer windows the ordering flips again as arrivals mix in.  Eve, who knows
every public parameter, instead calibrates the sign on labeled HL rehearsal
runs; a sign whose calibration mean is within two standard errors of zero
is recorded as uninformative and forces a fair coin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .line import TrialWaveforms
from .protocol import BitState, PhysicalConfig, ScenarioKind, SearchParams, run_bep_trial

__all__ = [
    "AttackStat",
    "DecisionSign",
    "mean_square_window",
    "ms_voltage_imbalance",
    "ms_current_imbalance",
    "attack_stat",
    "calibrate_sign",
    "eve_decide",
    "decide_pair",
]


def _window_samples(tau: float, dt: float) -> int:
    w = int(round(tau / dt))
    if w < 1:
        raise ValueError(f"window tau={tau} is shorter than one sample at dt={dt}")
    return w


def mean_square_window(series: np.ndarray, tau: float, dt: float) -> float:
    """Arithmetic mean of squared samples over the half-open window [0, tau)."""
    w = _window_samples(tau, dt)
    if w > len(series):
        raise ValueError(f"window of {w} samples exceeds series length {len(series)}")
    seg = np.asarray(series[:w])
    return float(np.mean(seg * seg))


def ms_voltage_imbalance(waveforms: TrialWaveforms, tau: float) -> float:
    """Mean-square cable voltage at Alice's end minus Bob's end over [0, tau)."""
    dt = waveforms.dt
    return mean_square_window(waveforms.v_a, tau, dt) - mean_square_window(waveforms.v_b, tau, dt)


def ms_current_imbalance(waveforms: TrialWaveforms, tau: float) -> float:
    """Mean-square cable current at Alice's end minus Bob's end over [0, tau)."""
    dt = waveforms.dt
    return mean_square_window(waveforms.i_a, tau, dt) - mean_square_window(waveforms.i_b, tau, dt)


@dataclass(frozen=True)
class AttackStat:
    """Eve's windowed statistics for one trial and one observation window."""

    rho_u: float
    rho_i: float
    tau: float
    window_samples: int


def attack_stat(waveforms: TrialWaveforms, tau: float) -> AttackStat:
    return AttackStat(
        ms_voltage_imbalance(waveforms, tau),
        ms_current_imbalance(waveforms, tau),
        tau,
        _window_samples(tau, waveforms.dt),
    )


@dataclass(frozen=True)
class DecisionSign:
    """Calibrated decision orientation for one (scenario, tau).

    sign_u / sign_i are +1 or -1 when the labeled-run calibration was
    conclusive and 0 when uninformative (|mean| below two standard errors),
    which forces a fair-coin guess downstream.
    """

    sign_u: int
    sign_i: int
    scenario: ScenarioKind
    tau: float


def signs_from_calibration(
    rho_u: np.ndarray, rho_i: np.ndarray, scenario: ScenarioKind, tau: float
) -> DecisionSign:
    """Reduce labeled-HL calibration statistics to a DecisionSign."""
    out = []
    for arr in (np.asarray(rho_u, dtype=float), np.asarray(rho_i, dtype=float)):
        if len(arr) < 2:
            raise ValueError("calibration needs at least 2 trials")
        mean = float(np.mean(arr))
        se = float(np.std(arr, ddof=1)) / math.sqrt(len(arr))
        out.append(0 if abs(mean) < 2.0 * se else (1 if mean > 0 else -1))
    return DecisionSign(out[0], out[1], scenario, tau)


def calibrate_sign(
    scenario: ScenarioKind,
    tau: float,
    config: PhysicalConfig,
    n_cal: int,
    seed: int | np.random.SeedSequence,
    params: SearchParams = SearchParams(),
) -> DecisionSign:
    """Run n_cal labeled HL rehearsal trials and calibrate the decision signs.

    The calibration streams are children of ``seed`` and must be kept
    disjoint from evaluation streams by the caller.
    """
    if n_cal < 50:
        raise ValueError(f"calibration needs n_cal >= 50, got {n_cal}")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rho_u = np.empty(n_cal)
    rho_i = np.empty(n_cal)
    for k, child in enumerate(seed.spawn(n_cal)):
        wf = run_bep_trial(scenario, BitState.HL, config, child, tau, params)
        rho_u[k] = ms_voltage_imbalance(wf, tau)
        rho_i[k] = ms_current_imbalance(wf, tau)
    return signs_from_calibration(rho_u, rho_i, scenario, tau)


def eve_decide(
    stat: AttackStat,
    sign: DecisionSign,
    channel: str,
    rng: np.random.Generator,
) -> BitState:
    """Guess HL or LH from one channel's statistic.

    Guess HL iff sign * rho > 0; an uninformative sign or an exactly zero
    statistic falls back to a fair coin.
    """
    if channel == "voltage":
        s, rho = sign.sign_u, stat.rho_u
    elif channel == "current":
        s, rho = sign.sign_i, stat.rho_i
    else:
        raise ValueError(f"channel must be 'voltage' or 'current', got {channel!r}")
    if s == 0 or rho == 0.0:
        return BitState.HL if rng.random() < 0.5 else BitState.LH
    return BitState.HL if s * rho > 0 else BitState.LH


def decide_pair(
    stat: AttackStat, sign: DecisionSign, rng: np.random.Generator
) -> tuple[BitState, BitState]:
    """Voltage and current guesses for one trial, sharing one fallback coin.

    Eve is a single agent: when neither statistic is usable she flips one
    coin for the bit, not one per channel.  Inside the first fly time this
    keeps her voltage and current guesses identical in every trial, whether
    the signs are informative (rho_u and rho_i are then exact scalar
    multiples) or not.
    """
    coin = BitState.HL if rng.random() < 0.5 else BitState.LH
    if sign.sign_u == 0 or stat.rho_u == 0.0:
        guess_v = coin
    else:
        guess_v = BitState.HL if sign.sign_u * stat.rho_u > 0 else BitState.LH
    if sign.sign_i == 0 or stat.rho_i == 0.0:
        guess_i = coin
    else:
        guess_i = BitState.HL if sign.sign_i * stat.rho_i > 0 else BitState.LH
    return guess_v, guess_i

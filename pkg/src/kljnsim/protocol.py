"""KLJN bit-exchange protocol: resistor states, start-up scenarios, defense targets.

One bit exchange period (BEP) connects a randomly chosen resistor (R_H or
R_L) at each end of the cable for the whole period.  The HL and LH joint
states are the secure ones; HH and LL are discarded.  The four start-up
scenarios differ only in how each party picks the instant at which its
pre-generated noise record is connected:

  1 NO_DEFENSE                random interior sample (abrupt random-amplitude start)
  2 ZERO_START_ONLY           earliest near-zero sample, slope unconstrained
  3 RATIO_START_NONZERO       nonzero public start value and slope, both targets
                              scaled by the slope ratio on the H side
  4 ZERO_START_SLOPE_MATCHED  near-zero sample with slope matched to the public
                              targets (the full defense)

The public slope targets are slope_rms(B, sigma_L) for the L party and
slope_ratio(...) times that for the H party, which makes the cable end
voltages ramp identically at both ends during the first fly time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .line import TrialWaveforms, run_transient
from .noise import (
    BOLTZMANN,
    NoiseRecord,
    StartPoint,
    find_start_point,
    slope_rms,
    synthesize_record,
)

__all__ = [
    "PhysicalConfig",
    "BitState",
    "ScenarioKind",
    "SearchParams",
    "GeneratorDrive",
    "resultant_resistances",
    "slope_ratio",
    "steady_state_levels",
    "interpret_bep",
    "prepare_generators",
    "run_bep_trial",
]


@dataclass(frozen=True)
class PhysicalConfig:
    """Physical parameters of the exchanger and its simulation grid.

    Defaults reproduce the demonstration setup: R_H = 11 kOhm, R_L = 2 kOhm,
    Z0 = 50 Ohm, T = 7e15 K, B = 5 kHz, fly time 1e-5 s, dt = fly_time/100.
    """

    r_h: float = 11e3
    r_l: float = 2e3
    z0: float = 50.0
    temperature: float = 7e15
    bandwidth: float = 5e3
    fly_time: float = 1e-5
    dt_divisor: int = 100
    boltzmann: float = BOLTZMANN

    def __post_init__(self) -> None:
        if not self.r_h > self.r_l > 0:
            raise ValueError(f"need r_h > r_l > 0, got r_h={self.r_h}, r_l={self.r_l}")
        for name in ("z0", "temperature", "bandwidth", "fly_time"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if int(self.dt_divisor) != self.dt_divisor or self.dt_divisor < 10:
            raise ValueError(f"dt_divisor must be an integer >= 10, got {self.dt_divisor}")
        if self.boltzmann <= 0:
            raise ValueError("boltzmann must be positive")

    @property
    def dt(self) -> float:
        return self.fly_time / self.dt_divisor

    def sigma(self, resistance: float) -> float:
        """Generator RMS for a resistor at the configured temperature and band."""
        return math.sqrt(4.0 * self.boltzmann * self.temperature * resistance * self.bandwidth)


class BitState(enum.Enum):
    """Joint resistor choice (Alice's, Bob's)."""

    HL = "HL"
    LH = "LH"
    HH = "HH"
    LL = "LL"

    @property
    def is_secure(self) -> bool:
        return self in (BitState.HL, BitState.LH)

    def resistors(self, config: PhysicalConfig) -> tuple[float, float]:
        """(Alice's, Bob's) resistance for this state."""
        pick = {"H": config.r_h, "L": config.r_l}
        return pick[self.value[0]], pick[self.value[1]]

    @property
    def mirrored(self) -> "BitState":
        return BitState(self.value[::-1])


class ScenarioKind(enum.IntEnum):
    """The four start-up scenarios, in demonstration order."""

    NO_DEFENSE = 1
    ZERO_START_ONLY = 2
    RATIO_START_NONZERO = 3
    ZERO_START_SLOPE_MATCHED = 4


def resultant_resistances(r_h: float, r_l: float) -> tuple[float, float]:
    """Parallel and serial resultant of the two connected resistors."""
    if r_h <= 0 or r_l <= 0:
        raise ValueError(f"resistances must be positive, got ({r_h}, {r_l})")
    return r_h * r_l / (r_h + r_l), r_h + r_l


def slope_ratio(r_h: float, r_l: float, z0: float) -> float:
    """Public starting-slope ratio (r_h + z0)/(r_l + z0) between H and L parties."""
    if r_h <= 0 or r_l <= 0 or z0 <= 0:
        raise ValueError(f"inputs must be positive, got ({r_h}, {r_l}, {z0})")
    return (r_h + z0) / (r_l + z0)


def steady_state_levels(config: PhysicalConfig) -> dict[BitState, float]:
    """Lumped-model mean-square wire voltage 4kT*R_p*B for each joint state."""
    levels = {}
    for state in BitState:
        r_a, r_b = state.resistors(config)
        r_p, _ = resultant_resistances(r_a, r_b)
        levels[state] = 4.0 * config.boltzmann * config.temperature * r_p * config.bandwidth
    return levels


def interpret_bep(state: BitState, hl_bit: int = 1) -> int | None:
    """Map a joint state to the shared bit; HH and LL are discarded (None)."""
    if hl_bit not in (0, 1):
        raise ValueError("hl_bit must be 0 or 1")
    if state == BitState.HL:
        return hl_bit
    if state == BitState.LH:
        return 1 - hl_bit
    return None


@dataclass(frozen=True)
class SearchParams:
    """Defense search settings.

    zero_value_tol   near-zero window for scenarios 2 and 4, relative to the
                     record RMS
    slope_tol        relative slope window around the public target
    s3_value_tol     value window for scenario 3, relative to the record RMS
    s3_value_fraction  public L-side start value, as a fraction of sigma_L
    max_regen        fresh records tried before tolerances start doubling
    record_len       samples per synthesized record
    """

    zero_value_tol: float = 1e-3
    slope_tol: float = 1e-2
    s3_value_tol: float = 1e-3
    s3_value_fraction: float = 0.5
    max_regen: int = 10
    record_len: int = 2**20

    def __post_init__(self) -> None:
        if min(self.zero_value_tol, self.slope_tol, self.s3_value_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.s3_value_fraction <= 0:
            raise ValueError("s3_value_fraction must be positive")
        if self.max_regen < 0:
            raise ValueError("max_regen must be non-negative")
        if self.record_len < 2:
            raise ValueError("record_len must be >= 2")


@dataclass(frozen=True)
class GeneratorDrive:
    """A synthesized record plus the start point it is played back from."""

    record: NoiseRecord
    start: StartPoint
    loosened: bool = False
    attempts: int = 1

    def as_input(self) -> tuple[NoiseRecord, StartPoint]:
        return self.record, self.start


@dataclass(frozen=True)
class _PartyTargets:
    sigma: float
    target_value: float | None  # None: random interior start
    value_tol: float
    target_slope: float | None
    slope_tol: float


def _scenario_targets(
    scenario: ScenarioKind, state: BitState, config: PhysicalConfig, params: SearchParams
) -> tuple[_PartyTargets, _PartyTargets]:
    sigma_l = config.sigma(config.r_l)
    m_l = slope_rms(config.bandwidth, sigma_l)
    m_ratio = slope_ratio(config.r_h, config.r_l, config.z0)
    v_l = params.s3_value_fraction * sigma_l

    def for_resistor(r: float) -> _PartyTargets:
        sigma = config.sigma(r)
        high = r == config.r_h
        scale = m_ratio if high else 1.0
        if scenario == ScenarioKind.NO_DEFENSE:
            return _PartyTargets(sigma, None, math.nan, None, math.nan)
        if scenario == ScenarioKind.ZERO_START_ONLY:
            return _PartyTargets(sigma, 0.0, params.zero_value_tol, None, math.inf)
        if scenario == ScenarioKind.RATIO_START_NONZERO:
            return _PartyTargets(sigma, scale * v_l, params.s3_value_tol, scale * m_l, params.slope_tol)
        return _PartyTargets(sigma, 0.0, params.zero_value_tol, scale * m_l, params.slope_tol)

    r_a, r_b = state.resistors(config)
    return for_resistor(r_a), for_resistor(r_b)


def _prepare_party(
    targets: _PartyTargets,
    config: PhysicalConfig,
    params: SearchParams,
    seed: np.random.SeedSequence,
    n_steps: int,
    tag: str,
) -> GeneratorDrive:
    """Synthesize records until a qualifying start point is found.

    Up to max_regen fresh records are tried at the base tolerances; after
    that the slope tolerance (and the value tolerance, for value-targeted
    searches wider than the zero window) doubles every further max_regen
    attempts, so the search always terminates and the achieved tolerances
    stay auditable in the StartPoint.
    """
    n = params.record_len
    max_start = n - 1 - n_steps
    if max_start < 1:
        raise ValueError(f"record_len {n} too short for {n_steps} transient steps")
    value_tol = targets.value_tol
    slope_tol = targets.slope_tol
    attempt = 0
    loosened = False
    while True:
        child = seed.spawn(1)[0]
        record = synthesize_record(
            child, n, config.dt, config.bandwidth, targets.sigma,
            seed_tag=f"{tag}/a{attempt}",
        )
        if targets.target_value is None:
            rng = np.random.default_rng(child.spawn(1)[0])
            index = int(rng.integers(1, max_start + 1))
            s = record.samples
            slope = (s[index + 1] - s[index - 1]) / (2.0 * record.dt)
            start = StartPoint(index, float(s[index]), float(slope), math.nan, math.nan)
            return GeneratorDrive(record, start, False, attempt + 1)
        start = find_start_point(
            record,
            targets.target_value,
            value_tol,
            targets.target_slope,
            slope_tol,
            allow_negation=True,
            max_index=max_start,
        )
        attempt += 1
        if start is not None:
            return GeneratorDrive(record, start, loosened, attempt)
        if attempt % params.max_regen == 0:
            loosened = True
            slope_tol *= 2.0
            if targets.target_value != 0.0:
                value_tol *= 2.0


def prepare_generators(
    scenario: ScenarioKind,
    state: BitState,
    config: PhysicalConfig,
    seed: int | np.random.SeedSequence,
    n_steps: int,
    params: SearchParams = SearchParams(),
) -> tuple[GeneratorDrive, GeneratorDrive]:
    """Build both parties' generator drives for one bit exchange period.

    Each record is synthesized at the Johnson RMS of the party's chosen
    resistor; the start point is selected per the scenario's rule.  The two
    parties use independent child streams of ``seed``, so swapping the state
    swaps which party receives the H-scaled targets.
    """
    if not state.is_secure:
        raise ValueError(f"bit exchange runs only in secure states, got {state.value}")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    t_a, t_b = _scenario_targets(scenario, state, config, params)
    seed_a, seed_b = seed.spawn(2)
    drive_a = _prepare_party(t_a, config, params, seed_a, n_steps, f"s{int(scenario)}/alice")
    drive_b = _prepare_party(t_b, config, params, seed_b, n_steps, f"s{int(scenario)}/bob")
    return drive_a, drive_b


def run_bep_trial(
    scenario: ScenarioKind,
    state: BitState,
    config: PhysicalConfig,
    seed: int | np.random.SeedSequence,
    duration: float,
    params: SearchParams = SearchParams(),
) -> TrialWaveforms:
    """One bit-exchange transient: prepare generators, drive a cold line."""
    if duration < config.dt:
        raise ValueError(f"duration {duration} shorter than one timestep {config.dt}")
    n_steps = int(round(duration / config.dt))
    drive_a, drive_b = prepare_generators(scenario, state, config, seed, n_steps, params)
    r_a, r_b = state.resistors(config)
    return run_transient(config, drive_a.as_input(), r_a, drive_b.as_input(), r_b, n_steps)

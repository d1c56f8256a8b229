"""Lossless transmission line with resistive Thevenin terminations.

Time-domain traveling-wave solver (method of characteristics): the line is
an ideal delay of one fly time in each direction with wave impedance z0.
Each end holds a Thevenin source (generator voltage in series with the
chosen resistor).  Waves are stored in the doubled-amplitude convention,
i.e. a buffer entry is v + z0*i of the emitting end, which is the
open-circuit voltage the wave presents on arrival.

Per end, with arriving wave b:

    i = (u - b) / (r + z0)          current from the termination into the cable
    v = z0*i + b                    cable end voltage
    out = v + z0*i                  wave sent toward the far end

``v = z0*i + b`` is used verbatim so that during the first fly time after a
cold start (b = 0) the proportionality v = z0*i holds bit-for-bit, which
downstream makes voltage- and current-based eavesdropper decisions agree
exactly for observation windows inside the first fly time.

``run_transient`` evaluates the same recurrence in blocks of one fly time:
every sample in a block depends only on waves emitted at least one full
delay earlier, so each block is computable with vectorized elementwise
operations that perform the identical IEEE arithmetic as the scalar update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .noise import NoiseRecord, StartPoint

__all__ = [
    "EndState",
    "TransmissionLine",
    "TrialWaveforms",
    "reflection_coefficient",
    "lattice_step_response",
    "run_transient",
]


def reflection_coefficient(resistance: float, z0: float) -> float:
    """Voltage reflection coefficient (R - z0)/(R + z0) of a resistive end."""
    if z0 <= 0:
        raise ValueError(f"characteristic impedance must be positive, got {z0}")
    if resistance < 0:
        raise ValueError(f"termination resistance must be non-negative, got {resistance}")
    return (resistance - z0) / (resistance + z0)


@dataclass
class EndState:
    """Cable end voltage and the current flowing from the termination into the cable."""

    v: float
    i: float


@dataclass
class TransmissionLine:
    """Traveling-wave state of one cable: two direction-specific delay buffers.

    ``delay`` must be an exact integer multiple of ``dt``; buffers start at
    zero (idle cable).  One instance is owned by exactly one trial.
    """

    z0: float
    delay: float
    dt: float
    delay_steps: int = field(init=False)
    _buf_ab: np.ndarray = field(init=False, repr=False)
    _buf_ba: np.ndarray = field(init=False, repr=False)
    _cursor: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.z0 <= 0:
            raise ValueError(f"z0 must be positive, got {self.z0}")
        if self.delay <= 0 or self.dt <= 0:
            raise ValueError("delay and dt must be positive")
        steps = self.delay / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps or round(steps) < 1:
            raise ValueError(
                f"delay/dt = {steps} is not a positive integer; pick dt that divides the fly time"
            )
        self.delay_steps = int(round(steps))
        self.reset()

    def reset(self) -> None:
        """Return to the idle cold-cable state."""
        self._buf_ab = np.zeros(self.delay_steps)
        self._buf_ba = np.zeros(self.delay_steps)
        self._cursor = 0

    def step(self, u_a: float, r_a: float, u_b: float, r_b: float) -> tuple[EndState, EndState]:
        """Advance one timestep with the given generator voltages and resistors."""
        b_a = self._buf_ba[self._cursor]
        b_b = self._buf_ab[self._cursor]
        i_a = (u_a - b_a) / (r_a + self.z0)
        v_a = self.z0 * i_a + b_a
        i_b = (u_b - b_b) / (r_b + self.z0)
        v_b = self.z0 * i_b + b_b
        self._buf_ab[self._cursor] = v_a + self.z0 * i_a
        self._buf_ba[self._cursor] = v_b + self.z0 * i_b
        self._cursor = (self._cursor + 1) % self.delay_steps
        return EndState(v_a, i_a), EndState(v_b, i_b)


@dataclass
class TrialWaveforms:
    """Sampled generator drives and cable end voltages/currents of one trial."""

    dt: float
    ugen_a: np.ndarray
    ugen_b: np.ndarray
    v_a: np.ndarray
    v_b: np.ndarray
    i_a: np.ndarray
    i_b: np.ndarray

    def __len__(self) -> int:
        return len(self.v_a)

    @property
    def time(self) -> np.ndarray:
        return np.arange(len(self.v_a)) * self.dt

    def write_tsv(self, path) -> None:
        """Dump as TSV: time_s, ugen_a, ugen_b, v_a, v_b, i_a, i_b (9 significant digits)."""
        cols = np.column_stack(
            [self.time, self.ugen_a, self.ugen_b, self.v_a, self.v_b, self.i_a, self.i_b]
        )
        header = "time_s\tugen_a\tugen_b\tv_a\tv_b\ti_a\ti_b"
        np.savetxt(path, cols, fmt="%.9g", delimiter="\t", header=header, comments="")


def _propagate(
    u_a: np.ndarray,
    u_b: np.ndarray,
    r_a: float,
    r_b: float,
    z0: float,
    delay_steps: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Blocked traveling-wave recurrence from a cold start.

    Bitwise identical to stepping a TransmissionLine sample by sample.
    """
    n = len(u_a)
    v_a = np.empty(n)
    v_b = np.empty(n)
    i_a = np.empty(n)
    i_b = np.empty(n)
    out_a = np.empty(n)
    out_b = np.empty(n)
    div_a = r_a + z0
    div_b = r_b + z0
    idle = np.zeros(delay_steps)
    for start in range(0, n, delay_steps):
        end = min(start + delay_steps, n)
        if start >= delay_steps:
            arr_a = out_b[start - delay_steps : end - delay_steps]
            arr_b = out_a[start - delay_steps : end - delay_steps]
        else:
            arr_a = idle[: end - start]
            arr_b = arr_a
        ia = (u_a[start:end] - arr_a) / div_a
        va = z0 * ia + arr_a
        ib = (u_b[start:end] - arr_b) / div_b
        vb = z0 * ib + arr_b
        out_a[start:end] = va + z0 * ia
        out_b[start:end] = vb + z0 * ib
        v_a[start:end] = va
        i_a[start:end] = ia
        v_b[start:end] = vb
        i_b[start:end] = ib
    return v_a, v_b, i_a, i_b


def _drive_samples(gen: tuple[NoiseRecord, StartPoint], n_steps: int) -> np.ndarray:
    record, start = gen
    if start.index + n_steps > len(record):
        raise ValueError(
            f"record exhausted: start index {start.index} + {n_steps} steps "
            f"exceeds record length {len(record)}"
        )
    seg = record.samples[start.index : start.index + n_steps]
    return -seg if start.negate else seg


def run_transient(
    config,
    gen_a: tuple[NoiseRecord, StartPoint],
    r_a: float,
    gen_b: tuple[NoiseRecord, StartPoint],
    r_b: float,
    n_steps: int,
) -> TrialWaveforms:
    """Drive a cold line for n_steps with both generator records.

    The cable is idle before step 0; the generators connect abruptly at
    step 0 with whatever value the record holds at the start point, so a
    nonzero start value launches a genuine step front.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    drive_a = _drive_samples(gen_a, n_steps)
    drive_b = _drive_samples(gen_b, n_steps)
    dt = config.dt
    for gen in (gen_a, gen_b):
        if abs(gen[0].dt - dt) > 1e-12 * dt:
            raise ValueError(f"record dt {gen[0].dt} does not match simulation dt {dt}")
    v_a, v_b, i_a, i_b = _propagate(drive_a, drive_b, r_a, r_b, config.z0, config.dt_divisor)
    return TrialWaveforms(dt, drive_a, drive_b, v_a, v_b, i_a, i_b)


def lattice_step_response(
    u: float,
    r_src: float,
    r_load: float,
    z0: float,
    fly_time: float,
    t: float,
    rel_guard: float = 1e-9,
) -> tuple[float, float]:
    """Closed-form step response of the terminated line (bounce-diagram sum).

    A step of height ``u`` is applied at the source end at t = 0.  The
    launched wave u*z0/(r_src + z0) bounces between the ends, each arrival
    multiplying by the local reflection coefficient; the end voltages are
    piecewise constant between arrivals.  Queries within ``rel_guard`` of an
    arrival instant k*fly_time are rejected because the value is
    discontinuous there.

    Returns (v_src, v_load).  Used as an independent oracle for the
    time-stepped engine.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if fly_time <= 0:
        raise ValueError("fly_time must be positive")
    k_near = round(t / fly_time)
    if k_near > 0 and abs(t - k_near * fly_time) <= rel_guard * fly_time:
        raise ValueError(
            f"t = {t} is at (or too close to) the arrival instant {k_near}*fly_time; "
            "the step response is discontinuous there"
        )
    gamma_src = reflection_coefficient(r_src, z0)
    gamma_load = reflection_coefficient(r_load, z0)
    launch = u * z0 / (r_src + z0)
    # source end: arrivals at 2*fly_time, 4*fly_time, ...
    n_round_trips = int(t // (2.0 * fly_time))
    v_src = launch
    incident = launch
    for _ in range(n_round_trips):
        incident *= gamma_load
        v_src += incident * (1.0 + gamma_src)
        incident *= gamma_src
    # load end: arrivals at fly_time, 3*fly_time, ...
    if t < fly_time:
        v_load = 0.0
    else:
        n_arrivals = int((t - fly_time) // (2.0 * fly_time)) + 1
        v_load = 0.0
        incident = launch
        for _ in range(n_arrivals):
            v_load += incident * (1.0 + gamma_load)
            incident *= gamma_load * gamma_src
    return v_src, v_load

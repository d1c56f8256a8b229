"""Band-limited Gaussian noise synthesis and start-point search.

The voltage generators of both communicating parties are modelled as
band-limited white Gaussian noise scaled to the Johnson-Nyquist RMS of the
connected resistor.  Records are synthesized in the frequency domain:
independent complex Gaussian coefficients on the in-band bins, zero
everywhere else, inverse real FFT.  This makes the out-of-band spectral
power zero by construction at any simulation timestep.

Each record is normalized so its *sample* RMS equals the requested target
exactly.  With the default parameters a record holds only ~524 in-band
frequency bins, so an ensemble-normalized record would show a ~2% RMS
spread between seeds; the exchange protocol (and its tolerance checks)
assume both parties know the generator amplitudes exactly.

The start-point search implements the defense: scan a pre-generated record
for the earliest sample matching a target value and target slope within
relative tolerances, optionally also accepting the sign-flipped target pair
(negating a zero-mean Gaussian record yields an equally valid sample path).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import Boltzmann

__all__ = [
    "BOLTZMANN",
    "NoiseRecord",
    "StartPoint",
    "johnson_rms",
    "slope_rms",
    "synthesize_record",
    "estimate_slope",
    "find_start_point",
]

BOLTZMANN = Boltzmann  # 1.380649e-23 J/K, exact SI value


def johnson_rms(temperature: float, resistance: float, bandwidth: float) -> float:
    """RMS open-circuit voltage of a resistor's thermal noise over a flat band.

    The one-sided spectral density of a resistor at temperature T is 4kTR,
    so over a band of width B the mean-square voltage is 4kTRB.

    Raises ValueError for non-positive inputs.
    """
    if temperature <= 0 or resistance <= 0 or bandwidth <= 0:
        raise ValueError(
            f"temperature, resistance and bandwidth must be positive, got "
            f"({temperature}, {resistance}, {bandwidth})"
        )
    return math.sqrt(4.0 * BOLTZMANN * temperature * resistance * bandwidth)


def slope_rms(bandwidth: float, sigma: float) -> float:
    """RMS time-derivative of flat-band noise of band B and RMS sigma.

    The second spectral moment of a flat band (0, B] gives
    <x'^2> = sigma^2 * (2*pi*B)^2 / 3.
    """
    if bandwidth <= 0 or sigma < 0:
        raise ValueError(f"need bandwidth > 0 and sigma >= 0, got ({bandwidth}, {sigma})")
    return sigma * 2.0 * math.pi * bandwidth / math.sqrt(3.0)


@dataclass(frozen=True)
class NoiseRecord:
    """A sampled band-limited Gaussian generator voltage.

    samples     sampled voltage record (V); sample RMS equals target_rms
    dt          sampling interval (s)
    bandwidth   upper band edge of the flat spectrum (Hz)
    target_rms  generator RMS the record is scaled to (V)
    seed_tag    identifier of the RNG stream that produced the record
    """

    samples: np.ndarray
    dt: float
    bandwidth: float
    target_rms: float
    seed_tag: str = ""

    def __post_init__(self) -> None:
        if len(self.samples) < 2:
            raise ValueError("a noise record needs at least 2 samples")
        if self.dt <= 0 or self.bandwidth <= 0:
            raise ValueError("dt and bandwidth must be positive")
        if self.target_rms < 0:
            raise ValueError("target_rms must be non-negative")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt

    def write_tsv(self, path) -> None:
        """Dump as two-column TSV: time in s, voltage in V, 9 significant digits."""
        t = np.arange(len(self.samples)) * self.dt
        np.savetxt(path, np.column_stack([t, self.samples]), fmt="%.9g", delimiter="\t")


@dataclass(frozen=True)
class StartPoint:
    """Where (and how) a record is entered when a bit exchange period starts.

    value and slope describe the record *as driven*: if ``negate`` is set the
    whole record is to be played back sign-flipped and value/slope already
    refer to the flipped record.  The achieved tolerances are recorded, not
    assumed: achieved_value_tol is |value - target| relative to the record
    RMS, achieved_slope_tol is |slope/target - 1| (NaN for slope-free
    searches and for random starts).
    """

    index: int
    value: float
    slope: float
    achieved_value_tol: float
    achieved_slope_tol: float
    negate: bool = False


def synthesize_record(
    seed: int | np.random.SeedSequence | np.random.Generator,
    n: int,
    dt: float,
    bandwidth: float,
    sigma: float,
    seed_tag: str = "",
) -> NoiseRecord:
    """Synthesize a stationary Gaussian record with a flat spectrum on (0, B].

    Frequency-domain construction: bins k = 1 .. floor(B*n*dt) receive
    independent complex unit Gaussians, all other bins (including DC and
    everything above B) stay exactly zero; an inverse real FFT produces the
    samples, which are then scaled so the sample RMS equals ``sigma``.

    Deterministic given the seed.  Requires n >= 2, at least ten in-band
    bins (n*dt*B >= 10) and B below the Nyquist frequency 1/(2*dt).
    """
    if n < 2:
        raise ValueError(f"record length must be >= 2, got {n}")
    if dt <= 0 or bandwidth <= 0:
        raise ValueError("dt and bandwidth must be positive")
    if bandwidth >= 0.5 / dt:
        raise ValueError(
            f"bandwidth {bandwidth} Hz is not below the Nyquist frequency "
            f"{0.5 / dt} Hz of dt={dt}"
        )
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    n_bins = int(math.floor(bandwidth * n * dt))
    if n_bins < 10:
        raise ValueError(
            f"record too short: only {n_bins} in-band frequency bins, need >= 10 "
            f"(n*dt*B = {n * dt * bandwidth:.3g})"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if sigma == 0.0:
        return NoiseRecord(np.zeros(n), dt, bandwidth, 0.0, seed_tag)
    spectrum = np.zeros(n // 2 + 1, dtype=complex)
    spectrum[1 : n_bins + 1] = rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)
    samples = np.fft.irfft(spectrum, n)
    samples *= sigma / math.sqrt(float(np.mean(samples * samples)))
    return NoiseRecord(samples, dt, bandwidth, sigma, seed_tag)


def estimate_slope(record: NoiseRecord, index: int) -> float:
    """Central-difference derivative estimate at an interior sample."""
    if not 1 <= index <= len(record) - 2:
        raise IndexError(
            f"index {index} out of range for central difference on "
            f"{len(record)} samples"
        )
    s = record.samples
    return (s[index + 1] - s[index - 1]) / (2.0 * record.dt)


def _first_match(
    samples: np.ndarray,
    dt: float,
    lo: int,
    hi: int,
    target_value: float,
    value_window: float,
    target_slope: float | None,
    slope_tol_rel: float,
) -> int | None:
    """Earliest index in [lo, hi] matching the value and slope conditions."""
    region = samples[lo : hi + 1]
    candidates = np.flatnonzero(np.abs(region - target_value) <= value_window) + lo
    if candidates.size == 0:
        return None
    if target_slope is not None and math.isfinite(slope_tol_rel):
        slopes = (samples[candidates + 1] - samples[candidates - 1]) / (2.0 * dt)
        candidates = candidates[np.abs(slopes / target_slope - 1.0) <= slope_tol_rel]
        if candidates.size == 0:
            return None
    return int(candidates[0])


def find_start_point(
    record: NoiseRecord,
    target_value: float,
    value_tol_rel: float,
    target_slope: float | None,
    slope_tol_rel: float,
    allow_negation: bool = False,
    max_index: int | None = None,
) -> StartPoint | None:
    """Earliest interior sample matching a (value, slope) target pair.

    A sample i qualifies when |s[i] - target_value| <= value_tol_rel * RMS
    and, if a slope target is given, |slope(i)/target_slope - 1| <=
    slope_tol_rel where slope(i) is the central difference.  Passing
    ``target_slope=None`` (or an infinite slope tolerance) disables the
    slope condition.

    With ``allow_negation`` the mirrored pair (-value, -slope) is also
    searched; if the mirrored match comes first, the returned StartPoint
    carries ``negate=True`` and reports the value/slope of the sign-flipped
    record, which meets the original targets verbatim.

    ``max_index`` caps the search so enough samples remain after the start
    for a full transient run.  Returns None when nothing qualifies.
    """
    if value_tol_rel <= 0:
        raise ValueError("value_tol_rel must be positive")
    if target_slope is not None:
        if target_slope == 0:
            raise ValueError("target_slope must be nonzero (use None for slope-free)")
        if slope_tol_rel <= 0:
            raise ValueError("slope_tol_rel must be positive")
    s = record.samples
    hi = len(s) - 2 if max_index is None else min(max_index, len(s) - 2)
    if hi < 1:
        return None
    window = value_tol_rel * record.target_rms
    best: tuple[int, bool] | None = None
    idx = _first_match(s, record.dt, 1, hi, target_value, window, target_slope, slope_tol_rel)
    if idx is not None:
        best = (idx, False)
    if allow_negation and (target_value != 0.0 or target_slope is not None):
        mirrored_slope = None if target_slope is None else -target_slope
        idx = _first_match(
            s, record.dt, 1, hi, -target_value, window, mirrored_slope, slope_tol_rel
        )
        if idx is not None and (best is None or idx < best[0]):
            best = (idx, True)
    if best is None:
        return None
    index, negate = best
    sign = -1.0 if negate else 1.0
    value = sign * s[index]
    slope = sign * (s[index + 1] - s[index - 1]) / (2.0 * record.dt)
    if record.target_rms > 0:
        achieved_value = abs(value - target_value) / record.target_rms
    else:
        achieved_value = 0.0
    if target_slope is not None:
        achieved_slope = abs(slope / target_slope - 1.0)
    else:
        achieved_slope = math.nan
    return StartPoint(index, value, slope, achieved_value, achieved_slope, negate)

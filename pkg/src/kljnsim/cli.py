"""Command-line front end: config parsing, tables, waveform dumps, validation.

Configuration is a flat ``key = value`` file ('#' starts a comment); every
omitted key takes the built-in default, which reproduces the demonstration
setup exactly.  Flags override file keys, and the effective configuration is
echoed into the output directory so any run can be reproduced from its
artifacts alone.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .line import lattice_step_response, run_transient
from .montecarlo import run_experiment, trial_waveforms, validate_steady_state
from .protocol import PhysicalConfig, ScenarioKind, SearchParams

__all__ = ["RunConfig", "parse_config", "cmd_tables", "cmd_waveforms", "cmd_validate", "main"]


@dataclass(frozen=True)
class RunConfig:
    """Full experiment configuration (physical parameters plus run controls)."""

    physical: PhysicalConfig = field(default_factory=PhysicalConfig)
    scenarios: tuple[int, ...] = (1, 2, 3, 4)
    tau_multipliers: tuple[int, ...] = (1, 2, 3, 4)
    n_trials: int = 1000
    n_cal: int = 200
    master_seed: int = 1
    record_len: int = 2**20
    zero_value_tol: float = 1e-3
    slope_tol: float = 1e-2
    s3_value_tol: float = 1e-3
    s3_value_fraction: float = 0.5
    random_state: bool = False
    steady_duration: float = 6.4
    jobs: int = 1
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if not self.scenarios or any(s not in (1, 2, 3, 4) for s in self.scenarios):
            raise ValueError(f"scenarios must be a nonempty subset of 1..4, got {self.scenarios}")
        if not self.tau_multipliers or any(m < 1 for m in self.tau_multipliers):
            raise ValueError("tau_multipliers must be positive integers")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.n_cal < 50:
            raise ValueError("n_cal must be >= 50")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        # SearchParams re-validates the tolerance fields.
        self.search_params()

    def search_params(self) -> SearchParams:
        return SearchParams(
            zero_value_tol=self.zero_value_tol,
            slope_tol=self.slope_tol,
            s3_value_tol=self.s3_value_tol,
            s3_value_fraction=self.s3_value_fraction,
            record_len=self.record_len,
        )

    def taus(self) -> list[float]:
        return [m * self.physical.fly_time for m in self.tau_multipliers]

    def to_text(self) -> str:
        p = self.physical
        pairs = [
            ("r_h", f"{p.r_h:g}"),
            ("r_l", f"{p.r_l:g}"),
            ("z0", f"{p.z0:g}"),
            ("temperature", f"{p.temperature:g}"),
            ("bandwidth", f"{p.bandwidth:g}"),
            ("t_f", f"{p.fly_time:g}"),
            ("dt_divisor", str(p.dt_divisor)),
            ("scenarios", ",".join(str(s) for s in self.scenarios)),
            ("tau_multipliers", ",".join(str(m) for m in self.tau_multipliers)),
            ("n_trials", str(self.n_trials)),
            ("n_cal", str(self.n_cal)),
            ("master_seed", str(self.master_seed)),
            ("record_len", str(self.record_len)),
            ("zero_value_tol", f"{self.zero_value_tol:g}"),
            ("slope_tol", f"{self.slope_tol:g}"),
            ("s3_value_tol", f"{self.s3_value_tol:g}"),
            ("s3_value_fraction", f"{self.s3_value_fraction:g}"),
            ("random_state", "true" if self.random_state else "false"),
            ("steady_duration", f"{self.steady_duration:g}"),
            ("jobs", str(self.jobs)),
            ("out_dir", self.out_dir),
        ]
        return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in raw.split(",") if part.strip())


_PHYSICAL_KEYS = {
    "r_h": ("r_h", float),
    "r_l": ("r_l", float),
    "z0": ("z0", float),
    "temperature": ("temperature", float),
    "bandwidth": ("bandwidth", float),
    "t_f": ("fly_time", float),
    "dt_divisor": ("dt_divisor", int),
}

_RUN_KEYS = {
    "scenarios": _parse_int_list,
    "tau_multipliers": _parse_int_list,
    "n_trials": int,
    "n_cal": int,
    "master_seed": int,
    "record_len": int,
    "zero_value_tol": float,
    "slope_tol": float,
    "s3_value_tol": float,
    "s3_value_fraction": float,
    "random_state": _parse_bool,
    "steady_duration": float,
    "jobs": int,
    "out_dir": str,
}


def parse_config(text: str) -> RunConfig:
    """Parse the flat key = value configuration format.

    Unknown keys, malformed values and invariant violations raise ValueError
    naming the offending key; omitted keys take the defaults.
    """
    phys_kwargs: dict = {}
    run_kwargs: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        try:
            if key in _PHYSICAL_KEYS:
                attr, parser = _PHYSICAL_KEYS[key]
                phys_kwargs[attr] = parser(raw_value)
            elif key in _RUN_KEYS:
                run_kwargs[key] = _RUN_KEYS[key](raw_value)
            else:
                raise KeyError
        except KeyError:
            raise ValueError(f"unknown config key: {key!r} (line {lineno})") from None
        except ValueError as exc:
            raise ValueError(f"bad value for {key!r} (line {lineno}): {exc}") from None
    try:
        physical = PhysicalConfig(**phys_kwargs)
        return RunConfig(physical=physical, **run_kwargs)
    except ValueError as exc:
        raise ValueError(f"invalid configuration: {exc}") from None


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        cfg = parse_config(Path(args.config).read_text())
    else:
        cfg = RunConfig()
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "scenario", None) is not None:
        overrides["scenarios"] = (args.scenario,)
    if getattr(args, "trials", None) is not None:
        overrides["n_trials"] = args.trials
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    if getattr(args, "duration", None) is not None:
        overrides["steady_duration"] = args.duration
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    return replace(cfg, **overrides) if overrides else cfg


def _prepare_out_dir(cfg: RunConfig, out: str) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective_config.txt").write_text(cfg.to_text())
    return out_dir


def cmd_tables(cfg: RunConfig, out: str) -> list[Path]:
    """Run the configured scenarios and write one success-probability CSV each."""
    out_dir = _prepare_out_dir(cfg, out)
    paths = []
    for scenario in cfg.scenarios:
        t0 = time.perf_counter()
        summary = run_experiment(
            cfg.physical,
            ScenarioKind(scenario),
            cfg.taus(),
            cfg.n_trials,
            cfg.master_seed,
            n_cal=cfg.n_cal,
            params=cfg.search_params(),
            random_state=cfg.random_state,
            jobs=cfg.jobs,
        )
        path = out_dir / f"scenario_{scenario}.csv"
        summary.write_csv(path)
        paths.append(path)
        elapsed = time.perf_counter() - t0
        print(f"scenario {scenario}: {cfg.n_trials} trials in {elapsed:.1f} s -> {path}")
        for line in summary.csv_lines()[1:]:
            print(f"  {line}")
    return paths


def cmd_waveforms(cfg: RunConfig, scenario: int, out: str) -> Path:
    """Dump the cable waveforms of one two-fly-time trial as TSV."""
    out_dir = _prepare_out_dir(cfg, out)
    wf = trial_waveforms(
        cfg.physical,
        ScenarioKind(scenario),
        trial=0,
        master_seed=cfg.master_seed,
        duration=2.0 * cfg.physical.fly_time,
        params=cfg.search_params(),
    )
    path = out_dir / f"waveforms_scenario_{scenario}.tsv"
    wf.write_tsv(path)
    print(f"scenario {scenario}: waveform dump -> {path}")
    return path


def _line_oracle_ok(cfg: RunConfig) -> tuple[bool, str]:
    """Quick engine-vs-oracle cross check on the configured parameters."""
    from .noise import NoiseRecord, StartPoint

    p = cfg.physical
    n = 12 * p.dt_divisor
    step_drive = np.ones(n)
    rec = NoiseRecord(np.concatenate(([0.0], step_drive, [0.0])), p.dt, p.bandwidth, 1.0)
    start = StartPoint(1, 1.0, 0.0, 0.0, float("nan"))
    zero = NoiseRecord(np.zeros(n + 2), p.dt, p.bandwidth, 0.0)
    wf = run_transient(p, (rec, start), p.r_h, (zero, start), p.r_l, n)
    worst = 0.0
    for k in range(n):
        t = k * p.dt
        near = round(t / p.fly_time)
        if near > 0 and abs(t - near * p.fly_time) <= 0.5 * p.dt:
            continue
        v_src, v_load = lattice_step_response(1.0, p.r_h, p.r_l, p.z0, p.fly_time, t)
        ref = max(abs(v_src), abs(v_load))
        worst = max(worst, abs(wf.v_a[k] - v_src) / ref, abs(wf.v_b[k] - v_load) / ref)
    ok = worst <= 1e-9
    return ok, (
        f"  step response vs bounce-diagram oracle: worst rel err {worst:.3e} "
        f"(limit 1e-09) [{'pass' if ok else 'FAIL'}]"
    )


def cmd_validate(cfg: RunConfig, out: str | None = None) -> tuple[bool, str]:
    """Run the steady-state identity checks plus the line-engine oracle check."""
    oracle_ok, oracle_line = _line_oracle_ok(cfg)
    report = validate_steady_state(cfg.physical, cfg.steady_duration, cfg.master_seed)
    text = "\n".join([
        "line engine:",
        oracle_line,
        report.render(),
        f"overall: {'pass' if oracle_ok and report.all_ok else 'FAIL'}",
    ])
    if out is not None:
        out_dir = _prepare_out_dir(cfg, out)
        (out_dir / "validation.txt").write_text(text + "\n")
    return oracle_ok and report.all_ok, text


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kljn-sim",
        description="Transient attack and defense simulator for the KLJN key exchanger",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_trials: bool = False) -> None:
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config; default: out)")
        if with_trials:
            p.add_argument("--scenario", type=int, choices=(1, 2, 3, 4),
                           help="run a single scenario")
            p.add_argument("--trials", type=int, help="evaluation trials per scenario")
            p.add_argument("--jobs", type=int, help="worker processes (does not affect results)")

    p_tables = sub.add_parser("tables", help="estimate attack success probabilities")
    common(p_tables, with_trials=True)

    p_wave = sub.add_parser("waveforms", help="dump one trial's cable waveforms")
    common(p_wave)
    p_wave.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), required=True)

    p_val = sub.add_parser("validate", help="steady-state and engine validation")
    common(p_val)
    p_val.add_argument("--duration", type=float, help="steady-state run length per state (s)")

    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "tables":
            cmd_tables(cfg, cfg.out_dir)
            return 0
        if args.command == "waveforms":
            cmd_waveforms(cfg, args.scenario, cfg.out_dir)
            return 0
        ok, text = cmd_validate(cfg, cfg.out_dir)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    print(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``sweep``, ``optimize``, ``simulate`` and ``verify``.

Settings come from an optional flat ``key = value`` file (``#`` starts a
comment) and are overridden by flags. ``--dump-config`` writes the effective
settings back out in the same format.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .channel import ChannelModel, expected_observables, monte_carlo_observables
from .core import FIBER_LOSS_EXPONENT, DEFAULT_LOSS_EXPONENT
from .optimizer import SearchSpace, SweepRow, optimize, sweep
from .protocol import ProtocolParams
from .security import analyze, single_photon_e1ph
from .verify import agreement_check, soundness_check, source_equivalence_check

log = logging.getLogger("sns_tfqkd")

CSV_HEADER = ["L_km", "mu", "epsilon", "lambda", "p_x", "key_rate", "e1ph_upper", "EZ", "n1_lower"]
COMMANDS = ("sweep", "optimize", "simulate", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "sweep"
    # channel
    L: float = 50.0
    loss_exponent: float = DEFAULT_LOSS_EXPONENT
    eta_d: float = 0.8
    p_d: float = 1e-11
    ea: float = 0.1
    # protocol (simulate uses these directly)
    mu: float = 0.1
    epsilon: float = 0.05
    lam: float = 0.3
    p_x: float = 0.2
    f: float = 1.16
    n_windows: int = 10**12
    mu_max: float | None = None
    test_fraction: float = 0.0
    # search space
    mu_range: tuple = (1e-6, 1.5)
    epsilon_range: tuple = (1e-4, 0.5)
    lambda_range: tuple = (0.02, 2.0)
    p_x_range: tuple = (0.01, 0.5)
    grid_points: int = 20
    # sweep
    lmin: float = 0.0
    lmax: float = 400.0
    lstep: float = 10.0
    distances: tuple | None = None
    # run control
    seed: int = 0
    trials: int = 100
    threads: int = 1
    mc_windows: int = 10**7
    per_second: float = 0.0
    out: str | None = None
    inject_fault: float = 0.0

    def channel(self) -> ChannelModel:
        return ChannelModel(self.L, self.loss_exponent, self.eta_d, self.p_d, self.ea)

    def protocol(self, n_windows: int | None = None) -> ProtocolParams:
        return ProtocolParams(
            mu=self.mu, epsilon=self.epsilon, p_x=self.p_x, lam=self.lam, f=self.f,
            n_windows=self.n_windows if n_windows is None else n_windows,
            mu_M=self.mu_max, test_fraction=self.test_fraction,
        )

    def space(self) -> SearchSpace:
        return SearchSpace(mu=self.mu_range, epsilon=self.epsilon_range, lam=self.lambda_range,
                           p_x=self.p_x_range, grid_points=self.grid_points)

    def distance_list(self) -> list[float]:
        if self.distances is not None:
            return list(self.distances)
        if self.lstep <= 0:
            raise ConfigError("lstep must be > 0")
        if self.lmax < self.lmin:
            return []
        n = int((self.lmax - self.lmin) / self.lstep + 1e-9) + 1
        return [self.lmin + i * self.lstep for i in range(n)]

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        self.channel()
        self.protocol()
        self.space()
        if any(d < 0 for d in self.distance_list()):
            raise ConfigError("distances must be >= 0")
        if self.trials < 1 or self.threads < 1 or self.mc_windows < 1:
            raise ConfigError("trials, threads and mc_windows must be positive")

    def dump(self) -> str:
        lines = ["# effective sns-tfqkd configuration"]
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_ALIASES = {"lambda": "lam", "mu_M": "mu_max", "E_a": "ea"}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, text: str):
    kind = _TYPES[key]
    text = text.strip()
    if text.lower() == "none" and "None" in kind:
        return None
    if "tuple" in kind:
        parts = [p for p in text.split(",") if p.strip()]
        vals = tuple(float(p) for p in parts)
        if key.endswith("_range") and len(vals) != 2:
            raise ValueError("expected 'low,high'")
        return vals
    if kind.startswith("int"):
        return int(float(text)) if "e" in text.lower() else int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Parse ``key = value`` lines into RunConfig field values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key).replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: bad value for {key}: {exc}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sns-tfqkd", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--dump-config", metavar="PATH", help="write the effective configuration")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--L", type=float, dest="L")
    p.add_argument("--lmin", type=float)
    p.add_argument("--lmax", type=float)
    p.add_argument("--lstep", type=float)
    p.add_argument("--distances", help="comma-separated list; overrides --lmin/--lmax/--lstep")
    p.add_argument("--ea", type=float, help="single-photon misalignment error E_a")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--mc-windows", type=float, dest="mc_windows")
    p.add_argument("--mu-max", type=float, dest="mu_max", help="intensity upper bound mu_M")
    p.add_argument("--per-second", type=float, dest="per_second", metavar="HZ",
                   help="report key rate per second at this repetition rate")
    chan = p.add_mutually_exclusive_group()
    chan.add_argument("--paper-channel", action="store_const", const=DEFAULT_LOSS_EXPONENT,
                      dest="loss_exponent", help="eta = 10^(-L/100)")
    chan.add_argument("--fiber-channel", action="store_const", const=FIBER_LOSS_EXPONENT,
                      dest="loss_exponent", help="0.2 dB/km")
    for name in ("mu", "epsilon", "p_x", "f", "test_fraction", "eta_d", "p_d"):
        p.add_argument(f"--{name.replace('_', '-')}", type=float, dest=name)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--n-windows", type=float, dest="n_windows")
    p.add_argument("--inject-fault", type=float, dest="inject_fault", help=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(argv: list[str]) -> tuple[RunConfig, argparse.Namespace]:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_config_text(text, str(path)))
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None and key != "command":
            values[key] = _convert(key, v) if key == "distances" else v
    for key in ("mc_windows", "n_windows"):
        if key in values:
            values[key] = int(values[key])
    values["command"] = args.command
    cfg = RunConfig(**values)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, args


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _csv_row(row: SweepRow, per_second: float) -> list[str]:
    scale = per_second if per_second > 0 else 1.0
    p = row.params
    return [f"{row.L:.10g}", _fmt(p.mu), _fmt(p.epsilon), _fmt(p.lam), _fmt(p.p_x),
            _fmt(row.R * scale), _fmt(row.e1ph_U), _fmt(row.EZ), _fmt(row.n1_L)]


def _write_text(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    Path(out).write_text(text)


def _rows_to_csv(rows: list[SweepRow], per_second: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(_csv_row(r, per_second))
    return buf.getvalue()


def run_sweep(cfg: RunConfig) -> int:
    rows = sweep(cfg.distance_list(), cfg.ea, cfg.space(), channel=cfg.channel(), f=cfg.f,
                 n_windows=cfg.n_windows, mu_M=cfg.mu_max, threads=cfg.threads)
    _write_text(cfg.out, _rows_to_csv(rows, cfg.per_second))
    return 0


def run_optimize(cfg: RunConfig) -> int:
    p, b = optimize(cfg.channel(), cfg.space(), f=cfg.f, n_windows=cfg.n_windows, mu_M=cfg.mu_max)
    row = SweepRow(cfg.L, p, b.R, b.e1ph_U, b.EZ, b.n1_L)
    _write_text(cfg.out, _rows_to_csv([row], cfg.per_second))
    if b.diagnostic:
        log.info("optimize at L=%g: %s", cfg.L, b.diagnostic)
    return 0


def run_simulate(cfg: RunConfig) -> int:
    params = cfg.protocol(n_windows=cfg.mc_windows)
    ch = cfg.channel()
    counts, truth = monte_carlo_observables(params, ch, cfg.seed, threads=cfg.threads)
    bounds = analyze(counts, params)
    report = {
        "config": {"L": ch.L, "E_a": ch.E_a, "seed": cfg.seed, **asdict(params)},
        "observed": counts.as_dict(),
        "expected": expected_observables(params, ch).as_dict(),
        "ground_truth": {**asdict(truth), "true_n1": truth.true_n1},
        "bounds": asdict(bounds),
    }
    try:
        report["ground_truth"]["e1ph"] = single_photon_e1ph(truth)
    except ZeroDivisionError:
        report["ground_truth"]["e1ph"] = None
    _write_text(cfg.out, json.dumps(report, indent=2) + "\n")
    return 0


def run_verify(cfg: RunConfig) -> int:
    """Run the invariant suites; exit status 0 iff every check passes."""
    checks = [
        source_equivalence_check(seed=cfg.seed),
        agreement_check(seed=cfg.seed, threads=cfg.threads),
        soundness_check(trials=cfg.trials, seed=cfg.seed, threads=cfg.threads, fault=cfg.inject_fault),
    ]
    text = "".join(c.line() + "\n" for c in checks)
    _write_text(cfg.out, text)
    if cfg.out not in (None, "-"):
        sys.stdout.write(text)
    return 0 if all(c.passed for c in checks) else 1


_RUNNERS = {"sweep": run_sweep, "optimize": run_optimize, "simulate": run_simulate, "verify": run_verify}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg, args = make_config(argv)
    except ConfigError as exc:
        print(f"sns-tfqkd: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.dump_config:
        try:
            Path(args.dump_config).write_text(cfg.dump())
        except OSError as exc:
            print(f"sns-tfqkd: error: cannot write {args.dump_config}: {exc}", file=sys.stderr)
            return 1
    try:
        return _RUNNERS[cfg.command](cfg)
    except OSError as exc:
        print(f"sns-tfqkd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

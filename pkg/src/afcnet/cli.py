"""Command line entry point: ``afcnet {run,fidelity-sweep,rate-sweep,tomography}``.

Every subcommand writes data files into ``--out``. Exit status is 0 on
success, 1 for configuration or usage errors and 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config
from .fock import NumericalError

log = logging.getLogger("afcnet")

FIDELITY_HEADER = ("mu1", "mu2", "fidelity", "stderr", "n_heralds", "n_bins")
RATE_HEADER = ("M", "mu", "p_h", "p_h_stderr", "rate_hz")
INTERFERENCE_HEADER = ("phase_rad", "detector", "click_prob", "stderr", "n_samples")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(x) -> str:
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) for v in row])


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file; missing fields take defaults")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--trials", type=_positive_int, help="override the number of cycles")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")

    parser = _Parser(prog="afcnet", description="Heralded entanglement between two AFC memories.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="one configuration, writes run.json")
    p.add_argument("--min-heralds", type=_positive_int)

    p = sub.add_parser("fidelity-sweep", parents=[common], help="writes fidelity.csv")
    p.add_argument("--mu-grid", type=_float_list, default=list(ex.DEFAULT_MU_GRID))
    p.add_argument("--min-heralds", type=_positive_int, help="keep running each point until this many heralds")

    p = sub.add_parser("rate-sweep", parents=[common], help="writes rate.csv")
    p.add_argument("--modes", type=_int_list, default=list(ex.DEFAULT_MODE_NUMBERS))
    p.add_argument("--mus", type=_float_list, default=list(ex.DEFAULT_RATE_MUS))
    p.add_argument("--min-bins", type=_positive_int, help="simulate at least this many bins per point")

    p = sub.add_parser("tomography", parents=[common], help="writes tomography.json and interference.csv")
    p.add_argument("--min-heralds", type=_positive_int, help="heralds in the diagonal run")
    p.add_argument("--min-plus-per-phase", type=_positive_int, help="plus heralds per sweep phase")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if not changes:
        return cfg
    try:
        return cfg.replace(**changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<flags>", str(exc)) from None


def cmd_run(cfg: ExperimentConfig, out: Path, min_heralds: int | None = None) -> Path:
    summary = ex.run_experiment(cfg, min_heralds)
    path = out / "run.json"
    _write_json(path, {"config": cfg.to_dict(), "result": summary.to_dict()})
    return path


def cmd_fidelity_sweep(cfg: ExperimentConfig, out: Path, mu_grid: Sequence[float] = ex.DEFAULT_MU_GRID,
                       min_heralds: int | None = None) -> Path:
    points = ex.fidelity_sweep(cfg, mu_grid, min_heralds)
    path = out / "fidelity.csv"
    _write_csv(path, FIDELITY_HEADER,
               [(p.mu1, p.mu2, p.fidelity, p.stderr, p.n_heralds, p.n_bins) for p in points])
    return path


def cmd_rate_sweep(cfg: ExperimentConfig, out: Path, modes: Sequence[int] = ex.DEFAULT_MODE_NUMBERS,
                   mus: Sequence[float] = ex.DEFAULT_RATE_MUS, min_bins: int | None = None) -> Path:
    points = ex.rate_sweep(cfg, modes, mus, min_bins)
    path = out / "rate.csv"
    _write_csv(path, RATE_HEADER, [(p.mode_number, p.mu, p.p_herald, p.p_herald_stderr, p.rate_hz) for p in points])
    return path


def cmd_tomography(cfg: ExperimentConfig, out: Path, min_heralds: int | None = None,
                   min_plus_per_phase: int | None = None) -> tuple[Path, Path]:
    res = ex.tomography(cfg, min_heralds, min_plus_per_phase)
    rho = res.reconstruction.rho_tilde
    d = res.diagonal
    fits = res.coherence.fits
    data = {
        "rho_real": rho.real.tolist(),
        "rho_imag": rho.imag.tolist(),
        "p00": d.p00,
        "p01": d.p01,
        "p10": d.p10,
        "p11": d.p11,
        "p_stderr": d.stderr,
        "d_abs": res.coherence.d_abs,
        "d_abs_uncorrected": res.d_abs_uncorrected,
        "visibility": res.coherence.visibility,
        "visibility_per_detector": [fits[k].visibility for k in sorted(fits)],
        "fit_coeffs": [[fits[k].c0, fits[k].c1, fits[k].c2] for k in sorted(fits)],
        "eta_tot": res.eta_tot,
        "p_dark": res.p_dark,
        "n_heralds_diagonal": res.n_heralds_diagonal,
        "n_bins_diagonal": res.n_bins_diagonal,
        "oracle_real": res.oracle.real.tolist(),
        "oracle_imag": res.oracle.imag.tolist(),
        "oracle_sector_weight": res.oracle_sector_weight,
    }
    json_path = out / "tomography.json"
    _write_json(json_path, data)
    csv_path = out / "interference.csv"
    _write_csv(csv_path, INTERFERENCE_HEADER,
               [(p.phase, p.detector, p.click_prob, p.stderr, p.n_samples) for p in res.points])
    return json_path, csv_path


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        cfg = _load(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            written = [cmd_run(cfg, args.out, args.min_heralds)]
        elif args.command == "fidelity-sweep":
            written = [cmd_fidelity_sweep(cfg, args.out, args.mu_grid, args.min_heralds)]
        elif args.command == "rate-sweep":
            written = [cmd_rate_sweep(cfg, args.out, args.modes, args.mus, args.min_bins)]
        else:
            written = list(cmd_tomography(cfg, args.out, args.min_heralds, args.min_plus_per_phase))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

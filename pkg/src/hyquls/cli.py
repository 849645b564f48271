"""Command-line interface: ``hyquls {train,predict,compare,filter-scan,spectrum}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from hyquls.data import DataError
from hyquls.experiment import (
    ALGORITHMS,
    ConfigError,
    ExperimentConfig,
    filter_scan,
    format_scan_csv,
    predict_from_model,
    read_probe_csv,
    run,
    spectrum_report,
)
from hyquls.kernels import OrderCapExceeded
from hyquls.lssvm import SingularSystem

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _float_list(raw: str) -> list[float]:
    try:
        return [float(t) for t in raw.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from None


def _load_config(args) -> ExperimentConfig:
    path = Path(args.config)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    if isinstance(obj, dict):
        if getattr(args, "seed", None) is not None:
            obj["seed"] = args.seed
        if getattr(args, "algo", None):
            obj["algorithm"] = args.algo
        q = dict(obj.get("qsls", {}))
        if getattr(args, "tau", None) is not None:
            q["tau"] = args.tau
        if getattr(args, "t_max", None) is not None:
            q["t_max"] = args.t_max
        if q:
            obj["qsls"] = q
    return ExperimentConfig.from_json(obj, base_dir=path.parent)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyquls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="experiment config (JSON)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="write output here instead of stdout")

    tr = sub.add_parser("train", help="fit one pipeline and report decision values")
    common(tr)
    tr.add_argument("--algo", choices=ALGORITHMS)
    tr.add_argument("--tau", type=float)
    tr.add_argument("--t-max", type=int, dest="t_max")
    tr.add_argument("--model-out", help="also write the model JSON here")

    pr = sub.add_parser("predict", help="evaluate a saved model on probe points")
    common(pr, config=False)
    pr.add_argument("--model", required=True)
    pr.add_argument("--probes", required=True, help="CSV of probe points")
    pr.add_argument("--label-column", type=int, help="drop this column from the probe CSV")

    cmp_ = sub.add_parser("compare", help="run classical, hvq and qsls side by side")
    common(cmp_)
    cmp_.add_argument("--tau", type=float)
    cmp_.add_argument("--t-max", type=int, dest="t_max")

    fs = sub.add_parser("filter-scan", help="tabulate the inversion filters")
    fs.add_argument("--L", type=_float_list, required=True, dest="l_list")
    fs.add_argument("--eps", type=_float_list, default=[0.0], dest="eps_list")
    fs.add_argument("--lambda", type=_float_list, required=True, dest="lambda_list")
    fs.add_argument("--out")

    sp = sub.add_parser("spectrum", help="kernel spectrum with rotated labels")
    common(sp)
    sp.add_argument("--tau", type=float)
    sp.add_argument("--t-max", type=int, dest="t_max")
    return p


def _dispatch(args) -> None:
    if args.command == "filter-scan":
        if any(v <= 0 for v in args.l_list):
            raise ConfigError("--L", "window widths must be positive")
        if any(v < 0 for v in args.eps_list):
            raise ConfigError("--eps", "detector widths must be >= 0")
        try:
            rows = filter_scan(args.l_list, args.eps_list, args.lambda_list)
        except ValueError as exc:
            raise ConfigError("filter-scan", str(exc)) from None
        _emit(format_scan_csv(rows), args.out)
        return
    if args.command == "predict":
        mpath = Path(args.model)
        if not mpath.exists():
            raise ConfigError("--model", f"file not found: {mpath}")
        if not Path(args.probes).exists():
            raise ConfigError("--probes", f"file not found: {args.probes}")
        model = json.loads(mpath.read_text(encoding="utf-8"))
        try:
            probes = read_probe_csv(args.probes, args.label_column)
        except (ValueError, IndexError) as exc:
            raise ConfigError("--probes", str(exc)) from None
        _emit(dumps(predict_from_model(model, probes, mpath.parent)), args.out)
        return
    config = _load_config(args)
    out = args.out or config.out
    if args.command == "spectrum":
        _emit(dumps(spectrum_report(config)), out)
        return
    report = run(config, mode="compare" if args.command == "compare" else "train")
    if getattr(args, "model_out", None):
        Path(args.model_out).write_text(dumps(report["model"]), encoding="utf-8")
    _emit(dumps(report), out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _dispatch(args)
    except (ConfigError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystem, OrderCapExceeded, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # invalid inputs that only surface inside a pipeline
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``dynuip {estimate,simulate,roll,factorize,replay}``.

Every command writes ``manifest.json`` next to its outputs; ``replay`` reruns
a manifest and reproduces the reports byte for byte.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical infeasibility.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import sys
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from . import svg
from .dynreg import DEFAULT_P_MAX, estimate_methods, rolling_estimate
from .errors import (
    ConfigError,
    DataError,
    DegenerateRegressorError,
    InfeasibleError,
    RankDeficiencyError,
)
from .maproc import OverlapSpec, invert, overlap_autocorrelations, spectral_factorize
from .montecarlo import DEFAULT_ALTERNATIVES, McConfig, fmt, run_experiment, size_corrected_power
from .ols_core import ALL_METHODS, Method
from .series_io import CsvSchema, Design, align, build_sample, load_csv, rolling_windows

log = logging.getLogger("dynuip")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
POWER_METHODS = (Method.OLS, Method.NW, Method.KV, Method.RDYNREG)
ROLL_DEFAULT = (Method.OLS, Method.RDYNREG)


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def parse_methods(text: str | None, default=ALL_METHODS) -> tuple:
    if not text:
        return tuple(default)
    try:
        methods = [Method.parse(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return tuple(dict.fromkeys(methods))


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, inputs=(), seed=None) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "tool_version": _version(),
        "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _csv_text(rows) -> str:
    import csv
    import io

    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _load_sample(cfg: dict):
    schema = CsvSchema(cfg["date_col"], cfg["spot_col"], cfg["forward_col"], cfg.get("date_format"))
    quotes = load_csv(cfg["data"], schema)
    series = align(quotes, cfg["k"])
    return build_sample(series, cfg["design"])


# --- estimate -----------------------------------------------------------------


def run_estimate(cfg: dict, out_dir: Path) -> None:
    sample = _load_sample(cfg)
    methods = parse_methods(cfg["methods"])
    spec = OverlapSpec(cfg["contract_days"], cfg["days_per_period"])
    theta = spectral_factorize(overlap_autocorrelations(spec), spec.ma_order)
    design = Design.parse(cfg["design"])
    rep = estimate_methods(sample, methods, theta=theta, p=cfg.get("p"), p_max=cfg["p_max"],
                           keep_zero_se=True)

    header = ["method", "beta", "se", "t_stat", "p_value", "reject_5pct", "lr_lambda", "lr_df", "lr_p_value"]
    rows = [header]
    for m in methods:
        r = rep.results[m]
        lr = [fmt(rep.lr.lam), rep.lr.df, fmt(rep.lr.p_value)] if m is Method.DYNREG else ["", "", ""]
        rows.append([m.value, fmt(r.estimate), fmt(r.se), fmt(r.t_stat), fmt(r.p_value),
                     int(r.reject_at_5pct), *lr])
    _write(out_dir / "report.csv", _csv_text(rows))

    title = "Hansen-Hodrick regression" if design is Design.HANSEN_HODRICK else "Fama regression"
    lines = [f"{title}: H0 beta = {design.null_beta:g}, n = {len(sample)}, k = {sample.k}",
             f"sample {sample.start} to {sample.end}", "",
             f"{'Method':<13}{'beta':>12}{'s.e.':>12}{'t':>12}{'p':>13}{'LR':>12}"]
    for m in methods:
        r = rep.results[m]
        lr = fmt(rep.lr.lam) if m is Method.DYNREG else "--"
        lines.append(f"{m.value:<13}{fmt(r.estimate):>12}{fmt(r.se):>12}{fmt(r.t_stat):>12}"
                     f"{fmt(r.p_value):>13}{lr:>12}")
    if rep.dynreg is not None:
        lines += ["", f"DynReg lag order p = {rep.dynreg.p} (BIC, p_max = {cfg['p_max']}); "
                      f"LR df = {rep.lr.df}, p-value = {fmt(rep.lr.p_value)}"]
    if rep.rdynreg is not None:
        lines.append(f"RDynReg filter truncation P = {rep.rdynreg.filter_P}")
    _write(out_dir / "report.txt", "\n".join(lines) + "\n")


# --- simulate -----------------------------------------------------------------

SIM_KEYS = {
    "T": int, "reps": int, "k": int, "contract_days": int, "days_per_period": int,
    "sigma2": float, "true_beta": float, "spot_sd": float, "seed": int, "design": str,
    "methods": str, "p_max": int, "premium_rho": float, "premium_sd": float, "workers": int,
    "alternatives": str, "label": str, "spot_csv": str, "power": str,
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SIM_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r} (allowed: {', '.join(sorted(SIM_KEYS))})")
        if key in cfg:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            cfg[key] = SIM_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"line {lineno}: invalid value {value!r} for {key}") from None
    return cfg


def _mc_config(cfg: dict) -> tuple[McConfig, tuple, bool, str]:
    opts = dict(cfg)
    label = opts.pop("label", "experiment")
    alts = opts.pop("alternatives", None)
    alternatives = (tuple(float(a) for a in alts.split(",") if a.strip()) if alts
                    else DEFAULT_ALTERNATIVES)
    power = opts.pop("power", "true").strip().lower() in ("1", "true", "yes", "on")
    if "methods" in opts:
        opts["methods"] = parse_methods(opts["methods"])
    spot_csv = opts.pop("spot_csv", None)
    if spot_csv:
        quotes = load_csv(spot_csv)
        opts["spot"] = tuple(np.log([q.spot for q in quotes]))
    design = Design.parse(opts.get("design", "hh"))
    if alts is None and design is Design.FAMA:
        alternatives = tuple(1.0 + a for a in DEFAULT_ALTERNATIVES)
    try:
        return McConfig(**opts), alternatives, power, label
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def run_simulate(cfg: dict, out_dir: Path) -> None:
    config, alternatives, want_power, label = _mc_config(cfg)
    result = run_experiment(config)
    power_methods = [m for m in POWER_METHODS if m in config.methods]
    if want_power and power_methods:
        result = size_corrected_power(config.replace(methods=tuple(power_methods)), alternatives,
                                      null_result=result)
    _write(out_dir / "report.csv", result.to_csv())
    _write(out_dir / "summary.json", result.to_json() + "\n")

    lines = [f"Monte Carlo: {label}, design {config.design.value}, T = {config.T}, reps = {config.reps}, "
             f"k = {config.k}, true beta = {config.beta0:g}, seed = {config.seed}",
             "", f"{'Method':<13}{'Bias':>12}{'MSE':>12}{'Size 5%':>10}{'MC se':>10}"]
    for m, r in result.records.items():
        bias = fmt(r.bias) if r.bias is not None else "--"
        mse = fmt(r.mse) if r.mse is not None else "--"
        lines.append(f"{m.value:<13}{bias:>12}{mse:>12}{fmt(r.size_5pct):>10}{fmt(r.mc_se):>10}")
    if result.power_grid:
        lines += ["", "Size-corrected power",
                  f"{'Method':<13}" + "".join(f"{fmt(b):>9}" for b in result.alternatives)]
        for m, rates in result.power_grid.items():
            lines.append(f"{m.value:<13}" + "".join(f"{fmt(v):>9}" for v in rates))
        chart = svg.Chart(f"Size-corrected power: {label} (T = {config.T})", "beta", "rejection rate")
        for m, rates in result.power_grid.items():
            chart.add(m.value, result.alternatives, rates)
        _write(out_dir / f"power_{_slug(label)}.svg", svg.render(chart))
    _write(out_dir / "report.txt", "\n".join(lines) + "\n")


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in text) or "experiment"


# --- roll -----------------------------------------------------------------------


def run_roll(cfg: dict, out_dir: Path) -> None:
    sample = _load_sample(cfg)
    methods = parse_methods(cfg["methods"], ROLL_DEFAULT)
    spec = OverlapSpec(cfg["contract_days"], cfg["days_per_period"])
    theta = spectral_factorize(overlap_autocorrelations(spec), spec.ma_order)
    design = Design.parse(cfg["design"])
    lag_bound = cfg["p_max"] if Method.DYNREG in methods else None
    windows = rolling_windows(sample, cfg["window"], cfg["step"], lag_bound)

    rows = [["method", "start", "end", "estimate", "se", "lower", "upper", "status", "message"]]
    for m in methods:
        points = rolling_estimate(windows, m, theta=theta, p_max=cfg["p_max"])
        for pt in points:
            rows.append([m.value, str(pt.start), str(pt.end), fmt(pt.estimate), fmt(pt.se),
                         fmt(pt.lower), fmt(pt.upper), pt.status, pt.message])
        xs = [_decimal_year(pt.end) for pt in points]
        chart = svg.Chart(f"Rolling {m.value} estimate (window {cfg['window']})", "window end", "beta")
        chart.add(m.value, xs, [pt.estimate for pt in points])
        chart.add_band("95% band", xs, [pt.lower for pt in points], [pt.upper for pt in points])
        chart.hline = design.null_beta
        _write(out_dir / f"roll_{_slug(m.value)}.svg", svg.render(chart))
    _write(out_dir / "report.csv", _csv_text(rows))

    n_ok = {m.value: 0 for m in methods}
    for row in rows[1:]:
        n_ok[row[0]] += row[7] == "ok"
    lines = [f"Rolling estimation: {len(windows)} windows of {cfg['window']} (step {cfg['step']}), "
             f"design {design.value}, null beta = {design.null_beta:g}"]
    lines += [f"{name}: {count} estimated, {len(windows) - count} gaps" for name, count in n_ok.items()]
    _write(out_dir / "report.txt", "\n".join(lines) + "\n")


def _decimal_year(d) -> float:
    date = np.datetime64(d, "D").astype(dt.date)
    start = dt.date(date.year, 1, 1)
    days = (dt.date(date.year + 1, 1, 1) - start).days
    return date.year + (date - start).days / days


# --- factorize --------------------------------------------------------------------


def factorize_report(contract_days: int, days_per_period: int) -> str:
    spec = OverlapSpec(contract_days, days_per_period)
    rho = overlap_autocorrelations(spec)
    theta = spectral_factorize(rho, spec.ma_order)
    filt = invert(theta)
    lines = [f"contract_days = {contract_days}, days_per_period = {days_per_period}, "
             f"MA order = {spec.ma_order}, horizon k = {spec.horizon}",
             "rho = " + ", ".join(fmt(r) for r in rho[: max(spec.ma_order, 1)])]
    if spec.ma_order == 0:
        lines.append("white noise: theta(L) = 1, no serial correlation")
    lines += [
        "theta = " + ", ".join(fmt(c) for c in theta.coeffs),
        f"variance ratio sum c_j^2 = {fmt(theta.variance_ratio)}",
        f"pi weights (P = {filt.truncation_P}{', lag cap reached' if filt.capped else ''}, "
        f"tail = {fmt(filt.truncation_error)}):",
    ]
    lines += [f"  pi_{j} = {fmt(b)}" for j, b in enumerate(filt.weights)]
    return "\n".join(lines) + "\n"


def run_factorize(cfg: dict, out_dir: Path | None) -> str:
    text = factorize_report(cfg["contract_days"], cfg["days_per_period"])
    if out_dir is not None:
        _write(out_dir / "report.txt", text)
    return text


# --- argument parsing ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV with date, spot and forward columns")
    p.add_argument("--design", default="hh", help="fama or hh (default hh)")
    p.add_argument("--k", type=int, default=4, help="horizon in sampling periods (default 4)")
    p.add_argument("--methods", default=None, help="comma-separated methods, e.g. ols,nw,rdynreg")
    p.add_argument("--date-col", default="date")
    p.add_argument("--spot-col", default="spot")
    p.add_argument("--forward-col", default="forward")
    p.add_argument("--date-format", default=None, help="strptime pattern (default ISO or MM/DD/YYYY)")
    p.add_argument("--contract-days", type=int, default=22)
    p.add_argument("--days-per-period", type=int, default=5)
    p.add_argument("--p-max", type=int, default=DEFAULT_P_MAX)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynuip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate beta by every method on one data set")
    _add_data_args(p)
    p.add_argument("--p", type=int, default=None, help="fixed DynReg lag order (default BIC)")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("simulate", help="Monte Carlo size and power experiment")
    p.add_argument("--config", required=True, help="key = value configuration file")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("roll", help="rolling-window estimates with 95%% bands")
    _add_data_args(p)
    p.add_argument("--window", type=int, default=260)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("factorize", help="MA factorization and inverse filter of the overlap")
    p.add_argument("contract_days", type=int, nargs="?", default=22)
    p.add_argument("days_per_period", type=int, nargs="?", default=5)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("kv-table", help="regenerate the fixed-b critical-value table")
    p.add_argument("--paths", type=int, default=50_000)
    p.add_argument("--steps", type=int, default=2_000)
    p.add_argument("--seed", type=int, default=20_240_101)
    p.add_argument("--out", required=True, help="CSV path to write")

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None, help="default: the manifest's directory")
    return parser


def _config_from_args(args) -> tuple[dict, list]:
    """Resolved command configuration (what the manifest records) and input files."""
    if args.command in ("estimate", "roll"):
        cfg = {key: getattr(args, key) for key in
               ("data", "design", "k", "methods", "date_col", "spot_col", "forward_col", "date_format",
                "contract_days", "days_per_period", "p_max")}
        cfg["data"] = str(Path(args.data).resolve())
        if args.command == "estimate":
            cfg["p"] = args.p
        else:
            cfg["window"], cfg["step"] = args.window, args.step
        try:
            cfg["design"] = Design.parse(cfg["design"]).value
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return cfg, [cfg["data"]]
    if args.command == "simulate":
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} not found")
        cfg = parse_config_text(path.read_text(encoding="utf-8"))
        if args.seed is not None:
            cfg["seed"] = args.seed
        inputs = [str(path.resolve())]
        if "spot_csv" in cfg:
            cfg["spot_csv"] = str(Path(cfg["spot_csv"]).resolve())
            inputs.append(cfg["spot_csv"])
        return cfg, inputs
    if args.command == "factorize":
        if args.contract_days <= 0 or args.days_per_period <= 0:
            raise UsageError("contract_days and days_per_period must be positive integers")
        return {"contract_days": args.contract_days, "days_per_period": args.days_per_period}, []
    raise UsageError(f"unknown command {args.command}")


def execute(command: str, cfg: dict, inputs, out_dir: Path | None) -> str | None:
    """Run one command with a resolved configuration and write its manifest."""
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    printed = None
    if command == "estimate":
        run_estimate(cfg, out_dir)
    elif command == "simulate":
        run_simulate(cfg, out_dir)
    elif command == "roll":
        run_roll(cfg, out_dir)
    elif command == "factorize":
        printed = run_factorize(cfg, out_dir)
    else:
        raise UsageError(f"unknown command {command!r}")
    if out_dir is not None:
        write_manifest(out_dir, command, cfg, inputs, cfg.get("seed"))
    return printed


def replay(manifest_path, out_dir=None) -> None:
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        command, cfg = manifest["command"], manifest["config"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    for name, digest in manifest.get("inputs", {}).items():
        if not Path(name).exists():
            raise DataError("input recorded in manifest is missing", path=name)
        if _sha256(name) != digest:
            warnings.warn(f"{name} changed since the manifest was written", UserWarning, stacklevel=2)
    out = Path(out_dir) if out_dir is not None else path.parent
    text = execute(command, cfg, list(manifest.get("inputs", {})), out)
    if text:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s", stream=sys.stderr)
        if args.command == "kv-table":
            from .hac import simulate_kv_table

            table = simulate_kv_table(args.paths, args.steps, args.seed)
            _write(Path(args.out), table.to_csv())
            return EXIT_OK
        if args.command == "replay":
            replay(args.manifest, args.out_dir)
            return EXIT_OK
        cfg, inputs = _config_from_args(args)
        out_dir = Path(args.out_dir) if args.out_dir is not None else None
        text = execute(args.command, cfg, inputs, out_dir)
        if text:
            sys.stdout.write(text)
        return EXIT_OK
    except (UsageError, ConfigError) as exc:
        print(f"dynuip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dynuip: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InfeasibleError, DegenerateRegressorError, RankDeficiencyError) as exc:
        print(f"dynuip: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"dynuip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

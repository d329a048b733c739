"""Command-line front end.

``rydcoh run KIND`` runs one canned experiment from a JSON config or a
preset and writes ``result.csv``, an optional ``fit.csv`` and
``plot.svg``, and ``manifest.json`` into ``--out``. ``rydcoh fit`` fits a
model to a CSV of ``x,y[,y_err]`` and ``rydcoh budget`` completes a
coherence budget from measured times.

Exit codes: 0 success, 2 invalid config or arguments, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .analysis import (
    CoherenceBudget,
    FitError,
    FitResult,
    InconsistentBudgetError,
    extract_coherence,
    fit_cosine,
    fit_damped_cosine,
    fit_exponential_decay,
    fit_gaussian_decay,
    fit_inverse_sqrt,
    fit_line,
    fit_parabola,
    fit_pi_train,
    fit_ramsey_kuhr,
    stderr_weights,
    t2_prime_from_echo,
)
from .analysis import models as _models
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    run_bell_sequence,
    run_control_fringe,
    run_cz_detuning_scan,
    run_cz_gate,
    run_cz_temperature_sweep,
    run_scan,
)
from .noise import ShotError
from .presets import PRESETS, load_preset
from .units import UnitError, parse_quantity

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

# subcommand -> (experiment kind, default preset)
KIND_ALIASES = {
    "rabi-gr": ("RabiScan", "fig3a"),
    "ramsey-gg": ("GroundRamsey", "fig2b"),
    "ramsey-gr": ("GrRamsey", "fig4a"),
    "echo": ("SpinEcho", "fig4a"),
    "t1": ("T1TwoPi", "fig4b"),
    "pi-train": ("PiTrain", "fig3b"),
    "control-fringe": ("ControlFringe", "fig5"),
    "cz-gate": ("CzGate", "fig6"),
    "cz-scan": ("CzDetuningScan", "fig6"),
    "temperature-sweep": ("TemperatureSweep", "fig7"),
    "bell": ("BellSequence", "bell"),
}

SAMPLE_DATA = Path(__file__).with_name("data") / "kuhr_fringe.csv"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- fit models -------------------------------------------------------------


@dataclass(frozen=True)
class FitModel:
    fit: Callable
    curve: Callable | None = None  # (x, params) -> y, for plotting
    envelope: Callable | None = None


def _curve(model):
    return lambda x, p: model.func(np.asarray(x, dtype=float), np.array([p[n] for n in model.params]))


def _exp_envelope(x, p):
    return p["offset"] + p["A"] * np.exp(-np.asarray(x) / p["tau"])


def _gauss_envelope(x, p):
    return p["offset"] + p["A"] * np.exp(-((np.asarray(x) / p["tau"]) ** 2))


FIT_MODELS: dict[str, FitModel] = {
    "damped-cosine": FitModel(
        lambda x, y, s: fit_damped_cosine(x, y, sigma=s), _curve(_models.DAMPED_COSINE), _exp_envelope
    ),
    "damped-cosine-gauss": FitModel(
        lambda x, y, s: fit_damped_cosine(x, y, sigma=s, envelope="gauss"),
        _curve(_models.DAMPED_COSINE_GAUSS),
        _gauss_envelope,
    ),
    "cosine": FitModel(lambda x, y, s: fit_cosine(x, y, sigma=s), _curve(_models.COSINE)),
    "exp-decay": FitModel(lambda x, y, s: fit_exponential_decay(x, y, sigma=s), _curve(_models.EXPONENTIAL)),
    "exp-decay-zero": FitModel(
        lambda x, y, s: fit_exponential_decay(x, y, sigma=s, offset_fixed=0.0), _curve(_models.EXPONENTIAL)
    ),
    "gauss-decay": FitModel(lambda x, y, s: fit_gaussian_decay(x, y, sigma=s), _curve(_models.GAUSSIAN_DECAY)),
    "gauss-decay-zero": FitModel(
        lambda x, y, s: fit_gaussian_decay(x, y, sigma=s, offset_fixed=0.0), _curve(_models.GAUSSIAN_DECAY)
    ),
    "kuhr": FitModel(lambda x, y, s: fit_ramsey_kuhr(x, y, sigma=s), _curve(_models.RAMSEY_KUHR)),
    "pi-train": FitModel(lambda x, y, s: fit_pi_train(x, y, sigma=s), _curve(_models.PI_TRAIN)),
    "parabola": FitModel(
        lambda x, y, s: fit_parabola(x, y, sigma=s),
        lambda x, p: p["a"] * np.asarray(x) ** 2 + p["b"] * np.asarray(x) + p["c"],
    ),
    "line": FitModel(
        lambda x, y, s: fit_line(x, y, sigma=s),
        lambda x, p: p["slope"] * np.asarray(x) + p["intercept"],
    ),
    "inverse-sqrt": FitModel(
        lambda x, y, s: fit_inverse_sqrt(x, y, sigma=s),
        lambda x, p: p["c"] / np.sqrt(np.asarray(x)),
    ),
}


def _fit_params(fit) -> dict[str, float]:
    return fit.params if isinstance(fit, FitResult) else fit.coefficients


def run_fit(name: str, x, y, stderr=None, weighted: bool = True):
    if name not in FIT_MODELS:
        raise CliError(EXIT_CONFIG, f"unknown fit model {name!r}; known: {', '.join(sorted(FIT_MODELS))}")
    sigma = stderr_weights(stderr) if (weighted and stderr is not None) else None
    return FIT_MODELS[name].fit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), sigma)


# -- output -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` via a temporary file in the same directory and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fit_rows(fit) -> list[tuple]:
    """``name, value, sigma`` rows: parameters first, then quality figures."""
    if isinstance(fit, FitResult):
        rows = [(k, fit.params[k], fit.sigmas[k]) for k in fit.params]
        rows += [
            ("residual_norm", fit.residual_norm, ""),
            ("reduced_chi2", fit.reduced_chi2, ""),
            ("converged", fit.converged, ""),
        ]
        if fit.flags:
            rows.append(("flags", ";".join(sorted(fit.flags)), ""))
        return rows
    rows = [(k, fit.coefficients[k], fit.sigmas[k]) for k in fit.coefficients]
    rows += [("residual_norm", fit.residual_norm, ""), ("r_squared", fit.r_squared, "")]
    return rows


def write_fit_csv(path: Path, fit) -> None:
    atomic_write(path, _csv_text(("name", "value", "sigma"), fit_rows(fit)))


def write_plot(path: Path, x, y, err, fit=None, model: str | None = None, xlabel="scan_value", ylabel="mean"):
    """Scatter with error bars, the fitted curve and its envelope as SVG.

    Returns False when matplotlib is unavailable.
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(x, y, yerr=err, fmt="o", ms=3, capsize=2, label="data")
    if fit is not None and model is not None:
        spec = FIT_MODELS[model]
        xs = np.linspace(np.min(x), np.max(x), 400)
        p = _fit_params(fit)
        if spec.curve is not None:
            ax.plot(xs, spec.curve(xs, p), "-", label=f"{model} fit")
        if spec.envelope is not None:
            ax.plot(xs, spec.envelope(xs, p), "--", lw=0.8, color="gray", label="envelope")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg")
    plt.close(fig)
    atomic_write(path, buf.getvalue())
    return True


# -- run ----------------------------------------------------------------------


@dataclass
class Table:
    """Primary scan table plus any auxiliary tables and summary numbers."""

    x: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    extra: dict[str, tuple[tuple, list]]
    summary: dict[str, float]
    default_fit: str | None = None


def _resolve_config(args, kind: str, default_preset: str) -> tuple[ExperimentConfig, str]:
    if args.config and args.preset:
        raise CliError(EXIT_CONFIG, "give either --config or --preset, not both")
    if args.config:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read config {args.config}: {exc.strerror or exc}") from None
        source = str(args.config)
    else:
        name = args.preset or default_preset
        if name not in PRESETS:
            raise CliError(EXIT_CONFIG, f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
        cfg = load_preset(name, kind=kind)
        source = f"preset:{name}"
    if cfg.kind != kind:
        raise ConfigError("kind", f"config is a {cfg.kind}, but the subcommand runs {kind}")
    return cfg, source


def _table(cfg: ExperimentConfig, shots, seed: int, workers: int) -> Table:
    kind = cfg.kind
    if kind == "ControlFringe":
        r = run_control_fringe(cfg, n_shots=shots, seed=seed, workers=workers)
        rows = [
            (t, dt, r.fringes[i, j], r.fringe_stderr[i, j])
            for i, t in enumerate(r.t_values)
            for j, dt in enumerate(r.dt_values)
        ]
        c = r.contrast
        return Table(
            c.scan_values,
            c.mean_observable,
            c.standard_error,
            {"fringes.csv": (("T", "dt", "mean", "stderr"), rows)},
            {"n_shots": c.n_shots},
            "exp-decay-zero",
        )
    if kind == "CzGate":
        out = run_cz_gate(cfg)
        summary = {"fidelity": out.fidelity, "error": out.error}
        summary.update({f"leakage_{i}": v for i, v in enumerate(out.leakage)})
        summary.update({"phase_control": out.local_phases[0], "phase_target": out.local_phases[1]})
        x = np.array([cfg.sequence.control_detuning])
        return Table(x, np.array([out.error]), np.zeros(1), {}, summary)
    if kind == "CzDetuningScan":
        r = run_cz_detuning_scan(cfg, seed=seed)
        return Table(r.scan_values, r.mean_observable, r.standard_error, {}, {"n_shots": 1}, "parabola")
    if kind == "TemperatureSweep":
        r = run_cz_temperature_sweep(cfg, n_shots=shots, seed=seed, workers=workers)
        law = r.error_law()
        summary = {
            "error_law_coefficient": law.coefficient,
            "error_law_sigma": law.sigma,
            "t2_star_inverse_sqrt_r2": r.t2_fit().r_squared,
            "error_linear_r2": r.error_fit().r_squared,
            "n_shots": r.n_shots,
        }
        rows = list(zip(r.temperatures, r.t2_star, r.t2_star_sigma))
        return Table(
            r.temperatures,
            r.error,
            r.error_stderr,
            {"t2_star.csv": (("temperature", "t2_star", "sigma"), rows)},
            summary,
            "line",
        )
    if kind == "BellSequence":
        r = run_bell_sequence(cfg, n_shots=shots, seed=seed, workers=workers)
        summary = {
            "p00": r.p00,
            "p11": r.p11,
            "parity_contrast": r.parity_contrast,
            "parity_contrast_sigma": r.parity_contrast_sigma,
            "bell_fidelity": r.fidelity,
            "n_shots": r.parity.n_shots,
        }
        p = r.parity
        return Table(p.scan_values, p.mean_observable, p.standard_error, {}, summary)
    r = run_scan(cfg, n_shots=shots, seed=seed, workers=workers)
    return Table(r.scan_values, r.mean_observable, r.standard_error, {}, {"n_shots": r.n_shots})


def cmd_run(args) -> int:
    kind, default_preset = KIND_ALIASES[args.kind]
    cfg, source = _resolve_config(args, kind, default_preset)
    seed = cfg.seed if args.seed is None else args.seed
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc.strerror or exc}") from None

    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    table = _table(cfg, args.shots, seed, args.workers)

    fit = None
    model = args.fit
    if model is not None:
        fit = run_fit(model, table.x, table.mean, table.stderr, weighted=args.weighted)

    written = []
    atomic_write(
        out / "result.csv",
        _csv_text(("scan_value", "mean", "stderr"), zip(table.x, table.mean, table.stderr)),
    )
    written.append("result.csv")
    for name, (header, rows) in table.extra.items():
        atomic_write(out / name, _csv_text(header, rows))
        written.append(name)
    if fit is not None:
        write_fit_csv(out / "fit.csv", fit)
        written.append("fit.csv")
    if args.plot:
        if write_plot(out / "plot.svg", table.x, table.mean, table.stderr, fit, model, cfg.scan.variable if cfg.scan else "scan_value"):
            written.append("plot.svg")
        else:
            print("warning: matplotlib not installed, skipping plot", file=sys.stderr)

    manifest = {
        "tool": "rydcoh",
        "tool_version": __version__,
        "kind": kind,
        "source": source,
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "shots": table.summary.get("n_shots"),
        "workers": args.workers,
        "fit_model": model,
        "summary": {k: v for k, v in table.summary.items()},
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": written + ["manifest.json"],
        "config": cfg.to_dict(),
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")

    print(f"{kind}: wrote {', '.join(written)} to {out}")
    for k, v in table.summary.items():
        print(f"  {k} = {_fmt(v)}")
    if fit is not None:
        for name, value, sigma in fit_rows(fit):
            print(f"  fit.{name} = {_fmt(value)}" + (f" +/- {_fmt(sigma)}" if sigma != "" else ""))
    return EXIT_OK


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# -- fit ----------------------------------------------------------------------


def read_xy(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Read ``x,y[,y_err]`` columns; a header row is skipped if present."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise CliError(EXIT_CONFIG, f"{path}: no data rows")
    width = len(rows[0])
    if width not in (2, 3) or any(len(r) != width for r in rows):
        raise CliError(EXIT_CONFIG, f"{path}: expected 2 or 3 columns (x, y[, y_err]) on every row")
    try:
        data = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"{path}: {exc}") from None
    err = data[:, 2] if width == 3 else None
    return data[:, 0], data[:, 1], err


def cmd_fit(args) -> int:
    if args.model not in FIT_MODELS:
        raise CliError(EXIT_CONFIG, f"unknown fit model {args.model!r}; known: {', '.join(sorted(FIT_MODELS))}")
    path = SAMPLE_DATA if args.data == "sample" else Path(args.data)
    x, y, err = read_xy(path)
    fit = run_fit(args.model, x, y, err, weighted=not args.unweighted)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc.strerror or exc}") from None
    write_fit_csv(out / "fit.csv", fit)
    if args.plot and not write_plot(out / "plot.svg", x, y, err, fit, args.model, "x", "y"):
        print("warning: matplotlib not installed, skipping plot", file=sys.stderr)
    weighting = "weighted by y_err" if (err is not None and not args.unweighted) else "unweighted"
    print(f"{args.model} fit of {path} ({weighting}):")
    for name, value, sigma in fit_rows(fit):
        print(f"  {name} = {_fmt(value)}" + (f" +/- {_fmt(sigma)}" if sigma != "" else ""))
    return EXIT_OK


# -- budget -------------------------------------------------------------------


def _time(value: str | None, flag: str) -> float | None:
    if value is None:
        return None
    try:
        return parse_quantity(value, "time")
    except UnitError as exc:
        raise CliError(EXIT_CONFIG, f"{flag}: {exc}") from None


def cmd_budget(args) -> int:
    v = {
        "tau_gr": _time(args.tau_gr, "--tau-gr"),
        "t2_spin_echo": _time(args.t2_echo, "--t2-echo"),
        "t1": _time(args.t1, "--t1"),
        "t2_star": _time(args.t2_star, "--t2-star"),
        "t2_prime": _time(args.t2_prime, "--t2-prime"),
    }
    given = {k for k, x in v.items() if x is not None}
    for k in given:
        if not v[k] > 0:
            raise CliError(EXIT_CONFIG, f"{k} must be positive")

    if given == set(v):
        budget = CoherenceBudget(v["t2_star"], v["t2_prime"], v["t1"], v["tau_gr"], v["t2_spin_echo"])
    elif given == {"tau_gr", "t2_spin_echo", "t1"}:
        budget = CoherenceBudget.from_measurements(v["tau_gr"], v["t2_spin_echo"], v["t1"])
    elif given == {"t2_star", "t2_prime", "t1"}:
        budget = CoherenceBudget.from_channels(v["t2_star"], v["t2_prime"], v["t1"])
    elif given == {"t2_spin_echo", "t1"}:
        t2p = t2_prime_from_echo(v["t2_spin_echo"], v["t1"])
        print(f"T2' = {t2p * 1e6:.6g} us  (from T2_echo = {v['t2_spin_echo'] * 1e6:.6g} us, T1 = {v['t1'] * 1e6:.6g} us)")
        return EXIT_OK
    else:
        raise CliError(
            EXIT_CONFIG,
            "give --tau-gr --t2-echo --t1, or --t2-star --t2-prime --t1, "
            "or --t2-echo --t1, or all five",
        )
    if given == set(v):
        # a full budget must also respect the orderings of the measured times
        extract_coherence(budget.tau_gr, budget.t2_spin_echo, budget.t1)

    def us(x):
        return "-" if x is None else f"{x * 1e6:.6g} us"

    print(f"T2*      = {us(budget.t2_star)}")
    print(f"T2'      = {us(budget.t2_prime)}")
    print(f"T1       = {us(budget.t1)}")
    print(f"tau_gr   = {us(budget.tau_gr)}")
    print(f"T2_echo  = {us(budget.t2_spin_echo)}")
    print(f"residual = {budget.residual:.3g}")
    if budget.echo_residual is not None:
        print(f"echo residual = {budget.echo_residual:.3g}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydcoh", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"rydcoh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a canned experiment")
    run.add_argument("kind", choices=sorted(KIND_ALIASES))
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
    run.add_argument("--seed", type=int, default=None, help="RNG seed (default: config seed, 0)")
    run.add_argument("--shots", type=int, default=None, help="Monte-Carlo shots (default: config)")
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.add_argument("--plot", action="store_true", help="also write plot.svg (needs matplotlib)")
    run.add_argument("--fit", metavar="MODEL", help=f"fit result.csv ({', '.join(sorted(FIT_MODELS))})")
    run.add_argument("--weighted", action="store_true", help="weight the fit by the shot standard errors")
    run.add_argument("--workers", type=int, default=1, help="worker processes for the shot loop")
    run.set_defaults(func=cmd_run)

    fit = sub.add_parser("fit", help="fit a model to x,y[,y_err] CSV data")
    fit.add_argument("data", help="CSV path, or 'sample' for the bundled Ramsey fringe")
    fit.add_argument("model", help=f"one of {', '.join(sorted(FIT_MODELS))}")
    fit.add_argument("--out", default="out")
    fit.add_argument("--unweighted", action="store_true", help="ignore a y_err column")
    fit.add_argument("--plot", action="store_true")
    fit.set_defaults(func=cmd_fit)

    budget = sub.add_parser("budget", help="complete a coherence budget (times with units, e.g. 57us)")
    for flag in ("--tau-gr", "--t2-echo", "--t1", "--t2-star", "--t2-prime"):
        budget.add_argument(flag)
    budget.set_defaults(func=cmd_budget)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "shots", None) is not None and args.shots < 1:
        parser.error("--shots must be >= 1")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InconsistentBudgetError, UnitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitError, ShotError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands: ``synth``, ``featurize``, ``ensemble``, ``calibrate``,
``evaluate``.  Experiment-scale commands are driven by a JSON config
file and write a resolved config echo (all seeds explicit, package
version included) next to their outputs; re-running from the echo
reproduces every output byte for byte.

Exit codes: 0 success, 2 usage, 3 dataset/parse failure, 4 backend
failure, 5 validation failure.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from importlib.metadata import version as _dist_version
from pathlib import Path

import click
import numpy as np

from . import data as dataio
from .backends import make_backend
from .ensemble import run_experiment
from .errors import (
    BackendError,
    ConstantInputError,
    DatasetError,
    MetricError,
    ModelRunError,
    OligoIcpError,
    SequenceError,
)
from .evaluation import (
    coverage_curve,
    grid_levels,
    mae,
    pearson,
    write_coverage_csv,
    write_json,
)
from .features import feature_names, featurize_records

EXIT_PARSE = 3
EXIT_BACKEND = 4
EXIT_VALIDATION = 5


def _package_version() -> str:
    try:
        return _dist_version("oligoicp")
    except Exception:
        return "unknown"


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ModelRunError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_BACKEND if isinstance(exc.cause, BackendError) else EXIT_VALIDATION)
        except DatasetError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_PARSE)
        except BackendError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_BACKEND)
        except (SequenceError, MetricError, OligoIcpError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


@click.group()
@click.version_option(_package_version(), prog_name="oligoicp")
def main():
    """siRNA efficacy prediction with quantile backends and
    uncertainty-guided ensemble selection."""


@main.command()
@click.argument("output", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--n", default=500, show_default=True, help="Number of records.")
@click.option("--targets", default=10, show_default=True, help="Number of target subsets.")
@click.option("--noise", default="homoscedastic:0.1", show_default=True,
              help="Noise profile, e.g. homoscedastic:0.1 | two_regime:0.05,0.5 | per_target:0.02,0.8")
@click.option("--seed", default=0, show_default=True)
@click.option("--x-pad-fraction", default=0.0, show_default=True,
              help="Fraction of records with X-padded context edges.")
@_handle_errors
def synth(output, n, targets, noise, seed, x_pad_fraction):
    """Generate a seeded synthetic dataset CSV."""
    profile = dataio.parse_noise_profile(noise)
    records = dataio.generate_synthetic(
        n, targets, noise_profile=profile, seed=seed, x_pad_fraction=x_pad_fraction
    )
    dataio.save_dataset(records, output)
    click.echo(f"wrote {len(records)} records to {output}")


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("output", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--strict/--lenient", default=True, show_default=True,
              help="Abort on the first bad row, or skip bad rows with a report.")
@_handle_errors
def featurize(input_path, output, strict):
    """Featurize a dataset CSV into a 574-column feature matrix CSV."""
    loaded = dataio.load_dataset(input_path, strict=strict)
    for skip in loaded.skipped:
        click.echo(f"skipped line {skip.line}: {skip.reason}", err=True)
    matrix = featurize_records(loaded.records)
    header = feature_names() + ["efficacy", "target_id", "source_id"]
    with open(output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, record in zip(matrix, loaded.records):
            writer.writerow(
                [repr(float(v)) for v in row]
                + [repr(float(record.efficacy)), record.target_id, record.source_id]
            )
    click.echo(f"wrote {matrix.shape[0]}x{matrix.shape[1]} feature matrix to {output}")


def _load_config(path: Path, defaults: dict, overrides: dict) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"config {path} must be a JSON object")
    config = dict(defaults)
    config.update({k: v for k, v in raw.items() if k in defaults})
    config.update({k: v for k, v in overrides.items() if v is not None})
    # Paths resolve relative to the config file so an echo re-runs anywhere.
    for key in ("dataset", "test_dataset", "output_dir"):
        if config.get(key):
            config[key] = str((path.parent / config[key]).resolve())
    return config


def _echo_config(config: dict, output_dir: Path) -> None:
    payload = dict(config)
    payload["version"] = _package_version()
    write_json(output_dir / "config_echo.json", payload)


def _build_backend(config: dict):
    params = config.get("backend_params") or {}
    return make_backend(
        config["backend"],
        n_neighbors=int(params.get("n_neighbors", 64)),
        bandwidth=params.get("bandwidth"),
        timeout=float(params.get("timeout", 600.0)),
    )


ENSEMBLE_DEFAULTS = {
    "dataset": None,
    "test_dataset": None,
    "n_models": 400,
    "k_max": 20,
    "fraction": 0.10,
    "n_repeats": 3,
    "seeds": 0,
    "backend": "builtin",
    "backend_params": {},
    "quantile_levels": [0.15, 0.85],
    "workers": 1,
    "strict": True,
    "on_model_error": "abort",
    "output_dir": "ensemble_out",
}


@main.command(name="ensemble")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--backend", default=None, help="Override the configured backend.")
@click.option("--workers", default=None, type=int, help="Override the worker limit.")
@click.option("--seed", default=None, type=int, help="Override the base seed.")
@click.option("--strict/--lenient", "strict", default=None,
              help="Override the configured ingestion mode.")
@click.option("--output-dir", default=None, type=click.Path(file_okay=False),
              help="Override the output directory.")
@_handle_errors
def ensemble_cmd(config_path, backend, workers, seed, strict, output_dir):
    """Run the subset-ensemble experiment described by a JSON config."""
    config = _load_config(
        config_path,
        ENSEMBLE_DEFAULTS,
        {"backend": backend, "workers": workers, "seeds": seed, "strict": strict,
         "output_dir": str(Path(output_dir).resolve()) if output_dir else None},
    )
    if not config["dataset"] or not config["test_dataset"]:
        raise ValueError("config requires 'dataset' and 'test_dataset'")
    from .ensemble import resolve_repeat_seeds

    config["seeds"] = resolve_repeat_seeds(config["seeds"], int(config["n_repeats"]))
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    train = dataio.load_dataset(config["dataset"], strict=config["strict"])
    test = dataio.load_dataset(config["test_dataset"], strict=config["strict"])
    features = featurize_records(train.records)
    test_features = featurize_records(test.records)

    backend_obj = _build_backend(config)
    try:
        report = run_experiment(
            train.pool,
            features,
            train.labels,
            test_features,
            test.labels,
            n_models=int(config["n_models"]),
            n_repeats=int(config["n_repeats"]),
            k_max=int(config["k_max"]),
            fraction=float(config["fraction"]),
            backend=backend_obj,
            quantile_levels=tuple(float(q) for q in config["quantile_levels"]),
            seeds=config["seeds"],
            workers=int(config["workers"]),
            on_error=config["on_model_error"],
        )
    finally:
        close = getattr(backend_obj, "close", None)
        if close is not None:
            close()

    _echo_config(config, out_dir)
    write_json(out_dir / "report.json", report.as_dict())
    _write_metrics_csv(report, int(config["n_repeats"]), out_dir / "metrics.csv")
    _write_selected_csv(report, out_dir / "selected_models.csv")
    click.echo(f"wrote ensemble report to {out_dir}")


def _write_metrics_csv(report, n_repeats: int, path: Path) -> None:
    def fmt(v):
        return "" if v is None else repr(v)

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if n_repeats == 1:
            writer.writerow(["strategy", "mae", "corr"])
            for name, s in report.summary.items():
                writer.writerow([name, fmt(s.mae_mean), fmt(s.corr_mean)])
        else:
            writer.writerow(["strategy", "mae_mean", "mae_ci95", "corr_mean", "corr_ci95"])
            for name, s in report.summary.items():
                writer.writerow(
                    [name, fmt(s.mae_mean), fmt(s.mae_ci95), fmt(s.corr_mean), fmt(s.corr_ci95)]
                )


def _write_selected_csv(report, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repeat_index", "model_index"])
        for repeat in report.repeats:
            top = repeat.strategies["top_fraction_mean"]
            for idx in top.selected_model_indices:
                writer.writerow([repeat.repeat_index, idx])


CALIBRATE_DEFAULTS = {
    "dataset": None,
    "train_fraction": 0.7,
    "seed": 0,
    "coverages": [round(i / 10, 10) for i in range(1, 10)],
    "backend": "builtin",
    "backend_params": {},
    "strict": True,
    "output_dir": "calibration_out",
}


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--backend", default=None, help="Override the configured backend.")
@click.option("--seed", default=None, type=int, help="Override the split seed.")
@click.option("--strict/--lenient", "strict", default=None,
              help="Override the configured ingestion mode.")
@click.option("--output-dir", default=None, type=click.Path(file_okay=False),
              help="Override the output directory.")
@_handle_errors
def calibrate(config_path, backend, seed, strict, output_dir):
    """Coverage calibration on a seeded train/test split."""
    config = _load_config(
        config_path,
        CALIBRATE_DEFAULTS,
        {"backend": backend, "seed": seed, "strict": strict,
         "output_dir": str(Path(output_dir).resolve()) if output_dir else None},
    )
    if not config["dataset"]:
        raise ValueError("config requires 'dataset'")
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    loaded = dataio.load_dataset(config["dataset"], strict=config["strict"])
    matrix = featurize_records(loaded.records)
    labels = loaded.labels
    n = len(loaded.records)
    perm = np.random.default_rng(int(config["seed"])).permutation(n)
    n_train = int(round(config["train_fraction"] * n))
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    coverages = tuple(float(c) for c in config["coverages"])
    levels = grid_levels(coverages)
    backend_obj = _build_backend(config)
    try:
        prediction = backend_obj.quantile_predict(
            matrix[train_idx], labels[train_idx], matrix[test_idx], levels,
            seed=int(config["seed"]),
        )
    finally:
        close = getattr(backend_obj, "close", None)
        if close is not None:
            close()
    curve = coverage_curve(prediction.quantiles, labels[test_idx], coverages)

    widest = max(coverages)
    lo, hi = (1 - widest) / 2, 1 - (1 - widest) / 2
    band = prediction.iqr(round(lo, 10), round(hi, 10))
    near_degenerate = bool(np.median(band) < 1e-9)

    _echo_config(config, out_dir)
    write_coverage_csv(curve, out_dir / "coverage.csv")
    write_json(
        out_dir / "coverage.json",
        {
            "points": [
                {"expected": p.expected, "lower": p.lower, "upper": p.upper,
                 "empirical": p.empirical, "n": p.n}
                for p in curve.points
            ],
            "max_deviation": curve.max_deviation(),
            "near_degenerate_bands": near_degenerate,
            "n_train": int(len(train_idx)),
            "n_test": int(len(test_idx)),
        },
    )
    click.echo(f"wrote coverage curve to {out_dir}")


def _read_column(path: Path, candidates: tuple[str, ...]) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        name = next((c for c in candidates if c in fields), None)
        if name is None and len(fields) == 1:
            name = fields[0]
        if name is None:
            raise ValueError(f"{path} needs one of the columns {candidates} (got {fields})")
        values = [float(row[name]) for row in reader]
    return np.asarray(values)


@main.command()
@click.argument("predictions", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("truth", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Metrics JSON path (default: stdout).")
@_handle_errors
def evaluate(predictions, truth, output):
    """MAE and Pearson correlation between prediction and truth files."""
    pred = _read_column(predictions, ("prediction", "mean"))
    true = _read_column(truth, ("efficacy", "truth"))
    payload: dict = {"n": int(pred.size), "mae": mae(pred, true)}
    try:
        payload["corr"] = pearson(pred, true)
        payload["corr_status"] = "ok"
    except ConstantInputError:
        payload["corr"] = None
        payload["corr_status"] = "constant_input"
    if output is None:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        write_json(output, payload)
        click.echo(f"wrote metrics to {output}")


if __name__ == "__main__":
    main()

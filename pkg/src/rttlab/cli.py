"""Command-line pipeline: ingest, train, select, fine-tune, generate, emulate.

All randomness derives from the global ``--seed`` flag, fanned out
deterministically per stage, so reruns with identical inputs and seeds
reproduce identical artifacts. ``--config`` points at a JSON file whose
keys provide defaults for the same-named options; explicit flags win.
"""

from __future__ import annotations

import json
import sys
import zlib
from pathlib import Path

import click
import numpy as np

from . import library as libmod
from .emulation import DelayProfile, PingSchedule, evaluate_accuracy, run_emulation
from .errors import RttlabError
from .generate import GenerationSpec, generate
from .lstm import LstmArchitecture
from .metrics import smape
from .model_io import LstmModel, ModelMetadata, load_model_file, save_model_file
from .trace import RttTrace, SplitSpec, Standardizer, load_trace, save_trace, split
from .training import HyperGrid, TrainConfig, grid_report_csv, grid_search
from .transfer import FreezeSpec, fine_tune

TARGET_SIZE_GUIDELINE = 6000


def stage_seed(seed: int, stage: str) -> int:
    """Deterministic per-stage child seed from the global seed."""
    return int(np.random.SeedSequence([seed, zlib.crc32(stage.encode())]).generate_state(1)[0])


def _load_config(path):
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read config file: {exc}")
    if not isinstance(data, dict):
        raise click.ClickException("config file must hold a JSON object")
    return data


def _cfg(ctx, name, cli_value, default):
    """Resolve option precedence: explicit flag > config file > default."""
    if cli_value is not None:
        return cli_value
    return ctx.obj["config"].get(name, default)


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise click.ClickException(f"expected a comma-separated integer list, got {text!r}")


def _out_path(ctx, explicit, default_name):
    if explicit:
        return Path(explicit)
    return Path(ctx.obj["out_dir"]) / default_name


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Global RNG seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".", show_default=True, help="Directory for default-named outputs.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON file with option defaults.")
@click.pass_context
def main(ctx, seed, out_dir, config_path):
    """Cloud access-time modeling, transfer learning, and delay replay."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["out_dir"] = out_dir
    ctx.obj["config"] = _load_config(config_path)


@main.command("train-source")
@click.argument("trace_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--model-out", type=click.Path(dir_okay=False), default=None, help="Where to write the trained model.")
@click.option("--report-out", type=click.Path(dir_okay=False), default=None, help="Where to write the grid report CSV.")
@click.option("--layers", default=None, help="Comma-separated stacked layer counts.")
@click.option("--hidden", default=None, help="Comma-separated hidden unit counts.")
@click.option("--batch-sizes", default=None, help="Comma-separated batch sizes.")
@click.option("--epoch-grid", default=None, help="Comma-separated epoch counts.")
@click.option("--train-fraction", type=float, default=None)
@click.option("--context", default=None, help="Context label; defaults to the trace file stem.")
@click.pass_context
def cmd_train_source(ctx, trace_file, model_out, report_out, layers, hidden, batch_sizes, epoch_grid, train_fraction, context):
    """Grid-search source-model training on a measured trace."""
    try:
        trace = load_trace(trace_file, context=context)
        fraction = float(_cfg(ctx, "train_fraction", train_fraction, 0.8))
        grid = HyperGrid(
            layer_counts=_int_list(_cfg(ctx, "layers", layers, "1,2")),
            hidden_units=_int_list(_cfg(ctx, "hidden", hidden, "8,16")),
            batch_sizes=_int_list(_cfg(ctx, "batch_sizes", batch_sizes, "16")),
            epoch_counts=_int_list(_cfg(ctx, "epoch_grid", epoch_grid, "400,500,600,700")),
        )
        train_ms, test_ms = split(trace.samples, SplitSpec(fraction))
        train_std = Standardizer.fit(train_ms)
        test_std = Standardizer.fit(test_ms)
        rng = np.random.default_rng(stage_seed(ctx.obj["seed"], "train-source"))
        result = grid_search(
            train_std.transform(train_ms),
            test_std.transform(test_ms),
            grid,
            rng,
            test_standardizer=test_std,
        )
        best = min(
            (r for r in result.rows if r.error is None),
            key=lambda r: (r.test_mse, r.layers, r.hidden, r.batch, r.epochs),
        )
        model = LstmModel(
            arch=result.arch,
            weights=result.weights,
            standardizer=train_std,
            metadata=ModelMetadata(
                context=trace.context,
                training_length=len(train_ms),
                test_smape=best.test_smape,
            ),
        )
        model_path = _out_path(ctx, model_out, f"{libmod._slug(trace.context)}.lstm.json")
        save_model_file(model_path, model)
        report_path = _out_path(ctx, report_out, f"{libmod._slug(trace.context)}.grid.csv")
        _write(report_path, grid_report_csv(result.rows))
    except (RttlabError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"model: {model_path}")
    click.echo(f"report: {report_path}")
    click.echo(
        f"selected L={result.arch.num_layers} N={result.arch.hidden_units} "
        f"B={result.config.batch_size} epochs={result.config.epochs} "
        f"test_mse={best.test_mse:.6g} test_smape={best.test_smape:.4g}%"
    )


@main.group("library")
def library_group():
    """Manage the pre-trained source model library."""


@library_group.command("add")
@click.option("--library", "library_dir", type=click.Path(file_okay=False), required=True)
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--trace", "trace_file", type=click.Path(exists=True, dir_okay=False), required=True, help="Source trace; its test split becomes the DTW fingerprint.")
@click.option("--train-fraction", type=float, default=None)
@click.pass_context
def cmd_library_add(ctx, library_dir, model_file, trace_file, train_fraction):
    """Add a trained model plus its source-trace fingerprint to a library."""
    try:
        model = load_model_file(model_file)
        trace = load_trace(trace_file)
        fraction = float(_cfg(ctx, "train_fraction", train_fraction, 0.8))
        _, test_ms = split(trace.samples, SplitSpec(fraction))
        fingerprint = Standardizer.fit(test_ms).transform(test_ms)
        try:
            library = libmod.ModelLibrary.load(library_dir)
        except RttlabError:
            library = libmod.ModelLibrary()
        library.add(model, fingerprint)
        library.save(library_dir)
    except (RttlabError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"added {model.metadata.context!r} ({len(library)} entries)")


@library_group.command("list")
@click.option("--library", "library_dir", type=click.Path(exists=True, file_okay=False), required=True)
def cmd_library_list(library_dir):
    """List library entries in insertion order."""
    try:
        library = libmod.ModelLibrary.load(library_dir)
    except (RttlabError, OSError) as exc:
        raise click.ClickException(str(exc))
    for entry in library.entries:
        arch = entry.model.arch
        click.echo(
            f"{entry.context}\tL={arch.num_layers} N={arch.hidden_units}\t"
            f"fingerprint={entry.fingerprint.size} pts"
        )
    if not library.entries:
        click.echo("(empty library)")


@main.command("select")
@click.argument("target_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--library", "library_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--report-out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def cmd_select(ctx, target_file, library_dir, report_out):
    """Pick the closest source model for a target sample by normalized DTW."""
    try:
        library = libmod.ModelLibrary.load(library_dir)
        target = load_trace(target_file)
        result = libmod.select_source(library, target)
        payload = {
            "selected_context": result.entry.context,
            "normalized_dtw": result.distance.normalized,
            "distances": {
                entry.context: value
                for entry, value in zip(library.entries, result.all_normalized)
            },
        }
        text = json.dumps(payload, indent=1) + "\n"
        if report_out:
            _write(Path(report_out), text)
    except (RttlabError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(text, nl=False)


@main.command("finetune")
@click.argument("target_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--library", "library_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--model-out", type=click.Path(dir_okay=False), default=None)
@click.option("--report-out", type=click.Path(dir_okay=False), default=None)
@click.option("--freeze", "k_frozen", type=int, default=None, help="How many initial LSTM layers to freeze.")
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--train-fraction", type=float, default=None)
@click.pass_context
def cmd_finetune(ctx, target_file, library_dir, model_out, report_out, k_frozen, epochs, batch_size, train_fraction):
    """Select a source model by DTW and fine-tune it on the target sample."""
    try:
        library = libmod.ModelLibrary.load(library_dir)
        target = load_trace(target_file)
        warning = None
        if len(target) < TARGET_SIZE_GUIDELINE:
            warning = (
                f"target sample has {len(target)} points; below the "
                f"{TARGET_SIZE_GUIDELINE}-sample guideline, accuracy may degrade"
            )
            click.echo(f"WARNING: {warning}", err=True)
        selection = libmod.select_source(library, target)
        fraction = float(_cfg(ctx, "train_fraction", train_fraction, 0.8))
        train_ms, test_ms = split(target.samples, SplitSpec(fraction))
        train_trace = RttTrace(train_ms, target.interval_ms, target.context)
        test_trace = RttTrace(test_ms, target.interval_ms, target.context)
        config = TrainConfig(
            batch_size=int(_cfg(ctx, "batch_size", batch_size, 16)),
            epochs=int(_cfg(ctx, "epochs", epochs, 700)),
            seed=stage_seed(ctx.obj["seed"], "finetune"),
        )
        freeze = FreezeSpec(int(_cfg(ctx, "k_frozen", k_frozen, 1)))
        model, report = fine_tune(
            selection.entry.model, train_trace, freeze, config, test_trace=test_trace
        )
        model_path = _out_path(ctx, model_out, f"{libmod._slug(target.context)}-finetuned.lstm.json")
        save_model_file(model_path, model)
        payload = {
            "target_context": target.context,
            "target_samples": len(target),
            "source_context": selection.entry.context,
            "normalized_dtw": selection.distance.normalized,
            "k_frozen": freeze.k_frozen,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "test_mse": report.test_mse,
            "test_smape": report.test_smape,
            "warning": warning,
        }
        report_path = _out_path(ctx, report_out, f"{libmod._slug(target.context)}-finetune-report.json")
        _write(report_path, json.dumps(payload, indent=1) + "\n")
    except (RttlabError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"model: {model_path}")
    click.echo(f"report: {report_path}")
    click.echo(
        f"source={selection.entry.context!r} dtw={selection.distance.normalized:.6g} "
        f"test_smape={report.test_smape:.4g}%"
    )


@main.command("generate")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--length", "-m", type=int, default=None, help="Samples to generate.")
@click.option("--seed-value", type=float, default=None, help="Seed RTT in ms; defaults to the median of --target.")
@click.option("--target", "target_file", type=click.Path(exists=True, dir_okay=False), default=None, help="Target sample whose median seeds generation.")
@click.option("--sigma", type=float, default=None, help="ProbAct noise override.")
@click.option("--out-trace", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def cmd_generate(ctx, model_file, length, seed_value, target_file, sigma, out_trace):
    """Generate a synthetic RTT trace from a trained model."""
    try:
        model = load_model_file(model_file)
        if seed_value is None:
            seed_value = ctx.obj["config"].get("seed_value")
        if seed_value is None:
            if target_file is None:
                raise click.ClickException(
                    "need --seed-value or --target to seed generation (the target median)"
                )
            seed_value = float(np.median(load_trace(target_file).samples))
        spec = GenerationSpec(
            length=int(_cfg(ctx, "length", length, 2500)),
            seed_value=float(seed_value),
            rng_seed=stage_seed(ctx.obj["seed"], "generate"),
            sigma=sigma if sigma is not None else ctx.obj["config"].get("sigma"),
        )
        trace = generate(model, spec)
        trace_path = _out_path(ctx, out_trace, "synthetic.csv")
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        save_trace(trace_path, trace)
    except (RttlabError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"trace: {trace_path} ({spec.length} samples)")


@main.command("emulate")
@click.argument("trace_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--pings", type=int, default=None, help="Number of pings in the schedule.")
@click.option("--ping-interval", type=float, default=None, help="Ping spacing in ms.")
@click.option("--ping-offset", type=float, default=None, help="First ping send time in ms.")
@click.option("--runs", type=int, default=None, help="Independent emulation runs.")
@click.option("--update-interval", type=float, default=None, help="Delay update interval in ms.")
@click.option("--reconfig-cost", type=float, default=None, help="Reconfiguration hold in ms.")
@click.option("--uplink-fraction", type=float, default=None)
@click.option("--report-out", type=click.Path(dir_okay=False), default=None)
@click.option("--measured-out", type=click.Path(dir_okay=False), default=None, help="Write the first run's measured RTTs as trace-csv.")
@click.pass_context
def cmd_emulate(ctx, trace_file, pings, ping_interval, ping_offset, runs, update_interval, reconfig_cost, uplink_fraction, report_out, measured_out):
    """Replay a trace through the delay simulator and report accuracy."""
    try:
        trace = load_trace(trace_file)
        runs = int(_cfg(ctx, "runs", runs, 1))
        if runs < 1:
            raise ValueError("runs must be >= 1")
        profile = DelayProfile(
            trace=trace,
            update_interval_ms=float(_cfg(ctx, "update_interval", update_interval, 500.0)),
            reconfig_cost_ms=float(_cfg(ctx, "reconfig_cost", reconfig_cost, 4.0)),
            uplink_fraction=float(_cfg(ctx, "uplink_fraction", uplink_fraction, 0.5)),
        )
        interval = float(_cfg(ctx, "ping_interval", ping_interval, 500.0))
        schedule = PingSchedule.periodic(
            count=int(_cfg(ctx, "pings", pings, 600)),
            interval_ms=interval,
            offset_ms=ping_offset if ping_offset is not None else ctx.obj["config"].get("ping_offset"),
        )
        measured = [run_emulation(profile, schedule) for _ in range(runs)]
        report = evaluate_accuracy(trace, measured)
        report_path = _out_path(ctx, report_out, "emulation-report.json")
        _write(report_path, report.to_json())
        if measured_out:
            from .trace import serialize_series

            _write(Path(measured_out), serialize_series(measured[0], interval))
    except (RttlabError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"report: {report_path}")
    for row in report.rows:
        click.echo(
            f"p{row.percentile:g}: input={row.input_ms:.3f} ms "
            f"emulated={row.mean_emulated_ms:.3f} ms nrmse={row.nrmse:.4f}"
        )


@main.command("evaluate")
@click.option("--real", "real_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--run", "run_files", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True, help="Measured or synthetic trace(s) to compare.")
@click.option("--report-out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def cmd_evaluate(ctx, real_file, run_files, report_out):
    """Compare measured/synthetic traces against a reference trace."""
    try:
        real = load_trace(real_file)
        runs = [load_trace(path).samples for path in run_files]
        report = evaluate_accuracy(real, runs)
        payload = json.loads(report.to_json())
        if all(r.size == len(real) for r in runs):
            payload["smape_vs_real"] = [
                smape(real.samples, run) for run in runs
            ]
        report_path = _out_path(ctx, report_out, "evaluation-report.json")
        _write(report_path, json.dumps(payload, indent=1) + "\n")
    except (RttlabError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"report: {report_path}")
    for row in report.rows:
        click.echo(
            f"p{row.percentile:g}: input={row.input_ms:.3f} ms "
            f"run-mean={row.mean_emulated_ms:.3f} ms nrmse={row.nrmse:.4f}"
        )


if __name__ == "__main__":
    main()

"""Command-line operator surface: data synthesis, training, generation,
evaluation, ablations, attention dumps, and rendering.

Every command takes its parameters from a strict YAML config plus a few
flags, derives all randomness from one root seed, writes outputs only under
--out (guarded by a lock file), and records a run manifest so each artifact
can be traced back to its exact inputs.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 threshold
failure, 5 runtime failure.
"""

from __future__ import annotations

import json
import os
import platform
import sys
import time
from contextlib import contextmanager
from importlib.metadata import version as pkg_version
from pathlib import Path

import click
import torch

from . import configio, evaluation
from .inference import (
    GenerationConfig,
    generate_from_prior,
    generate_interpolate,
    generate_primed,
    generate_replicate,
)
from .model import load_checkpoint
from .seqmodel import InvariantError, ModelConfig
from .svg import save_strokes_svg
from .synthglyph import (
    ContentSequence,
    SynthError,
    file_sha256,
    load_dataset,
    make_dataset,
    record_to_sample,
    save_dataset,
)
from .training import TrainConfig, TrainingDiverged, train

EXIT_OK = 0
EXIT_USAGE = 2          # click's own usage-error code
EXIT_VALIDATION = 3
EXIT_THRESHOLD = 4
EXIT_RUNTIME = 5


class ThresholdFailure(Exception):
    pass


def _tool_version() -> str:
    try:
        return pkg_version("styleq")
    except Exception:
        return "unknown"


@contextmanager
def out_dir_lock(out_dir: Path):
    """Exclusive lock file preventing two commands sharing one out dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise click.ClickException(
            f"out dir is locked by another command (remove {lock} if stale)"
        )
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def write_run_manifest(out_dir: Path, command: str, **fields) -> Path:
    manifest = {
        "command": command,
        "tool_version": _tool_version(),
        "python": platform.python_version(),
        "started_unix": fields.pop("started_unix", None),
        "finished_unix": time.time(),
        **fields,
    }
    path = Path(out_dir) / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def handle_errors(fn):
    """Map exception classes onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except ThresholdFailure as e:
            click.echo(f"threshold failure: {e}", err=True)
            sys.exit(EXIT_THRESHOLD)
        except (configio.ConfigError, SynthError, FileNotFoundError, ValueError) as e:
            click.echo(f"validation error: {e}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (TrainingDiverged, InvariantError, RuntimeError) as e:
            click.echo(f"runtime failure: {e}", err=True)
            sys.exit(EXIT_RUNTIME)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _parse_content(text: str, alphabet_size: int) -> ContentSequence:
    try:
        symbols = tuple(int(c) for c in text.split(","))
    except ValueError:
        raise click.BadParameter(f"content must be comma-separated glyph ids, got {text!r}")
    return ContentSequence(symbols, alphabet_size=alphabet_size)


def _load_reference(path: Path, alphabet_size: int):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing reference file: {path}")
    return record_to_sample(json.loads(path.read_text()), alphabet_size=alphabet_size)


def _apply_threads(threads: int | None) -> None:
    n = threads if threads is not None else int(os.environ.get("STYLEQ_THREADS", "0"))
    if n > 0:
        torch.set_num_threads(n)


@click.group()
def main():
    """Controllable stroke-sequence generation with style equalization."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--threads", type=int, default=None)
@handle_errors
def synth(config_path: Path, out_dir: Path, seed: int | None, threads: int | None):
    """Generate a labeled synthetic dataset."""
    _apply_threads(threads)
    started = time.time()
    cfg = configio.load_config(config_path)
    synth_cfg = dict(cfg["synth"] or {})
    if seed is not None:
        synth_cfg["seed"] = seed
    with out_dir_lock(out_dir):
        samples = make_dataset(**synth_cfg)
        save_dataset(samples, out_dir, params=synth_cfg)
        write_run_manifest(
            out_dir, "synth", started_unix=started,
            config_hash=configio.config_hash(config_path),
            seed=synth_cfg.get("seed", 0), num_samples=len(samples),
        )
    click.echo(f"wrote {len(samples)} samples to {out_dir}")


@main.command(name="train")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--resume", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--threads", type=int, default=None)
@handle_errors
def train_cmd(config_path, data_dir, out_dir, resume, seed, threads):
    """Train a model on a synthesized dataset."""
    _apply_threads(threads)
    started = time.time()
    cfg = configio.load_config(config_path)
    train_cfg = cfg["train"] or TrainConfig()
    if seed is not None:
        d = train_cfg.to_dict()
        d["seed"] = seed
        train_cfg = TrainConfig.from_dict(d)
    model_cfg = cfg["model"] or ModelConfig()
    dataset, manifest = load_dataset(data_dir, verify_hash=True)
    if resume is not None and not Path(resume).exists():
        raise FileNotFoundError(f"missing resume checkpoint: {resume}")
    with out_dir_lock(out_dir):
        model, metrics = train(
            dataset, train_cfg, model_config=model_cfg, out_dir=out_dir, resume=resume
        )
        write_run_manifest(
            out_dir, "train", started_unix=started,
            config_hash=configio.config_hash(config_path),
            dataset_manifest_hash=manifest.get("records_sha256"),
            resume=str(resume) if resume else None,
            seed=train_cfg.seed, steps=train_cfg.max_steps,
        )
    last = metrics[-1].nll_per_frame if metrics else float("nan")
    click.echo(f"trained {train_cfg.max_steps} steps; final nll/frame {last:.4f}")


@main.command()
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(path_type=Path))
@click.option("--mode", required=True,
              type=click.Choice(["replicate", "interpolate", "prior", "primed"]))
@click.option("--content", "contents", multiple=True, required=True,
              help="Comma-separated glyph ids; repeatable for batch generation.")
@click.option("--reference", type=click.Path(path_type=Path), default=None,
              help="JSON sample record providing the style reference.")
@click.option("--reference2", type=click.Path(path_type=Path), default=None,
              help="Second reference (interpolation target).")
@click.option("--alpha", type=float, default=None, help="Interpolation weight.")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0)
@click.option("--threads", type=int, default=None)
@handle_errors
def generate(ckpt_path, mode, contents, reference, reference2, alpha,
             config_path, out_dir, seed, threads):
    """Generate stroke sequences from a trained checkpoint."""
    _apply_threads(threads)
    started = time.time()
    if mode in ("replicate", "interpolate", "primed") and reference is None:
        raise click.UsageError(f"--mode {mode} requires --reference")
    if mode == "interpolate" and (reference2 is None or alpha is None):
        raise click.UsageError("--mode interpolate requires --reference2 and --alpha")
    if mode != "interpolate" and (reference2 is not None or alpha is not None):
        raise click.UsageError("--reference2/--alpha apply only to --mode interpolate")
    gen_cfg = None
    if config_path is not None:
        gen_cfg = configio.load_config(config_path)["generate"]
    model, step, _ = load_checkpoint(ckpt_path)
    ref = _load_reference(reference, model.config.alphabet) if reference else None
    ref2 = _load_reference(reference2, model.config.alphabet) if reference2 else None
    with out_dir_lock(out_dir):
        outputs = []
        for i, text in enumerate(contents):
            content = _parse_content(text, model.config.alphabet)
            gcfg = GenerationConfig(
                std_scale=gen_cfg.std_scale if gen_cfg else 0.9,
                max_frames=gen_cfg.max_frames if gen_cfg else 2000,
                temperature=gen_cfg.temperature if gen_cfg else 1.0,
                seed=seed + i,
            )
            if mode == "replicate":
                result = generate_replicate(model, content, ref.strokes, gcfg)
            elif mode == "interpolate":
                result = generate_interpolate(
                    model, content, ref.strokes, ref2.strokes, alpha, gcfg
                )
            elif mode == "prior":
                result = generate_from_prior(model, content, gcfg)
            else:
                result = generate_primed(model, content, ref.strokes, ref.content, gcfg)
            record = {
                "symbols": list(content.symbols),
                "mode": mode,
                "seed": gcfg.seed,
                "truncated": result.truncated,
                "strokes": [[float(x), float(y), int(p)] for x, y, p in result.strokes.samples],
            }
            stem = out_dir / f"gen_{i:03d}"
            stem.with_suffix(".json").write_text(json.dumps(record, sort_keys=True) + "\n")
            save_strokes_svg(result.strokes, stem.with_suffix(".svg"))
            outputs.append(stem.name)
        write_run_manifest(
            out_dir, "generate", started_unix=started,
            checkpoint=str(ckpt_path), checkpoint_step=step, mode=mode,
            alpha=alpha, seed=seed, outputs=outputs,
            reference_hash=file_sha256(reference) if reference else None,
            config_hash=configio.config_hash(config_path) if config_path else None,
        )
    click.echo(f"wrote {len(contents)} generations to {out_dir}")


@main.command(name="eval")
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(path_type=Path))
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path))
@click.option("--setting", required=True, type=click.Choice(list(evaluation.SETTINGS)))
@click.option("--pairs", type=int, default=50)
@click.option("--max-ger", type=float, default=None,
              help="Fail (distinct exit code) if mean glyph error rate exceeds this.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0)
@click.option("--threads", type=int, default=None)
@handle_errors
def eval_cmd(ckpt_path, data_dir, setting, pairs, max_ger, out_dir, seed, threads):
    """Evaluate replication quality on sampled reference/content pairs."""
    _apply_threads(threads)
    started = time.time()
    model, step, _ = load_checkpoint(ckpt_path)
    eval_set, manifest = load_dataset(data_dir, verify_hash=True)
    with out_dir_lock(out_dir):
        report = evaluation.eval_pairs(model, eval_set, setting, pairs, seed)
        report.save(out_dir / "report.json")
        write_run_manifest(
            out_dir, "eval", started_unix=started,
            checkpoint=str(ckpt_path), checkpoint_step=step,
            dataset_manifest_hash=manifest.get("records_sha256"),
            setting=setting, pairs=pairs, seed=seed,
            glyph_error_rate_mean=report.glyph_error_rate_mean,
        )
    click.echo(f"{setting} mean GER {report.glyph_error_rate_mean:.4f} over {pairs} pairs")
    if max_ger is not None and report.glyph_error_rate_mean > max_ger:
        raise ThresholdFailure(
            f"mean GER {report.glyph_error_rate_mean:.4f} > threshold {max_ger}"
        )


@main.command()
@click.option("--config", "config_paths", multiple=True, required=True,
              type=click.Path(path_type=Path), help="One config per training variant.")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path))
@click.option("--pairs", type=int, default=50)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0)
@click.option("--threads", type=int, default=None)
@handle_errors
def ablation(config_paths, data_dir, pairs, out_dir, seed, threads):
    """Train equalization variants under a shared budget and compare."""
    _apply_threads(threads)
    started = time.time()
    dataset, manifest = load_dataset(data_dir, verify_hash=True)
    train_cfgs, model_cfgs = [], []
    for p in config_paths:
        cfg = configio.load_config(p)
        train_cfgs.append(cfg["train"] or TrainConfig())
        model_cfgs.append(cfg["model"])
    model_cfg = next((m for m in model_cfgs if m is not None), None)
    with out_dir_lock(out_dir):
        rows = evaluation.ablation_suite(
            dataset, train_cfgs, dataset, seed,
            model_config=model_cfg, num_pairs=pairs, out_dir=out_dir,
        )
        write_run_manifest(
            out_dir, "ablation", started_unix=started,
            config_hashes=[configio.config_hash(p) for p in config_paths],
            dataset_manifest_hash=manifest.get("records_sha256"),
            pairs=pairs, seed=seed,
        )
    click.echo((Path(out_dir) / "comparison.txt").read_text().rstrip())
    if any(r["failed"] for r in rows):
        raise TrainingDiverged("one or more ablation variants diverged")


@main.command(name="dump-attention")
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(path_type=Path))
@click.option("--reference", required=True, type=click.Path(path_type=Path))
@click.option("--content", "content_text", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0)
@click.option("--threads", type=int, default=None)
@handle_errors
def dump_attention(ckpt_path, reference, content_text, out_dir, seed, threads):
    """Record per-step style-attention weights, heatmap, and statistics."""
    _apply_threads(threads)
    started = time.time()
    model, step, _ = load_checkpoint(ckpt_path)
    ref = _load_reference(reference, model.config.alphabet)
    content = _parse_content(content_text, model.config.alphabet)
    with out_dir_lock(out_dir):
        summary = evaluation.dump_style_attention(model, content, ref.strokes, out_dir, seed=seed)
        write_run_manifest(
            out_dir, "dump-attention", started_unix=started,
            checkpoint=str(ckpt_path), checkpoint_step=step,
            reference_hash=file_sha256(reference), seed=seed, **summary,
        )
    click.echo(
        f"mean entropy {summary['mean_entropy']:.4f} "
        f"time variance {summary['time_variance']:.6f}"
    )


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(path_type=Path),
              help="JSON sample record or a dataset records.jsonl.")
@click.option("--index", type=int, default=0, help="Record index within a .jsonl input.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@handle_errors
def render(input_path, index, out_path):
    """Render a stored stroke record to SVG."""
    input_path = Path(input_path)
    if not input_path.exists():
        raise FileNotFoundError(f"missing input file: {input_path}")
    if input_path.suffix == ".jsonl":
        lines = input_path.read_text().splitlines()
        if not (0 <= index < len(lines)):
            raise ValueError(f"record index {index} out of range (0..{len(lines) - 1})")
        record = json.loads(lines[index])
    else:
        record = json.loads(input_path.read_text())
    sample = record_to_sample({"style": {"slant": 0.0, "scale": 1.0, "speed": 1.0,
                                         "jitter": 0.0, "drift": 0.0},
                               "seed": 0, **record})
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_strokes_svg(sample.strokes, out_path)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()

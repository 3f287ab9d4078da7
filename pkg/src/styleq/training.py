"""Training: the sequence variational objective with style-equalized
posterior input, teacher-forcing noise, the basis trace regularizer, a
warmup/inverse-sqrt learning-rate schedule, and fully seeded determinism.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import torch

from .data import strokes_to_frames
from .model import StyleControlledModel, save_checkpoint
from .seeding import SeedTree, derive_seed
from .seqmodel import (
    InvariantError,
    ModelConfig,
    kl_diag_gaussians,
    output_log_prob,
    reparam_sample,
    start_token,
)
from .styleeq import min_style_input_length, phi, trace_regularizer, transform_M, normalize_basis_columns_
from .synthglyph import LabeledSample

X_PRIME_MODES = ("real_sample", "fixed_vector", "random_noise", "always_self")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    equalize_fraction: float = 0.5
    teacher_noise_std: float = 0.1
    warmup_steps: int = 400
    peak_lr: float = 1e-4
    adam_betas: tuple[float, float] = (0.9, 0.98)
    trace_probes: int = 100
    x_prime_mode: str = "real_sample"
    max_steps: int = 2000
    eval_every: int = 500
    checkpoint_every: int = 1000
    grad_clip: float = 5.0
    alternate_equalization: bool = False  # strict alternation instead of a coin
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.equalize_fraction <= 1.0):
            raise ValueError("equalize_fraction must lie in [0, 1]")
        if self.teacher_noise_std < 0:
            raise ValueError("teacher_noise_std must be >= 0")
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")
        if self.x_prime_mode not in X_PRIME_MODES:
            raise ValueError(f"x_prime_mode must be one of {X_PRIME_MODES}")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "adam_betas" in d:
            d["adam_betas"] = tuple(d["adam_betas"])
        return cls(**d)


@dataclass
class StepMetrics:
    step: int
    nll_per_frame: float
    kl_per_frame: float
    trace_reg: float
    grad_norm: float
    lr: float
    equalized: bool

    def to_dict(self) -> dict:
        return {
            "step": self.step, "nll_per_frame": self.nll_per_frame,
            "kl_per_frame": self.kl_per_frame, "trace_reg": self.trace_reg,
            "grad_norm": self.grad_norm, "lr": self.lr, "equalized": self.equalized,
        }


def lr_schedule(step: int, warmup: int, peak_lr: float) -> float:
    """Linear ramp to peak_lr at step == warmup, then inverse-sqrt decay."""
    if step < 1:
        raise ValueError("step must be >= 1")
    return peak_lr * min(step / warmup, math.sqrt(warmup / step))


# ---------------------------------------------------------------------------
# Batched teacher-forced unroll


@dataclass
class Batch:
    frames: torch.Tensor        # (B, T, 3) padded offset frames
    lengths: torch.Tensor       # (B,)
    one_hot: torch.Tensor       # (B, N, V) padded
    features: torch.Tensor      # (B, T', s) padded style features
    feat_mask: torch.Tensor     # (B, T') valid-frame mask


def pad_stack(tensors: list[torch.Tensor]) -> torch.Tensor:
    t_max = max(t.shape[0] for t in tensors)
    out = tensors[0].new_zeros(len(tensors), t_max, *tensors[0].shape[1:])
    for i, t in enumerate(tensors):
        out[i, : t.shape[0]] = t
    return out


def unrolled_elbo(
    model: StyleControlledModel,
    batch: Batch,
    teacher_noise: torch.Tensor,   # (B, T, 2), already scaled by the noise std
    reparam_noise: torch.Tensor,   # (B, T, z_dim)
) -> tuple[torch.Tensor, torch.Tensor, int]:
    """Sum of per-frame negative log-likelihood and KL over the batch.

    Returns (nll_sum, kl_sum, frame_count); the loss is the mean per-sequence
    sum, i.e. (nll_sum + kl_sum) / B.
    """
    backbone = model.backbone
    b, t_max, _ = batch.frames.shape
    dtype = batch.frames.dtype
    state = backbone.init_state(b, dtype=dtype)
    steps = torch.arange(t_max)
    nll_sum = batch.frames.new_zeros(())
    kl_sum = batch.frames.new_zeros(())
    for t in range(t_max):
        x_prev = start_token(b, dtype=dtype) if t == 0 else batch.frames[:, t - 1]
        noisy = torch.cat([x_prev[:, :2] + teacher_noise[:, t], x_prev[:, 2:]], dim=-1)
        ctx, state = backbone.advance(state, noisy, batch.one_hot)
        prior = backbone.prior(ctx.h_bottom, ctx.attended)
        q, _ = model.posterior_step(ctx.h_bottom, ctx.attended, batch.features, batch.feat_mask)
        z = reparam_sample(q, reparam_noise[:, t])
        dist, state = backbone.decode(ctx, z, state)
        is_last = (steps[t] == batch.lengths - 1)
        lp = output_log_prob(dist, batch.frames[:, t], is_last)
        kl = kl_diag_gaussians(q, prior)
        mask = (t < batch.lengths).to(dtype)
        nll_sum = nll_sum + (-lp * mask).sum()
        kl_sum = kl_sum + (kl * mask).sum()
    return nll_sum, kl_sum, int(batch.lengths.sum().item())


def sample_frames(sample: LabeledSample, config: ModelConfig, dtype=torch.float32) -> torch.Tensor:
    return strokes_to_frames(sample.strokes, config.offset_scale, dtype=dtype)


def sample_one_hot(sample: LabeledSample, dtype=torch.float32) -> torch.Tensor:
    return torch.as_tensor(sample.content.one_hot, dtype=dtype)


def equalized_features(
    model: StyleControlledModel,
    target_frames: list[torch.Tensor],
    source_frames: list[torch.Tensor] | None,
    dropout_generator: torch.Generator | None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-element style features for the posterior branch, padded + mask.

    With source_frames None the branch is x' = x: the difference vector is
    computed anyway (it is exactly zero) and added back, so the result is
    bit-identical to using the target features directly.
    """
    basis = model.style.basis
    feats = []
    for i, tf in enumerate(target_frames):
        f_target = model.style.conv(tf, dropout_generator=dropout_generator)
        if source_frames is None:
            f_source = f_target
        else:
            f_source = model.style.conv(source_frames[i], dropout_generator=dropout_generator)
        delta = phi(f_target, f_source, basis)
        feats.append(transform_M(f_source, delta, basis))
    padded = pad_stack(feats)
    mask = torch.zeros(padded.shape[:2], dtype=torch.bool)
    for i, f in enumerate(feats):
        mask[i, : f.shape[0]] = True
    return padded, mask


def make_batch(
    model: StyleControlledModel,
    samples: list[LabeledSample],
    source_frames: list[torch.Tensor] | None,
    dropout_generator: torch.Generator | None = None,
    dtype=torch.float32,
) -> Batch:
    cfg = model.config
    frames = [sample_frames(s, cfg, dtype) for s in samples]
    one_hots = [sample_one_hot(s, dtype) for s in samples]
    features, feat_mask = equalized_features(model, frames, source_frames, dropout_generator)
    return Batch(
        frames=pad_stack(frames),
        lengths=torch.tensor([f.shape[0] for f in frames]),
        one_hot=pad_stack(one_hots),
        features=features,
        feat_mask=feat_mask,
    )


def elbo_loss(
    model: StyleControlledModel,
    sample: LabeledSample,
    x_prime: LabeledSample | torch.Tensor | None,
    noise_seed: int,
    teacher_noise_std: float = 0.1,
    trace_probes: int = 100,
    dropout_generator: torch.Generator | None = None,
    dtype=torch.float32,
) -> tuple[torch.Tensor, StepMetrics]:
    """Single-sample objective: sum_t [nll + KL] + trace regularizer.

    x_prime may be another sample, a raw (L, 3) frame tensor, or None for
    the x' = x branch.
    """
    cfg = model.config
    if x_prime is None:
        source = None
    elif isinstance(x_prime, LabeledSample):
        source = [sample_frames(x_prime, cfg, dtype)]
    else:
        source = [x_prime.to(dtype)]
    batch = make_batch(model, [sample], source, dropout_generator, dtype)
    t_max = batch.frames.shape[1]
    gen = torch.Generator()
    gen.manual_seed(noise_seed)
    tn = teacher_noise_std * torch.randn(1, t_max, 2, generator=gen).to(dtype)
    rn = torch.randn(1, t_max, cfg.z_dim, generator=gen).to(dtype)
    nll, kl, frames = unrolled_elbo(model, batch, tn, rn)
    trace = trace_regularizer(model.style.basis, trace_probes, seed=derive_seed(noise_seed, "probes"))
    loss = nll + kl + trace
    if not torch.isfinite(loss):
        bad = [name for name, v in (("nll", nll), ("kl", kl), ("trace", trace)) if not torch.isfinite(v)]
        raise TrainingDiverged(f"non-finite loss terms: {bad}")
    metrics = StepMetrics(
        step=0, nll_per_frame=float(nll.item()) / frames, kl_per_frame=float(kl.item()) / frames,
        trace_reg=float(trace.item()), grad_norm=float("nan"), lr=float("nan"),
        equalized=x_prime is not None,
    )
    return loss, metrics


# ---------------------------------------------------------------------------
# The training loop


def _draw_source_frames(
    mode: str,
    equalized: bool,
    samples: list[LabeledSample],
    train_set: list[LabeledSample],
    model_config: ModelConfig,
    seeds: SeedTree,
    fixed_vector: torch.Tensor | None,
) -> list[torch.Tensor] | None:
    """x' per element, or None for the x' = x branch."""
    if not equalized or mode == "always_self":
        return None
    if mode == "real_sample":
        idx = torch.randint(len(train_set), (len(samples),), generator=seeds["data"])
        return [sample_frames(train_set[int(i)], model_config) for i in idx]
    if mode == "fixed_vector":
        return [fixed_vector] * len(samples)
    if mode == "random_noise":
        min_len = min_style_input_length(len(model_config.conv_channels))
        out = []
        for s in samples:
            length = max(len(s.strokes), min_len)
            out.append(torch.randn(length, 3, generator=seeds["data"]))
        return out
    raise ValueError(mode)


def _split_validation(dataset: list[LabeledSample], frac: float) -> tuple[list, list]:
    if len(dataset) < 16 or frac <= 0:
        return dataset, []
    n_val = max(1, int(len(dataset) * frac))
    return dataset[:-n_val], dataset[-n_val:]


def validation_metrics(
    model: StyleControlledModel, val_set: list[LabeledSample], cfg: TrainConfig, step: int
) -> dict:
    """Held-out nll/KL on the x' = x branch with seeded noise; no dropout."""
    gen = torch.Generator()
    gen.manual_seed(derive_seed(cfg.seed, "val", step))
    nll_total, kl_total, frames_total = 0.0, 0.0, 0
    with torch.no_grad():
        for chunk_start in range(0, len(val_set), cfg.batch_size):
            chunk = val_set[chunk_start : chunk_start + cfg.batch_size]
            batch = make_batch(model, chunk, None)
            t_max = batch.frames.shape[1]
            tn = cfg.teacher_noise_std * torch.randn(len(chunk), t_max, 2, generator=gen)
            rn = torch.randn(len(chunk), t_max, model.config.z_dim, generator=gen)
            nll, kl, frames = unrolled_elbo(model, batch, tn, rn)
            nll_total += float(nll.item())
            kl_total += float(kl.item())
            frames_total += frames
    out = {
        "step": step,
        "val_nll_per_frame": nll_total / max(frames_total, 1),
        "val_kl_per_frame": kl_total / max(frames_total, 1),
    }
    # posterior collapsing onto the prior on held-out data is the known
    # overfit signature that precedes content leakage
    out["overfit_warning"] = out["val_kl_per_frame"] < 0.01
    return out


def train(
    dataset: list[LabeledSample],
    config: TrainConfig,
    model_config: ModelConfig | None = None,
    out_dir: Path | None = None,
    resume: Path | None = None,
    log_fn=None,
) -> tuple[StyleControlledModel, list[StepMetrics]]:
    """Optimize the full objective; returns the model and the metrics log.

    All randomness (data order, equalization coin, teacher noise, reparam
    noise, dropout, trace probes, init) derives from config.seed, so two
    runs with the same inputs produce identical metrics logs, and resuming
    from a checkpoint continues bit-exactly.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    model_config = model_config or ModelConfig()
    min_len = min_style_input_length(len(model_config.conv_channels))
    too_short = [i for i, s in enumerate(dataset) if len(s.strokes) < min_len]
    if too_short:
        raise ValueError(
            f"{len(too_short)} samples shorter than the style encoder minimum ({min_len})"
        )

    seeds = SeedTree(config.seed)
    torch.manual_seed(derive_seed(config.seed, "init"))
    model = StyleControlledModel(model_config)
    normalize_basis_columns_(model.style.basis.data)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.peak_lr, betas=config.adam_betas)
    start_step = 0
    fixed_vector = None
    if config.x_prime_mode == "fixed_vector":
        fixed_vector = torch.randn(min_len + 20, 3, generator=seeds["data"])

    if resume is not None:
        payload = torch.load(resume, map_location="cpu", weights_only=False)
        model.load_state_dict(payload["params"])
        optimizer.load_state_dict(payload["extra"]["optimizer"])
        seeds.load_state_dict(payload["extra"]["rng"])
        start_step = int(payload["step"])
        if payload["extra"].get("fixed_vector") is not None:
            fixed_vector = payload["extra"]["fixed_vector"]

    train_set, val_set = _split_validation(dataset, config.val_fraction)
    metrics_log: list[StepMetrics] = []
    metrics_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = out_dir / "metrics.jsonl"
        if start_step == 0 and metrics_path.exists():
            metrics_path.unlink()

    def emit(record: dict):
        if metrics_path is not None:
            with open(metrics_path, "a") as f:
                f.write(json.dumps(record) + "\n")
        if log_fn is not None:
            log_fn(record)

    def checkpoint(path: Path, step: int):
        save_checkpoint(
            path, model, step,
            extra={
                "optimizer": optimizer.state_dict(),
                "rng": seeds.state_dict(),
                "fixed_vector": fixed_vector,
                "train_config": config.to_dict(),
            },
        )

    if out_dir is not None and start_step == 0:
        checkpoint(out_dir / "checkpoint_initial.pt", 0)

    for step in range(start_step + 1, config.max_steps + 1):
        lr = lr_schedule(step, config.warmup_steps, config.peak_lr)
        for group in optimizer.param_groups:
            group["lr"] = lr

        idx = torch.randint(len(train_set), (config.batch_size,), generator=seeds["data"])
        samples = [train_set[int(i)] for i in idx]
        if config.alternate_equalization:
            equalized = (step % 2 == 1) and config.equalize_fraction > 0
        else:
            coin = torch.rand((), generator=seeds["coin"])
            equalized = bool(coin < config.equalize_fraction)
        if config.x_prime_mode == "always_self":
            equalized = False
        source = _draw_source_frames(
            config.x_prime_mode, equalized, samples, train_set, model_config, seeds, fixed_vector
        )

        batch = make_batch(model, samples, source, dropout_generator=seeds["dropout"])
        t_max = batch.frames.shape[1]
        tn = config.teacher_noise_std * torch.randn(
            config.batch_size, t_max, 2, generator=seeds["teacher_noise"]
        )
        rn = torch.randn(config.batch_size, t_max, model_config.z_dim, generator=seeds["reparam"])

        try:
            nll, kl, frame_count = unrolled_elbo(model, batch, tn, rn)
        except InvariantError as e:
            if out_dir is not None:
                checkpoint(out_dir / "checkpoint_last_good.pt", step - 1)
            raise TrainingDiverged(f"non-finite activations at step {step}: {e}") from e
        trace = trace_regularizer(model.style.basis, config.trace_probes, generator=seeds["probes"])
        loss = (nll + kl) / config.batch_size + trace

        if not torch.isfinite(loss):
            if out_dir is not None:
                checkpoint(out_dir / "checkpoint_last_good.pt", step - 1)
            raise TrainingDiverged(f"non-finite loss at step {step}")

        optimizer.zero_grad()
        loss.backward()
        grad_norm = torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
        if not torch.isfinite(grad_norm):
            if out_dir is not None:
                checkpoint(out_dir / "checkpoint_last_good.pt", step - 1)
            raise TrainingDiverged(f"non-finite gradients at step {step}")
        optimizer.step()
        normalize_basis_columns_(model.style.basis.data)

        m = StepMetrics(
            step=step,
            nll_per_frame=float(nll.item()) / frame_count,
            kl_per_frame=float(kl.item()) / frame_count,
            trace_reg=float(trace.item()),
            grad_norm=float(grad_norm.item()),
            lr=lr,
            equalized=equalized,
        )
        metrics_log.append(m)
        emit(m.to_dict())

        if val_set and step % config.eval_every == 0:
            emit(validation_metrics(model, val_set, config, step))
        if out_dir is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
            checkpoint(out_dir / "checkpoint.pt", step)

    if out_dir is not None and config.max_steps > start_step:
        checkpoint(out_dir / "checkpoint.pt", config.max_steps)
    return model, metrics_log

"""Autoregressive generation: style replication from a reference, style
interpolation, prior-driven novel styles, and the state-priming baseline.

Replication feeds the reference's style features straight to the style
attention (the equalization pair is an exact identity there, so it is
skipped); interpolation pre-processes the features with the subspace
transform before generation starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .data import frames_to_strokes, strokes_to_frames
from .model import StyleControlledModel
from .seeding import derive_seed
from .seqmodel import OutputDistParams, reparam_sample, start_token
from .styleeq import phi, transform_M
from .synthglyph import BASE_POINTS_PER_GLYPH, ContentSequence, StrokeSequence


@dataclass(frozen=True)
class GenerationConfig:
    std_scale: float = 0.9      # shrink factor on the Gaussian output stds
    max_frames: int = 2000
    temperature: float = 1.0    # mixture-weight sampling temperature
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.std_scale <= 1.5):
            raise ValueError("std_scale must lie in (0, 1.5]")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")


@dataclass
class GenerationResult:
    strokes: StrokeSequence
    truncated: bool
    num_frames: int
    attention_weights: torch.Tensor | None = None  # (steps, H, T') when recorded


def sample_output_step(
    dist: OutputDistParams, gcfg: GenerationConfig, generator: torch.Generator
) -> tuple[torch.Tensor, bool]:
    """Draw one (dx, dy, pen) frame plus the stop bit from the output head.

    std_scale shrinks only the bivariate Gaussian stds; the pen and stop
    Bernoullis are sampled at their modeled probabilities.
    """
    probs = torch.softmax(dist.log_pi[0] / gcfg.temperature, dim=-1)
    j = int(torch.multinomial(probs, 1, generator=generator).item())
    mean = dist.means[0, j]
    std = dist.stds[0, j] * gcfg.std_scale
    rho = dist.corr[0, j]
    e = torch.randn(2, generator=generator, dtype=mean.dtype)
    dx = mean[0] + std[0] * e[0]
    dy = mean[1] + std[1] * (rho * e[0] + torch.sqrt(1.0 - rho**2) * e[1])
    pen = (torch.rand((), generator=generator) < dist.pen_prob[0]).to(mean.dtype)
    stop = bool(torch.rand((), generator=generator) < dist.stop_prob[0])
    return torch.stack([dx, dy, pen]), stop


def _run_generation(
    model: StyleControlledModel,
    content: ContentSequence,
    features: torch.Tensor | None,   # (T', s) or None for the prior branch
    gcfg: GenerationConfig,
    record_attention: bool = False,
    preroll: tuple[torch.Tensor, int] | None = None,  # (frames, combined content len)
    one_hot_override: torch.Tensor | None = None,
) -> GenerationResult:
    backbone = model.backbone
    generator = torch.Generator()
    generator.manual_seed(derive_seed(gcfg.seed, "generate"))

    one_hot = one_hot_override if one_hot_override is not None else torch.as_tensor(
        content.one_hot, dtype=torch.float32
    )
    one_hot = one_hot.unsqueeze(0)
    feats = features.unsqueeze(0) if features is not None else None

    state = backbone.init_state(1)
    x_prev = start_token(1)

    cap = min(gcfg.max_frames, 8 * len(content) * BASE_POINTS_PER_GLYPH)
    frames = []
    weights_log = []
    stopped = False
    with torch.no_grad():
        if preroll is not None:
            frames_in, _ = preroll
            for t in range(frames_in.shape[0]):
                ctx, state = backbone.advance(state, x_prev, one_hot)
                prior = backbone.prior(ctx.h_bottom, ctx.attended)
                z = reparam_sample(prior, torch.randn(1, model.config.z_dim, generator=generator))
                _, state = backbone.decode(ctx, z, state)
                x_prev = frames_in[t : t + 1]

        for _ in range(cap):
            ctx, state = backbone.advance(state, x_prev, one_hot)
            if feats is not None:
                q, w = model.posterior_step(ctx.h_bottom, ctx.attended, feats)
                if record_attention:
                    weights_log.append(w[0])
            else:
                q = backbone.prior(ctx.h_bottom, ctx.attended)
            z = reparam_sample(q, torch.randn(1, model.config.z_dim, generator=generator))
            dist, state = backbone.decode(ctx, z, state)
            x, stopped = sample_output_step(dist, gcfg, generator)
            frames.append(x)
            x_prev = x.unsqueeze(0)
            if stopped:
                break

    if len(frames) < 2:
        pen_up = torch.zeros(3)
        frames = frames + [pen_up] * (2 - len(frames))
    strokes = frames_to_strokes(torch.stack(frames), model.config.offset_scale)
    return GenerationResult(
        strokes=strokes,
        truncated=not stopped,
        num_frames=len(frames),
        attention_weights=torch.stack(weights_log) if weights_log else None,
    )


def generate_replicate(
    model: StyleControlledModel,
    content: ContentSequence,
    reference: StrokeSequence,
    gcfg: GenerationConfig,
    record_attention: bool = False,
) -> GenerationResult:
    """Replicate the reference style: its features feed the posterior branch."""
    with torch.no_grad():
        features = model.encode_style_strokes(reference)
    return _run_generation(model, content, features, gcfg, record_attention=record_attention)


def generate_interpolate(
    model: StyleControlledModel,
    content: ContentSequence,
    ref_source: StrokeSequence,
    ref_target: StrokeSequence,
    alpha: float,
    gcfg: GenerationConfig,
) -> GenerationResult:
    """Slide the source style toward the target by alpha along the subspace."""
    with torch.no_grad():
        f_source = model.encode_style_strokes(ref_source)
        f_target = model.encode_style_strokes(ref_target)
        basis = model.style.basis
        delta = alpha * phi(f_target, f_source, basis)
        features = transform_M(f_source, delta, basis)
    return _run_generation(model, content, features, gcfg)


def generate_from_prior(
    model: StyleControlledModel, content: ContentSequence, gcfg: GenerationConfig
) -> GenerationResult:
    """Sample the latent from the learned prior; no style reference exists."""
    return _run_generation(model, content, None, gcfg)


def generate_primed(
    model: StyleControlledModel,
    content: ContentSequence,
    reference: StrokeSequence | None,
    reference_content: ContentSequence | None,
    gcfg: GenerationConfig,
) -> GenerationResult:
    """Baseline: pre-roll the reference through the recurrence, then generate.

    Uses the prior branch for the latent throughout.  With no reference this
    reduces to prior sampling.
    """
    if reference is None or len(reference) == 0:
        return generate_from_prior(model, content, gcfg)
    if reference_content is None:
        raise ValueError("priming requires the content of the reference")
    combined = ContentSequence(
        reference_content.symbols + content.symbols, alphabet_size=content.alphabet_size
    )
    ref_frames = strokes_to_frames(reference, model.config.offset_scale)
    one_hot = torch.as_tensor(combined.one_hot, dtype=torch.float32)
    return _run_generation(
        model, content, None, gcfg,
        preroll=(ref_frames, len(combined)),
        one_hot_override=one_hot,
    )

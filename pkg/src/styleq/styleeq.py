"""Style encoder and the style-equalization pair over a learned subspace.

The encoder is an anti-aliased 1-D conv stack (low-pass blur before every
stride-2 downsampling, no padding) followed by multi-head attention without
positional encoding.  Style differences are measured and applied through a
k x s basis whose columns are kept unit-norm and pushed toward orthogonality
by a Hutchinson-estimated trace regularizer.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .seqmodel import GaussianDiag, ModelConfig

BLUR_KERNEL = (1.0, 3.0, 3.0, 1.0)  # normalized to sum 1 so constants pass through
CONV_KERNEL = 3
CONV_STRIDE = 2


class InputTooShort(ValueError):
    """Style input shorter than the conv stack's minimum length."""


def seeded_dropout(x: torch.Tensor, p: float, generator: torch.Generator | None) -> torch.Tensor:
    """Dropout keyed by an explicit generator; identity when generator is None."""
    if generator is None or p <= 0.0:
        return x
    keep = (torch.rand(x.shape, generator=generator, device=x.device) >= p).to(x.dtype)
    return x * keep / (1.0 - p)


def length_after_encode(length: int, num_blocks: int) -> int:
    """Output frame count of the conv stack; 0 or negative means too short."""
    blur = len(BLUR_KERNEL)
    for _ in range(num_blocks):
        length = length - (blur - 1)
        if length < CONV_KERNEL:
            return 0
        length = (length - CONV_KERNEL) // CONV_STRIDE + 1
    return length


def min_style_input_length(num_blocks: int) -> int:
    """Smallest input length producing at least one feature frame."""
    lo, hi = 1, 1
    while length_after_encode(hi, num_blocks) < 1:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if length_after_encode(mid, num_blocks) >= 1:
            hi = mid
        else:
            lo = mid + 1
    return lo


def receptive_field(num_blocks: int, blur_size: int = len(BLUR_KERNEL),
                    kernel: int = CONV_KERNEL, stride: int = CONV_STRIDE) -> int:
    """Receptive field of the (blur -> strided conv) chain, in input samples.

    Time invariance only holds beyond this horizon: within the receptive
    field the features retain time-dependent detail of the input.
    """
    rf, jump = 1, 1
    for _ in range(num_blocks):
        rf += (blur_size - 1) * jump
        rf += (kernel - 1) * jump
        jump *= stride
    return rf


class StyleConvEncoder(nn.Module):
    """Blur -> conv(k=3, s=2, no padding) -> Swish -> dropout, repeated."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        channels = (config.input_dim,) + tuple(config.conv_channels)
        self.convs = nn.ModuleList(
            nn.Conv1d(channels[i], channels[i + 1], CONV_KERNEL, stride=CONV_STRIDE)
            for i in range(len(config.conv_channels))
        )
        kernel = torch.tensor(BLUR_KERNEL) / sum(BLUR_KERNEL)
        self.register_buffer("blur_kernel", kernel)

    @property
    def num_blocks(self) -> int:
        return len(self.convs)

    def min_input_length(self) -> int:
        return min_style_input_length(self.num_blocks)

    def _blur(self, x: torch.Tensor) -> torch.Tensor:
        c = x.shape[1]
        k = self.blur_kernel.to(x.dtype).expand(c, 1, -1)
        return F.conv1d(x, k, groups=c)

    def forward(self, frames: torch.Tensor, dropout_generator: torch.Generator | None = None) -> torch.Tensor:
        """Encode (T, d) or (B, d, T) input frames to a feature sequence.

        Returns (T', s) for unbatched input, (B, s, T') for batched.
        Dropout is active only when a generator is supplied (training mode).
        """
        unbatched = frames.dim() == 2
        x = frames.t().unsqueeze(0) if unbatched else frames
        t_in = x.shape[-1]
        if length_after_encode(t_in, self.num_blocks) < 1:
            raise InputTooShort(
                f"style input length {t_in} < minimum {self.min_input_length()}"
            )
        for conv in self.convs:
            x = conv(self._blur(x))
            x = F.silu(x)
            x = seeded_dropout(x, self.config.dropout, dropout_generator)
        return x.squeeze(0).t() if unbatched else x


# ---------------------------------------------------------------------------
# Subspace style difference and transform


def phi(f_target: torch.Tensor, f_source: torch.Tensor, basis: torch.Tensor) -> torch.Tensor:
    """Style difference: time-mean of the subspace projection, target minus source.

    Feature sequences are (T, s); basis is (k, s).  Returns a k-vector.
    """
    if f_target.shape[0] < 1 or f_source.shape[0] < 1:
        raise ValueError("feature sequences must be non-empty")
    return (f_target @ basis.t()).mean(dim=0) - (f_source @ basis.t()).mean(dim=0)


def transform_M(f_source: torch.Tensor, delta: torch.Tensor, basis: torch.Tensor) -> torch.Tensor:
    """Add the lifted style shift (basis^T delta) to every frame of the source."""
    return f_source + delta @ basis


def normalize_basis_columns_(basis: torch.Tensor) -> None:
    """Re-normalize every column of the basis to unit norm, in place."""
    with torch.no_grad():
        basis /= basis.norm(dim=0, keepdim=True).clamp_min(1e-12)


def trace_regularizer(
    basis: torch.Tensor, num_probes: int, generator: torch.Generator | None = None, seed: int | None = None
) -> torch.Tensor:
    """Hutchinson estimate of tr((B^T B)^2) via z^T (B^T B)^2 z = ||B^T (B z)||^2."""
    if num_probes < 1:
        raise ValueError("num_probes must be >= 1")
    if generator is None:
        generator = torch.Generator()
        generator.manual_seed(0 if seed is None else seed)
    s = basis.shape[1]
    z = torch.randn(num_probes, s, generator=generator, dtype=basis.dtype)
    lifted = z @ basis.t()          # (N, k): B z
    back = lifted @ basis           # (N, s): B^T (B z)
    return (back**2).sum(dim=1).mean()


def trace_of_gram_squared(basis: torch.Tensor) -> torch.Tensor:
    """Dense oracle for the regularizer target."""
    gram = basis.t() @ basis
    return torch.trace(gram @ gram)


class StyleAttention(nn.Module):
    """Multi-head attention from the decoding context into the feature frames.

    No positional encoding: keys and values are per-frame linear maps, so
    permuting frames permutes the weights identically.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        width = config.heads * config.head_dim
        self.query_proj = nn.Linear(config.bottom_dim + config.alphabet, width)
        self.key_proj = nn.Linear(config.style_dim, width)
        self.value_proj = nn.Linear(config.style_dim, width)
        self.out_proj = nn.Linear(width, config.attn_out_dim)

    def forward(
        self,
        h_bottom: torch.Tensor,
        attended_content: torch.Tensor,
        features: torch.Tensor,
        frame_mask: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, ...) query inputs and (B, T', s) features -> (attended, weights).

        weights has shape (B, H, T') and each head's row sums to 1 over the
        unmasked frames.
        """
        cfg = self.config
        b, tp, _ = features.shape
        q = self.query_proj(torch.cat([h_bottom, attended_content], dim=-1))
        q = q.view(b, cfg.heads, cfg.head_dim)
        k = self.key_proj(features).view(b, tp, cfg.heads, cfg.head_dim)
        v = self.value_proj(features).view(b, tp, cfg.heads, cfg.head_dim)
        logits = torch.einsum("bhd,bthd->bht", q, k) / math.sqrt(cfg.head_dim)
        if frame_mask is not None:
            logits = logits.masked_fill(~frame_mask[:, None, :], float("-inf"))
        weights = torch.softmax(logits, dim=-1)
        mixed = torch.einsum("bht,bthd->bhd", weights, v)
        attended = self.out_proj(mixed.reshape(b, cfg.heads * cfg.head_dim))
        return attended, weights


class StyleEncoder(nn.Module):
    """Conv feature extractor + style attention + posterior head + subspace basis."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.conv = StyleConvEncoder(config)
        self.attention = StyleAttention(config)
        self.posterior_head = nn.Linear(config.attn_out_dim, 2 * config.z_dim)
        basis = torch.randn(config.style_k, config.style_dim)
        normalize_basis_columns_(basis)
        self.basis = nn.Parameter(basis)

    def posterior(self, attended: torch.Tensor) -> GaussianDiag:
        out = self.posterior_head(attended)
        mean, log_std = torch.chunk(out, 2, dim=-1)
        return GaussianDiag(mean=mean, log_std=log_std)

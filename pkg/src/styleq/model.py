"""Full controllable generator (backbone + style encoder) and checkpoint IO.

Checkpoints are versioned containers mapping canonical parameter names
(the module state_dict registry, e.g. ``backbone.bottom.weight_ih``,
``style.basis``) to shape-tagged tensors, plus the ModelConfig and the
training-step counter.  Saving and loading round-trips bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import torch
import torch.nn as nn

from .data import strokes_to_frames
from .seqmodel import Backbone, GaussianDiag, ModelConfig
from .styleeq import StyleEncoder
from .synthglyph import StrokeSequence

CHECKPOINT_FORMAT_VERSION = 1


class StyleControlledModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.backbone = Backbone(config)
        self.style = StyleEncoder(config)

    def encode_style_strokes(
        self, strokes: StrokeSequence, dropout_generator: torch.Generator | None = None,
        dtype=torch.float32,
    ) -> torch.Tensor:
        """Convenience: strokes -> offset frames -> (T', s) style features."""
        frames = strokes_to_frames(strokes, self.config.offset_scale, dtype=dtype)
        return self.style.conv(frames, dropout_generator=dropout_generator)

    def posterior_step(
        self, h_bottom: torch.Tensor, attended_content: torch.Tensor,
        features: torch.Tensor, frame_mask: torch.Tensor | None = None,
    ) -> tuple[GaussianDiag, torch.Tensor]:
        """Style-attend and map to the variational posterior for one step."""
        attended, weights = self.style.attention(h_bottom, attended_content, features, frame_mask)
        return self.style.posterior(attended), weights


def save_checkpoint(path: Path, model: StyleControlledModel, step: int, extra: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "step": step,
        "params": {k: v.clone() for k, v in model.state_dict().items()},
    }
    if extra:
        payload["extra"] = extra
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: Path) -> tuple[StyleControlledModel, int, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing checkpoint: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    config = ModelConfig.from_dict(payload["config"])
    model = StyleControlledModel(config)
    # match the stored dtype (training may run in float64 for checks)
    any_param = next(iter(payload["params"].values()))
    model.to(any_param.dtype)
    model.load_state_dict(payload["params"])
    return model, int(payload["step"]), payload.get("extra", {})

"""Controllable autoregressive stroke-sequence generation with
style equalization: a synthetic online-handwriting domain with exact style
oracles, a variational recurrent generator with monotone content attention,
a learned style-subspace equalization pair, and the training/inference/
evaluation pipeline around them.
"""

from .inference import (
    GenerationConfig,
    GenerationResult,
    generate_from_prior,
    generate_interpolate,
    generate_primed,
    generate_replicate,
)
from .model import StyleControlledModel, load_checkpoint, save_checkpoint
from .oracles import decode_content_oracle, fit_style_oracle
from .seqmodel import Backbone, ModelConfig
from .styleeq import StyleEncoder, phi, receptive_field, transform_M
from .synthglyph import (
    ContentSequence,
    LabeledSample,
    StrokeSequence,
    StyleParams,
    load_dataset,
    make_dataset,
    render_sample,
    save_dataset,
)
from .training import TrainConfig, TrainingDiverged, train

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "ContentSequence",
    "GenerationConfig",
    "GenerationResult",
    "LabeledSample",
    "ModelConfig",
    "StrokeSequence",
    "StyleControlledModel",
    "StyleEncoder",
    "StyleParams",
    "TrainConfig",
    "TrainingDiverged",
    "decode_content_oracle",
    "fit_style_oracle",
    "generate_from_prior",
    "generate_interpolate",
    "generate_primed",
    "generate_replicate",
    "load_checkpoint",
    "load_dataset",
    "make_dataset",
    "phi",
    "receptive_field",
    "render_sample",
    "save_checkpoint",
    "save_dataset",
    "train",
    "transform_M",
]

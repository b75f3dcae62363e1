"""Minimal masked-autoencoder harness driven by mask-plan files."""

from .loss import masked_patch_mse
from .model import TinyMae, sincos_pos_embed
from .plans import (
    GridMismatchError,
    MalformedPlanError,
    PlanRecord,
    Sample,
    image_to_patches,
    load_image,
    load_plans,
    patches_to_image,
)
from .synth import render_fan, write_constant_corpus, write_corpus
from .train import TinyMaeConfig, build_model, sample_loss, train, write_trace_csv

__version__ = "0.1.0"

__all__ = [
    "GridMismatchError",
    "MalformedPlanError",
    "PlanRecord",
    "Sample",
    "TinyMae",
    "TinyMaeConfig",
    "build_model",
    "image_to_patches",
    "load_image",
    "load_plans",
    "masked_patch_mse",
    "patches_to_image",
    "render_fan",
    "sample_loss",
    "sincos_pos_embed",
    "train",
    "write_constant_corpus",
    "write_corpus",
    "write_trace_csv",
]

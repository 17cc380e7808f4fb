"""Self-supervised seq2point NILM: numpy networks, training stages and a CLI."""

from .errors import NilmError
from .models import ArchitectureSpec, Model, build_model, load_checkpoint, save_checkpoint
from .pipeline import CaseConfig, disaggregate, downstream_finetune, pretext_train, run_case, train_zsl

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec",
    "CaseConfig",
    "Model",
    "NilmError",
    "build_model",
    "disaggregate",
    "downstream_finetune",
    "load_checkpoint",
    "pretext_train",
    "run_case",
    "save_checkpoint",
    "train_zsl",
]

"""Implicit surface reconstruction with a p-Poisson constrained gradient field."""

from .extract import TriangleMesh, evaluate_grid, marching_cubes
from .fields import PExponent, sample_fields
from .loss import CurlTarget, Formulation, LossMode, LossWeights, total_loss
from .network import MLPConfig, Params, forward, init_geometric, init_kaiming, load_checkpoint, save_checkpoint
from .sampler import PointCloud, normalize
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "CurlTarget", "Formulation", "LossMode", "LossWeights", "MLPConfig", "PExponent", "Params",
    "PointCloud", "TrainConfig", "TriangleMesh", "evaluate_grid", "forward", "init_geometric",
    "init_kaiming", "load_checkpoint", "marching_cubes", "normalize", "sample_fields",
    "save_checkpoint", "total_loss", "train",
]

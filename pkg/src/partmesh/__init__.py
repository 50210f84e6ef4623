"""Part-aware mesh autoencoder with NMF local weights and Chebyshev graph convolutions."""
from .config import RunConfig
from .errors import (CheckpointError, ContractViolation, NumericOverflowError, ParseError,
                     TrainingDiverged)
from .kernels import BACKEND
from .mesh import Mesh, laplacian_bundle, load_obj, vertex_distance_field, write_obj
from .model import (Checkpoint, decode, encode, interpolate_part, project_parts, reconstruct,
                    swap_parts, train, training_loss, weighted_latent_map)
from .sampling import Hierarchy, build_hierarchy

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Checkpoint", "CheckpointError", "ContractViolation", "Hierarchy", "Mesh",
    "NumericOverflowError", "ParseError", "RunConfig", "TrainingDiverged", "build_hierarchy",
    "decode", "encode", "interpolate_part", "laplacian_bundle", "load_obj", "project_parts",
    "reconstruct", "swap_parts", "train", "training_loss", "vertex_distance_field",
    "weighted_latent_map", "write_obj",
]

from .scene import Scene, SceneConfig, derive_seed, generate_scene, simulate_measurement
from .scoring import mse_from_posterior, mse_ground_truth, support_metrics

__all__ = [
    "Scene",
    "SceneConfig",
    "derive_seed",
    "generate_scene",
    "simulate_measurement",
    "mse_from_posterior",
    "mse_ground_truth",
    "support_metrics",
]

"""Explicit Gaussian-splat radiance representation and its training loop."""

from .compositing import (
    Ray,
    RaySample,
    alpha_from_density,
    composite_front_to_back,
    composite_samples,
    volume_render_ray,
)
from .gaussians import (
    ALPHA_MAX,
    COV_EIGENVALUE_FLOOR,
    Gaussian2D,
    Gaussian3D,
    covariance_from_params,
    project_gaussian,
)
from .rasterizer import SceneGrads, rasterize, rasterize_backward
from .scene import RenderOutput, SplatScene, appearance_apply, identity_appearance
from .training import TrainConfig, TrainingView, photometric_loss, ssim_with_grad, train

__all__ = [
    "ALPHA_MAX",
    "COV_EIGENVALUE_FLOOR",
    "Gaussian2D",
    "Gaussian3D",
    "Ray",
    "RaySample",
    "RenderOutput",
    "SceneGrads",
    "SplatScene",
    "TrainConfig",
    "TrainingView",
    "alpha_from_density",
    "appearance_apply",
    "composite_front_to_back",
    "composite_samples",
    "covariance_from_params",
    "identity_appearance",
    "photometric_loss",
    "project_gaussian",
    "rasterize",
    "rasterize_backward",
    "ssim_with_grad",
    "train",
    "volume_render_ray",
]

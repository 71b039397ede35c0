"""Splat scene container, per-image appearance model, and initialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .gaussians import Gaussian3D, logit


def appearance_apply(color, params):
    """Affine per-image color transform: clamp(gain * color + offset, 0, 1).

    `params` is a 6-vector (3 gains, then 3 offsets); gains must be positive.
    """
    params = np.asarray(params, dtype=float)
    gain, offset = params[:3], params[3:]
    if np.any(gain <= 0):
        raise ValueError("appearance gains must be positive")
    return np.clip(np.asarray(color, dtype=float) * gain + offset, 0.0, 1.0)


def identity_appearance(n_images):
    params = np.zeros((n_images, 6))
    params[:, :3] = 1.0
    return params


@dataclass
class SplatScene:
    """Struct-of-arrays Gaussian scene plus per-training-image appearance."""

    means: np.ndarray            # (N, 3)
    rotations: np.ndarray        # (N, 4) scalar-first quaternions
    log_scales: np.ndarray       # (N, 3)
    opacity_logits: np.ndarray   # (N,)
    base_colors: np.ndarray      # (N, 3) in [0, 1]
    appearance: np.ndarray | None = None   # (M, 6): 3 gains + 3 offsets
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.rotations = np.asarray(self.rotations, dtype=float)
        self.log_scales = np.asarray(self.log_scales, dtype=float)
        self.opacity_logits = np.asarray(self.opacity_logits, dtype=float)
        self.base_colors = np.asarray(self.base_colors, dtype=float)
        self.background = np.asarray(self.background, dtype=float)
        if self.appearance is not None:
            self.appearance = np.asarray(self.appearance, dtype=float)
            if np.any(self.appearance[:, :3] <= 0):
                raise ValueError("appearance gains must be positive")

    def __len__(self):
        return len(self.means)

    def gaussian(self, i):
        return Gaussian3D(
            mean=self.means[i],
            rotation=self.rotations[i],
            log_scale=self.log_scales[i],
            opacity_logit=float(self.opacity_logits[i]),
            base_color=self.base_colors[i],
        )

    @property
    def gaussians(self):
        return [self.gaussian(i) for i in range(len(self))]

    @classmethod
    def from_gaussians(cls, gaussians, appearance=None, background=(0.0, 0.0, 0.0)):
        return cls(
            means=np.stack([g.mean for g in gaussians]),
            rotations=np.stack([g.rotation for g in gaussians]),
            log_scales=np.stack([g.log_scale for g in gaussians]),
            opacity_logits=np.array([g.opacity_logit for g in gaussians], dtype=float),
            base_colors=np.stack([g.base_color for g in gaussians]),
            appearance=appearance,
            background=np.asarray(background, dtype=float),
        )

    @classmethod
    def from_points(cls, positions, colors, n_images=0, background=(0.0, 0.0, 0.0),
                    initial_opacity=0.1):
        """Seed a scene from sparse points: isotropic scales from the mean
        distance to the 3 nearest neighbors, fixed initial opacity."""
        positions = np.asarray(positions, dtype=float)
        colors = np.clip(np.asarray(colors, dtype=float), 1e-4, 1.0 - 1e-4)
        n = len(positions)
        if n == 0:
            raise ValueError("need at least one seed point")
        if n > 1:
            tree = cKDTree(positions)
            k = min(4, n)
            dist, _ = tree.query(positions, k=k)
            nn = np.maximum(dist[:, 1:].mean(axis=1), 1e-6)
        else:
            nn = np.array([0.1])
        rotations = np.zeros((n, 4))
        rotations[:, 0] = 1.0
        return cls(
            means=positions.copy(),
            rotations=rotations,
            log_scales=np.repeat(np.log(nn)[:, None], 3, axis=1),
            opacity_logits=np.full(n, float(logit(initial_opacity))),
            base_colors=colors,
            appearance=identity_appearance(n_images) if n_images > 0 else None,
            background=np.asarray(background, dtype=float),
        )

    def copy(self):
        return SplatScene(
            means=self.means.copy(),
            rotations=self.rotations.copy(),
            log_scales=self.log_scales.copy(),
            opacity_logits=self.opacity_logits.copy(),
            base_colors=self.base_colors.copy(),
            appearance=None if self.appearance is None else self.appearance.copy(),
            background=self.background.copy(),
        )

    def scene_extent(self):
        """Radius of the bounding sphere around the mean center."""
        center = self.means.mean(axis=0)
        return float(np.max(np.linalg.norm(self.means - center, axis=1))) or 1.0


@dataclass
class RenderOutput:
    image: np.ndarray                # (H, W, 3) in [0, 1]
    final_transmittance: np.ndarray  # (H, W) in [0, 1]

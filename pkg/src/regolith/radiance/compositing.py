"""Front-to-back alpha compositing and the ray-marching reference oracle.

The compositing core accumulates per-sample opacities front to back,
C = sum_i alpha_i * T_i * c_i with T_i = prod_{j<i} (1 - alpha_j),
which is the exact discrete form of the volume rendering integral once
each interval's opacity is taken as alpha = 1 - exp(-sigma * delta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Ray:
    """A ray r(t) = origin + t * direction with unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit norm, got {n}")
        object.__setattr__(self, "direction", d)

    def at(self, t):
        return self.origin + np.multiply.outer(np.asarray(t, dtype=float), self.direction)


@dataclass(frozen=True)
class RaySample:
    """One marching interval: density per meter, color, interval length."""

    density: float
    color: np.ndarray
    interval: float

    def __post_init__(self):
        if self.density < 0:
            raise ValueError("density must be nonnegative")
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        c = np.asarray(self.color, dtype=float)
        if c.shape != (3,) or np.any(c < 0) or np.any(c > 1):
            raise ValueError("color must be a 3-vector in [0, 1]")
        object.__setattr__(self, "color", c)


def alpha_from_density(density, interval):
    """Opacity of an interval: alpha = 1 - exp(-density * interval)."""
    density = np.asarray(density, dtype=float)
    interval = np.asarray(interval, dtype=float)
    if np.any(density < 0):
        raise ValueError("density must be nonnegative")
    if np.any(interval <= 0):
        raise ValueError("interval must be positive")
    return -np.expm1(-density * interval)


def composite_front_to_back(alphas, colors, background):
    """Composite ordered (alpha, color) samples over a background color.

    Returns (color, final_transmittance). The accumulated color weight plus
    the final transmittance telescopes to exactly 1 before the background
    blend, which is what ties the product form to the transmittance sum.
    """
    alphas = np.asarray(alphas, dtype=float)
    background = np.asarray(background, dtype=float)
    if alphas.size == 0:
        return background.copy(), 1.0
    colors = np.asarray(colors, dtype=float)
    if np.any(alphas < 0) or np.any(alphas >= 1):
        raise ValueError("alphas must lie in [0, 1)")
    transmittance = np.concatenate(([1.0], np.cumprod(1.0 - alphas)))
    weights = alphas * transmittance[:-1]
    color = weights @ colors + transmittance[-1] * background
    return color, float(transmittance[-1])


def composite_samples(samples, background):
    """Composite a list of RaySample via alpha_from_density."""
    alphas = [alpha_from_density(s.density, s.interval) for s in samples]
    colors = [s.color for s in samples]
    return composite_front_to_back(alphas, colors, background)


def volume_render_ray(field, ray, t_near, t_far, n_samples, background=(0.0, 0.0, 0.0)):
    """Quadrature of the continuous rendering integral along one ray.

    `field(points, direction)` returns (densities, colors) for (N, 3) points.
    Samples are placed at midpoints of a uniform partition of [t_near, t_far];
    the result equals composite_front_to_back over the sampled intervals and
    converges to the continuous integral as n_samples grows.
    """
    if not t_far > t_near >= 0:
        raise ValueError("require t_far > t_near >= 0")
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    edges = np.linspace(t_near, t_far, n_samples + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    deltas = np.diff(edges)
    points = ray.at(mids)
    densities, colors = field(points, ray.direction)
    densities = np.asarray(densities, dtype=float)
    if np.any(densities < 0):
        raise ValueError("field returned negative density")
    alphas = alpha_from_density(densities, deltas)
    color, _ = composite_front_to_back(alphas, colors, background)
    return color

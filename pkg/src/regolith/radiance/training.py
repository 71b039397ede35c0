"""Splat training: adaptive-moment updates, L1+SSIM loss, densify/prune."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from ..geometry import quat_to_rotmat
from .rasterizer import rasterize, rasterize_backward


@dataclass
class TrainConfig:
    steps: int = 2000
    ssim_weight: float = 0.2               # loss = (1-w)*L1 + w*(1-SSIM)
    lr_means: float = 1.6e-4               # scaled by scene extent
    lr_rotations: float = 1e-3
    lr_scales: float = 5e-3
    lr_opacities: float = 5e-2
    lr_colors: float = 2.5e-3
    lr_appearance: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    densify_interval: int = 100
    densify_grad_threshold: float = 2e-4
    prune_alpha: float = 0.005
    split_factor: float = 1.6
    split_scale_fraction: float = 0.01     # of scene extent; above -> split, below -> clone
    densify_stop_step: int | None = None   # None = densify for the whole run
    max_gaussians: int = 100000
    seed: int = 42


@dataclass
class TrainingView:
    image: np.ndarray          # (H, W, 3) ground truth in [0, 1]
    pose: object               # CameraPose
    intrinsics: object         # CameraIntrinsics
    appearance_id: int | None = None


def gaussian_kernel_1d(radius=5, sigma=1.5):
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filt(img, kernel):
    """Separable zero-padded filtering; self-adjoint for symmetric kernels."""
    out = correlate1d(img, kernel, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, kernel, axis=1, mode="constant", cval=0.0)


def ssim_with_grad(x, y, c1=0.01**2, c2=0.03**2, kernel=None):
    """Mean SSIM between same-shaped images and its gradient w.r.t. x.

    Works per channel with an 11x11 Gaussian window (sigma 1.5) and zero
    padding, matching the training-loss convention.
    """
    if kernel is None:
        kernel = gaussian_kernel_1d()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mu_x = _filt(x, kernel)
    mu_y = _filt(y, kernel)
    x2 = _filt(x * x, kernel)
    y2 = _filt(y * y, kernel)
    xy = _filt(x * y, kernel)
    sx = x2 - mu_x**2
    sy = y2 - mu_y**2
    sxy = xy - mu_x * mu_y
    a1 = 2 * mu_x * mu_y + c1
    a2 = 2 * sxy + c2
    b1 = mu_x**2 + mu_y**2 + c1
    b2 = sx + sy + c2
    s = (a1 * a2) / (b1 * b2)
    n = s.size
    ds_da1 = a2 / (b1 * b2)
    ds_da2 = a1 / (b1 * b2)
    ds_db1 = -s / b1
    ds_db2 = -s / b2
    g_mu = 2 * mu_y * ds_da1 - 2 * mu_y * ds_da2 + 2 * mu_x * ds_db1 - 2 * mu_x * ds_db2
    g_x2 = ds_db2
    g_xy = 2 * ds_da2
    grad = (_filt(g_mu, kernel) + 2 * x * _filt(g_x2, kernel) + y * _filt(g_xy, kernel)) / n
    return float(s.mean()), grad


def photometric_loss(rendered, target, ssim_weight):
    """(1-w)*L1 + w*(1-SSIM) with its gradient w.r.t. the rendered image."""
    rendered = np.asarray(rendered, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = rendered - target
    l1 = float(np.abs(diff).mean())
    g_l1 = np.sign(diff) / diff.size
    ssim_val, g_ssim = ssim_with_grad(rendered, target)
    loss = (1.0 - ssim_weight) * l1 + ssim_weight * (1.0 - ssim_val)
    grad = (1.0 - ssim_weight) * g_l1 - ssim_weight * g_ssim
    return loss, grad


class AdamState:
    """Per-array first/second moment buffers with bias correction."""

    def __init__(self, shapes):
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def step(self, params, grads, lrs, beta1, beta2, eps):
        self.t += 1
        bc1 = 1.0 - beta1**self.t
        bc2 = 1.0 - beta2**self.t
        for key, g in grads.items():
            if g is None:
                continue
            self.m[key] = beta1 * self.m[key] + (1 - beta1) * g
            self.v[key] = beta2 * self.v[key] + (1 - beta2) * g * g
            mhat = self.m[key] / bc1
            vhat = self.v[key] / bc2
            params[key] -= lrs[key] * mhat / (np.sqrt(vhat) + eps)

    def remap(self, keep_index, n_new):
        """Keep survivor rows after prune, append zero state for new rows."""
        for buf in (self.m, self.v):
            for key in list(buf.keys()):
                if key == "appearance":
                    continue
                kept = buf[key][keep_index]
                pad = np.zeros((n_new,) + kept.shape[1:])
                buf[key] = np.concatenate([kept, pad], axis=0)


def _scene_params(scene):
    return {
        "means": scene.means,
        "rotations": scene.rotations,
        "log_scales": scene.log_scales,
        "opacity_logits": scene.opacity_logits,
        "base_colors": scene.base_colors,
        "appearance": scene.appearance,
    }


def _densify_and_prune(scene, grad_accum, grad_count, config, extent, rng, adam):
    """Split high-gradient large Gaussians, clone small ones, prune faint ones."""
    avg = grad_accum / np.maximum(grad_count, 1.0)
    alpha = 1.0 / (1.0 + np.exp(-scene.opacity_logits))
    keep = alpha >= config.prune_alpha

    scale_max = np.exp(scene.log_scales).max(axis=1)
    hot = (avg > config.densify_grad_threshold) & keep
    big = scale_max > config.split_scale_fraction * extent
    split_idx = np.nonzero(hot & big)[0]
    clone_idx = np.nonzero(hot & ~big)[0]

    room = max(config.max_gaussians - int(keep.sum()), 0)
    if 2 * len(split_idx) + len(clone_idx) > room:
        split_idx = split_idx[: room // 2]
        clone_idx = clone_idx[: max(room - 2 * len(split_idx), 0)]

    new_rows = {k: [] for k in ("means", "rotations", "log_scales",
                                "opacity_logits", "base_colors")}

    def sample_offsets(indices, count):
        offs = []
        for i in indices:
            R = quat_to_rotmat(scene.rotations[i])
            eps = rng.standard_normal((count, 3)) * np.exp(scene.log_scales[i])
            offs.append(eps @ R.T)
        return offs

    for i, offs in zip(split_idx, sample_offsets(split_idx, 2)):
        for o in offs:
            new_rows["means"].append(scene.means[i] + o)
            new_rows["rotations"].append(scene.rotations[i].copy())
            new_rows["log_scales"].append(scene.log_scales[i] - np.log(config.split_factor))
            new_rows["opacity_logits"].append(scene.opacity_logits[i])
            new_rows["base_colors"].append(scene.base_colors[i].copy())
    for i, offs in zip(clone_idx, sample_offsets(clone_idx, 1)):
        new_rows["means"].append(scene.means[i] + 0.5 * offs[0])
        new_rows["rotations"].append(scene.rotations[i].copy())
        new_rows["log_scales"].append(scene.log_scales[i].copy())
        new_rows["opacity_logits"].append(scene.opacity_logits[i])
        new_rows["base_colors"].append(scene.base_colors[i].copy())

    keep[split_idx] = False   # split parents are replaced by their halves
    keep_index = np.nonzero(keep)[0]
    n_new = len(new_rows["means"])

    def stack(key, old):
        parts = [old[keep_index]]
        if n_new:
            parts.append(np.asarray(new_rows[key]).reshape((n_new,) + old.shape[1:]))
        return np.concatenate(parts, axis=0)

    scene.means = stack("means", scene.means)
    scene.rotations = stack("rotations", scene.rotations)
    scene.log_scales = stack("log_scales", scene.log_scales)
    scene.opacity_logits = stack("opacity_logits", scene.opacity_logits)
    scene.base_colors = stack("base_colors", scene.base_colors)
    adam.remap(keep_index, n_new)
    return len(scene)


def train(scene, views, config=None, callback=None):
    """Optimize a scene against posed training views.

    Views are visited round-robin, one per step. Returns the trained scene
    (modified in place) and the per-step loss history. Raises on a
    non-finite loss, reporting the offending step.
    """
    config = config or TrainConfig()
    views = list(views)
    if len(views) < 2:
        raise ValueError("need at least 2 training views")
    rng = np.random.default_rng(config.seed)
    extent = scene.scene_extent()

    shapes = {k: v.shape for k, v in _scene_params(scene).items() if v is not None}
    adam = AdamState(shapes)
    lrs = {
        "means": config.lr_means * extent,
        "rotations": config.lr_rotations,
        "log_scales": config.lr_scales,
        "opacity_logits": config.lr_opacities,
        "base_colors": config.lr_colors,
        "appearance": config.lr_appearance,
    }

    grad_accum = np.zeros(len(scene))
    grad_count = np.zeros(len(scene))
    history = []

    for step in range(config.steps):
        view = views[step % len(views)]
        app_id = view.appearance_id if scene.appearance is not None else None
        h, w = view.image.shape[:2]
        out = rasterize(scene, view.pose, view.intrinsics, (h, w), appearance_id=app_id)
        loss, grad_img = photometric_loss(out.image, view.image, config.ssim_weight)
        if not np.isfinite(loss):
            raise ValueError(f"non-finite loss at step {step}")
        history.append(loss)

        grads = rasterize_backward(scene, view.pose, view.intrinsics, grad_img, (h, w),
                                   appearance_id=app_id)
        grad_accum += grads.mean2d_norms
        grad_count += (grads.mean2d_norms > 0).astype(float)

        params = _scene_params(scene)
        gdict = {
            "means": grads.means,
            "rotations": grads.rotations,
            "log_scales": grads.log_scales,
            "opacity_logits": grads.opacity_logits,
            "base_colors": grads.base_colors,
        }
        if scene.appearance is not None and grads.appearance is not None:
            gapp = np.zeros_like(scene.appearance)
            gapp[app_id] = grads.appearance
            gdict["appearance"] = gapp
        adam.step(params, gdict, lrs, config.beta1, config.beta2, config.adam_eps)

        # projections keeping parameters in their valid domains
        norms = np.linalg.norm(scene.rotations, axis=1, keepdims=True)
        scene.rotations /= np.maximum(norms, 1e-12)
        np.clip(scene.base_colors, 1e-4, 1.0 - 1e-4, out=scene.base_colors)
        if scene.appearance is not None:
            np.clip(scene.appearance[:, :3], 1e-3, None, out=scene.appearance[:, :3])

        due = (step + 1) % config.densify_interval == 0
        if due and (config.densify_stop_step is None or step + 1 <= config.densify_stop_step):
            _densify_and_prune(scene, grad_accum, grad_count, config, extent, rng, adam)
            grad_accum = np.zeros(len(scene))
            grad_count = np.zeros(len(scene))

        if callback is not None:
            callback(step, loss, scene)

    return scene, history

"""Depth-sorted splat rasterization, forward and analytic backward.

Splats are projected, sorted front to back (ties broken by Gaussian index),
and composited per pixel with early termination once transmittance drops
below T_MIN. The backward pass replays the same traversal and accumulates
exact gradients for every optimizable parameter through the compositing
chain, the 2D Gaussian evaluation, and the covariance projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import quat_to_rotmat
from .gaussians import ALPHA_MAX, COV_EIGENVALUE_FLOOR, sigmoid
from .scene import RenderOutput

T_MIN = 1e-4


@dataclass
class SceneGrads:
    """Gradients matching SplatScene parameter arrays."""

    means: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    base_colors: np.ndarray
    appearance: np.ndarray | None
    mean2d_norms: np.ndarray   # screen-space positional gradient magnitudes


def _prepare_splats(scene, pose, intrinsics, appearance_id, z_near=0.01):
    """Project all Gaussians; returns per-splat arrays sorted front to back."""
    R = pose.rotation_matrix()
    x_cam = scene.means @ R.T + pose.translation
    visible = x_cam[:, 2] > z_near
    idx = np.nonzero(visible)[0]
    x = x_cam[idx]
    z = x[:, 2]
    fx, fy = intrinsics.fx, intrinsics.fy
    mean2d = np.stack([fx * x[:, 0] / z + intrinsics.cx,
                       fy * x[:, 1] / z + intrinsics.cy], axis=1)

    # per-splat 2x3 projection Jacobians and M = J @ R
    n = len(idx)
    J = np.zeros((n, 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * x[:, 0] / z**2
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * x[:, 1] / z**2
    M = J @ R

    qn = scene.rotations[idx]
    qnorm = np.linalg.norm(qn, axis=1, keepdims=True)
    qh = qn / qnorm
    Rq = np.stack([quat_to_rotmat(q) for q in qh])
    D = np.exp(2.0 * scene.log_scales[idx])
    Sigma = Rq * D[:, None, :] @ np.transpose(Rq, (0, 2, 1))
    cov2d = M @ Sigma @ np.transpose(M, (0, 2, 1))
    cov2d = 0.5 * (cov2d + np.transpose(cov2d, (0, 2, 1)))
    cov2d[:, 0, 0] += COV_EIGENVALUE_FLOOR
    cov2d[:, 1, 1] += COV_EIGENVALUE_FLOOR

    sig = sigmoid(scene.opacity_logits[idx])
    alpha = np.minimum(sig, ALPHA_MAX)

    base = scene.base_colors[idx]
    if appearance_id is not None:
        if scene.appearance is None:
            raise ValueError("scene has no appearance parameters")
        params = scene.appearance[appearance_id]
        gain, offset = params[:3], params[3:]
        raw = base * gain + offset
    else:
        gain = None
        raw = base
    color = np.clip(raw, 0.0, 1.0)
    color_inside = (raw > 0.0) & (raw < 1.0)

    order = np.lexsort((idx, z))
    return {
        "idx": idx[order],
        "x_cam": x[order],
        "mean2d": mean2d[order],
        "cov2d": cov2d[order],
        "alpha": alpha[order],
        "sig": sig[order],
        "color": color[order],
        "color_inside": color_inside[order],
        "base": base[order],
        "gain": gain,
        "J": J[order],
        "M": M[order],
        "Sigma": Sigma[order],
        "Rq": Rq[order],
        "qh": qh[order],
        "qnorm": qnorm[order, 0],
        "D": D[order],
        "R": R,
    }


def _splat_weight(mean2d, cov2d, alpha, xs, ys):
    """Per-pixel contribution w = alpha * exp(-0.5 d^T cov^-1 d) over the grid."""
    a, b, c = cov2d[0, 0], cov2d[0, 1], cov2d[1, 1]
    det = a * c - b * b
    ia, ib, ic = c / det, -b / det, a / det
    dx = xs - mean2d[0]
    dy = ys - mean2d[1]
    q = ia * dx * dx + 2.0 * ib * (dx * dy) + ic * dy * dy
    g = np.exp(-0.5 * q)
    return alpha * g, g, (dx, dy), (ia, ib, ic)


def _pixel_grid(image_size):
    h, w = image_size
    xs = (np.arange(w, dtype=float) + 0.5)[None, :]
    ys = (np.arange(h, dtype=float) + 0.5)[:, None]
    return xs, ys


def _forward_pass(splats, image_size, background):
    h, w = image_size
    xs, ys = _pixel_grid(image_size)
    color_acc = np.zeros((h, w, 3))
    trans = np.ones((h, w))
    for k in range(len(splats["idx"])):
        wgt, _, _, _ = _splat_weight(
            splats["mean2d"][k], splats["cov2d"][k], splats["alpha"][k], xs, ys)
        active = trans >= T_MIN
        contrib = np.where(active, trans * wgt, 0.0)
        color_acc += contrib[:, :, None] * splats["color"][k]
        trans = np.where(active, trans * (1.0 - wgt), trans)
    return color_acc, trans


def rasterize(scene, pose, intrinsics, image_size, appearance_id=None):
    """Render the scene into an image of `image_size` = (H, W)."""
    splats = _prepare_splats(scene, pose, intrinsics, appearance_id)
    color_acc, trans = _forward_pass(splats, image_size, scene.background)
    image = color_acc + trans[:, :, None] * scene.background
    return RenderOutput(image=np.clip(image, 0.0, 1.0),
                        final_transmittance=trans)


_DR_DQ_BASIS = None


def _rotmat_quat_partials(qh):
    """d R / d q_hat for a unit quaternion (w, x, y, z): four 3x3 matrices."""
    w, x, y, z = qh
    dw = 2.0 * np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=float)
    dx = 2.0 * np.array([[0, y, z], [y, -2 * x, -w], [z, w, -2 * x]], dtype=float)
    dy = 2.0 * np.array([[-2 * y, x, w], [x, 0, z], [-w, z, -2 * y]], dtype=float)
    dz = 2.0 * np.array([[-2 * z, -w, x], [w, -2 * z, y], [x, y, 0]], dtype=float)
    return (dw, dx, dy, dz)


def rasterize_backward(scene, pose, intrinsics, grad_output, image_size=None,
                       appearance_id=None):
    """Gradients of sum(grad_output * rendered_image) w.r.t. scene parameters.

    Replays the forward traversal, then walks the splat list again computing
    the compositing derivative at every pixel: for splat i with weight w and
    entry transmittance T, d(out)/dw = T*c - rest/(1-w) where `rest` is all
    color composited after i (background included).
    """
    grad_output = np.asarray(grad_output, dtype=float)
    if image_size is None:
        image_size = grad_output.shape[:2]
    n = len(scene)
    grads = SceneGrads(
        means=np.zeros((n, 3)),
        rotations=np.zeros((n, 4)),
        log_scales=np.zeros((n, 3)),
        opacity_logits=np.zeros(n),
        base_colors=np.zeros((n, 3)),
        appearance=np.zeros(6) if appearance_id is not None else None,
        mean2d_norms=np.zeros(n),
    )
    splats = _prepare_splats(scene, pose, intrinsics, appearance_id)
    ns = len(splats["idx"])
    if ns == 0:
        return grads

    color_total, trans_end = _forward_pass(splats, image_size, scene.background)
    xs, ys = _pixel_grid(image_size)
    bg_term = trans_end[:, :, None] * scene.background

    fx, fy = intrinsics.fx, intrinsics.fy
    R = splats["R"]
    acc = np.zeros_like(color_total)
    trans = np.ones(image_size)

    for k in range(ns):
        m2d = splats["mean2d"][k]
        cov = splats["cov2d"][k]
        alpha = splats["alpha"][k]
        col = splats["color"][k]
        wgt, g, (dx, dy), (ia, ib, ic) = _splat_weight(m2d, cov, alpha, xs, ys)
        active = trans >= T_MIN

        this = np.where(active, trans * wgt, 0.0)[:, :, None] * col
        rest = color_total - acc - this + bg_term
        # d(out)/dw per pixel, contracted with the upstream gradient
        gw = np.einsum("ijc,ijc->ij", grad_output,
                       trans[:, :, None] * col - rest / (1.0 - wgt)[:, :, None])
        gw = np.where(active, gw, 0.0)

        gcol = np.einsum("ijc,ij->c", grad_output, np.where(active, wgt * trans, 0.0))

        # opacity: w = alpha * g
        galpha = float(np.sum(gw * g))
        # quadratic form partials: w depends on q via exp(-q/2)
        gq = -0.5 * gw * wgt
        adx = ia * dx + ib * dy
        ady = ib * dx + ic * dy
        gm = -2.0 * np.array([np.sum(gq * adx), np.sum(gq * ady)])
        gA = np.array([
            [np.sum(gq * dx * dx), np.sum(gq * dx * dy)],
            [np.sum(gq * dx * dy), np.sum(gq * dy * dy)],
        ])
        Ainv = np.array([[ia, ib], [ib, ic]])
        gcov = -Ainv @ gA @ Ainv

        # advance running compositing state exactly as the forward pass
        acc += this
        trans = np.where(active, trans * (1.0 - wgt), trans)

        i = splats["idx"][k]
        grads.mean2d_norms[i] = np.linalg.norm(gm)

        # opacity logit (zero through the amplitude cap)
        sig = splats["sig"][k]
        if sig < ALPHA_MAX:
            grads.opacity_logits[i] = galpha * sig * (1.0 - sig)

        # color chain: clamp -> appearance -> base color
        inside = splats["color_inside"][k]
        graw = np.where(inside, gcol, 0.0)
        if appearance_id is not None:
            gain = splats["gain"]
            base = splats["base"][k]
            grads.base_colors[i] = graw * gain
            grads.appearance[:3] += graw * base
            grads.appearance[3:] += graw
        else:
            grads.base_colors[i] = graw

        # projection chain: screen mean and covariance back to 3D
        x = splats["x_cam"][k]
        z = x[2]
        J = splats["J"][k]
        M = splats["M"][k]
        Sigma = splats["Sigma"][k]
        gSigma = M.T @ gcov @ M
        gM = 2.0 * gcov @ M @ Sigma
        gJ = gM @ R.T
        gx = J.T @ gm
        gx[0] += gJ[0, 2] * (-fx / z**2)
        gx[1] += gJ[1, 2] * (-fy / z**2)
        gx[2] += (gJ[0, 0] * (-fx / z**2) + gJ[0, 2] * (2.0 * fx * x[0] / z**3)
                  + gJ[1, 1] * (-fy / z**2) + gJ[1, 2] * (2.0 * fy * x[1] / z**3))
        grads.means[i] = R.T @ gx

        # covariance parameters: Sigma = Rq D Rq^T
        Rq = splats["Rq"][k]
        D = splats["D"][k]
        gD = Rq.T @ gSigma @ Rq
        grads.log_scales[i] = 2.0 * D * np.diag(gD)
        gRq = 2.0 * gSigma @ Rq * D[None, :]
        qh = splats["qh"][k]
        gqh = np.array([np.sum(gRq * dRi) for dRi in _rotmat_quat_partials(qh)])
        qnorm = splats["qnorm"][k]
        grads.rotations[i] = (gqh - qh * (qh @ gqh)) / qnorm

    return grads

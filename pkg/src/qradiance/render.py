"""Classical ray generation, depth sampling, and volume compositing.

Cameras follow the look-down-negative-z convention: camera x is right,
y is up, and the optical axis is the third rotation column negated.
Compositing accumulates ``sum_i T_i (1 - exp(-sigma_i delta_i)) c_i`` with
``T_i = exp(-sum_{j<i} sigma_j delta_j)``; the last sample's spacing is
``far - z_K`` so bounded scenes stay finite.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .validation import check_array, check_positive_int


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: world-from-camera rotation, focal length in pixels."""
    position: np.ndarray        # (3,)
    rotation: np.ndarray        # (3, 3), columns = camera axes in world frame
    focal: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "position",
                           check_array(self.position, "position", ndim=1))
        object.__setattr__(self, "rotation",
                           check_array(self.rotation, "rotation", ndim=2))
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.max(np.abs(self.rotation @ self.rotation.T - np.eye(3))) > 1e-9:
            raise ValueError("rotation must be orthonormal")
        if not self.focal > 0:
            raise ValueError("focal length must be positive")
        check_positive_int(self.width, "width")
        check_positive_int(self.height, "height")

    @property
    def forward(self) -> np.ndarray:
        return -self.rotation[:, 2]


def camera_from_lookat(position, look_at, up, focal: float, width: int,
                       height: int) -> Camera:
    position = check_array(position, "position", ndim=1)
    look_at = check_array(look_at, "look_at", ndim=1)
    up = check_array(up, "up", ndim=1)
    fwd = look_at - position
    nrm = np.linalg.norm(fwd)
    if nrm == 0:
        raise ValueError("camera position and look-at point coincide")
    fwd = fwd / nrm
    right = np.cross(fwd, up)
    nrm = np.linalg.norm(right)
    if nrm == 0:
        raise ValueError("up vector is parallel to the view direction")
    right = right / nrm
    true_up = np.cross(right, fwd)
    rotation = np.stack([right, true_up, -fwd], axis=1)
    return Camera(position, rotation, focal, width, height)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    near: float
    far: float

    def __post_init__(self):
        object.__setattr__(self, "origin",
                           check_array(self.origin, "origin", ndim=1))
        object.__setattr__(self, "direction",
                           check_array(self.direction, "direction", ndim=1))
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
            raise ValueError("ray direction must be unit length")
        if not 0 < self.near < self.far:
            raise ValueError("need 0 < near < far")


def generate_rays(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel ray origins and unit directions, shapes (H, W, 3).

    Pixel centres sit at half-integer offsets; the centre pixel of an
    odd-sized image looks exactly along the camera forward axis.
    """
    xs = (np.arange(camera.width) - camera.width / 2 + 0.5) / camera.focal
    ys = -(np.arange(camera.height) - camera.height / 2 + 0.5) / camera.focal
    gx, gy = np.meshgrid(xs, ys)
    dirs_cam = np.stack([gx, gy, -np.ones_like(gx)], axis=-1)
    dirs = dirs_cam @ camera.rotation.T
    dirs = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    origins = np.broadcast_to(camera.position, dirs.shape).copy()
    return origins, dirs


def sample_depths(ray: Ray, n_samples: int, mode: str = "uniform",
                  seed: int | None = None) -> np.ndarray:
    """K strictly increasing depths in [near, far]: bin midpoints, or one
    seeded uniform draw per bin."""
    check_positive_int(n_samples, "n_samples")
    edges = np.linspace(ray.near, ray.far, n_samples + 1)
    if mode == "uniform":
        return (edges[:-1] + edges[1:]) / 2
    if mode == "stratified":
        rng = np.random.default_rng(seed)
        return edges[:-1] + rng.uniform(0, 1, n_samples) * np.diff(edges)
    raise ValueError(f"unknown sampling mode {mode!r}")


def deltas_from_depths(depths: np.ndarray, far: float) -> np.ndarray:
    """delta_i = z_{i+1} - z_i, with the final spacing far - z_K."""
    depths = np.asarray(depths, dtype=np.float64)
    return np.concatenate([np.diff(depths, axis=-1),
                           (far - depths[..., -1:])], axis=-1)


@dataclass
class SampleSet:
    """Sorted samples along one ray plus the field values at each of them."""
    depths: np.ndarray            # (K,) strictly increasing in [near, far]
    deltas: np.ndarray            # (K,) positive spacings
    sigmas: np.ndarray            # (K,) non-negative densities
    colors: np.ndarray            # (K, 3)

    def __post_init__(self):
        self.depths = check_array(self.depths, "depths", ndim=1)
        self.deltas = check_array(self.deltas, "deltas", ndim=1)
        self.sigmas = check_array(self.sigmas, "sigmas", ndim=1)
        self.colors = check_array(self.colors, "colors", ndim=2)
        if np.any(np.diff(self.depths) <= 0):
            raise ValueError("depths must be strictly increasing")
        if np.any(self.deltas <= 0):
            raise ValueError("deltas must be positive")
        if np.any(self.sigmas < 0):
            raise ValueError("sigmas must be non-negative")


def composite_rows(sigmas: np.ndarray, colors: np.ndarray,
                   deltas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched compositing: (R, K) densities, (R, K, 3) colors -> (R, 3), (R,)."""
    optical = sigmas * deltas
    # exclusive prefix sum: transmittance before each sample, T_1 = 1
    before = np.concatenate([np.zeros_like(optical[..., :1]),
                             np.cumsum(optical, axis=-1)[..., :-1]], axis=-1)
    transmittance = np.exp(-before)
    weights = transmittance * (-np.expm1(-optical))
    color = np.sum(weights[..., None] * colors, axis=-2)
    return color, np.sum(weights, axis=-1)


def composite(samples: SampleSet) -> tuple[np.ndarray, float]:
    """Single-ray compositing; returns (color, accumulated opacity)."""
    color, opacity = composite_rows(samples.sigmas[None], samples.colors[None],
                                    samples.deltas[None])
    return color[0], float(opacity[0])


def composite_backward_rows(sigmas, colors, deltas, d_color):
    """Gradients of the composited color w.r.t. per-sample colors and sigmas.

    ``d_color`` is dLoss/d(composited color), shape (R, 3). Returns
    (dLoss/dcolors (R, K, 3), dLoss/dsigmas (R, K)).
    """
    optical = sigmas * deltas
    before = np.concatenate([np.zeros_like(optical[..., :1]),
                             np.cumsum(optical, axis=-1)[..., :-1]], axis=-1)
    transmittance = np.exp(-before)
    weights = transmittance * (-np.expm1(-optical))
    d_colors = weights[..., None] * d_color[..., None, :]
    # d(out)/d(optical_i) = T_i e^{-optical_i} c_i - sum_{j>i} w_j c_j
    wc = weights[..., None] * colors
    suffix = np.flip(np.cumsum(np.flip(wc, axis=-2), axis=-2), axis=-2) - wc
    direct = (transmittance * np.exp(-optical))[..., None] * colors
    d_optical = np.sum((direct - suffix) * d_color[..., None, :], axis=-1)
    return d_colors, d_optical * deltas


def render_image(field, camera: Camera, n_samples: int, near: float, far: float,
                 mode: str = "uniform", seed: int | None = None,
                 background: str = "black", n_workers: int = 1) -> np.ndarray:
    """Render (H, W, 3) by raymarching ``field`` over every pixel.

    ``field(positions (M, 3), directions (M, 3)) -> (colors (M, 3), sigmas (M,))``
    must be read-only; rows are rendered independently (optionally across a
    thread pool) and the output is identical regardless of scheduling.
    """
    if not 0 < near < far:
        raise ValueError("need 0 < near < far")
    if background not in ("black", "white"):
        raise ValueError("background must be 'black' or 'white'")
    origins, dirs = generate_rays(camera)
    H, W = camera.height, camera.width
    edges = np.linspace(near, far, n_samples + 1)
    if mode == "uniform":
        depth_rows = np.broadcast_to((edges[:-1] + edges[1:]) / 2,
                                     (H, W, n_samples)).copy()
    elif mode == "stratified":
        rng = np.random.default_rng(seed)
        jitter = rng.uniform(0, 1, size=(H, W, n_samples))
        depth_rows = edges[:-1] + jitter * np.diff(edges)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")

    image = np.zeros((H, W, 3))

    def render_row(i: int) -> None:
        depths = depth_rows[i]                                   # (W, K)
        points = origins[i][:, None, :] + depths[..., None] * dirs[i][:, None, :]
        flat_dirs = np.repeat(dirs[i], n_samples, axis=0)
        try:
            colors, sigmas = field(points.reshape(-1, 3), flat_dirs)
        except Exception as exc:
            raise RuntimeError(f"field evaluation failed at pixel row {i}: "
                               f"{exc}") from exc
        colors = colors.reshape(W, n_samples, 3)
        sigmas = sigmas.reshape(W, n_samples)
        deltas = deltas_from_depths(depths, far)
        row, opacity = composite_rows(sigmas, colors, deltas)
        if background == "white":
            row = row + (1.0 - opacity)[:, None]
        image[i] = row

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(render_row, range(H)))
    else:
        for i in range(H):
            render_row(i)
    return image

"""Procedural toy scenes and targets; everything is generated in code so the
experiments run without any downloaded data."""
from __future__ import annotations

import math

import numpy as np

from .render import Camera, camera_from_lookat, render_image


def empty_field():
    """Fully transparent scene."""
    def field(points, directions):
        m = points.shape[0]
        return np.zeros((m, 3)), np.zeros(m)
    return field


def sphere_field(center=(0.0, 0.0, 0.0), radius: float = 0.8,
                 density: float = 12.0, edge_power: float = 8.0):
    """Dense sphere with a smooth density falloff at the boundary and a
    vertical two-tone color; opaque inside, feathered silhouette."""
    center = np.asarray(center, dtype=np.float64)

    def field(points, directions):
        offset = points - center
        r = np.linalg.norm(offset, axis=1) / radius
        sigmas = density * np.exp(-r ** edge_power)
        shade = 0.5 + 0.5 * np.clip(offset[:, 2] / radius, -1, 1)
        colors = np.stack([0.9 * np.ones_like(shade),
                           0.35 + 0.55 * shade,
                           0.45 * np.ones_like(shade)], axis=1)
        return colors, sigmas
    return field


def box_field(half_extent=(0.6, 0.6, 0.6), density: float = 40.0):
    """Axis-aligned opaque box, faces tinted by the dominant axis."""
    half = np.asarray(half_extent, dtype=np.float64)

    def field(points, directions):
        inside = np.all(np.abs(points) < half, axis=1)
        sigmas = np.where(inside, density, 0.0)
        axis = np.argmax(np.abs(points / half), axis=1)
        colors = np.eye(3)[axis] * 0.7 + 0.2
        return colors, sigmas
    return field


def gaussian_blob_field(center=(0.0, 0.0, 0.0), width: float = 0.5,
                        density: float = 3.0):
    """Smooth analytic field for quadrature-refinement checks."""
    center = np.asarray(center, dtype=np.float64)

    def field(points, directions):
        d2 = np.sum((points - center) ** 2, axis=1)
        sigmas = density * np.exp(-d2 / (2 * width ** 2))
        colors = np.stack([0.5 + 0.4 * np.cos(points[:, 0]),
                           0.5 + 0.4 * np.sin(points[:, 1]),
                           np.full(points.shape[0], 0.6)], axis=1)
        return colors, sigmas
    return field


SCENES = {
    "empty": empty_field,
    "sphere": sphere_field,
    "box": box_field,
}


def scene_by_name(name: str):
    try:
        return SCENES[name]()
    except KeyError:
        raise ValueError(f"unknown scene {name!r}; choose from "
                         f"{sorted(SCENES)}") from None


def ring_cameras(n_views: int, distance: float, size: int, focal: float,
                 elevation: float = 0.45) -> list[Camera]:
    """Inward-facing cameras on a ring around the origin."""
    cameras = []
    for k in range(n_views):
        angle = 2 * math.pi * k / n_views
        position = np.array([distance * math.cos(angle) * math.cos(elevation),
                             distance * math.sin(angle) * math.cos(elevation),
                             distance * math.sin(elevation)])
        cameras.append(camera_from_lookat(position, [0, 0, 0], [0, 0, 1],
                                          focal, size, size))
    return cameras


def make_views(scene_name: str, n_views: int, size: int, distance: float,
               focal: float, near: float, far: float,
               n_samples: int = 64) -> list[tuple[Camera, np.ndarray]]:
    """Ground-truth training views of a procedural scene."""
    field = scene_by_name(scene_name)
    views = []
    for camera in ring_cameras(n_views, distance, size, focal):
        image = render_image(field, camera, n_samples, near, far)
        views.append((camera, image))
    return views


def target_image(kind: str, size: int, seed: int = 0) -> np.ndarray:
    """Procedural 2D regression targets."""
    if kind == "constant":
        return np.tile(np.array([0.42, 0.61, 0.33]), (size, size, 1))
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    if kind == "texture":
        # a few random low frequencies per channel, loosely natural statistics
        channels = []
        for _ in range(3):
            img = np.zeros((size, size))
            for amp in (0.5, 0.25, 0.12):
                fx, fy = rng.uniform(0.5, 3.5, 2)
                ph = rng.uniform(0, 2 * math.pi, 2)
                img += amp * np.sin(2 * math.pi * fx * xs + ph[0]) \
                    * np.cos(2 * math.pi * fy * ys + ph[1])
            channels.append(img)
        stacked = np.stack(channels, axis=-1)
        lo, hi = stacked.min(), stacked.max()
        return (stacked - lo) / (hi - lo)
    if kind == "stripes":
        value = 0.5 + 0.45 * np.sin(2 * math.pi * 3 * xs)
        return np.stack([value, 1 - value, np.full_like(value, 0.5)], axis=-1)
    if kind == "crop":
        # natural-image-crop stand-in: falling spectrum, channels sharing one
        # luminance pattern with mild chroma offsets
        xn, yn = 2 * xs - 1, 2 * ys - 1
        a = rng.uniform(0.8, 1.2, 4)
        ph = rng.uniform(0, 2 * math.pi, 2)
        luma = (0.45
                + 0.25 * a[0] * np.sin(math.pi * xn + ph[0])
                + 0.15 * a[1] * np.cos(math.pi * yn + ph[1])
                + 0.08 * a[2] * np.sin(2 * math.pi * xn) * np.cos(math.pi * yn)
                + 0.04 * a[3] * np.cos(2 * math.pi * yn))
        channels = [np.clip(luma, 0, 1),
                    np.clip(0.8 * luma + 0.1, 0, 1),
                    np.clip(0.6 * luma + 0.15, 0, 1)]
        return np.stack(channels, axis=-1)
    raise ValueError(f"unknown test image kind {kind!r}")

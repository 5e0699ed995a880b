"""Task runners behind the CLI subcommands.

Every runner takes a config dict plus an output directory, writes its
artifacts there (each embedding the config hash and seed), and returns a
summary dict. All numeric outputs are bitwise-reproducible for a fixed
config and seed; wall-clock fields are the one deliberately volatile value.
"""
from __future__ import annotations

import json
import math
import re
import time
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import config_hash, require, save_config
from .encoding import EncoderKind
from .errors import ConfigError
from .field import (ActivationKind, QRFConfig, backward_field, batch_indices,
                    field_outputs, forward_field, init_params, param_layout,
                    step_config, validate_config, _descend)
from .imgio import box_downsample, read_image, write_image
from .metrics import psnr, ssim
from .pqc import PQCTemplate, TemplateKind
from .qcount import (EnergyTable, FixedPointSpec, convergence_study,
                     estimate_mean, load_energy_table, quantum_count)
from .render import (camera_from_lookat, composite_backward_rows,
                     composite_rows, deltas_from_depths, generate_rays,
                     render_image)
from .scenes import make_views, scene_by_name, target_image

FIXED_STUDY_ENERGIES = [0.3, 1.7, 2.45, 0.05, 3.2, 1.1, 2.8, 0.6]
_BUILTIN_IMAGE = re.compile(r"^builtin:([a-z]+)(\d+)$")


def model_config(cfg: dict, position_dim: int) -> QRFConfig:
    try:
        config = QRFConfig(
            encoder=EncoderKind(cfg["encoder"]),
            template=PQCTemplate(TemplateKind(cfg["circuit"]), cfg["n_qubits"],
                                 cfg["layers"]),
            activation=ActivationKind(cfg["activation"]),
            freq_position=cfg["freq_position"],
            freq_direction=cfg["freq_direction"],
            position_dim=position_dim,
            learning_rate=cfg["learning_rate"],
            lr_decay=cfg["lr_decay"],
            momentum=cfg["momentum"],
            iterations=cfg["iterations"],
            batch_size=cfg["batch_size"],
            seed=cfg["seed"],
        )
        validate_config(config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


class MetricsLog:
    """JSON-lines metrics writer; first line records provenance."""

    def __init__(self, path: Path, cfg_hash: str, seed: int):
        self.path = Path(path)
        self.path.write_text(json.dumps(
            {"config_hash": cfg_hash, "seed": seed}, sort_keys=True) + "\n")
        self.rows: list[dict] = []

    def log(self, **row) -> None:
        self.rows.append(row)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _prepare_out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_target_image(cfg: dict) -> np.ndarray:
    spec = require(cfg, "image", cfg.get("task", "fit2d"))
    match = _BUILTIN_IMAGE.match(spec)
    if match:
        return target_image(match.group(1), int(match.group(2)),
                            seed=cfg["seed"])
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"target image not found: {path}")
    image, _ = read_image(path)
    return box_downsample(image, cfg["max_side"])


def _pixel_grid(height: int, width: int) -> np.ndarray:
    """Pixel centres normalised to [-1, 1]^2, row-major."""
    ys = np.linspace(-1, 1, height) if height > 1 else np.zeros(1)
    xs = np.linspace(-1, 1, width) if width > 1 else np.zeros(1)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def _predict_image(config: QRFConfig, params, coords, height, width,
                   chunk: int = 4096) -> np.ndarray:
    rows = []
    for start in range(0, coords.shape[0], chunk):
        block = coords[start:start + chunk]
        dirs = np.zeros((block.shape[0], 3))
        dirs[:, 2] = 1.0
        colors, _ = field_outputs(config, params, block, dirs)
        rows.append(colors)
    return np.concatenate(rows).reshape(height, width, 3)


def _maybe_resume(cfg: dict, config: QRFConfig):
    if not cfg.get("resume"):
        return init_params(config), None, 0, []
    ck = load_checkpoint(cfg["resume"])
    return ck.params, ck.velocity, ck.iteration, list(ck.loss_history)


def run_fit2d(cfg: dict, out_dir) -> dict:
    out = _prepare_out(out_dir)
    target = _load_target_image(cfg)
    if max(target.shape[:2]) > cfg["max_side"]:
        raise ConfigError(f"target image {target.shape[:2]} exceeds the "
                          f"max_side={cfg['max_side']} cap")
    height, width = target.shape[:2]
    coords = _pixel_grid(height, width)
    colors = target.reshape(-1, 3)

    config = model_config(cfg, position_dim=2)
    params, velocity, start_iter, loss_history = _maybe_resume(cfg, config)
    cfg_hash = config_hash(cfg)
    log = MetricsLog(out / "metrics.jsonl", cfg_hash, cfg["seed"])
    started = time.perf_counter()

    def evaluate(iteration: int, current: np.ndarray, value) -> dict:
        recon = _predict_image(config, current, coords, height, width)
        if value is None:
            value = float(np.mean((recon - target) ** 2))
        entry = {"iteration": iteration, "loss": value,
                 "psnr": psnr(recon, target)}
        entry["ssim"] = ssim(recon, target) if min(height, width) >= 8 else None
        entry["wall_time"] = time.perf_counter() - started
        return entry

    initial = evaluate(start_iter, params, None)
    log.log(**initial)

    interval = max(1, cfg["eval_interval"])
    for it in range(start_iter, cfg["iterations"]):
        idx = batch_indices(config.seed, it, coords.shape[0], config.batch_size)
        fwd = forward_field(config, params, coords[idx],
                            np.tile([0.0, 0.0, 1.0], (idx.size, 1)))
        diff = fwd.colors - colors[idx]
        value = float(np.mean(diff ** 2))
        grad = backward_field(config, params, fwd, 2.0 * diff / diff.size, None)
        params, value, velocity = _descend(step_config(config, it), params,
                                           value, grad, velocity)
        loss_history.append(value)
        if (it + 1) % interval == 0 or it + 1 == cfg["iterations"]:
            log.log(**evaluate(it + 1, params, value))

    recon = _predict_image(config, params, coords, height, width)
    write_image(out / "reconstruction.png", recon,
                {"config_hash": cfg_hash, "seed": cfg["seed"]})
    save_checkpoint(out / "checkpoint.json",
                    Checkpoint(dict(cfg), params, velocity
                               if velocity is not None else np.zeros_like(params),
                               cfg["iterations"], loss_history, cfg_hash,
                               cfg["seed"]))
    save_config(out / "config.txt", cfg)
    final_psnr = psnr(recon, target)
    return {"initial_psnr": initial["psnr"], "final_psnr": final_psnr,
            "final_ssim": ssim(recon, target) if min(height, width) >= 8 else None,
            "final_loss": loss_history[-1] if loss_history else None,
            "out_dir": str(out)}


def _scene_extent(cfg: dict) -> float:
    """Smallest radius containing every ray sample, so normalised positions
    use the full [-1, 1] range; overridable via the scene_extent key."""
    if cfg["scene_extent"] > 0:
        return cfg["scene_extent"]
    d, far, near = cfg["cam_distance"], cfg["far"], cfg["near"]
    size = max(cfg["view_size"], cfg["width"], cfg["height"], 1)
    half_diag = math.sqrt(2.0) * size / 2.0
    cos_phi = 1.0 / math.sqrt(1.0 + (half_diag / cfg["focal"]) ** 2)
    worst = max(
        math.sqrt(max(d * d + z * z - 2.0 * d * z * cos_phi, 0.0))
        for z in (near, far))
    return 1.02 * max(worst, 1e-6)


def _scaled_field(config: QRFConfig, params, extent: float):
    def field(points, directions):
        return field_outputs(config, params, points / extent, directions)
    return field


def run_fit3d(cfg: dict, out_dir) -> dict:
    out = _prepare_out(out_dir)
    views = make_views(cfg["scene"], cfg["n_views"] + 1, cfg["view_size"],
                       cfg["cam_distance"], cfg["focal"], cfg["near"],
                       cfg["far"], n_samples=64)
    train_views, heldout = views[:-1], views[-1]
    extent = _scene_extent(cfg)

    origins, dirs, targets = [], [], []
    for camera, image in train_views:
        o, d = generate_rays(camera)
        origins.append(o.reshape(-1, 3))
        dirs.append(d.reshape(-1, 3))
        targets.append(image.reshape(-1, 3))
    origins = np.concatenate(origins)
    dirs = np.concatenate(dirs)
    targets = np.concatenate(targets)

    config = model_config(cfg, position_dim=3)
    params, velocity, start_iter, loss_history = _maybe_resume(cfg, config)
    cfg_hash = config_hash(cfg)
    log = MetricsLog(out / "metrics.jsonl", cfg_hash, cfg["seed"])
    started = time.perf_counter()

    k = cfg["n_samples"]
    near, far = cfg["near"], cfg["far"]
    edges = np.linspace(near, far, k + 1)
    depths = (edges[:-1] + edges[1:]) / 2
    deltas = deltas_from_depths(depths, far)

    def render_heldout(current) -> np.ndarray:
        camera, _ = heldout
        return render_image(_scaled_field(config, current, extent), camera,
                            k, near, far,
                            background="white" if cfg["white_background"]
                            else "black")

    def evaluate(iteration, current, value) -> dict:
        view = render_heldout(current)
        entry = {"iteration": iteration, "loss": value,
                 "psnr": psnr(view, heldout[1])}
        entry["ssim"] = (ssim(view, heldout[1])
                         if min(view.shape[:2]) >= 8 else None)
        entry["wall_time"] = time.perf_counter() - started
        return entry

    initial = evaluate(start_iter, params, None)
    log.log(**initial)

    interval = max(1, cfg["eval_interval"])
    for it in range(start_iter, cfg["iterations"]):
        idx = batch_indices(config.seed, it, origins.shape[0], config.batch_size)
        o, d, y = origins[idx], dirs[idx], targets[idx]
        points = o[:, None, :] + depths[None, :, None] * d[:, None, :]
        flat_p = points.reshape(-1, 3) / extent
        flat_d = np.repeat(d, k, axis=0)
        fwd = forward_field(config, params, flat_p, flat_d)
        sig = fwd.sigmas.reshape(-1, k)
        col = fwd.colors.reshape(-1, k, 3)
        ray_colors, _ = composite_rows(sig, col, deltas[None, :])
        diff = ray_colors - y
        value = float(np.mean(diff ** 2))
        d_ray = 2.0 * diff / diff.size
        d_col, d_sig = composite_backward_rows(sig, col, deltas[None, :], d_ray)
        grad = backward_field(config, params, fwd, d_col.reshape(-1, 3),
                              d_sig.reshape(-1))
        params, value, velocity = _descend(step_config(config, it), params,
                                           value, grad, velocity)
        loss_history.append(value)
        if (it + 1) % interval == 0 or it + 1 == cfg["iterations"]:
            log.log(**evaluate(it + 1, params, value))

    novel = render_heldout(params)
    write_image(out / "novel_view.png", novel,
                {"config_hash": cfg_hash, "seed": cfg["seed"]})
    write_image(out / "ground_truth.png", heldout[1],
                {"config_hash": cfg_hash, "seed": cfg["seed"]})
    save_checkpoint(out / "checkpoint.json",
                    Checkpoint(dict(cfg), params,
                               velocity if velocity is not None
                               else np.zeros_like(params),
                               cfg["iterations"], loss_history, cfg_hash,
                               cfg["seed"]))
    save_config(out / "config.txt", cfg)
    final_psnr = psnr(novel, heldout[1])
    return {"initial_psnr": initial["psnr"], "final_psnr": final_psnr,
            "out_dir": str(out)}


def run_render(cfg: dict, out_dir) -> dict:
    out = _prepare_out(out_dir)
    ck_path = require(cfg, "checkpoint", "render")
    if not Path(ck_path).exists():
        raise ConfigError(f"checkpoint not found: {ck_path}")
    ck = load_checkpoint(ck_path)
    config = model_config(ck.config, position_dim=3)
    extent = _scene_extent(ck.config)
    width = cfg["width"] or cfg["view_size"]
    height = cfg["height"] or width
    camera = _demo_camera(cfg, width, height)
    image = render_image(_scaled_field(config, ck.params, extent), camera,
                         cfg["n_samples"], cfg["near"], cfg["far"],
                         background="white" if cfg["white_background"]
                         else "black")
    cfg_hash = config_hash(cfg)
    write_image(out / "render.png", image,
                {"config_hash": cfg_hash, "seed": cfg["seed"]})
    return {"out_dir": str(out), "shape": list(image.shape)}


def _demo_camera(cfg: dict, width: int, height: int):
    if cfg["cam_position"]:
        if len(cfg["cam_position"]) != 3:
            raise ConfigError("cam_position needs three components")
        return camera_from_lookat(cfg["cam_position"], cfg["cam_look_at"],
                                  cfg["cam_up"], cfg["focal"], width, height)
    azimuth, elevation = cfg["cam_azimuth"], cfg["cam_elevation"]
    position = np.array([
        cfg["cam_distance"] * math.cos(azimuth) * math.cos(elevation),
        cfg["cam_distance"] * math.sin(azimuth) * math.cos(elevation),
        cfg["cam_distance"] * math.sin(elevation)])
    return camera_from_lookat(position, cfg["cam_look_at"], cfg["cam_up"],
                              cfg["focal"], width, height)


def run_qrender(cfg: dict, out_dir) -> dict:
    """Demo: render a handful of pixels through the quantum mean estimator.

    For every pixel and channel, 2^n jittered sub-pixel rays are traced and
    composited classically into per-ray energies; the pixel value is then the
    quantum-counting mean estimate over that energy table. Capped at 4 pixels
    because simulating the counting circuit is exponential in register width.
    """
    out = _prepare_out(out_dir)
    width = cfg["width"] or 2
    height = cfg["height"] or 2
    if width * height > 4:
        raise ConfigError(f"qrender is a demo capped at 4 pixels, got "
                          f"{width}x{height}")
    field = scene_by_name(cfg["scene"])
    camera = _demo_camera(cfg, width, height)
    spec = _fixed_point_spec(cfg)
    n_ray_qubits = cfg["rays_per_pixel_qubits"]
    n_rays = 1 << n_ray_qubits
    k = cfg["n_samples"]
    near, far = cfg["near"], cfg["far"]
    edges = np.linspace(near, far, k + 1)
    depths = (edges[:-1] + edges[1:]) / 2
    deltas = deltas_from_depths(depths, far)

    rng = np.random.default_rng(cfg["seed"])
    image = np.zeros((height, width, 3))
    exact = np.zeros((height, width, 3))
    pixel_rows = []
    queries = 0
    for py in range(height):
        for px in range(width):
            jitter = rng.uniform(0, 1, (n_rays, 2))
            x = (px + jitter[:, 0] - width / 2) / cfg["focal"]
            y = -(py + jitter[:, 1] - height / 2) / cfg["focal"]
            dirs_cam = np.stack([x, y, -np.ones(n_rays)], axis=1)
            dirs = dirs_cam @ camera.rotation.T
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            points = camera.position[None, None, :] \
                + depths[None, :, None] * dirs[:, None, :]
            colors, sigmas = field(points.reshape(-1, 3),
                                   np.repeat(dirs, k, axis=0))
            ray_rgb, _ = composite_rows(sigmas.reshape(n_rays, k),
                                        colors.reshape(n_rays, k, 3),
                                        deltas[None, :])
            row = {"pixel": [py, px]}
            for ch in range(3):
                table = EnergyTable(n_ray_qubits,
                                    np.clip(ray_rgb[:, ch], 0, spec.max_value))
                result = quantum_count(table, spec, cfg["qpe_bits"])
                estimate = spec.step * (result.m_estimate - n_rays) / n_rays
                image[py, px, ch] = min(max(estimate, 0.0), 1.0)
                exact[py, px, ch] = float(np.mean(table.energies))
                queries += result.oracle_queries
                row[f"channel_{ch}"] = {
                    "quantum_mean": estimate,
                    "exact_mean": exact[py, px, ch],
                    "error_bound": spec.step * result.error_bound / n_rays,
                }
            pixel_rows.append(row)

    cfg_hash = config_hash(cfg)
    write_image(out / "qrender.png", image,
                {"config_hash": cfg_hash, "seed": cfg["seed"]})
    payload = {"pixels": pixel_rows, "oracle_queries_total": queries,
               "rays_per_pixel": n_rays, "config_hash": cfg_hash,
               "seed": cfg["seed"],
               "max_abs_error": float(np.max(np.abs(image - exact)))}
    (out / "qrender.json").write_text(json.dumps(payload, sort_keys=True,
                                                 indent=2) + "\n")
    return payload


def _study_table(cfg: dict) -> EnergyTable:
    if cfg["energies"]:
        path = Path(cfg["energies"])
        if not path.exists():
            raise ConfigError(f"energy file not found: {path}")
        return load_energy_table(path)
    return EnergyTable.from_energies(FIXED_STUDY_ENERGIES)


def run_qcount(cfg: dict, out_dir) -> dict:
    out = _prepare_out(out_dir)
    path = require(cfg, "energies", "qcount")
    if not Path(path).exists():
        raise ConfigError(f"energy file not found: {path}")
    table = load_energy_table(path)
    spec = _fixed_point_spec(cfg)
    result = quantum_count(table, spec, cfg["qpe_bits"])
    mean = estimate_mean(table, spec, cfg["qpe_bits"])
    payload = {
        "m_estimate": result.m_estimate,
        "mean_estimate": mean,
        "qpe_bits": result.qpe_bits,
        "oracle_queries": result.oracle_queries,
        "error_bound": result.error_bound,
        "modal_outcome": result.modal_outcome,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
    }
    (out / "qcount.json").write_text(json.dumps(payload, sort_keys=True,
                                                indent=2) + "\n")
    return payload


def _fixed_point_spec(cfg: dict) -> FixedPointSpec:
    try:
        return FixedPointSpec(cfg["b0"], cfg["b"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_convergence(cfg: dict, out_dir) -> dict:
    out = _prepare_out(out_dir)
    table = _study_table(cfg)
    spec = _fixed_point_spec(cfg)
    study = convergence_study(table, spec, cfg["t_range"], cfg["nc_range"],
                              cfg["trials"], cfg["seed"])
    cfg_hash = config_hash(cfg)
    lines = [f"# config_hash={cfg_hash} seed={cfg['seed']}",
             "method,cost,error"]
    lines += [f"{m},{c:.10g},{e:.17g}" for m, c, e in study.csv_rows()]
    (out / "convergence.csv").write_text("\n".join(lines) + "\n")
    summary = study.summary()
    summary["config_hash"] = cfg_hash
    summary["seed"] = cfg["seed"]
    (out / "convergence.json").write_text(json.dumps(summary, sort_keys=True,
                                                     indent=2) + "\n")
    return {"quantum_slope": study.quantum_slope, "mc_slope": study.mc_slope,
            "out_dir": str(out)}


def run_ablate(cfg: dict, out_dir) -> dict:
    out = _prepare_out(out_dir)
    rows = []
    for activation in cfg["ablate_activations"]:
        for encoder in cfg["ablate_encoders"]:
            for circuit in cfg["ablate_circuits"]:
                cell = dict(cfg)
                cell.update(task="fit2d", activation=activation,
                            encoder=encoder, circuit=circuit)
                cell_dir = out / f"{activation}_{encoder}_{circuit}"
                row = {"activation": activation, "encoder": encoder,
                       "circuit": circuit}
                try:
                    summary = run_fit2d(cell, cell_dir)
                    row.update(psnr=summary["final_psnr"],
                               ssim=summary["final_ssim"], error=None)
                except Exception as exc:  # record, keep the grid running
                    row.update(psnr=None, ssim=None, error=str(exc))
                rows.append(row)
    payload = {"config_hash": config_hash(cfg), "seed": cfg["seed"],
               "rows": rows}
    (out / "ablation.json").write_text(json.dumps(payload, sort_keys=True,
                                                  indent=2) + "\n")
    return payload

"""Command-line entry point.

Subcommands: fit2d, fit3d, render, qcount, convergence, ablate. Flags mirror
config-file keys and override them. Exit codes: 0 success, 2 config error,
3 numeric divergence, 4 resource limit.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

from .config import SCHEMA, apply_overrides, default_config, load_config
from .errors import ConfigError, ResourceLimitError, TrainingDivergedError
from . import tasks

OUTPUT_ROOT_ENV = "QRADIANCE_OUTPUT_ROOT"

_RUNNERS = {
    "fit2d": tasks.run_fit2d,
    "fit3d": tasks.run_fit3d,
    "render": tasks.run_render,
    "qcount": tasks.run_qcount,
    "convergence": tasks.run_convergence,
    "ablate": tasks.run_ablate,
    "qrender": tasks.run_qrender,
}

_FLAG_KEYS = {
    "fit2d": ["seed", "encoder", "circuit", "layers", "n_qubits", "activation",
              "freq_position", "freq_direction", "learning_rate", "lr_decay",
              "momentum", "iterations", "batch_size", "eval_interval", "image",
              "max_side", "resume"],
    "fit3d": ["seed", "encoder", "circuit", "layers", "n_qubits", "activation",
              "freq_position", "freq_direction", "learning_rate", "lr_decay",
              "momentum", "iterations", "batch_size", "eval_interval", "scene",
              "n_views", "view_size", "cam_distance", "focal", "near", "far",
              "n_samples", "scene_extent", "white_background", "resume"],
    "render": ["seed", "checkpoint", "width", "height", "cam_distance",
               "cam_azimuth", "cam_elevation", "cam_position", "cam_look_at",
               "cam_up", "focal", "near", "far", "n_samples",
               "white_background", "view_size"],
    "qrender": ["seed", "scene", "width", "height", "cam_distance",
                "cam_azimuth", "cam_elevation", "cam_position", "cam_look_at",
                "cam_up", "focal", "near", "far", "n_samples", "b0", "b",
                "qpe_bits", "rays_per_pixel_qubits"],
    "qcount": ["seed", "energies", "b0", "b", "qpe_bits"],
    "convergence": ["seed", "energies", "b0", "b", "t_range", "nc_range",
                    "trials"],
    "ablate": ["seed", "image", "max_side", "iterations", "batch_size",
               "learning_rate", "momentum", "n_qubits", "layers",
               "freq_position", "freq_direction", "eval_interval",
               "ablate_activations", "ablate_encoders", "ablate_circuits"],
}

_CHOICES = {
    "encoder": ["general", "wavefunction", "angle", "dense"],
    "circuit": ["layered", "c5", "c6", "c16", "c17"],
    "activation": ["relu", "elu", "softplus", "sine", "qrelu"],
    "scene": ["empty", "sphere", "box"],
}


def _flag_type(key: str):
    kind = SCHEMA[key][0]
    if kind is bool:
        return lambda s: s.lower() in ("true", "1", "yes")
    if kind == "int_list":
        return lambda s: [int(tok) for tok in s.split(",") if tok.strip()]
    if kind == "float_list":
        return lambda s: [float(tok) for tok in s.split(",") if tok.strip()]
    if kind == "str_list":
        return lambda s: [tok.strip() for tok in s.split(",") if tok.strip()]
    return kind


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qradiance",
        description="Quantum radiance fields: train, render, count, benchmark.")
    sub = parser.add_subparsers(dest="task", required=True)
    for task, keys in _FLAG_KEYS.items():
        p = sub.add_parser(task)
        p.add_argument("--config", default=None,
                       help="key=value config file (flags override it)")
        p.add_argument("--out", default=None, help="output directory")
        for key in keys:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key,
                           default=None, type=_flag_type(key),
                           choices=_CHOICES.get(key))
    return parser


def _resolve_out_dir(task: str, cfg: dict, flag_value) -> Path:
    if flag_value:
        return Path(flag_value)
    if cfg.get("out_dir"):
        return Path(cfg["out_dir"])
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return Path(root) / task


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        overrides = {key: getattr(args, key) for key in _FLAG_KEYS[args.task]}
        cfg = apply_overrides(cfg, overrides)
        cfg["task"] = args.task
        out_dir = _resolve_out_dir(args.task, cfg, args.out)
        cfg["out_dir"] = str(out_dir)
        summary = _RUNNERS[args.task](cfg, out_dir)
        print(json.dumps(summary, sort_keys=True, default=str))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 4
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())

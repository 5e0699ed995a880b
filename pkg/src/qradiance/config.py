"""Flat key=value experiment configuration.

One canonical text format: ``key=value`` per line, ``#`` comments, lists as
comma-separated values. Saving is canonical (sorted keys), so save -> load ->
save is byte-identical, and the config hash embedded in every artifact is the
hash of that canonical text.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

from .errors import ConfigError


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_str_list(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


_PARSERS = {
    int: int,
    float: float,
    str: lambda s: s,
    bool: _parse_bool,
    "int_list": _parse_int_list,
    "float_list": _parse_float_list,
    "str_list": _parse_str_list,
}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (type tag, default)
SCHEMA: dict[str, tuple] = {
    "task": (str, ""),
    "seed": (int, 0),
    "out_dir": (str, ""),
    # model
    "encoder": (str, "dense"),
    "circuit": (str, "layered"),
    "layers": (int, 1),
    "n_qubits": (int, 4),
    "activation": (str, "qrelu"),
    "freq_position": (int, 2),
    "freq_direction": (int, 1),
    "learning_rate": (float, 0.5),
    "lr_decay": (float, 1.0),
    "momentum": (float, 0.9),
    "iterations": (int, 400),
    "batch_size": (int, 32),
    "eval_interval": (int, 50),
    "resume": (str, ""),
    # 2D regression
    "image": (str, ""),
    "max_side": (int, 64),
    # 3D scene fitting and rendering
    "scene": (str, "sphere"),
    "n_views": (int, 4),
    "view_size": (int, 10),
    "cam_distance": (float, 2.8),
    "cam_azimuth": (float, 0.0),
    "cam_elevation": (float, 0.45),
    "cam_position": ("float_list", []),   # explicit camera overrides the ring
    "cam_look_at": ("float_list", [0.0, 0.0, 0.0]),
    "cam_up": ("float_list", [0.0, 0.0, 1.0]),
    "focal": (float, 12.0),
    "near": (float, 1.6),
    "far": (float, 4.2),
    "n_samples": (int, 8),
    "scene_extent": (float, 0.0),        # 0 = derive from camera geometry
    "white_background": (bool, False),
    "width": (int, 0),                   # 0 = view_size
    "height": (int, 0),
    "checkpoint": (str, ""),
    # counting and convergence
    "energies": (str, ""),
    "b0": (int, 2),
    "b": (int, 4),
    "qpe_bits": (int, 6),
    "rays_per_pixel_qubits": (int, 3),   # quantum render demo: N = 2^n rays
    "t_range": ("int_list", [3, 4, 5, 6, 7, 8]),
    "nc_range": ("int_list", [16, 64, 256, 1024, 4096]),
    "trials": (int, 200),
    # ablation grid
    "ablate_activations": ("str_list", ["qrelu"]),
    "ablate_encoders": ("str_list", ["dense", "angle"]),
    "ablate_circuits": ("str_list", ["layered"]),
}


def default_config() -> dict:
    return {key: (list(default) if isinstance(default, list) else default)
            for key, (_, default) in SCHEMA.items()}


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    kind = SCHEMA[key][0]
    try:
        return _PARSERS[kind](text)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from exc


def load_config(path) -> dict:
    """Parse a key=value file on top of the schema defaults."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = default_config()
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        cfg[key.strip()] = parse_value(key.strip(), value.strip())
    return cfg


def canonical_text(cfg: dict) -> str:
    unknown = set(cfg) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return "".join(f"{key}={_format_value(cfg[key])}\n" for key in sorted(cfg))


def save_config(path, cfg: dict) -> None:
    Path(path).write_text(canonical_text(cfg))


def config_hash(cfg: dict) -> str:
    """Hash of the experiment-defining keys; where outputs land is excluded."""
    trimmed = {k: v for k, v in cfg.items() if k != "out_dir"}
    return hashlib.sha256(canonical_text(trimmed).encode()).hexdigest()[:12]


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """Merge non-None override values (already typed) into a config."""
    out = dict(cfg)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out


def require(cfg: dict, key: str, task: str):
    value = cfg.get(key, "")
    if value in ("", None):
        raise ConfigError(f"task {task!r} requires config key {key!r}")
    return value

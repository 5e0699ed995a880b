"""Versioned JSON checkpoints with exact float round trips.

Parameters are serialised as JSON numbers (shortest repr), which round-trip
bit-for-bit through float64, so save -> load -> save produces identical
bytes and a resumed run replays the uninterrupted trajectory. The optimizer
velocity is stored alongside the parameters because momentum is part of the
training state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UnsupportedVersionError

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    params: np.ndarray
    velocity: np.ndarray
    iteration: int
    loss_history: list[float]
    config_hash: str
    seed: int
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, checkpoint: Checkpoint) -> None:
    payload = {
        "format_version": checkpoint.format_version,
        "config": checkpoint.config,
        "params": [float(v) for v in checkpoint.params],
        "velocity": [float(v) for v in checkpoint.velocity],
        "iteration": int(checkpoint.iteration),
        "loss_history": [float(v) for v in checkpoint.loss_history],
        "config_hash": checkpoint.config_hash,
        "seed": int(checkpoint.seed),
        "extra": checkpoint.extra,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True,
                                     separators=(",", ":")) + "\n")


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    payload = json.loads(path.read_text())
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path} has checkpoint format version {version!r}; "
            f"this build reads version {FORMAT_VERSION}")
    return Checkpoint(
        config=payload["config"],
        params=np.asarray(payload["params"], dtype=np.float64),
        velocity=np.asarray(payload["velocity"], dtype=np.float64),
        iteration=int(payload["iteration"]),
        loss_history=[float(v) for v in payload["loss_history"]],
        config_hash=payload["config_hash"],
        seed=int(payload["seed"]),
        format_version=version,
        extra=payload.get("extra", {}),
    )

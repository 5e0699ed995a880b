"""Hybrid quantum field model: position and view direction in, color and
density out.

Pipeline per sample (two staged circuit blocks on one register):

    gamma(position) -> encoder -> circuit stage A -> <Z> readouts
        -> density head (softplus of an affine map of activations)
    same register -> direction rotation block -> circuit stage B -> <Z>
        -> color head (sigmoid of an affine map of activations)

Density is read before any direction-dependent gate acts, so it is
view-independent by construction, not by regularisation. Direction features
enter as data rotations (the angle or dense-angle map, assigned round-robin
across qubits); the amplitude-initialisation encoders fall back to the angle
map here because re-initialising amplitudes mid-circuit is not unitary.

The trainable parameter vector concatenates, in this order: stage-A circuit
angles, stage-B circuit angles, density head weights and bias, color head
weights and biases. Checkpoints depend on this layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .encoding import (EncoderKind, angle_features, qubits_required,
                       unit_features)
from .errors import TrainingDivergedError
from .pqc import PQCTemplate, TemplateKind, build_circuit, param_count, shift_terms
from .sim import (apply_op_raw, apply_phase_rows, apply_ry_rows,
                  expectations_z_raw)
from .validation import check_array, check_positive_int, check_range

SINE_FREQUENCY = 30.0


class ActivationKind(Enum):
    RELU = "relu"
    ELU = "elu"
    SOFTPLUS = "softplus"
    SINE = "sine"
    QRELU = "qrelu"


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z):
    return np.logaddexp(0.0, z)


_ACTIVATIONS = {
    ActivationKind.RELU: (
        lambda z: np.maximum(z, 0.0),
        lambda z: (z > 0).astype(np.float64)),
    ActivationKind.ELU: (
        lambda z: np.where(z > 0, z, np.expm1(np.minimum(z, 0.0))),
        lambda z: np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))),
    ActivationKind.SOFTPLUS: (_softplus, _sigmoid),
    ActivationKind.SINE: (
        lambda z: np.sin(SINE_FREQUENCY * z),
        lambda z: SINE_FREQUENCY * np.cos(SINE_FREQUENCY * z)),
    # Pass-through above zero, steep leak below; slope at exactly 0 is 1.
    ActivationKind.QRELU: (
        lambda z: np.where(z > 0, z, -0.99 * z),
        lambda z: np.where(z >= 0, 1.0, -0.99)),
}


def activate(kind: ActivationKind, z):
    """Apply one activation function elementwise."""
    return _ACTIVATIONS[kind][0](np.asarray(z, dtype=np.float64))


def activate_grad(kind: ActivationKind, z):
    return _ACTIVATIONS[kind][1](np.asarray(z, dtype=np.float64))


def positional_encode(p, n_frequencies: int) -> np.ndarray:
    """Sinusoidal feature lift: (sin(2^l pi x), cos(2^l pi x)) per component.

    Output ordering is frequency-major, component-minor, sin before cos;
    dimension 2 * n_frequencies * dim(p). Zero frequencies return p unchanged.
    """
    arr = check_array(p, "coordinates")
    check_range(arr, "coordinates", -1.0, 1.0)
    if n_frequencies == 0:
        return arr.copy()
    scales = math.pi * (2.0 ** np.arange(n_frequencies))
    angles = arr[..., None, :] * scales[:, None]          # (..., L, d)
    parts = np.stack([np.sin(angles), np.cos(angles)], axis=-1)
    return parts.reshape(arr.shape[:-1] + (-1,))


def direction_to_unit(theta, phi) -> np.ndarray:
    """(polar, azimuth) angles to a unit 3-vector; removes the azimuth seam."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class QRFConfig:
    """Hyperparameters of the hybrid field model."""
    encoder: EncoderKind = EncoderKind.DENSE_ANGLE
    template: PQCTemplate = PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 4, 1)
    activation: ActivationKind = ActivationKind.QRELU
    freq_position: int = 4
    freq_direction: int = 2
    position_dim: int = 3
    learning_rate: float = 0.1
    lr_decay: float = 1.0        # per-iteration multiplicative step decay
    momentum: float = 0.0
    iterations: int = 500
    batch_size: int = 32
    seed: int = 0


def position_feature_count(config: QRFConfig) -> int:
    if config.freq_position == 0:
        return config.position_dim
    return 2 * config.freq_position * config.position_dim


def validate_config(config: QRFConfig) -> None:
    check_positive_int(config.template.n_qubits, "n_qubits")
    if config.freq_position < 0 or config.freq_direction < 0:
        raise ValueError("frequency counts must be non-negative")
    if config.position_dim not in (2, 3):
        raise ValueError("position_dim must be 2 or 3")
    if not (math.isfinite(config.learning_rate) and config.learning_rate >= 0):
        raise ValueError("learning_rate must be finite and >= 0")
    if not 0 < config.lr_decay <= 1:
        raise ValueError("lr_decay must be in (0, 1]")
    if not 0 <= config.momentum < 1:
        raise ValueError("momentum must be in [0, 1)")
    if config.encoder is EncoderKind.WAVEFUNCTION and config.freq_position == 0:
        raise ValueError("wavefunction encoding needs freq_position >= 1 so the "
                         "feature vector never has zero norm")
    need = qubits_required(config.encoder, position_feature_count(config))
    if need > config.template.n_qubits:
        raise ValueError(
            f"{config.encoder.value} encoding of {position_feature_count(config)} "
            f"position features needs {need} qubits, template has "
            f"{config.template.n_qubits}")


@dataclass
class FieldSample:
    """One field query result: color in [0,1]^3 and density >= 0."""
    color: tuple[float, float, float]
    sigma: float


# -- parameter vector layout ---------------------------------------------------

def param_layout(config: QRFConfig) -> dict[str, slice]:
    n = config.template.n_qubits
    pt = param_count(config.template)
    cuts = np.cumsum([pt, pt, n, 1, 3 * n, 3])
    names = ["theta_a", "theta_b", "w_sigma", "b_sigma", "w_color", "b_color"]
    starts = [0] + list(cuts[:-1])
    return {name: slice(int(a), int(b)) for name, a, b in zip(names, starts, cuts)}


def n_params(config: QRFConfig) -> int:
    return param_layout(config)["b_color"].stop


def init_params(config: QRFConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    layout = param_layout(config)
    n = config.template.n_qubits
    params = np.zeros(n_params(config))
    pt = param_count(config.template)
    params[layout["theta_a"]] = rng.uniform(-math.pi, math.pi, pt)
    params[layout["theta_b"]] = rng.uniform(-math.pi, math.pi, pt)
    scale = 0.5 / math.sqrt(n)
    params[layout["w_sigma"]] = rng.normal(0.0, scale, n)
    params[layout["w_color"]] = rng.normal(0.0, scale, 3 * n)
    params[layout["b_sigma"]] = -2.0  # near-transparent start: density only
    return params                     # grows where the data demands it


# -- batched state preparation and evolution -----------------------------------

def _encode_rows(kind: EncoderKind, feats: np.ndarray, n_qubits: int) -> np.ndarray:
    """Encode a (B, F) feature block into (B, 2^n) amplitudes."""
    B, F = feats.shape
    amps = np.zeros((B, 1 << n_qubits), dtype=np.complex128)
    if kind is EncoderKind.ANGLE:
        amps[:, 0] = 1.0
        scaled = angle_features(feats)
        for k in range(F):
            apply_ry_rows(amps, n_qubits, 2.0 * scaled[:, k], k)
        return amps
    if kind is EncoderKind.DENSE_ANGLE:
        amps[:, 0] = 1.0
        scaled = unit_features(feats)
        if F % 2:
            scaled = np.concatenate([scaled, np.zeros((B, 1))], axis=1)
        for k in range(scaled.shape[1] // 2):
            apply_ry_rows(amps, n_qubits, 2.0 * math.pi * scaled[:, 2 * k], k)
            apply_phase_rows(amps, n_qubits, 2.0 * math.pi * scaled[:, 2 * k + 1], k)
        return amps
    if kind is EncoderKind.WAVEFUNCTION:
        norms = np.linalg.norm(feats, axis=1)
        if np.any(norms == 0):
            raise ValueError("wavefunction encoding: a feature row has zero norm")
        amps[:, :F] = feats / norms[:, None]
        return amps
    # general qubit: per-pair normalised product state
    padded = feats if F % 2 == 0 else np.concatenate([feats, np.zeros((B, 1))], axis=1)
    pairs = padded.reshape(B, -1, 2)
    norms = np.linalg.norm(pairs, axis=2)
    if np.any(norms == 0):
        raise ValueError("general qubit encoding: a feature pair is (0, 0)")
    pairs = pairs / norms[:, :, None]
    acc = np.ones((B, 1), dtype=np.complex128)
    for k in range(pairs.shape[1] - 1, -1, -1):
        acc = (acc[:, :, None] * pairs[:, k][:, None, :]).reshape(B, -1)
    amps[:, :acc.shape[1]] = acc
    return amps


def _apply_direction_rows(amps: np.ndarray, n_qubits: int, kind: EncoderKind,
                          dir_feats: np.ndarray) -> None:
    """Inject direction features as data rotations, round-robin over qubits."""
    F = dir_feats.shape[1]
    if kind is EncoderKind.DENSE_ANGLE:
        scaled = unit_features(dir_feats)
        if F % 2:
            scaled = np.concatenate([scaled, np.zeros((scaled.shape[0], 1))], axis=1)
        for k in range(scaled.shape[1] // 2):
            q = k % n_qubits
            apply_ry_rows(amps, n_qubits, 2.0 * math.pi * scaled[:, 2 * k], q)
            apply_phase_rows(amps, n_qubits, 2.0 * math.pi * scaled[:, 2 * k + 1], q)
        return
    scaled = angle_features(dir_feats)
    for k in range(F):
        apply_ry_rows(amps, n_qubits, 2.0 * scaled[:, k], k % n_qubits)


def _apply_ops(amps: np.ndarray, n_qubits: int, ops) -> None:
    for op in ops:
        apply_op_raw(amps, n_qubits, op)


@dataclass
class ForwardPass:
    """Everything the backward pass needs from one batched forward run."""
    enc_states: np.ndarray   # (B, 2^n) after the position encoder
    post_dir: np.ndarray     # (B, 2^n) after stage A plus the direction block
    dir_feats: np.ndarray    # raw direction features, for stage-A re-runs
    z_a: np.ndarray          # (B, n)
    z_b: np.ndarray          # (B, n)
    act_a: np.ndarray
    act_b: np.ndarray
    u_sigma: np.ndarray      # (B,)
    u_color: np.ndarray      # (B, 3)
    sigmas: np.ndarray       # (B,)
    colors: np.ndarray       # (B, 3)


def forward_field(config: QRFConfig, params: np.ndarray, positions: np.ndarray,
                  directions: np.ndarray) -> ForwardPass:
    """Run the full pipeline on a batch of (position, unit direction) pairs."""
    validate_config(config)
    layout = param_layout(config)
    n = config.template.n_qubits
    positions = check_array(positions, "positions", ndim=2)
    check_range(positions, "positions", -1.0, 1.0)
    directions = check_array(directions, "directions", ndim=2)

    feats_p = positional_encode(positions, config.freq_position)
    enc = _encode_rows(config.encoder, feats_p, n)

    amps = enc.copy()
    _apply_ops(amps, n, build_circuit(config.template, params[layout["theta_a"]]).ops)
    z_a = expectations_z_raw(amps, n, range(n))

    dir_feats = positional_encode(directions, config.freq_direction)
    _apply_direction_rows(amps, n, config.encoder, dir_feats)
    post_dir = amps.copy()

    _apply_ops(amps, n, build_circuit(config.template, params[layout["theta_b"]]).ops)
    z_b = expectations_z_raw(amps, n, range(n))

    act_a = activate(config.activation, z_a)
    act_b = activate(config.activation, z_b)
    u_sigma = act_a @ params[layout["w_sigma"]] + params[layout["b_sigma"]][0]
    w_color = params[layout["w_color"]].reshape(3, n)
    u_color = act_b @ w_color.T + params[layout["b_color"]]
    return ForwardPass(enc, post_dir, dir_feats, z_a, z_b, act_a, act_b,
                       u_sigma, u_color, _softplus(u_sigma), _sigmoid(u_color))


def field_outputs(config: QRFConfig, params, positions, directions):
    """Colors (B, 3) and densities (B,) for a batch of queries."""
    fwd = forward_field(config, params, positions, directions)
    return fwd.colors, fwd.sigmas


def evaluate_field(config: QRFConfig, params, p, d) -> FieldSample:
    """Query one 3D position with a (polar, azimuth) view direction."""
    p = check_array(p, "position", ndim=1)
    if p.size != config.position_dim:
        raise ValueError(f"position must have {config.position_dim} components")
    check_range(p, "position", -1.0, 1.0)
    d = check_array(d, "direction", ndim=1)
    if d.size != 2:
        raise ValueError("direction must be the two angles (polar, azimuth)")
    unit = direction_to_unit(d[0], d[1])
    colors, sigmas = field_outputs(config, params, p[None, :], unit[None, :])
    r, g, b = colors[0]
    return FieldSample((float(r), float(g), float(b)), float(sigmas[0]))


# -- loss and gradients ----------------------------------------------------------

def _as_batch(batch):
    if isinstance(batch, tuple) and len(batch) == 2:
        inputs, targets = batch
    else:
        pairs = list(batch)
        if not pairs:
            raise ValueError("batch must be non-empty")
        inputs = [p for p, _ in pairs]
        targets = [t for _, t in pairs]
    inputs = check_array(inputs, "batch inputs", ndim=2)
    targets = check_array(targets, "batch targets", ndim=2)
    if inputs.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("batch inputs and targets disagree in length")
    return inputs, targets


def _default_directions(n_rows: int) -> np.ndarray:
    out = np.zeros((n_rows, 3))
    out[:, 2] = 1.0  # zero angles point along +z
    return out


def loss(config: QRFConfig, params, batch) -> float:
    """Mean squared error between predicted and target colors."""
    inputs, targets = _as_batch(batch)
    colors, _ = field_outputs(config, params, inputs,
                              _default_directions(inputs.shape[0]))
    return float(np.mean((colors - targets) ** 2))


def backward_field(config: QRFConfig, params: np.ndarray, fwd: ForwardPass,
                   d_colors: np.ndarray, d_sigmas: np.ndarray | None) -> np.ndarray:
    """Full parameter gradient given dLoss/dcolor and dLoss/dsigma.

    Head and activation derivatives are analytic; circuit angles use the
    parameter-shift rule, re-running stage B from the cached post-direction
    state and the whole pipeline from the cached encoder state for stage A.
    """
    layout = param_layout(config)
    n = config.template.n_qubits
    grad = np.zeros_like(params)

    du_color = d_colors * fwd.colors * (1.0 - fwd.colors)      # sigmoid'
    w_color = params[layout["w_color"]].reshape(3, n)
    grad[layout["w_color"]] = (du_color.T @ fwd.act_b).reshape(-1)
    grad[layout["b_color"]] = du_color.sum(axis=0)
    dz_b = (du_color @ w_color) * activate_grad(config.activation, fwd.z_b)

    dz_a = None
    if d_sigmas is not None and np.any(d_sigmas):
        du_sigma = d_sigmas * _sigmoid(fwd.u_sigma)             # softplus'
        grad[layout["w_sigma"]] = du_sigma @ fwd.act_a
        grad[layout["b_sigma"]] = du_sigma.sum()
        dz_a = (du_sigma[:, None] * params[layout["w_sigma"]][None, :]
                * activate_grad(config.activation, fwd.z_a))

    theta_a = params[layout["theta_a"]]
    theta_b = params[layout["theta_b"]]
    kinds = [op.kind for op in build_circuit(config.template, theta_a).ops if op.params]

    grad_b = np.zeros_like(theta_b)
    for i, kind in enumerate(kinds):
        for coeff, shift in shift_terms(kind):
            shifted = theta_b.copy()
            shifted[i] += shift
            amps = fwd.post_dir.copy()
            _apply_ops(amps, n, build_circuit(config.template, shifted).ops)
            z_b_s = expectations_z_raw(amps, n, range(n))
            grad_b[i] += coeff * float(np.sum(dz_b * z_b_s))
    grad[layout["theta_b"]] = grad_b

    grad_a = np.zeros_like(theta_a)
    ops_b = build_circuit(config.template, theta_b).ops
    for i, kind in enumerate(kinds):
        for coeff, shift in shift_terms(kind):
            shifted = theta_a.copy()
            shifted[i] += shift
            amps = fwd.enc_states.copy()
            _apply_ops(amps, n, build_circuit(config.template, shifted).ops)
            if dz_a is not None:
                z_a_s = expectations_z_raw(amps, n, range(n))
                grad_a[i] += coeff * float(np.sum(dz_a * z_a_s))
            _apply_direction_rows(amps, n, config.encoder, fwd.dir_feats)
            _apply_ops(amps, n, ops_b)
            z_b_s = expectations_z_raw(amps, n, range(n))
            grad_a[i] += coeff * float(np.sum(dz_b * z_b_s))
    grad[layout["theta_a"]] = grad_a
    return grad


def loss_and_gradient(config: QRFConfig, params, batch):
    """Pixel-regression objective: MSE on colors, densities unused."""
    inputs, targets = _as_batch(batch)
    fwd = forward_field(config, params, inputs,
                        _default_directions(inputs.shape[0]))
    diff = fwd.colors - targets
    value = float(np.mean(diff ** 2))
    d_colors = 2.0 * diff / diff.size
    return value, backward_field(config, params, fwd, d_colors, None)


def train_step(config: QRFConfig, params, batch, velocity=None):
    """One gradient-descent step; returns (params, loss, velocity)."""
    params = np.asarray(params, dtype=np.float64)
    value, grad = loss_and_gradient(config, params, batch)
    return _descend(config, params, value, grad, velocity)


def _descend(config: QRFConfig, params, value, grad, velocity):
    if not (math.isfinite(value) and np.all(np.isfinite(grad))):
        raise TrainingDivergedError(
            f"non-finite objective: loss={value}, "
            f"max|grad|={np.max(np.abs(grad)) if grad.size else 0}")
    if velocity is None:
        velocity = np.zeros_like(params)
    velocity = config.momentum * velocity - config.learning_rate * grad
    return params + velocity, value, velocity


def batch_indices(seed: int, iteration: int, n_rows: int, batch_size: int) -> np.ndarray:
    """Deterministic batch sampling, stateless across iterations so a resumed
    run replays the exact trajectory of an uninterrupted one."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(iteration,)))
    take = min(batch_size, n_rows)
    return rng.choice(n_rows, size=take, replace=False)


def step_config(config: QRFConfig, iteration: int) -> QRFConfig:
    """Config with the iteration's decayed learning rate applied."""
    if config.lr_decay == 1.0:
        return config
    return replace(config, learning_rate=config.learning_rate
                   * config.lr_decay ** iteration)


def fit_pixels(config: QRFConfig, params, inputs, targets, *, velocity=None,
               start_iteration: int = 0, iterations: int | None = None,
               callback=None):
    """Mini-batch training loop for (coordinate -> color) data."""
    inputs, targets = _as_batch((inputs, targets))
    params = np.asarray(params, dtype=np.float64).copy()
    total = config.iterations if iterations is None else iterations
    losses = []
    for it in range(start_iteration, total):
        idx = batch_indices(config.seed, it, inputs.shape[0], config.batch_size)
        params, value, velocity = train_step(
            step_config(config, it), params, (inputs[idx], targets[idx]),
            velocity)
        losses.append(value)
        if callback is not None:
            callback(it, params, value, velocity)
    return params, velocity, losses


# -- sklearn-style estimator -----------------------------------------------------

class QuantumRadianceField:
    """Coordinate-to-color regressor backed by the staged quantum pipeline.

    Follows the scikit-learn estimator protocol (``get_params`` /
    ``set_params`` / ``fit`` / ``predict``) so it drops into pipelines and
    grid search. ``X`` rows are positions in [-1, 1]^d with d in {2, 3};
    ``y`` rows are RGB colors in [0, 1].
    """

    def __init__(self, encoder: str = "dense", circuit: str = "layered",
                 n_qubits: int = 4, n_layers: int = 1, activation: str = "qrelu",
                 freq_position: int = 2, freq_direction: int = 1,
                 learning_rate: float = 0.2, momentum: float = 0.9,
                 n_iterations: int = 300, batch_size: int = 32,
                 random_state: int = 0):
        self.encoder = encoder
        self.circuit = circuit
        self.n_qubits = n_qubits
        self.n_layers = n_layers
        self.activation = activation
        self.freq_position = freq_position
        self.freq_direction = freq_direction
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.random_state = random_state

    _PARAM_NAMES = ("encoder", "circuit", "n_qubits", "n_layers", "activation",
                    "freq_position", "freq_direction", "learning_rate",
                    "momentum", "n_iterations", "batch_size", "random_state")

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._PARAM_NAMES}

    def set_params(self, **params) -> "QuantumRadianceField":
        for name, value in params.items():
            if name not in self._PARAM_NAMES:
                raise ValueError(f"unknown parameter {name!r} for "
                                 f"{type(self).__name__}")
            setattr(self, name, value)
        return self

    def make_config(self, position_dim: int) -> QRFConfig:
        config = QRFConfig(
            encoder=EncoderKind(self.encoder),
            template=PQCTemplate(TemplateKind(self.circuit), self.n_qubits,
                                 self.n_layers),
            activation=ActivationKind(self.activation),
            freq_position=self.freq_position,
            freq_direction=self.freq_direction,
            position_dim=position_dim,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            iterations=self.n_iterations,
            batch_size=self.batch_size,
            seed=self.random_state,
        )
        validate_config(config)
        return config

    def fit(self, X, y) -> "QuantumRadianceField":
        X = check_array(X, "X", ndim=2)
        y = check_array(y, "y", ndim=2)
        check_range(y, "y", 0.0, 1.0)
        self.config_ = self.make_config(position_dim=X.shape[1])
        params = init_params(self.config_)
        params, velocity, losses = fit_pixels(self.config_, params, X, y)
        self.params_ = params
        self.velocity_ = velocity
        self.loss_history_ = losses
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("this estimator is not fitted yet; call fit first")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_array(X, "X", ndim=2)
        colors, _ = field_outputs(self.config_, self.params_, X,
                                  _default_directions(X.shape[0]))
        return colors

    def field(self, positions, directions) -> tuple[np.ndarray, np.ndarray]:
        """Radiance-field query: (colors, densities) for unit view directions."""
        self._check_fitted()
        return field_outputs(self.config_, self.params_, positions, directions)

    def score(self, X, y) -> float:
        """Negative mean squared error (higher is better)."""
        y = check_array(y, "y", ndim=2)
        return -float(np.mean((self.predict(X) - y) ** 2))

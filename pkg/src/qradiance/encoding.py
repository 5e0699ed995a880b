"""Classical-to-quantum feature encoders.

Four encoders with different qubit economics:

* angle:        one feature per qubit, ``RY(2 theta_k)`` on ``|0>``, giving
                ``cos(theta_k)|0> + sin(theta_k)|1>`` per qubit; inputs must be
                pre-scaled to ``[-pi, pi]``.
* dense angle:  two features per qubit, ``cos(pi a)|0> + e^{2 pi i b} sin(pi a)|1>``
                realised as ``RY(2 pi a)`` followed by a phase gate; inputs in
                ``[0, 1]``.
* wavefunction: features become amplitudes directly (zero-padded to a power of
                two, normalised); prepared by amplitude initialisation, not by
                gate synthesis.
* general qubit: two features per qubit with per-qubit normalisation,
                ``(a|0> + b|1>) / sqrt(a^2 + b^2)``.

Rescaling is the caller's job; out-of-range features raise rather than clamp.
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .sim import QuantumCircuit, Statevector, zero_state, apply_circuit
from .validation import check_array, check_range


class EncoderKind(Enum):
    GENERAL_QUBIT = "general"
    WAVEFUNCTION = "wavefunction"
    ANGLE = "angle"
    DENSE_ANGLE = "dense"


def qubits_required(kind: EncoderKind, n_features: int) -> int:
    """Qubit demand of each encoder for ``n_features`` inputs."""
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    if kind is EncoderKind.ANGLE:
        return n_features
    if kind in (EncoderKind.DENSE_ANGLE, EncoderKind.GENERAL_QUBIT):
        return (n_features + 1) // 2
    # wavefunction: ceil(log2 N), floored at one usable qubit
    return max(1, math.ceil(math.log2(n_features)))


def angle_encode(x) -> QuantumCircuit:
    """Depth-1 circuit of one RY(2 theta_k) per qubit; theta_k in [-pi, pi]."""
    feats = check_array(x, "features", ndim=1)
    check_range(feats, "angle-encoded features", -math.pi, math.pi)
    circuit = QuantumCircuit(len(feats))
    for k, theta in enumerate(feats):
        circuit.ry(2 * theta, k)
    return circuit


def dense_angle_encode(x) -> QuantumCircuit:
    """Two features per qubit: RY(2 pi a) then a relative phase e^{2 pi i b}."""
    feats = check_array(x, "features", ndim=1)
    check_range(feats, "dense-angle features", 0.0, 1.0)
    if len(feats) % 2:
        feats = np.append(feats, 0.0)
    circuit = QuantumCircuit(len(feats) // 2)
    for k in range(circuit.n_qubits):
        a, b = feats[2 * k], feats[2 * k + 1]
        circuit.ry(2 * math.pi * a, k)
        circuit.phase(2 * math.pi * b, k)
    return circuit


def wavefunction_encode(x) -> Statevector:
    """Amplitudes x_i / ||x|| on the first N basis states, zero elsewhere."""
    feats = check_array(x, "features", ndim=1)
    nrm = np.linalg.norm(feats)
    if nrm == 0:
        raise ValueError("wavefunction encoding needs a nonzero feature vector")
    n = qubits_required(EncoderKind.WAVEFUNCTION, len(feats))
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[:len(feats)] = feats / nrm
    return Statevector(n, amps)


def general_qubit_encode(x) -> Statevector:
    """Product state with (a|0> + b|1>)/sqrt(a^2+b^2) per feature pair."""
    feats = check_array(x, "features", ndim=1)
    if len(feats) % 2:
        feats = np.append(feats, 0.0)
    pairs = feats.reshape(-1, 2)
    norms = np.linalg.norm(pairs, axis=1)
    if np.any(norms == 0):
        raise ValueError("general qubit encoding: a feature pair is (0, 0)")
    pairs = pairs / norms[:, None]
    amps = np.ones(1, dtype=np.complex128)
    for k in range(len(pairs) - 1, -1, -1):  # qubit 0 is the least significant bit
        amps = np.kron(amps, pairs[k])
    return Statevector(len(pairs), amps)


def encode(kind: EncoderKind, x, n_qubits: int | None = None) -> Statevector:
    """Run any encoder and embed the result in an ``n_qubits`` register.

    Unused high qubits stay in |0>; ``n_qubits`` defaults to the encoder's
    own demand.
    """
    feats = check_array(x, "features", ndim=1)
    need = qubits_required(kind, len(feats))
    if n_qubits is None:
        n_qubits = need
    if n_qubits < need:
        raise ValueError(f"{kind.value} encoding of {len(feats)} features needs "
                         f"{need} qubits, register has {n_qubits}")
    if kind is EncoderKind.ANGLE:
        state = zero_state(n_qubits)
        sub = angle_encode(feats)
        return apply_circuit(state, QuantumCircuit(n_qubits, sub.ops))
    if kind is EncoderKind.DENSE_ANGLE:
        state = zero_state(n_qubits)
        sub = dense_angle_encode(feats)
        return apply_circuit(state, QuantumCircuit(n_qubits, sub.ops))
    small = (wavefunction_encode(feats) if kind is EncoderKind.WAVEFUNCTION
             else general_qubit_encode(feats))
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[:small.amplitudes.size] = small.amplitudes
    return Statevector(n_qubits, amps)


def angle_features(feats: np.ndarray) -> np.ndarray:
    """Map features from [-1, 1] to the angle encoder's [-pi, pi] domain."""
    return feats * math.pi


def unit_features(feats: np.ndarray) -> np.ndarray:
    """Map features from [-1, 1] to the dense encoder's [0, 1] domain."""
    return (feats + 1.0) / 2.0

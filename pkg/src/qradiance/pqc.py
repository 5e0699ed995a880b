"""Parameterized circuit templates, forward evaluation, and analytic gradients.

Gate order per template is frozen in ``circuit_templates.txt`` (shipped with
the package) and pinned by the dense-matrix tests; parameter layout is
layer-major, qubit-minor, rotation-axis innermost, and checkpoints depend on
that ordering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .sim import (GateKind, QuantumCircuit, Statevector, apply_op_raw,
                  expectations_z_raw)
from .validation import check_index, check_positive_int


class TemplateKind(Enum):
    LAYERED_ROT_CNOT = "layered"
    CIRCUIT5 = "c5"
    CIRCUIT6 = "c6"
    CIRCUIT16 = "c16"
    CIRCUIT17 = "c17"


@dataclass(frozen=True)
class PQCTemplate:
    kind: TemplateKind
    n_qubits: int
    n_layers: int = 1

    def __post_init__(self):
        check_positive_int(self.n_qubits, "n_qubits")
        check_positive_int(self.n_layers, "n_layers")


def param_count(template: PQCTemplate) -> int:
    """Number of rotation angles the template consumes."""
    n, layers = template.n_qubits, template.n_layers
    if template.kind is TemplateKind.LAYERED_ROT_CNOT:
        per_layer = 3 * n
    elif template.kind in (TemplateKind.CIRCUIT5, TemplateKind.CIRCUIT6):
        per_layer = 4 * n + n * (n - 1)
    else:
        per_layer = 2 * n + (n - 1)
    return per_layer * layers


def _controlled(circuit: QuantumCircuit, kind: TemplateKind, theta: float,
                control: int, target: int) -> None:
    if kind in (TemplateKind.CIRCUIT5, TemplateKind.CIRCUIT16):
        circuit.crz(theta, control, target)
    else:
        circuit.crx(theta, control, target)


def build_circuit(template: PQCTemplate, params) -> QuantumCircuit:
    """Deterministic circuit for (template, params); params consumed in order."""
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    expected = param_count(template)
    if params.size != expected:
        raise ValueError(f"{template.kind.value} with n={template.n_qubits}, "
                         f"layers={template.n_layers} takes {expected} parameters, "
                         f"got {params.size}")
    if not np.all(np.isfinite(params)):
        raise ValueError("parameters must be finite")
    n = template.n_qubits
    circuit = QuantumCircuit(n)
    it = iter(params)
    for _ in range(template.n_layers):
        if template.kind is TemplateKind.LAYERED_ROT_CNOT:
            for q in range(n):
                circuit.rx(next(it), q)
                circuit.ry(next(it), q)
                circuit.rz(next(it), q)
            for q in range(n - 1):
                circuit.cnot(q, q + 1)
        elif template.kind in (TemplateKind.CIRCUIT5, TemplateKind.CIRCUIT6):
            for q in range(n):
                circuit.rx(next(it), q)
                circuit.rz(next(it), q)
            for control in range(n):
                for target in range(n):
                    if target != control:
                        _controlled(circuit, template.kind, next(it), control, target)
            for q in range(n):
                circuit.rx(next(it), q)
                circuit.rz(next(it), q)
        else:  # circuit16 / circuit17: staggered nearest-neighbour pairing
            for q in range(n):
                circuit.rx(next(it), q)
                circuit.rz(next(it), q)
            for q in range(0, n - 1, 2):
                _controlled(circuit, template.kind, next(it), q + 1, q)
            for q in range(1, n - 1, 2):
                _controlled(circuit, template.kind, next(it), q + 1, q)
    return circuit


@lru_cache(maxsize=None)
def parameter_gate_kinds(template: PQCTemplate) -> tuple[GateKind, ...]:
    """Gate kind owning each parameter, in parameter order."""
    probe = build_circuit(template, np.zeros(param_count(template)))
    return tuple(op.kind for op in probe.ops if op.params)


def forward(template: PQCTemplate, params, input_state: Statevector,
            readout_qubits) -> np.ndarray:
    """Apply the built circuit to a copy of the input; return <Z> per readout."""
    if input_state.n_qubits != template.n_qubits:
        raise ValueError(f"input state has {input_state.n_qubits} qubits, template "
                         f"expects {template.n_qubits}")
    for q in readout_qubits:
        check_index(q, "readout qubit", template.n_qubits)
    circuit = build_circuit(template, params)
    amps = input_state.amplitudes.copy()
    for op in circuit.ops:
        apply_op_raw(amps, template.n_qubits, op)
    return expectations_z_raw(amps, template.n_qubits, list(readout_qubits))


# Two-term rule for plain rotations. Controlled rotations mix two frequencies
# (the generator splits into two commuting half-angle terms), so their exact
# rule combines shifted evaluations at +-pi/2 and +-3pi/2.
_C_PLUS = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C_MINUS = (math.sqrt(2) - 1) / (4 * math.sqrt(2))

_SHIFT_RULES: dict[GateKind, tuple[tuple[float, float], ...]] = {
    GateKind.RX: ((0.5, math.pi / 2), (-0.5, -math.pi / 2)),
    GateKind.RY: ((0.5, math.pi / 2), (-0.5, -math.pi / 2)),
    GateKind.RZ: ((0.5, math.pi / 2), (-0.5, -math.pi / 2)),
    GateKind.CRX: ((_C_PLUS, math.pi / 2), (-_C_PLUS, -math.pi / 2),
                   (-_C_MINUS, 3 * math.pi / 2), (_C_MINUS, -3 * math.pi / 2)),
    GateKind.CRZ: ((_C_PLUS, math.pi / 2), (-_C_PLUS, -math.pi / 2),
                   (-_C_MINUS, 3 * math.pi / 2), (_C_MINUS, -3 * math.pi / 2)),
}


def shift_terms(kind: GateKind) -> tuple[tuple[float, float], ...]:
    """(coefficient, shift) pairs of the parameter-shift rule for one gate kind."""
    try:
        return _SHIFT_RULES[kind]
    except KeyError:
        raise NotImplementedError(f"{kind.name} has no parameter-shift rule") from None


def parameter_shift_gradient(template: PQCTemplate, params, input_state: Statevector,
                             readout_qubits) -> np.ndarray:
    """d<Z_q>/d theta_i for every (parameter, readout) pair, shape (P, R)."""
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    kinds = parameter_gate_kinds(template)
    grad = np.zeros((params.size, len(list(readout_qubits))))
    readouts = list(readout_qubits)
    for i, kind in enumerate(kinds):
        acc = np.zeros(len(readouts))
        for coeff, shift in shift_terms(kind):
            shifted = params.copy()
            shifted[i] += shift
            acc += coeff * forward(template, shifted, input_state, readouts)
        grad[i] = acc
    return grad

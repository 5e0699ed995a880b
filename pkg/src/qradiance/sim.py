"""Dense statevector simulation.

Basis convention, fixed repo-wide: amplitude index ``i`` encodes the register
bitstring with qubit 0 as the least significant bit, i.e. amplitude ``i``
belongs to ``|b_{n-1} ... b_1 b_0>`` with ``b_k = (i >> k) & 1``.

Gates are applied by strided in-place updates on the amplitude array; nothing
here materialises a ``2^n x 2^n`` matrix (the dense-matrix path lives in the
test suite as an independent oracle). Amplitude arrays may carry leading batch
dimensions, shape ``(..., 2^n)``, so many independent states evolve under the
same gates in one vectorised call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .validation import check_index, check_positive_int

MAX_QUBITS = 24  # 2^24 complex128 amplitudes = 256 MiB


class GateKind(Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    H = "h"
    X = "x"
    CNOT = "cnot"
    CRX = "crx"
    CRZ = "crz"
    CONTROLLED_UNITARY_POWER = "cpow"
    DIAGONAL_PHASE = "phase"


_N_ANGLES = {
    GateKind.RX: 1, GateKind.RY: 1, GateKind.RZ: 1,
    GateKind.H: 0, GateKind.X: 0, GateKind.CNOT: 0,
    GateKind.CRX: 1, GateKind.CRZ: 1,
    GateKind.DIAGONAL_PHASE: 1, GateKind.CONTROLLED_UNITARY_POWER: 0,
}


@dataclass(frozen=True)
class GateOp:
    """One gate: kind, rotation angles, target and control qubit indices.

    ``CONTROLLED_UNITARY_POWER`` carries a sub-circuit ``body`` applied
    ``power`` times, every body gate picking up this op's controls.
    """
    kind: GateKind
    params: tuple[float, ...] = ()
    targets: tuple[int, ...] = ()
    controls: tuple[int, ...] = ()
    body: "QuantumCircuit | None" = None
    power: int = 1

    def inverse(self) -> "GateOp":
        if self.kind is GateKind.CONTROLLED_UNITARY_POWER:
            return GateOp(self.kind, (), self.targets, self.controls,
                          self.body.inverse(), self.power)
        if self.params:
            return GateOp(self.kind, tuple(-p for p in self.params),
                          self.targets, self.controls)
        return self  # H, X, CNOT are self-inverse


@dataclass
class QuantumCircuit:
    """Ordered gate list over a fixed-width register."""
    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    # -- builder helpers -----------------------------------------------------
    def rx(self, theta: float, qubit: int) -> None:
        self.ops.append(GateOp(GateKind.RX, (float(theta),), (qubit,)))

    def ry(self, theta: float, qubit: int) -> None:
        self.ops.append(GateOp(GateKind.RY, (float(theta),), (qubit,)))

    def rz(self, theta: float, qubit: int) -> None:
        self.ops.append(GateOp(GateKind.RZ, (float(theta),), (qubit,)))

    def h(self, qubit: int) -> None:
        self.ops.append(GateOp(GateKind.H, (), (qubit,)))

    def x(self, qubit: int, controls: tuple[int, ...] = ()) -> None:
        self.ops.append(GateOp(GateKind.X, (), (qubit,), tuple(controls)))

    def cnot(self, control: int, target: int) -> None:
        self.ops.append(GateOp(GateKind.CNOT, (), (target,), (control,)))

    def crx(self, theta: float, control: int, target: int) -> None:
        self.ops.append(GateOp(GateKind.CRX, (float(theta),), (target,), (control,)))

    def crz(self, theta: float, control: int, target: int) -> None:
        self.ops.append(GateOp(GateKind.CRZ, (float(theta),), (target,), (control,)))

    def phase(self, phi: float, qubit: int, controls: tuple[int, ...] = ()) -> None:
        """diag(1, e^{i phi}) on the target, optionally multi-controlled."""
        self.ops.append(GateOp(GateKind.DIAGONAL_PHASE, (float(phi),), (qubit,),
                               tuple(controls)))

    def controlled_power(self, body: "QuantumCircuit", power: int,
                         controls: tuple[int, ...]) -> None:
        self.ops.append(GateOp(GateKind.CONTROLLED_UNITARY_POWER, (), (),
                               tuple(controls), body, int(power)))

    def extend(self, ops) -> None:
        self.ops.extend(ops)

    # -- structure -----------------------------------------------------------
    def inverse(self) -> "QuantumCircuit":
        """Exact inverse: reversed op order, angles negated."""
        return QuantumCircuit(self.n_qubits, [op.inverse() for op in reversed(self.ops)])


@dataclass
class Statevector:
    """n-qubit pure state as a dense complex amplitude array of length 2^n."""
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(f"amplitudes must have length 2^{self.n_qubits}, "
                             f"got shape {self.amplitudes.shape}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy())


def zero_state(n_qubits: int) -> Statevector:
    """|0...0> on n qubits."""
    check_positive_int(n_qubits, "n_qubits")
    if n_qubits > MAX_QUBITS:
        raise ValueError(f"n_qubits={n_qubits} exceeds the cap of {MAX_QUBITS}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def from_amplitudes(amplitudes, normalize: bool = False) -> Statevector:
    amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
    n = int(round(math.log2(amps.size))) if amps.size > 1 else 0
    if amps.size < 2 or 1 << n != amps.size:
        raise ValueError(f"amplitude count {amps.size} is not a power of two >= 2")
    if normalize:
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        amps = amps / nrm
    return Statevector(n, amps)


def validate_gate(op: GateOp, n_qubits: int) -> None:
    """Raise ValueError unless ``op`` is well-formed for an n-qubit register."""
    used = op.targets + op.controls
    for q in used:
        check_index(q, "qubit index", n_qubits)
    if len(set(used)) != len(used):
        raise ValueError(f"targets and controls must be disjoint, got {used}")
    if len(op.params) != _N_ANGLES[op.kind]:
        raise ValueError(f"{op.kind.name} takes {_N_ANGLES[op.kind]} angle(s), "
                         f"got {len(op.params)}")
    if op.kind in (GateKind.CNOT, GateKind.CRX, GateKind.CRZ) and len(op.controls) != 1:
        raise ValueError(f"{op.kind.name} requires exactly one control")
    if op.kind in (GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.H) and op.controls:
        raise ValueError(f"{op.kind.name} does not take controls")
    if op.kind is GateKind.CONTROLLED_UNITARY_POWER:
        if op.body is None or op.power < 1 or not op.controls:
            raise ValueError("CONTROLLED_UNITARY_POWER needs a body, power >= 1 "
                             "and at least one control")
        for sub in op.body.ops:
            validate_gate(sub, n_qubits)
            if set(sub.targets + sub.controls) & set(op.controls):
                raise ValueError("controlled power body touches its own control qubit")
    elif len(op.targets) != 1:
        raise ValueError(f"{op.kind.name} takes exactly one target")


def validate_circuit(circuit: QuantumCircuit) -> None:
    check_positive_int(circuit.n_qubits, "n_qubits")
    for op in circuit.ops:
        validate_gate(op, circuit.n_qubits)


# -- strided kernels ---------------------------------------------------------
#
# All kernels mutate `amps` (shape (..., 2^n), C-contiguous) through reshaped
# views. Axis of qubit q in the reshaped array is `batch_ndim + n - 1 - q`.

def _slab_pair(amps: np.ndarray, n: int, target: int, controls):
    # Length-1 slices (not integer indices) keep every axis, so the result is
    # always a writable view of the same rank regardless of n or batch shape.
    arr = amps.reshape(amps.shape[:-1] + (2,) * n)
    bnd = amps.ndim - 1
    sel0 = [slice(None)] * arr.ndim
    for c in controls:
        sel0[bnd + n - 1 - c] = slice(1, 2)
    sel1 = list(sel0)
    sel0[bnd + n - 1 - target] = slice(0, 1)
    sel1[bnd + n - 1 - target] = slice(1, 2)
    return arr[tuple(sel0)], arr[tuple(sel1)]


def _apply_2x2(amps, n, mat, target, controls=()):
    a0, a1 = _slab_pair(amps, n, target, controls)
    tmp = a0.copy()
    a0[...] = mat[0, 0] * tmp + mat[0, 1] * a1
    a1[...] = mat[1, 0] * tmp + mat[1, 1] * a1


def _apply_swap01(amps, n, target, controls=()):
    a0, a1 = _slab_pair(amps, n, target, controls)
    tmp = a0.copy()
    a0[...] = a1
    a1[...] = tmp


def _apply_diag(amps, n, f0, f1, target, controls=()):
    a0, a1 = _slab_pair(amps, n, target, controls)
    if f0 != 1.0:
        a0 *= f0
    if f1 != 1.0:
        a1 *= f1


def _rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


_H_MATRIX = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)


def apply_op_raw(amps: np.ndarray, n: int, op: GateOp, extra_controls=()) -> None:
    """Apply one gate to raw (possibly batched) amplitudes, in place.

    ``extra_controls`` adds control qubits at application time; used to expand
    CONTROLLED_UNITARY_POWER without rewriting the body ops.
    """
    kind = op.kind
    if kind is GateKind.CONTROLLED_UNITARY_POWER:
        inner = op.controls + tuple(extra_controls)
        for _ in range(op.power):
            for sub in op.body.ops:
                apply_op_raw(amps, n, sub, inner)
        return
    controls = op.controls + tuple(extra_controls)
    target = op.targets[0]
    if kind in (GateKind.X, GateKind.CNOT):
        _apply_swap01(amps, n, target, controls)
    elif kind in (GateKind.RZ, GateKind.CRZ):
        half = op.params[0] / 2
        _apply_diag(amps, n, np.exp(-1j * half), np.exp(1j * half), target, controls)
    elif kind is GateKind.DIAGONAL_PHASE:
        _apply_diag(amps, n, 1.0, np.exp(1j * op.params[0]), target, controls)
    elif kind in (GateKind.RX, GateKind.CRX):
        _apply_2x2(amps, n, _rx_matrix(op.params[0]), target, controls)
    elif kind is GateKind.RY:
        _apply_2x2(amps, n, _ry_matrix(op.params[0]), target, controls)
    elif kind is GateKind.H:
        _apply_2x2(amps, n, _H_MATRIX, target, controls)
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown gate kind {kind}")


def apply_gate(state: Statevector, op: GateOp) -> Statevector:
    """Apply one validated gate to ``state`` in place and return it."""
    validate_gate(op, state.n_qubits)
    apply_op_raw(state.amplitudes, state.n_qubits, op)
    return state


def apply_circuit(state: Statevector, circuit: QuantumCircuit) -> Statevector:
    """Apply every gate of ``circuit`` in list order, in place."""
    if circuit.n_qubits != state.n_qubits:
        raise ValueError(f"circuit is on {circuit.n_qubits} qubits but state has "
                         f"{state.n_qubits}")
    validate_circuit(circuit)
    for op in circuit.ops:
        apply_op_raw(state.amplitudes, state.n_qubits, op)
    return state


# -- batched data-dependent rotations (used by the encoders) ------------------

def _bcast(values: np.ndarray, like: np.ndarray, batch_ndim: int) -> np.ndarray:
    return values.reshape(values.shape + (1,) * (like.ndim - batch_ndim))


def apply_ry_rows(amps: np.ndarray, n: int, thetas: np.ndarray, target: int) -> None:
    """RY with a per-row angle: ``amps`` is (B, 2^n), ``thetas`` is (B,)."""
    a0, a1 = _slab_pair(amps, n, target, ())
    bnd = amps.ndim - 1
    c = _bcast(np.cos(thetas / 2), a0, bnd)
    s = _bcast(np.sin(thetas / 2), a0, bnd)
    tmp = a0.copy()
    a0[...] = c * tmp - s * a1
    a1[...] = s * tmp + c * a1


def apply_phase_rows(amps: np.ndarray, n: int, phis: np.ndarray, target: int) -> None:
    """diag(1, e^{i phi}) with a per-row phase."""
    _, a1 = _slab_pair(amps, n, target, ())
    a1 *= _bcast(np.exp(1j * phis), a1, amps.ndim - 1)


# -- readout ------------------------------------------------------------------

def expectations_z_raw(amps: np.ndarray, n: int, qubits) -> np.ndarray:
    """Exact <Z> per qubit in ``qubits``; returns shape (..., len(qubits))."""
    probs = (amps.real ** 2 + amps.imag ** 2).reshape(amps.shape[:-1] + (2,) * n)
    bnd = amps.ndim - 1
    out = []
    for q in qubits:
        ax = bnd + n - 1 - q
        other = tuple(a for a in range(bnd, bnd + n) if a != ax)
        marg = probs.sum(axis=other)
        out.append(marg[..., 0] - marg[..., 1])
    return np.stack(out, axis=-1)


def expectation_z(state: Statevector, qubit: int) -> float:
    """Exact <Z> on one qubit: +1 for |0>, -1 for |1|, no sampling."""
    check_index(qubit, "qubit", state.n_qubits)
    return float(expectations_z_raw(state.amplitudes, state.n_qubits, [qubit])[0])


def probabilities(state: Statevector) -> np.ndarray:
    """Born-rule probability of every basis state."""
    a = state.amplitudes
    return a.real ** 2 + a.imag ** 2


def measure_counts(state: Statevector, shots: int, seed: int) -> dict[str, int]:
    """Optional shot-sampling readout; exact expectations stay the default."""
    check_positive_int(shots, "shots")
    rng = np.random.default_rng(seed)
    p = probabilities(state)
    p = p / p.sum()
    outcomes = rng.choice(p.size, size=shots, p=p)
    values, counts = np.unique(outcomes, return_counts=True)
    return {format(v, f"0{state.n_qubits}b"): int(c) for v, c in zip(values, counts)}


def expectation_z_sampled(state: Statevector, qubit: int, shots: int, seed: int) -> float:
    """<Z> estimated from seeded shot sampling."""
    check_index(qubit, "qubit", state.n_qubits)
    counts = measure_counts(state, shots, seed)
    total = 0
    for bits, c in counts.items():
        bit = int(bits[state.n_qubits - 1 - qubit])
        total += c * (1 - 2 * bit)
    return total / shots

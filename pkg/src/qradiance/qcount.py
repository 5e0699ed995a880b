"""Quantum numerical integration of per-ray energies via Grover counting.

An energy table assigns a non-negative energy to each of ``N = 2^n`` rays.
Energies are quantised to a fixed-point format (``b0`` integer bits out of
``b`` total), and the marked-state count of the threshold predicate
``quantize(f(j)) >= k`` over all ``(j, k)`` pairs recovers the table mean:
``sum_{j,k} g = sum_j quantize(f(j)) + N``. Phase estimation on the Grover
operator of that predicate therefore estimates the mean with error falling
as 1/(number of oracle queries), against 1/sqrt(samples) for the classical
Monte Carlo estimator; ``convergence_study`` measures both slopes.

Register layout (qubit 0 = least significant):

    [0, n)          ray index j
    [n, n+b)        threshold k             } counted registers: the Grover
                                            } diffusion acts on these n+b
    [n+b, n+2b)     quantised energy value
    [n+2b, n+3b)    subtraction borrow chain
    n+3b            comparator flag

The value, borrow, and flag qubits are ancillas; every oracle application
returns them to |0>.

Phase estimation is evaluated blockwise: the Grover operator's gate sequence
is applied once per power step (exactly ``2^t - 1`` applications, the query
count), and the QPE register statistics follow from the exact block identity
``|reg state> = 2^{-t/2} sum_y |y> G^y |psi>``. The literal circuit with a
materialised QPE register and controlled-power gates is also constructible
(``counting_circuit``) and the test suite pins both paths to each other.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ResourceLimitError
from .sim import (MAX_QUBITS, GateKind, GateOp, QuantumCircuit, apply_op_raw,
                  validate_circuit)
from .validation import check_array, check_positive_int

WORKING_QUBIT_CAP = 20
MAX_QPE_BITS = 10


@dataclass(frozen=True)
class FixedPointSpec:
    """Fixed-point energy format: b0 integer bits, b total bits."""
    b0: int
    b: int

    def __post_init__(self):
        check_positive_int(self.b0, "b0")
        check_positive_int(self.b, "b")
        if not self.b0 <= self.b <= 10:
            raise ValueError(f"need 1 <= b0 <= b <= 10, got b0={self.b0}, b={self.b}")

    @property
    def step(self) -> float:
        return 2.0 ** (self.b0 - self.b)

    @property
    def max_value(self) -> float:
        return 2.0 ** self.b0 - self.step


@dataclass(frozen=True)
class EnergyTable:
    """Per-ray energies, one per basis index of an n-qubit ray register."""
    n_index_qubits: int
    energies: np.ndarray

    def __post_init__(self):
        check_positive_int(self.n_index_qubits, "n_index_qubits")
        energies = check_array(self.energies, "energies", ndim=1)
        if energies.size != 1 << self.n_index_qubits:
            raise ValueError(f"need exactly 2^{self.n_index_qubits} energies, "
                             f"got {energies.size}")
        if np.any(energies < 0):
            raise ValueError("energies must be non-negative")
        object.__setattr__(self, "energies", energies)

    @classmethod
    def from_energies(cls, values) -> "EnergyTable":
        values = check_array(values, "energies", ndim=1)
        n = int(round(math.log2(values.size))) if values.size > 1 else 0
        if values.size < 2 or 1 << n != values.size:
            raise ValueError(f"energy count {values.size} is not a power of two >= 2")
        return cls(n, values)

    @property
    def n_rays(self) -> int:
        return 1 << self.n_index_qubits


@dataclass
class CountResult:
    """Quantum counting output plus accounting and diagnostics."""
    m_estimate: float
    qpe_bits: int
    oracle_queries: int
    error_bound: float
    modal_outcome: int
    modal_probability: float
    distribution: np.ndarray = field(repr=False)
    ancilla_leakage: float = 0.0


@dataclass
class MCResult:
    estimate: float
    n_samples: int
    seed: object


def quantize(f: float, spec: FixedPointSpec) -> int:
    """floor(2^{b-b0} f) clamped to the representable range [0, 2^b - 1]."""
    if not f >= 0:
        raise ValueError(f"energy must be non-negative, got {f}")
    return min(int(math.floor(f * 2.0 ** (spec.b - spec.b0))), (1 << spec.b) - 1)


def threshold_met(table: EnergyTable, spec: FixedPointSpec, j: int, k: int) -> int:
    """Classical reference predicate: quantised energy of ray j clears level k."""
    if not 0 <= j < table.n_rays:
        raise ValueError(f"ray index {j} out of range for {table.n_rays} rays")
    if not 0 <= k < (1 << spec.b):
        raise ValueError(f"threshold index {k} out of range for b={spec.b}")
    return int(quantize(float(table.energies[j]), spec) >= k)


def marked_count(table: EnergyTable, spec: FixedPointSpec) -> int:
    """Exact number of marked (j, k) pairs: sum_j quantize(f(j)) + N."""
    return sum(quantize(float(f), spec) for f in table.energies) + table.n_rays


def total_states(table: EnergyTable, spec: FixedPointSpec) -> int:
    return table.n_rays << spec.b


def quantized_mean(table: EnergyTable, spec: FixedPointSpec) -> float:
    return spec.step * (marked_count(table, spec) - table.n_rays) / table.n_rays


def working_qubits(table: EnergyTable, spec: FixedPointSpec) -> int:
    return table.n_index_qubits + 3 * spec.b + 1


def _check_budget(table: EnergyTable, spec: FixedPointSpec) -> None:
    m = working_qubits(table, spec)
    if m > WORKING_QUBIT_CAP:
        raise ResourceLimitError(
            f"oracle needs {m} working qubits (n={table.n_index_qubits}, "
            f"b={spec.b}); cap is {WORKING_QUBIT_CAP}")


def energy_oracle(table: EnergyTable, spec: FixedPointSpec,
                  n_total: int | None = None,
                  value_offset: int | None = None) -> QuantumCircuit:
    """Self-inverse truth-table oracle |j>|0>_b -> |j>|quantize(f(j))>_b.

    Each energy bit is set by a multi-controlled X on the full index pattern
    (zero index bits handled by X sandwiches); applying the fragment twice
    restores the value register.
    """
    n = table.n_index_qubits
    if n_total is None:
        n_total = n + spec.b
    if value_offset is None:
        value_offset = n
    if n_total < value_offset + spec.b:
        raise ValueError("value register does not fit the register width")
    if n_total > WORKING_QUBIT_CAP:
        raise ResourceLimitError(f"{n_total} qubits exceed the cap of "
                                 f"{WORKING_QUBIT_CAP}")
    circuit = QuantumCircuit(n_total)
    index_qubits = tuple(range(n))
    for j in range(table.n_rays):
        q = quantize(float(table.energies[j]), spec)
        if q == 0:
            continue
        zeros = [i for i in index_qubits if not (j >> i) & 1]
        for i in zeros:
            circuit.x(i)
        for m in range(spec.b):
            if (q >> m) & 1:
                circuit.x(value_offset + m, controls=index_qubits)
        for i in zeros:
            circuit.x(i)
    return circuit


def _comparator_ops(spec: FixedPointSpec, value_offset: int, threshold_offset: int,
                    borrow_offset: int) -> list[GateOp]:
    """Ripple-borrow chain of value - threshold; final borrow means v < k.

    Each step writes the majority of (NOT v_i, k_i, previous borrow) into a
    fresh ancilla via three Toffolis, with X sandwiches giving the negated
    control; every op is self-inverse so uncomputation is the reversed list.
    """
    def mcx(target, controls):
        return GateOp(GateKind.X, (), (target,), tuple(controls))

    x = GateKind.X
    ops: list[GateOp] = []
    for i in range(spec.b):
        v, k, a = value_offset + i, threshold_offset + i, borrow_offset + i
        prev = borrow_offset + i - 1
        ops.append(GateOp(x, (), (v,)))
        ops.append(mcx(a, (v, k)))
        if i > 0:
            ops.append(mcx(a, (v, prev)))
        ops.append(GateOp(x, (), (v,)))
        if i > 0:
            ops.append(mcx(a, (k, prev)))
    return ops


def phase_oracle(table: EnergyTable, spec: FixedPointSpec) -> QuantumCircuit:
    """|j>|k> -> (-1)^{g(j,k)} |j>|k> with every ancilla returned to |0>.

    Structure: energy oracle, comparator writing the predicate into the flag
    qubit, Z on the flag, then full uncomputation.
    """
    _check_budget(table, spec)
    n, b = table.n_index_qubits, spec.b
    m = working_qubits(table, spec)
    value_offset, borrow_offset, flag = n + b, n + 2 * b, n + 3 * b

    circuit = QuantumCircuit(m)
    energy_ops = energy_oracle(table, spec, n_total=m,
                               value_offset=value_offset).ops
    comp_ops = _comparator_ops(spec, value_offset, n, borrow_offset)

    circuit.extend(energy_ops)
    circuit.extend(comp_ops)
    borrow_last = borrow_offset + b - 1
    circuit.cnot(borrow_last, flag)
    circuit.x(flag)                      # flag = NOT borrow = (v >= k)
    circuit.phase(math.pi, flag)         # Z on the flag
    circuit.x(flag)
    circuit.cnot(borrow_last, flag)
    circuit.extend(reversed(comp_ops))   # X/CCX ops are self-inverse
    circuit.extend(energy_ops)
    return circuit


def _diffusion_ops(n_counted: int) -> list[GateOp]:
    """Inversion about the mean, 2|psi><psi| - I, as an exact gate sequence."""
    c = QuantumCircuit(n_counted)
    for q in range(n_counted):
        c.h(q)
    for q in range(n_counted):
        c.x(q)
    if n_counted == 1:
        c.phase(math.pi, 0)
    else:
        c.phase(math.pi, 0, controls=tuple(range(1, n_counted)))
    for q in range(n_counted):
        c.x(q)
    for q in range(n_counted):
        c.h(q)
    c.rz(2 * math.pi, 0)                 # global -1: diag(e^{-i pi}, e^{i pi})
    return c.ops


def grover_operator(table: EnergyTable, spec: FixedPointSpec) -> QuantumCircuit:
    """G = D . O_g on the index+threshold registers (ancillas pass through)."""
    circuit = phase_oracle(table, spec)
    circuit.extend(_diffusion_ops(table.n_index_qubits + spec.b))
    return circuit


# -- phase estimation ---------------------------------------------------------

def _swap_ops(circuit: QuantumCircuit, a: int, b: int) -> None:
    circuit.cnot(a, b)
    circuit.cnot(b, a)
    circuit.cnot(a, b)


def fourier_ops(qubits: list[int]) -> QuantumCircuit:
    """Textbook QFT on the given qubits (first entry = least significant)."""
    t = len(qubits)
    circuit = QuantumCircuit(max(qubits) + 1)
    for i in range(t - 1, -1, -1):
        circuit.h(qubits[i])
        for j in range(i - 1, -1, -1):
            circuit.phase(math.pi / (1 << (i - j)), qubits[i],
                          controls=(qubits[j],))
    for i in range(t // 2):
        _swap_ops(circuit, qubits[i], qubits[t - 1 - i])
    return circuit


def counting_circuit(table: EnergyTable, spec: FixedPointSpec,
                     qpe_bits: int) -> QuantumCircuit:
    """The literal counting circuit: QPE register, controlled Grover powers,
    inverse Fourier transform. Exponential in qpe_bits; used at small sizes."""
    _validate_qpe_bits(qpe_bits)
    m = working_qubits(table, spec)
    total = m + qpe_bits
    if total > MAX_QUBITS:
        raise ResourceLimitError(f"the literal circuit needs {total} qubits; the "
                                 f"simulator caps at {MAX_QUBITS}")
    grover = grover_operator(table, spec)
    body = QuantumCircuit(total, grover.ops)
    circuit = QuantumCircuit(total)
    for q in range(table.n_index_qubits + spec.b):
        circuit.h(q)
    for i in range(qpe_bits):
        circuit.h(m + i)
    for i in range(qpe_bits):
        circuit.controlled_power(body, 1 << i, (m + i,))
    circuit.extend(fourier_ops(list(range(m, m + qpe_bits))).inverse().ops)
    return circuit


def grover_applications(circuit: QuantumCircuit) -> int:
    """Structural query count: total powers of controlled operator gates."""
    return sum(op.power for op in circuit.ops
               if op.kind is GateKind.CONTROLLED_UNITARY_POWER)


def _validate_qpe_bits(qpe_bits: int) -> None:
    check_positive_int(qpe_bits, "qpe_bits", minimum=2)
    if qpe_bits > MAX_QPE_BITS:
        raise ResourceLimitError(f"qpe_bits={qpe_bits} exceeds the cap of "
                                 f"{MAX_QPE_BITS}")


def quantum_count(table: EnergyTable, spec: FixedPointSpec,
                  qpe_bits: int) -> CountResult:
    """Estimate the marked-pair count by phase estimation on G.

    Applies the Grover gate sequence exactly ``2^t - 1`` times (the reported
    query count) and reads the modal QPE outcome from exact probabilities.
    """
    _validate_qpe_bits(qpe_bits)
    _check_budget(table, spec)
    n, b = table.n_index_qubits, spec.b
    m = working_qubits(table, spec)
    grover = grover_operator(table, spec)
    validate_circuit(grover)

    state = np.zeros(1 << m, dtype=np.complex128)
    state[0] = 1.0
    for q in range(n + b):
        apply_op_raw(state, m, GateOp(GateKind.H, (), (q,)))

    dim_live = 1 << (n + b)
    snapshots = np.empty((1 << qpe_bits, dim_live), dtype=np.complex128)
    snapshots[0] = state[:dim_live]
    leakage = float(np.sum(np.abs(state[dim_live:]) ** 2))
    queries = 0
    for step in range(1, 1 << qpe_bits):
        for op in grover.ops:
            apply_op_raw(state, m, op)
        queries += 1
        leakage = max(leakage, float(np.sum(np.abs(state[dim_live:]) ** 2)))
        snapshots[step] = state[:dim_live]

    # Register amplitudes after the inverse transform, evaluated blockwise.
    block = np.fft.fft(snapshots, axis=0) / (1 << qpe_bits)
    distribution = np.sum(np.abs(block) ** 2, axis=1)
    modal = int(np.argmax(distribution))
    theta = 2 * math.pi * modal / (1 << qpe_bits)
    total = total_states(table, spec)
    m_estimate = total * math.sin(theta / 2) ** 2
    half_grid = math.pi / (1 << qpe_bits)
    bound = total * math.sin(half_grid) * (abs(math.sin(theta))
                                           + math.sin(half_grid))
    return CountResult(m_estimate, qpe_bits, queries, bound, modal,
                       float(distribution[modal]), distribution, leakage)


def estimate_mean(table: EnergyTable, spec: FixedPointSpec, qpe_bits: int) -> float:
    """Mean ray energy from the counting identity: step * (M - N) / N."""
    result = quantum_count(table, spec, qpe_bits)
    return spec.step * (result.m_estimate - table.n_rays) / table.n_rays


def mc_estimate(table: EnergyTable, n_samples: int, seed) -> MCResult:
    """Classical baseline: mean over uniform-with-replacement ray draws."""
    check_positive_int(n_samples, "n_samples")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, table.n_rays, size=n_samples)
    return MCResult(float(np.mean(table.energies[draws])), n_samples, seed)


# -- convergence study ----------------------------------------------------------

COST_NOTE = ("cost axis convention: one oracle query is counted as the same "
             "work as tracing one classical ray path")


@dataclass
class ConvergenceStudy:
    table_mean: float
    table_quantized_mean: float
    quantum_rows: list[dict]
    mc_rows: list[dict]
    quantum_slope: float
    mc_slope: float
    cost_note: str = COST_NOTE

    def csv_rows(self) -> list[tuple[str, float, float]]:
        rows = [("quantum", float(r["n_queries"]), float(r["error_bound"]))
                for r in self.quantum_rows]
        rows += [("mc", float(r["n_samples"]), float(r["rmse"]))
                 for r in self.mc_rows]
        return rows

    def summary(self) -> dict:
        return {
            "quantum_slope": self.quantum_slope,
            "mc_slope": self.mc_slope,
            "table_mean": self.table_mean,
            "table_quantized_mean": self.table_quantized_mean,
            "quantum_rows": self.quantum_rows,
            "mc_rows": self.mc_rows,
            "cost_note": self.cost_note,
        }


def fit_loglog_slope(costs, errors) -> float:
    costs = np.asarray(costs, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if np.any(costs <= 0) or np.any(errors <= 0):
        raise ValueError("log-log fit needs positive costs and errors")
    return float(np.polyfit(np.log10(costs), np.log10(errors), 1)[0])


def convergence_study(table: EnergyTable, spec: FixedPointSpec, t_range,
                      nc_range, trials: int, seed: int) -> ConvergenceStudy:
    """Error-versus-cost curves for quantum counting and Monte Carlo.

    Quantum rows carry both the observed error against the quantised mean and
    the analytic phase-estimation bound; the fitted quantum slope uses the
    bound series (the worst-case envelope), since the observed error of a
    single deterministic modal readout oscillates below it.
    """
    t_range = list(t_range)
    nc_range = list(nc_range)
    if not t_range or not nc_range:
        raise ValueError("t_range and nc_range must be non-empty")
    check_positive_int(trials, "trials")

    true_mean = float(np.mean(table.energies))
    q_mean = quantized_mean(table, spec)

    quantum_rows = []
    for t in t_range:
        result = quantum_count(table, spec, t)
        estimate = spec.step * (result.m_estimate - table.n_rays) / table.n_rays
        bound_mean = spec.step * result.error_bound / table.n_rays
        quantum_rows.append({
            "t": int(t),
            "n_queries": result.oracle_queries,
            "estimate": estimate,
            "error": abs(estimate - q_mean),
            "error_bound": bound_mean,
        })

    mc_rows = []
    for idx, n_c in enumerate(nc_range):
        errs = np.empty(trials)
        for trial in range(trials):
            result = mc_estimate(table, int(n_c), seed=(seed, idx, trial))
            errs[trial] = result.estimate - true_mean
        mc_rows.append({
            "n_samples": int(n_c),
            "rmse": float(np.sqrt(np.mean(errs ** 2))),
        })

    quantum_slope = fit_loglog_slope([r["n_queries"] for r in quantum_rows],
                                     [r["error_bound"] for r in quantum_rows])
    mc_slope = fit_loglog_slope([r["n_samples"] for r in mc_rows],
                                [r["rmse"] for r in mc_rows])
    return ConvergenceStudy(true_mean, q_mean, quantum_rows, mc_rows,
                            quantum_slope, mc_slope)


def load_energy_table(path) -> EnergyTable:
    """Read energies from a JSON list/object or a CSV of floats."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
        values = data["energies"] if isinstance(data, dict) else data
    else:
        values = [float(tok) for tok in text.replace(",", " ").split()]
    return EnergyTable.from_energies(np.asarray(values, dtype=np.float64))

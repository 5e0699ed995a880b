"""Template structure, determinism, and parameter-shift gradient tests."""
import math

import numpy as np
import pytest

from qradiance.pqc import (PQCTemplate, TemplateKind, build_circuit, forward,
                           param_count, parameter_shift_gradient)
from qradiance.sim import (GateKind, QuantumCircuit, Statevector, apply_circuit,
                           zero_state)

from oracles import circuit_matrix, random_state

ALL_KINDS = list(TemplateKind)


class TestParamCount:
    def test_layered_rot_cnot(self):
        assert param_count(PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 4, 1)) == 12
        assert param_count(PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 4, 3)) == 36

    def test_circuit5(self):
        assert param_count(PQCTemplate(TemplateKind.CIRCUIT5, 4, 1)) == 28

    def test_circuit16(self):
        assert param_count(PQCTemplate(TemplateKind.CIRCUIT16, 4, 1)) == 11

    def test_zero_layers_rejected(self):
        with pytest.raises(ValueError):
            PQCTemplate(TemplateKind.CIRCUIT5, 4, 0)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_count_matches_built_gate_enumeration(self, kind):
        for n in (1, 2, 3, 5):
            for layers in (1, 2):
                template = PQCTemplate(kind, n, layers)
                circuit = build_circuit(template, np.zeros(param_count(template)))
                n_param_gates = sum(1 for op in circuit.ops if op.params)
                assert n_param_gates == param_count(template)


class TestBuildCircuit:
    def test_param_length_mismatch_rejected(self):
        template = PQCTemplate(TemplateKind.CIRCUIT5, 3, 1)
        with pytest.raises(ValueError):
            build_circuit(template, np.zeros(5))

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        template = PQCTemplate(TemplateKind.CIRCUIT6, 3, 2)
        params = rng.uniform(-math.pi, math.pi, param_count(template))
        a = build_circuit(template, params)
        b = build_circuit(template, params)
        assert a.ops == b.ops

    def test_layered_structure_counts(self):
        for n in (2, 3, 5):
            for layers in (1, 3):
                template = PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, n, layers)
                circuit = build_circuit(template, np.zeros(param_count(template)))
                cnots = [op for op in circuit.ops if op.kind is GateKind.CNOT]
                rots = [op for op in circuit.ops if op.kind in
                        (GateKind.RX, GateKind.RY, GateKind.RZ)]
                assert len(cnots) == layers * (n - 1)
                assert len(rots) == layers * 3 * n

    def test_zero_params_fix_the_zero_state(self):
        for kind in ALL_KINDS:
            template = PQCTemplate(kind, 4, 2)
            circuit = build_circuit(template, np.zeros(param_count(template)))
            state = apply_circuit(zero_state(4), circuit)
            assert abs(abs(state.amplitudes[0]) - 1) < 1e-12

    def test_circuit5_n2_matches_hand_assembled_gate_list(self):
        rng = np.random.default_rng(8)
        params = rng.uniform(-math.pi, math.pi, 10)
        template = PQCTemplate(TemplateKind.CIRCUIT5, 2, 1)
        built = build_circuit(template, params)

        expected = QuantumCircuit(2)
        expected.rx(params[0], 0)
        expected.rz(params[1], 0)
        expected.rx(params[2], 1)
        expected.rz(params[3], 1)
        expected.crz(params[4], 0, 1)
        expected.crz(params[5], 1, 0)
        expected.rx(params[6], 0)
        expected.rz(params[7], 0)
        expected.rx(params[8], 1)
        expected.rz(params[9], 1)
        assert built.ops == expected.ops

        start = random_state(rng, 2)
        out = Statevector(2, start.copy())
        apply_circuit(out, built)
        np.testing.assert_allclose(out.amplitudes,
                                   circuit_matrix(expected) @ start, atol=1e-12)

    def test_circuit16_n4_pairing(self):
        template = PQCTemplate(TemplateKind.CIRCUIT16, 4, 1)
        circuit = build_circuit(template, np.zeros(11))
        controlled = [(op.controls[0], op.targets[0]) for op in circuit.ops
                      if op.kind is GateKind.CRZ]
        assert controlled == [(1, 0), (3, 2), (2, 1)]


class TestForward:
    def test_zero_params_all_plus_one(self):
        template = PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 3, 2)
        out = forward(template, np.zeros(param_count(template)), zero_state(3),
                      [0, 1, 2])
        np.testing.assert_allclose(out, [1, 1, 1], atol=1e-12)

    def test_single_qubit_closed_form(self):
        template = PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 1, 1)
        rng = np.random.default_rng(3)
        for theta in rng.uniform(-math.pi, math.pi, 10):
            out = forward(template, [0.0, theta, 0.0], zero_state(1), [0])
            assert abs(out[0] - math.cos(theta)) < 1e-12

    def test_outputs_bounded(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            kind = ALL_KINDS[rng.integers(0, len(ALL_KINDS))]
            n = int(rng.integers(1, 5))
            template = PQCTemplate(kind, n, int(rng.integers(1, 3)))
            params = rng.uniform(-math.pi, math.pi, param_count(template))
            state = Statevector(n, random_state(rng, n))
            out = forward(template, params, state, range(n))
            assert np.all(out <= 1 + 1e-12) and np.all(out >= -1 - 1e-12)

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(21)
        for kind in ALL_KINDS:
            n = 3
            template = PQCTemplate(kind, n, 1)
            params = rng.uniform(-math.pi, math.pi, param_count(template))
            start = random_state(rng, n)
            out = forward(template, params, Statevector(n, start.copy()), range(n))
            final = circuit_matrix(build_circuit(template, params)) @ start
            probs = np.abs(final) ** 2
            for q in range(n):
                bit = (np.arange(1 << n) >> q) & 1
                expected = probs[bit == 0].sum() - probs[bit == 1].sum()
                assert abs(out[q] - expected) < 1e-10

    def test_forward_does_not_mutate_input(self):
        template = PQCTemplate(TemplateKind.CIRCUIT17, 2, 1)
        state = zero_state(2)
        before = state.amplitudes.copy()
        forward(template, np.full(param_count(template), 0.3), state, [0])
        np.testing.assert_array_equal(state.amplitudes, before)

    def test_bad_readout_rejected(self):
        template = PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 2, 1)
        with pytest.raises(ValueError):
            forward(template, np.zeros(6), zero_state(2), [2])


def finite_difference(template, params, state, readouts, h=1e-5):
    params = np.asarray(params, dtype=float)
    grad = np.zeros((params.size, len(readouts)))
    for i in range(params.size):
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (forward(template, up, state, readouts)
                   - forward(template, down, state, readouts)) / (2 * h)
    return grad


class TestParameterShift:
    def test_ry_gradient_at_zero(self):
        template = PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 1, 1)
        grad = parameter_shift_gradient(template, [0.0, 0.0, 0.0], zero_state(1), [0])
        np.testing.assert_allclose(grad, 0, atol=1e-12)

    def test_ry_gradient_at_half_pi(self):
        template = PQCTemplate(TemplateKind.LAYERED_ROT_CNOT, 1, 1)
        grad = parameter_shift_gradient(template, [0.0, math.pi / 2, 0.0],
                                        zero_state(1), [0])
        assert abs(grad[1, 0] + 1) < 1e-12

    def test_matches_finite_differences_across_templates(self):
        rng = np.random.default_rng(55)
        cases = 0
        while cases < 60:
            kind = ALL_KINDS[rng.integers(0, len(ALL_KINDS))]
            n = int(rng.integers(2, 5))
            template = PQCTemplate(kind, n, 1)
            params = rng.uniform(-math.pi, math.pi, param_count(template))
            state = Statevector(n, random_state(rng, n))
            readouts = [int(rng.integers(0, n))]
            analytic = parameter_shift_gradient(template, params, state, readouts)
            numeric = finite_difference(template, params, state, readouts)
            tol = np.maximum(1e-6 * np.abs(numeric), 1e-8)
            assert np.all(np.abs(analytic - numeric) <= tol)
            cases += 1

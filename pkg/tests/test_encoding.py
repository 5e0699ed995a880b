"""Feature encoder tests: states, qubit counts, round trips."""
import math

import numpy as np
import pytest

from qradiance.encoding import (EncoderKind, angle_encode, dense_angle_encode,
                                encode, general_qubit_encode, qubits_required,
                                wavefunction_encode)
from qradiance.sim import GateKind, apply_circuit, zero_state

from oracles import circuit_matrix


def run_encoder(kind, x):
    return encode(kind, x)


class TestAngleEncoding:
    def test_zero_features_give_all_zero_state(self):
        state = run_encoder(EncoderKind.ANGLE, [0.0, 0.0])
        np.testing.assert_allclose(state.amplitudes, [1, 0, 0, 0], atol=1e-15)

    def test_half_pi_gives_one(self):
        state = run_encoder(EncoderKind.ANGLE, [math.pi / 2])
        np.testing.assert_allclose(state.amplitudes, [0, 1], atol=1e-12)

    def test_quarter_pi_pair_gives_uniform(self):
        state = run_encoder(EncoderKind.ANGLE, [math.pi / 4, math.pi / 4])
        np.testing.assert_allclose(state.amplitudes, [0.5] * 4, atol=1e-12)

    def test_depth_is_one_single_qubit_layer(self):
        circuit = angle_encode([0.1, -0.2, 0.3])
        assert len(circuit.ops) == 3
        assert all(op.kind is GateKind.RY and not op.controls for op in circuit.ops)
        assert sorted(op.targets[0] for op in circuit.ops) == [0, 1, 2]

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            angle_encode([3.5])


class TestDenseAngleEncoding:
    def test_zero_pair_gives_zero_state(self):
        state = run_encoder(EncoderKind.DENSE_ANGLE, [0.0, 0.0])
        np.testing.assert_allclose(state.amplitudes, [1, 0], atol=1e-15)

    def test_half_amplitude_gives_one(self):
        state = run_encoder(EncoderKind.DENSE_ANGLE, [0.5, 0.0])
        np.testing.assert_allclose(state.amplitudes, [0, 1], atol=1e-12)

    def test_quarter_with_half_phase(self):
        # cos(pi/4)|0> + e^{i pi} sin(pi/4)|1> = (|0> - |1>)/sqrt(2)
        state = run_encoder(EncoderKind.DENSE_ANGLE, [0.25, 0.5])
        expected = np.array([1, -1]) / math.sqrt(2)
        np.testing.assert_allclose(state.amplitudes, expected, atol=1e-12)

    def test_matches_direct_amplitude_construction(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            feats = rng.uniform(0, 1, size=4)
            state = run_encoder(EncoderKind.DENSE_ANGLE, feats)
            per_qubit = [np.array([math.cos(math.pi * feats[2 * k]),
                                   np.exp(2j * math.pi * feats[2 * k + 1])
                                   * math.sin(math.pi * feats[2 * k])])
                         for k in range(2)]
            expected = np.kron(per_qubit[1], per_qubit[0])
            np.testing.assert_allclose(state.amplitudes, expected, atol=1e-12)

    def test_odd_feature_count_padded(self):
        state = run_encoder(EncoderKind.DENSE_ANGLE, [0.5])
        assert state.n_qubits == 1
        np.testing.assert_allclose(state.amplitudes, [0, 1], atol=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            dense_angle_encode([1.2, 0.0])


class TestWavefunctionEncoding:
    def test_basis_vector(self):
        state = wavefunction_encode([1, 0, 0, 0])
        np.testing.assert_allclose(state.amplitudes, [1, 0, 0, 0], atol=1e-15)

    def test_three_four_normalisation(self):
        state = wavefunction_encode([3, 4])
        np.testing.assert_allclose(state.amplitudes, [0.6, 0.8], atol=1e-12)

    def test_uniform(self):
        state = wavefunction_encode([1, 1, 1, 1])
        np.testing.assert_allclose(state.amplitudes, [0.5] * 4, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(17)
        for n_feats in (2, 3, 5, 8, 13):
            x = rng.normal(size=n_feats)
            state = wavefunction_encode(x)
            np.testing.assert_allclose(state.amplitudes[:n_feats],
                                       x / np.linalg.norm(x), atol=1e-12)
            np.testing.assert_allclose(state.amplitudes[n_feats:], 0, atol=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            wavefunction_encode([0.0, 0.0])


class TestGeneralQubitEncoding:
    def test_basis_pair(self):
        state = general_qubit_encode([1, 0])
        np.testing.assert_allclose(state.amplitudes, [1, 0], atol=1e-15)

    def test_equal_pair(self):
        state = general_qubit_encode([1, 1])
        np.testing.assert_allclose(state.amplitudes,
                                   np.array([1, 1]) / math.sqrt(2), atol=1e-12)

    def test_three_four_pair(self):
        state = general_qubit_encode([3, 4])
        np.testing.assert_allclose(state.amplitudes, [0.6, 0.8], atol=1e-12)

    def test_two_pairs_product_structure(self):
        state = general_qubit_encode([1, 0, 0, 1])  # |0> on qubit 0, |1> on qubit 1
        np.testing.assert_allclose(state.amplitudes, [0, 0, 1, 0], atol=1e-15)

    def test_zero_pair_rejected(self):
        with pytest.raises(ValueError):
            general_qubit_encode([0, 0, 1, 1])


class TestEncoderContracts:
    KINDS = [EncoderKind.GENERAL_QUBIT, EncoderKind.WAVEFUNCTION,
             EncoderKind.ANGLE, EncoderKind.DENSE_ANGLE]

    def _features(self, rng, kind, n):
        if kind is EncoderKind.ANGLE:
            return rng.uniform(-math.pi, math.pi, size=n)
        if kind is EncoderKind.DENSE_ANGLE:
            return rng.uniform(0, 1, size=n)
        feats = rng.uniform(-1, 1, size=n)
        feats[feats == 0] = 0.5
        return feats

    @pytest.mark.parametrize("kind", KINDS)
    def test_unit_norm(self, kind):
        rng = np.random.default_rng(31)
        for n in range(1, 17):
            state = encode(kind, self._features(rng, kind, n))
            assert abs(np.linalg.norm(state.amplitudes) - 1) < 1e-12

    @pytest.mark.parametrize("kind", KINDS)
    def test_qubit_counts_for_1_to_16_features(self, kind):
        expected = {
            EncoderKind.ANGLE: lambda n: n,
            EncoderKind.DENSE_ANGLE: lambda n: (n + 1) // 2,
            EncoderKind.GENERAL_QUBIT: lambda n: (n + 1) // 2,
            EncoderKind.WAVEFUNCTION: lambda n: max(1, math.ceil(math.log2(n))),
        }[kind]
        rng = np.random.default_rng(37)
        for n in range(1, 17):
            assert qubits_required(kind, n) == expected(n)
            state = encode(kind, self._features(rng, kind, n))
            assert state.n_qubits == expected(n)

    def test_embedding_into_wider_register(self):
        state = encode(EncoderKind.ANGLE, [math.pi / 2], n_qubits=3)
        assert state.n_qubits == 3
        np.testing.assert_allclose(state.amplitudes[1], 1, atol=1e-12)

    def test_too_small_register_rejected(self):
        with pytest.raises(ValueError):
            encode(EncoderKind.ANGLE, [0.1, 0.2, 0.3], n_qubits=2)

    def test_angle_state_matches_matrix_oracle(self):
        rng = np.random.default_rng(41)
        feats = rng.uniform(-math.pi, math.pi, size=3)
        circuit = angle_encode(feats)
        state = apply_circuit(zero_state(3), circuit)
        expected = circuit_matrix(circuit)[:, 0]
        np.testing.assert_allclose(state.amplitudes, expected, atol=1e-12)

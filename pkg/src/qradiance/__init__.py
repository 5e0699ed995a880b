"""Quantum radiance fields on a dense statevector simulator."""

from .sim import (GateKind, GateOp, QuantumCircuit, Statevector, zero_state,
                  apply_gate, apply_circuit, expectation_z, probabilities,
                  measure_counts)
from .encoding import (EncoderKind, qubits_required, angle_encode,
                       dense_angle_encode, wavefunction_encode,
                       general_qubit_encode, encode)
from .pqc import (TemplateKind, PQCTemplate, param_count, build_circuit,
                  forward, parameter_shift_gradient)
from .field import (ActivationKind, QRFConfig, FieldSample,
                    QuantumRadianceField, activate, positional_encode,
                    evaluate_field, field_outputs, loss, train_step)
from .render import (Camera, Ray, SampleSet, camera_from_lookat, generate_rays,
                     sample_depths, composite, render_image)
from .metrics import psnr, ssim
from .qcount import (FixedPointSpec, EnergyTable, CountResult, MCResult,
                     quantize, threshold_met, energy_oracle, phase_oracle,
                     grover_operator, quantum_count, estimate_mean,
                     mc_estimate, convergence_study)

__all__ = [
    "GateKind", "GateOp", "QuantumCircuit", "Statevector", "zero_state",
    "apply_gate", "apply_circuit", "expectation_z", "probabilities",
    "measure_counts",
    "EncoderKind", "qubits_required", "angle_encode", "dense_angle_encode",
    "wavefunction_encode", "general_qubit_encode", "encode",
    "TemplateKind", "PQCTemplate", "param_count", "build_circuit", "forward",
    "parameter_shift_gradient",
    "ActivationKind", "QRFConfig", "FieldSample", "QuantumRadianceField",
    "activate", "positional_encode", "evaluate_field", "field_outputs",
    "loss", "train_step",
    "Camera", "Ray", "SampleSet", "camera_from_lookat", "generate_rays",
    "sample_depths", "composite", "render_image",
    "psnr", "ssim",
    "FixedPointSpec", "EnergyTable", "CountResult", "MCResult", "quantize",
    "threshold_met", "energy_oracle", "phase_oracle", "grover_operator",
    "quantum_count", "estimate_mean", "mc_estimate", "convergence_study",
]

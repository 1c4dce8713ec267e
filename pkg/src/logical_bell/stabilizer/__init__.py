from .binding import BoundNoise, ConfigurationError, NoiseBinding
from .channels import NoiseChannel, depolarizing, flip, pauli_channel, sample_depolarizing
from .circuit import Circuit, CircuitError, CircuitInstruction, Layer, gate
from .frame import FrameProgram, FrameSimulator, compile_program, sample_measurements
from .pauli import PauliString
from .run import MeasurementRecord, run_circuit
from .tableau import StabilizerState, apply_gate, measure_z

__all__ = [
    "BoundNoise", "Circuit", "CircuitError", "CircuitInstruction", "ConfigurationError",
    "FrameProgram", "FrameSimulator", "Layer", "MeasurementRecord", "NoiseBinding",
    "NoiseChannel", "PauliString", "StabilizerState", "apply_gate", "compile_program",
    "depolarizing", "flip", "gate", "measure_z", "pauli_channel", "run_circuit", "sample_measurements",
    "sample_depolarizing",
]

"""Tableau-backed circuit execution with sampled noise."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import derive_rng
from .binding import NoiseBinding
from .channels import CODE_LETTER
from .circuit import Circuit
from .tableau import StabilizerState, apply_gate


@dataclass
class MeasurementRecord:
    outcomes: list[int] = field(default_factory=list)
    tags: list[str | None] = field(default_factory=list)

    def append(self, bit: int, tag: str | None) -> None:
        self.outcomes.append(int(bit))
        self.tags.append(tag)

    def to_bytes(self) -> bytes:
        return bytes(self.outcomes) + "\x00".join(t or "" for t in self.tags).encode()


def _inject(state: StabilizerState, bound, rng: np.random.Generator) -> int:
    """Apply one sampled draw of ``bound``; returns an outcome-flip bit."""
    ch = bound.channel
    if ch.is_trivial() or rng.random() >= ch.p_error:
        return 0
    if ch.kind == "flip":
        return 1
    nz = np.array(ch.probs[1:])
    code = int(rng.choice(len(nz), p=nz / nz.sum())) + 1
    for j, q in enumerate(bound.qubits):
        letter = CODE_LETTER[(code >> (2 * j)) & 3]
        if letter != "I":
            state.pauli(q, letter)
    return 0


def run_circuit(
    circuit: Circuit,
    binding: NoiseBinding | None,
    seed: int,
    state: StabilizerState | None = None,
) -> MeasurementRecord:
    """Execute on the tableau backend; identical (circuit, binding, seed) give identical records."""
    if binding is None:
        binding = NoiseBinding.noiseless(circuit)
    binding.check(circuit)
    rng = derive_rng(seed, 0)
    if state is None:
        state = StabilizerState(circuit.n_qubits, derive_rng(seed, 1))
    record = MeasurementRecord()
    for ins, entry in zip(circuit.instructions(), binding.entries):
        flip = 0
        for bound in entry:
            if bound.placement == "before" and bound.channel.kind == "pauli":
                _inject(state, bound, rng)
        if ins.kind == "MeasureZ":
            bit = state.measure_z(ins.targets[0])
        elif ins.kind == "Reset":
            for q in ins.targets:
                state.reset(q)
        else:
            apply_gate(state, ins)
        for bound in entry:
            if bound.channel.kind == "flip":
                flip ^= _inject(state, bound, rng)
            elif bound.placement == "after":
                _inject(state, bound, rng)
        if ins.kind == "MeasureZ":
            record.append(bit ^ flip, ins.tag)
    return record

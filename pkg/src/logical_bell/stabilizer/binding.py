"""Per-instruction error-injection plan consumed by both simulator backends."""
from __future__ import annotations

from dataclasses import dataclass, field

from .channels import NoiseChannel
from .circuit import Circuit


class ConfigurationError(ValueError):
    """Binding and circuit do not fit together."""


@dataclass(frozen=True)
class BoundNoise:
    channel: NoiseChannel
    qubits: tuple[int, ...]
    placement: str = "after"  # "before" | "after"

    def __post_init__(self):
        if self.placement not in ("before", "after"):
            raise ValueError(self.placement)
        if self.channel.kind == "pauli" and len(self.qubits) != self.channel.arity:
            raise ValueError("channel arity does not match qubit count")


@dataclass
class NoiseBinding:
    """``entries[i]`` lists the noise attached to the i-th instruction of the circuit."""

    entries: list[tuple[BoundNoise, ...]] = field(default_factory=list)

    @classmethod
    def noiseless(cls, circuit: Circuit) -> NoiseBinding:
        return cls([() for _ in circuit.instructions()])

    def check(self, circuit: Circuit) -> None:
        if len(self.entries) != len(circuit):
            raise ConfigurationError(
                f"binding covers {len(self.entries)} instructions, circuit has {len(circuit)}"
            )

    def channels(self):
        for entry in self.entries:
            for bound in entry:
                yield bound.channel

    def __len__(self) -> int:
        return len(self.entries)

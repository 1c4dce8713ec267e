"""Layered circuit representation and its line-oriented text format.

Text grammar (one item per line, ``#`` starts a comment)::

    TICK [duration=<float>] [group=<str>]
    <KIND> <target> [<target> ...] [duration=<float>] [tag=<str>] [pauli=<str>]

``KIND`` is one of H, CX, X, Z, MeasureZ, Reset, PauliError, Idle.  Every
``TICK`` opens a new layer; instructions before the first ``TICK`` are
rejected.  ``pauli=`` is required for PauliError and gives one letter per
target.  Floats are written with ``repr`` so parsing round-trips exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

GATE_KINDS = ("H", "CX", "X", "Z")
KINDS = GATE_KINDS + ("MeasureZ", "Reset", "PauliError", "Idle")


class CircuitError(ValueError):
    """Malformed circuit or instruction."""


@dataclass(frozen=True)
class CircuitInstruction:
    kind: str
    targets: tuple[int, ...]
    duration: float = 0.0
    tag: str | None = None
    pauli: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in KINDS:
            raise CircuitError(f"unknown instruction kind {self.kind!r}")
        if not self.targets:
            raise CircuitError(f"{self.kind} needs at least one target")
        if self.duration < 0:
            raise CircuitError("duration must be >= 0")
        if self.kind == "CX" and (len(self.targets) != 2 or self.targets[0] == self.targets[1]):
            raise CircuitError("CX needs exactly two distinct targets")
        if self.kind == "PauliError":
            if self.pauli is None or len(self.pauli) != len(self.targets):
                raise CircuitError("PauliError needs one pauli letter per target")
            if set(self.pauli.upper()) - set("IXYZ"):
                raise CircuitError(f"bad pauli {self.pauli!r}")
        if self.kind == "MeasureZ" and len(self.targets) != 1:
            raise CircuitError("MeasureZ takes exactly one target")
        if len(set(self.targets)) != len(self.targets):
            raise CircuitError(f"repeated target in {self.kind} {self.targets}")

    def to_line(self) -> str:
        parts = [self.kind, *map(str, self.targets)]
        if self.duration:
            parts.append(f"duration={self.duration!r}")
        if self.tag is not None:
            parts.append(f"tag={self.tag}")
        if self.pauli is not None:
            parts.append(f"pauli={self.pauli}")
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> CircuitInstruction:
        kind, *rest = line.split()
        targets, kw = [], {}
        for tok in rest:
            if "=" in tok:
                k, v = tok.split("=", 1)
                kw[k] = v
            else:
                targets.append(int(tok))
        unknown = set(kw) - {"duration", "tag", "pauli"}
        if unknown:
            raise CircuitError(f"unknown keys {sorted(unknown)} in {line!r}")
        return cls(
            kind,
            tuple(targets),
            float(kw.get("duration", 0.0)),
            kw.get("tag"),
            kw.get("pauli"),
        )


@dataclass
class Layer:
    instructions: list[CircuitInstruction] = field(default_factory=list)
    duration: float = 0.0
    group: str | None = None

    def qubits(self) -> set[int]:
        return {q for ins in self.instructions for q in ins.targets}


@dataclass
class Circuit:
    n_qubits: int
    layers: list[Layer] = field(default_factory=list)

    def add_layer(self, instructions, duration: float = 0.0, group: str | None = None) -> Layer:
        layer = Layer(list(instructions), float(duration), group)
        seen: set[int] = set()
        for ins in layer.instructions:
            for q in ins.targets:
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"target {q} out of range [0, {self.n_qubits})")
                if q in seen:
                    raise CircuitError(f"qubit {q} used twice in one layer")
                seen.add(q)
        self.layers.append(layer)
        return layer

    def extend(self, other: Circuit) -> None:
        if other.n_qubits != self.n_qubits:
            raise CircuitError("qubit count mismatch")
        for layer in other.layers:
            self.add_layer(layer.instructions, layer.duration, layer.group)

    def instructions(self):
        for layer in self.layers:
            yield from layer.instructions

    def __len__(self) -> int:
        return sum(len(layer.instructions) for layer in self.layers)

    @property
    def num_measurements(self) -> int:
        return sum(1 for ins in self.instructions() if ins.kind == "MeasureZ")

    @property
    def duration(self) -> float:
        return sum(layer.duration for layer in self.layers)

    def measurement_tags(self) -> list[str | None]:
        return [ins.tag for ins in self.instructions() if ins.kind == "MeasureZ"]

    def fill_idles(self) -> Circuit:
        """Add explicit Idle instructions for untouched qubits in every timed layer."""
        for layer in self.layers:
            if layer.duration <= 0:
                continue
            busy = layer.qubits()
            for q in range(self.n_qubits):
                if q not in busy:
                    layer.instructions.append(CircuitInstruction("Idle", (q,), layer.duration))
        return self

    def is_layered(self) -> bool:
        for layer in self.layers:
            if layer.duration > 0 and len(layer.qubits()) != self.n_qubits:
                return False
        return True

    def to_text(self) -> str:
        lines = [f"# qubits={self.n_qubits}"]
        for layer in self.layers:
            head = "TICK"
            if layer.duration:
                head += f" duration={layer.duration!r}"
            if layer.group is not None:
                head += f" group={layer.group}"
            lines.append(head)
            lines.extend(ins.to_line() for ins in layer.instructions)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> Circuit:
        layers: list[tuple[list, float, str | None]] = []
        declared = None
        max_q = -1
        for raw in text.splitlines():
            line = raw.strip()
            if line.startswith("# qubits="):
                declared = int(line.split("=", 1)[1])
                continue
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if line.split()[0] == "TICK":
                kw = dict(tok.split("=", 1) for tok in line.split()[1:])
                layers.append(([], float(kw.get("duration", 0.0)), kw.get("group")))
                continue
            if not layers:
                raise CircuitError("instruction before first TICK")
            ins = CircuitInstruction.from_line(line)
            max_q = max(max_q, *ins.targets)
            layers[-1][0].append(ins)
        n = n_qubits if n_qubits is not None else (declared if declared is not None else max_q + 1)
        circ = cls(n)
        for instrs, dur, group in layers:
            circ.add_layer(instrs, dur, group)
        return circ

    def __eq__(self, other) -> bool:
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.layers == other.layers


def gate(kind: str, *targets: int, duration: float = 0.0, tag: str | None = None) -> CircuitInstruction:
    return CircuitInstruction(kind, tuple(targets), duration, tag)

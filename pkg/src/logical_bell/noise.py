"""Noise bindings for the two error models.

Depolarizing model: one probability ``p_err`` after every 1q/2q gate, before
every measurement and on every idle qubit once per gate layer.  Parity
measurements that the model treats as native (Bacon-Shor gauges, grouped
layers) get a single two-qubit channel ahead of the fragment instead of
per-gate noise.

Physical model: gate errors scaled by ``xi``, measurement as a classical
flip, and T1/T2 decoherence on every idle interval as a Pauli-twirled
amplitude/phase damping channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .codes import GateTimes
from .stabilizer import BoundNoise, Circuit, CircuitInstruction, Layer, NoiseBinding
from .stabilizer.binding import ConfigurationError
from .stabilizer.channels import NoiseChannel, depolarizing, flip, pauli_channel

READOUT_TAG = "readout"


@dataclass(frozen=True)
class DepolarizingParams:
    p_err: float

    def __post_init__(self):
        if not 0 <= self.p_err <= 1:
            raise ConfigurationError(f"p_err must lie in [0, 1], got {self.p_err}")


@dataclass(frozen=True)
class PhysicalParams:
    T1: float = 3.0
    T2: float = 0.5
    p_err_H: float = 2.1e-4
    p_err_CX: float = 8.3e-3
    p_err_M: float = 7.7e-3
    t_H: float = 150e-6
    t_CX: float = 970e-6
    t_M: float = 130e-6
    xi: float = 1.0

    def __post_init__(self):
        if self.T1 <= 0 or self.T2 <= 0:
            raise ConfigurationError("T1 and T2 must be positive")
        if self.T2 > 2 * self.T1:
            raise ConfigurationError("T2 > 2*T1 gives a negative dephasing probability")
        for name in ("p_err_H", "p_err_CX", "p_err_M"):
            p = getattr(self, name)
            if not 0 <= p <= 1 or not 0 <= p * self.xi <= 1:
                raise ConfigurationError(f"{name} * xi must lie in [0, 1]")
        if min(self.t_H, self.t_CX, self.t_M) <= 0:
            raise ConfigurationError("gate times must be positive")

    @property
    def gate_times(self) -> GateTimes:
        return GateTimes(self.t_H, self.t_CX, self.t_M)

    def scaled(self, xi: float) -> PhysicalParams:
        return replace(self, xi=xi)

    def gate_probabilities(self) -> dict[str, float]:
        return {
            "H": self.xi * self.p_err_H,
            "CX": self.xi * self.p_err_CX,
            "M": self.xi * self.p_err_M,
        }


def idle_probabilities(t: float, T1: float, T2: float) -> tuple[float, float, float]:
    """(p_X, p_Y, p_Z) of the twirled decoherence channel for an idle of length t."""
    if t < 0:
        raise ConfigurationError("idle duration must be >= 0")
    a = -math.expm1(-t / T1)
    b = -math.expm1(-t / T2)
    px = py = a / 4
    pz = b / 2 - a / 4
    if pz < -1e-15:
        raise ConfigurationError(f"negative dephasing probability {pz} (T2 > 2*T1)")
    return px, py, max(pz, 0.0)


def idle_channel(t: float, T1: float, T2: float) -> NoiseChannel:
    px, py, pz = idle_probabilities(t, T1, T2)
    return pauli_channel(px, py, pz)


def readout_channel(p: float) -> NoiseChannel:
    """Independent X and Z flips with probability p each.

    A Z-basis readout of a qubit under this channel is wrong with probability
    p, and so is an X-basis readout, matching a classical flip in either basis.
    """
    return pauli_channel(p * (1 - p), p * p, p * (1 - p))


def transpile_parity_measurement(
    basis: str,
    q0: int,
    q1: int,
    gate_times: GateTimes | None = None,
    tag: str | None = None,
) -> list[Layer]:
    """Two-qubit parity measurement from CX, H and a single Z measurement.

    XX: CX(q0->q1) maps X0X1 to X0, which is read with H-M-H on q0, then
    the CX is undone.  ZZ: CX(q0->q1) maps Z0Z1 to Z1, read on q1, undone.
    Gate and idle noise before the readout and after it split the fragment
    in two halves.
    """
    t = gate_times or GateTimes()
    cx = CircuitInstruction("CX", (q0, q1), t.t_CX)
    if basis == "X":
        return [
            Layer([cx], t.t_CX),
            Layer([CircuitInstruction("H", (q0,), t.t_H)], t.t_H),
            Layer([CircuitInstruction("MeasureZ", (q0,), t.t_M, tag)], t.t_M),
            Layer([CircuitInstruction("H", (q0,), t.t_H)], t.t_H),
            Layer([cx], t.t_CX),
        ]
    if basis == "Z":
        return [
            Layer([cx], t.t_CX),
            Layer([CircuitInstruction("MeasureZ", (q1,), t.t_M, tag)], t.t_M),
            Layer([cx], t.t_CX),
        ]
    raise ValueError(f"basis must be X or Z, got {basis!r}")


def _check_layered(circuit: Circuit) -> None:
    if circuit.is_layered():
        return
    if any(ins.kind == "Idle" for ins in circuit.instructions()):
        return
    raise ConfigurationError("circuit has untouched qubits in timed layers but no explicit Idle instructions")


@dataclass
class ExtraNoise:
    """Channels attached by tag to Idle instructions (link noise, waits)."""

    by_tag: dict[str, NoiseChannel] = field(default_factory=dict)


def bind_depolarizing(
    circuit: Circuit,
    params: DepolarizingParams,
    extra: ExtraNoise | None = None,
) -> NoiseBinding:
    _check_layered(circuit)
    p = params.p_err
    one = depolarizing(p, 1)
    two = depolarizing(p, 2)
    extra = extra or ExtraNoise()
    entries = []
    layers = circuit.layers
    i = 0
    while i < len(layers):
        group = layers[i].group
        j = i + 1
        if group is not None:
            while j < len(layers) and layers[j].group == group:
                j += 1
        block = layers[i:j]
        for li, layer in enumerate(block):
            for ins in layer.instructions:
                entries.append(_depol_entry(ins, one, two, group is not None, li == 0, extra))
        i = j
    return NoiseBinding(entries)


def _depol_entry(ins, one, two, grouped, first, extra) -> tuple[BoundNoise, ...]:
    k = ins.kind
    if k == "Idle":
        if ins.tag in extra.by_tag:
            return (BoundNoise(extra.by_tag[ins.tag], ins.targets),)
        if ins.tag == READOUT_TAG:
            return (BoundNoise(one, ins.targets, "before"),)
        if ins.duration <= 0 or (grouped and not first):
            return ()
        return (BoundNoise(one, ins.targets),)
    if grouped:
        # a native parity measurement: one two-qubit channel ahead of the fragment
        if k == "CX" and first:
            return (BoundNoise(two, ins.targets, "before"),)
        return ()
    if k in ("H", "X", "Z"):
        return tuple(BoundNoise(one, (q,)) for q in ins.targets)
    if k == "CX":
        return (BoundNoise(two, ins.targets),)
    if k == "MeasureZ":
        return (BoundNoise(one, ins.targets, "before"),)
    return ()


def bind_physical(
    circuit: Circuit,
    params: PhysicalParams,
    extra: ExtraNoise | None = None,
) -> NoiseBinding:
    _check_layered(circuit)
    probs = params.gate_probabilities()
    h = depolarizing(probs["H"], 1)
    cx = depolarizing(probs["CX"], 2)
    m = flip(probs["M"])
    ro = readout_channel(probs["M"])
    extra = extra or ExtraNoise()
    cache: dict[float, NoiseChannel] = {}

    def idle(t: float) -> NoiseChannel:
        if t not in cache:
            cache[t] = idle_channel(t, params.T1, params.T2)
        return cache[t]

    entries = []
    for ins in circuit.instructions():
        k = ins.kind
        if k == "Idle":
            if ins.tag in extra.by_tag:
                entries.append((BoundNoise(extra.by_tag[ins.tag], ins.targets),))
            elif ins.tag == READOUT_TAG:
                entries.append((BoundNoise(ro, ins.targets, "before"),))
            elif ins.duration > 0:
                entries.append((BoundNoise(idle(ins.duration), ins.targets),))
            else:
                entries.append(())
        elif k in ("H", "X", "Z"):
            entries.append(tuple(BoundNoise(h, (q,)) for q in ins.targets))
        elif k == "CX":
            entries.append((BoundNoise(cx, ins.targets),))
        elif k == "MeasureZ":
            entries.append((BoundNoise(m, ins.targets),))
        else:
            entries.append(())
    return NoiseBinding(entries)


def compose_channels(first: NoiseChannel, second: NoiseChannel) -> NoiseChannel:
    """Sequential composition of two single-qubit Pauli channels."""
    if first.kind != "pauli" or second.kind != "pauli" or first.arity != 1 or second.arity != 1:
        raise ValueError("composition is defined for single-qubit Pauli channels")
    out = [0.0] * 4
    for i, a in enumerate(first.probs):
        for j, b in enumerate(second.probs):
            out[i ^ j] += a * b
    out[0] = 1.0 - math.fsum(out[1:])
    return NoiseChannel("pauli", 1, tuple(out))

"""Vectorised Pauli-frame sampler.

The frame holds, per shot, the Pauli difference between the noisy run and a
noiseless reference run.  Measurement records come out as flips relative to
the reference.  With ``exact=True`` the Z part of every measured or reset
qubit is re-randomised, which makes ``reference XOR flips`` an exact sample
of the true outcome distribution (not just of the noise-induced flips).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binding import ConfigurationError, NoiseBinding
from .channels import NoiseChannel
from .circuit import Circuit, CircuitError
from .pauli import PauliString


@dataclass
class NoiseStep:
    channel: NoiseChannel
    targets: np.ndarray  # (k, arity) qubits, or (k,) record indices for flips
    duplicates: bool = False

    @property
    def size(self) -> int:
        return len(self.targets)


@dataclass
class FrameProgram:
    n_qubits: int
    n_measurements: int
    steps: list[tuple] = field(default_factory=list)
    noise_steps: list[NoiseStep] = field(default_factory=list)
    final_x: np.ndarray | None = None  # (m, n) X part of final ideal checks
    final_z: np.ndarray | None = None

    @property
    def n_records(self) -> int:
        extra = 0 if self.final_x is None else len(self.final_x)
        return self.n_measurements + extra

    def locations(self):
        """Yield (step_id, location_index, channel, targets) for every noise location."""
        for sid, st in enumerate(self.noise_steps):
            for loc in range(st.size):
                yield sid, loc, st.channel, st.targets[loc]


def compile_program(
    circuit: Circuit,
    binding: NoiseBinding | None = None,
    final_checks: list[PauliString] | None = None,
) -> FrameProgram:
    if binding is None:
        binding = NoiseBinding.noiseless(circuit)
    binding.check(circuit)
    prog = FrameProgram(circuit.n_qubits, circuit.num_measurements)
    meas = 0
    flat = 0
    for layer in circuit.layers:
        before: dict[NoiseChannel, list] = {}
        after: dict[NoiseChannel, list] = {}
        hs, cxs, ms, rs = [], [], [], []
        for ins in layer.instructions:
            entry = binding.entries[flat]
            flat += 1
            rec = None
            if ins.kind == "MeasureZ":
                rec = meas
                ms.append((ins.targets[0], meas))
                meas += 1
            elif ins.kind == "H":
                hs.extend(ins.targets)
            elif ins.kind == "CX":
                cxs.append(ins.targets)
            elif ins.kind == "Reset":
                rs.extend(ins.targets)
            elif ins.kind not in ("X", "Z", "PauliError", "Idle"):
                raise CircuitError(ins.kind)
            for bound in entry:
                if bound.channel.is_trivial():
                    continue
                bucket = before if bound.placement == "before" else after
                if bound.channel.kind == "flip":
                    if rec is None:
                        raise ConfigurationError("flip channel attached to a non-measurement")
                    # flips act on the record, after the measurement is taken
                    after.setdefault(bound.channel, []).append((rec,))
                else:
                    bucket.setdefault(bound.channel, []).append(bound.qubits)
        _emit_noise(prog, before)
        if rs:
            prog.steps.append(("R", np.array(rs)))
        if hs:
            prog.steps.append(("H", np.array(hs)))
        if cxs:
            arr = np.array(cxs)
            prog.steps.append(("CX", arr[:, 0].copy(), arr[:, 1].copy()))
        if ms:
            arr = np.array(ms)
            prog.steps.append(("M", arr[:, 0].copy(), arr[:, 1].copy()))
        _emit_noise(prog, after)
    if final_checks:
        prog.final_x = np.array([p.xs for p in final_checks], dtype=np.uint8)
        prog.final_z = np.array([p.zs for p in final_checks], dtype=np.uint8)
    return prog


def _emit_noise(prog: FrameProgram, buckets: dict) -> None:
    for channel, targets in buckets.items():
        flips = channel.kind == "flip"
        arr = np.array(targets, dtype=np.int64)
        if flips:
            arr = arr[:, 0]
            dup = len(np.unique(arr)) != len(arr)
        else:
            dup = any(len(np.unique(arr[:, j])) != len(arr) for j in range(arr.shape[1]))
        prog.steps.append(("noise", len(prog.noise_steps)))
        prog.noise_steps.append(NoiseStep(channel, arr, dup))


def bernoulli_cells(total: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices in ``range(total)`` each selected independently with probability p."""
    if total <= 0 or p <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 0.25:
        return np.flatnonzero(rng.random(total) < p)
    expected = total * p
    size = int(expected + 6 * np.sqrt(expected) + 16)
    pos = np.cumsum(rng.geometric(p, size=size)) - 1
    while pos[-1] < total:
        more = np.cumsum(rng.geometric(p, size=size)) + pos[-1]
        pos = np.concatenate([pos, more])
    return pos[pos < total]


class FrameSimulator:
    """Runs a compiled program for a batch of shots."""

    def __init__(self, program: FrameProgram):
        self.program = program
        # group noise steps by channel so each channel needs a single RNG pass
        self._by_channel: dict[NoiseChannel, list[int]] = {}
        for sid, st in enumerate(program.noise_steps):
            self._by_channel.setdefault(st.channel, []).append(sid)

    def _sample_events(self, shots: int, rng: np.random.Generator) -> dict[int, tuple]:
        events: dict[int, tuple] = {}
        for channel, sids in self._by_channel.items():
            sizes = np.array([self.program.noise_steps[s].size * shots for s in sids])
            offsets = np.concatenate([[0], np.cumsum(sizes)])
            cells = bernoulli_cells(int(offsets[-1]), channel.p_error, rng)
            nz = np.array(channel.probs[1:])
            comps = rng.choice(len(nz), size=len(cells), p=nz / nz.sum()) + 1
            cuts = np.searchsorted(cells, offsets)
            for j, sid in enumerate(sids):
                a, b = cuts[j], cuts[j + 1]
                if b > a:
                    events[sid] = (cells[a:b] - offsets[j], comps[a:b])
        return events

    def run(
        self,
        shots: int,
        rng: np.random.Generator,
        *,
        exact: bool = False,
        forced: dict[int, tuple] | None = None,
    ):
        """Return (records, x_frame, z_frame); records has shape (n_records, shots)."""
        prog = self.program
        x = np.zeros((prog.n_qubits, shots), dtype=bool)
        z = np.zeros((prog.n_qubits, shots), dtype=bool)
        if exact:
            # Z is a stabilizer of |0>, so a random Z frame leaves the state unchanged
            z = rng.random((prog.n_qubits, shots)) < 0.5
        rec = np.zeros((prog.n_records, shots), dtype=bool)
        events = forced if forced is not None else self._sample_events(shots, rng)
        for step in prog.steps:
            op = step[0]
            if op == "noise":
                ev = events.get(step[1])
                if ev is not None:
                    self._apply(prog.noise_steps[step[1]], ev, shots, x, z, rec)
            elif op == "H":
                qs = step[1]
                tmp = x[qs]
                x[qs] = z[qs]
                z[qs] = tmp
            elif op == "CX":
                cs, ts = step[1], step[2]
                x[ts] ^= x[cs]
                z[cs] ^= z[ts]
            elif op == "M":
                qs, idx = step[1], step[2]
                rec[idx] = x[qs]
                if exact:
                    z[qs] ^= rng.random((len(qs), shots)) < 0.5
            elif op == "R":
                qs = step[1]
                x[qs] = False
                if exact:
                    z[qs] = rng.random((len(qs), shots)) < 0.5
                else:
                    z[qs] = False
        if prog.final_x is not None:
            xu = x.view(np.uint8)
            zu = z.view(np.uint8)
            fin = (prog.final_z @ xu + prog.final_x @ zu) & 1
            rec[prog.n_measurements:] = fin.astype(bool)
        return rec, x, z

    @staticmethod
    def _apply(st: NoiseStep, ev, shots, x, z, rec) -> None:
        cells, comps = ev
        loc = cells // shots
        shot = cells % shots
        if st.channel.kind == "flip":
            rows = st.targets[loc]
            if st.duplicates:
                np.logical_xor.at(rec, (rows, shot), True)
            else:
                rec[rows, shot] ^= True
            return
        for j in range(st.channel.arity):
            q = st.targets[loc, j]
            for bit, arr in ((2 * j, x), (2 * j + 1, z)):
                sel = ((comps >> bit) & 1).astype(bool)
                if not sel.any():
                    continue
                if st.duplicates:
                    np.logical_xor.at(arr, (q[sel], shot[sel]), True)
                else:
                    arr[q[sel], shot[sel]] ^= True


def sample_measurements(
    circuit: Circuit,
    shots: int,
    rng: np.random.Generator,
    binding: NoiseBinding | None = None,
) -> np.ndarray:
    """Exact outcome samples (shots, n_measurements) via one tableau reference run plus frames."""
    from .tableau import StabilizerState, run_tableau

    ref = np.array(run_tableau(circuit, StabilizerState(circuit.n_qubits, rng)), dtype=bool)
    rec, _, _ = FrameSimulator(compile_program(circuit, binding)).run(shots, rng, exact=True)
    return (rec[: circuit.num_measurements] ^ ref[:, None]).T

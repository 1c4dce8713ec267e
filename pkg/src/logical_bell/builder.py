"""Experiment container and the round-by-round builder that fills it.

An :class:`Experiment` is a circuit plus the bookkeeping a decoder needs:
detectors (sets of record indices whose parity is fixed without noise),
logical observables, and a list of ideal final checks that are appended to
the record as virtual measurements after the last layer.  The final checks
stand in for transversal readout of both patches; since they commute, one
shot yields both the ZZ and the XX outcome.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .codes import Coord, CoordCheck, CoordStabilizer, Gauge, GateTimes, baconshor_round, surface_round
from .noise import READOUT_TAG
from .stabilizer import Circuit, CircuitInstruction, PauliString, StabilizerState
from .stabilizer.frame import FrameSimulator, compile_program
from .stabilizer.tableau import run_tableau


@dataclass(frozen=True)
class Detector:
    records: tuple[int, ...]
    basis: str
    key: tuple


@dataclass
class Experiment:
    circuit: Circuit
    detectors: list[Detector]
    observables: dict[str, tuple[int, ...]]
    final_checks: list[PauliString]
    qubits: dict[str, list[int]]
    metadata: dict = field(default_factory=dict)
    plan: object | None = None

    @property
    def n_records(self) -> int:
        return self.circuit.num_measurements + len(self.final_checks)

    @property
    def observable_names(self) -> list[str]:
        return list(self.observables)

    def detector_matrix(self) -> sparse.csr_matrix:
        return _incidence([d.records for d in self.detectors], self.n_records)

    def observable_matrix(self) -> sparse.csr_matrix:
        return _incidence(list(self.observables.values()), self.n_records)

    def evaluate(self, records: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Detector and observable parities for a (n_records, shots) bool array."""
        r = records.view(np.uint8) if records.dtype == bool else records.astype(np.uint8)
        det = (self.detector_matrix() @ r) & 1
        obs = (self.observable_matrix() @ r) & 1
        return det.astype(bool), obs.astype(bool)

    def reference_records(self, seed: int = 0) -> np.ndarray:
        """One noiseless tableau run, final checks included."""
        state = StabilizerState(self.circuit.n_qubits, np.random.default_rng(seed))
        outs = run_tableau(self.circuit, state)
        for p in self.final_checks:
            v = state.peek(p)
            if v is None:
                raise RuntimeError(f"final check {p} is not determined by the final state")
            outs.append(v)
        return np.array(outs, dtype=bool)

    def verify_noiseless(self, shots: int = 64, seed: int = 0) -> None:
        """Raise if any detector or observable is not deterministic-zero without noise."""
        ref = self.reference_records(seed)
        rng = np.random.default_rng(seed + 1)
        prog = compile_program(self.circuit, None, self.final_checks)
        rec, _, _ = FrameSimulator(prog).run(shots, rng, exact=True)
        rec ^= ref[:, None]
        det, obs = self.evaluate(rec)
        bad = np.flatnonzero(det.any(axis=1))
        if len(bad):
            raise RuntimeError(f"{len(bad)} non-deterministic detectors, first {self.detectors[bad[0]]}")
        if obs.any():
            names = [n for n, row in zip(self.observables, obs) if row.any()]
            raise RuntimeError(f"observables {names} not deterministic")


def _incidence(rows: list[tuple[int, ...]], n_cols: int) -> sparse.csr_matrix:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    idx = np.fromiter((i for r in rows for i in r), dtype=np.int64, count=int(indptr[-1]))
    data = np.ones(len(idx), dtype=np.uint8)
    return sparse.csr_matrix((data, idx, indptr), shape=(len(rows), n_cols))


@dataclass
class _Obs:
    basis: str
    support: frozenset
    recs: tuple[int, ...]


class ExperimentBuilder:
    """Accumulates layers and derives detectors by comparing consecutive rounds.

    A check seen in consecutive rounds at the same key gives a detector when
    the support change is explained by single-qubit measurements of the same
    basis taken in between (the split).  A check seen for the first time is
    a detector on its own if every support qubit was freshly prepared in an
    eigenstate of its basis.
    """

    def __init__(self, times: GateTimes):
        self.times = times
        self.index: dict[Coord, int] = {}
        self.layers: list[tuple[list[CircuitInstruction], float, str | None, frozenset]] = []
        self.tags: list[str | None] = []
        self.n_meas = 0
        self.detectors: list[Detector] = []
        self.prev: dict = {}
        self.prev_gauges: dict[Gauge, int] = {}
        self.pending: dict[Coord, tuple[str, int]] = {}
        self.fresh: dict[Coord, str] = {}
        self.round = 0
        self.active: set[int] = set()

    # -- qubits and layers -------------------------------------------------
    def qubit(self, coord: Coord) -> int:
        if coord not in self.index:
            self.index[coord] = len(self.index)
        return self.index[coord]

    def qubits(self, coords) -> list[int]:
        return [self.qubit(c) for c in coords]

    def add_layer(self, instrs, duration: float, group: str | None = None, active=None) -> list[int]:
        """Append a layer; returns the record indices of its measurements."""
        act = frozenset(self.active if active is None else active)
        recs = []
        for ins in instrs:
            if ins.kind == "MeasureZ":
                recs.append(self.n_meas)
                self.tags.append(ins.tag)
                self.n_meas += 1
        self.layers.append((list(instrs), float(duration), group, act))
        return recs

    def prepare(self, coords, basis: str) -> None:
        """Reset data qubits into |0> (Z) or |+> (X)."""
        qs = self.qubits(coords)
        self.add_layer([CircuitInstruction("Reset", (q,)) for q in qs], 0.0)
        self.active |= set(qs)
        if basis == "X":
            self.add_layer([CircuitInstruction("H", (q,), self.times.t_H) for q in qs], self.times.t_H)
        for c in coords:
            self.fresh[c] = basis

    def idle(self, coords, duration: float, tag: str | None = None) -> None:
        """Explicit idle of the given qubits (everyone else active idles too)."""
        qs = self.qubits(coords)
        instrs = [CircuitInstruction("Idle", (q,), duration, tag) for q in qs]
        self.add_layer(instrs, duration, active=set(qs) | self.active)

    def retire(self, coords) -> None:
        self.active -= set(self.qubits(coords))

    # -- rounds --------------------------------------------------------------
    def surface_round(self, checks: list[CoordCheck], tag: str, data, measure_out=()) -> list[int]:
        """One round of ``checks``; ``measure_out`` lists (coord, basis, tag) data readouts at the end."""
        for c in checks:
            self.qubit(c.key)
        extra_h = [self.qubit(c) for c, b, _ in measure_out if b == "X"]
        extra_m = [(self.qubit(c), t) for c, _, t in measure_out]
        rl = surface_round(checks, self.index, self.times, tag, extra_h, extra_m)
        anc = {self.index[c.key] for c in checks}
        self.active = set(self.qubits(data)) | anc
        recs: list[int] = []
        for ins, dur, group in rl.layers:
            recs += self.add_layer(ins, dur, group)
        self.round += 1
        cur = {}
        for check, rec in zip(checks, recs):
            obs = _Obs(check.basis, check.support, (rec,))
            self._link(check.key, obs)
            cur[check.key] = obs
        self.prev = cur
        self.pending = {}
        self.fresh = {}
        for (c, b, _), rec in zip(measure_out, recs[len(checks):]):
            self.pending[c] = (b, rec)
        self.active -= anc
        for c, _, _ in measure_out:
            self.active.discard(self.index[c])
        return recs

    def baconshor_round(self, gauges: list[Gauge], stabilizers: list[CoordStabilizer], tag: str, data) -> list[int]:
        rl = baconshor_round(gauges, self.index, self.times, tag)
        self.active = set(self.qubits(data))
        recs: list[int] = []
        for ins, dur, group in rl.layers:
            recs += self.add_layer(ins, dur, group)
        self.round += 1
        gauge_rec = dict(zip(rl.measured, recs))
        cur = {}
        for s in stabilizers:
            srecs = tuple(gauge_rec[g] for g in s.gauges)
            obs = _Obs(s.basis, s.support, srecs)
            dets = None
            if all(g in self.prev_gauges for g in s.gauges):
                dets = srecs + tuple(self.prev_gauges[g] for g in s.gauges)
            elif all(self.fresh.get(q) == s.basis for q in s.support):
                dets = srecs
            if dets is not None:
                self.detectors.append(Detector(dets, s.basis, (s.basis, min(s.support), self.round)))
            cur[(s.basis, s.support)] = obs
        self.prev = cur
        self.prev_gauges = gauge_rec
        self.pending = {}
        self.fresh = {}
        return recs

    def _link(self, key, obs: _Obs) -> None:
        prev = self.prev.get(key)
        dets = None
        if prev is not None and prev.basis == obs.basis:
            diff = obs.support ^ prev.support
            if all(q in self.pending and self.pending[q][0] == obs.basis for q in diff):
                dets = obs.recs + prev.recs + tuple(self.pending[q][1] for q in sorted(diff))
        elif prev is None and all(self.fresh.get(q) == obs.basis for q in obs.support):
            dets = obs.recs
        if dets is not None:
            self.detectors.append(Detector(dets, obs.basis, (key, self.round)))

    # -- finish --------------------------------------------------------------
    def finalize(
        self,
        data,
        final_checks: list[tuple[str, frozenset]],
        logicals: dict[str, tuple[str, list[Coord], tuple[int, ...]]],
        qubit_groups: dict[str, list[Coord]],
        metadata: dict | None = None,
        plan=None,
    ) -> Experiment:
        """Add the readout layer and virtual records; build the circuit."""
        qs = self.qubits(data)
        self.add_layer([CircuitInstruction("Idle", (q,), 0.0, READOUT_TAG) for q in qs], 0.0, active=set())
        n = len(self.index)
        by_support = {(o.basis, o.support): o for o in self.prev.values()}
        paulis: list[PauliString] = []
        virt = self.n_meas
        for basis, support in final_checks:
            paulis.append(self._pauli(n, basis, support))
            prev = by_support.get((basis, frozenset(support)))
            if prev is not None:
                self.detectors.append(Detector((virt,) + prev.recs, basis, ("final", min(support))))
            virt += 1
        observables = {}
        for name, (basis, support, extra) in logicals.items():
            paulis.append(self._pauli(n, basis, support))
            observables[name] = (virt,) + tuple(extra)
            virt += 1
        circ = Circuit(n)
        for instrs, dur, group, act in self.layers:
            if dur > 0:
                busy = {q for ins in instrs for q in ins.targets}
                instrs = instrs + [CircuitInstruction("Idle", (q,), dur) for q in sorted(act - busy)]
            circ.add_layer(instrs, dur, group)
        groups = {k: self.qubits(v) for k, v in qubit_groups.items()}
        return Experiment(circ, self.detectors, observables, paulis, groups, metadata or {}, plan)

    def _pauli(self, n: int, basis: str, support) -> PauliString:
        idx = [self.index[c] for c in support]
        if basis == "X":
            return PauliString.from_support(n, x_support=idx)
        return PauliString.from_support(n, z_support=idx)

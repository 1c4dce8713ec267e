"""Reference tableau simulator (Aaronson-Gottesman, destabilizer form).

Rows ``0..n-1`` are destabilizers, rows ``n..2n-1`` stabilizers.  Used for
exact outcome sampling on small circuits and as the ground truth that the
Pauli-frame sampler is checked against.
"""
from __future__ import annotations

import numpy as np

from .circuit import Circuit, CircuitError, CircuitInstruction
from .pauli import PauliString, _phase_exponent


class StabilizerState:
    def __init__(self, n: int, rng: np.random.Generator | int | None = None):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        idx = np.arange(n)
        self.x[idx, idx] = 1
        self.z[n + idx, idx] = 1
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def copy(self) -> StabilizerState:
        other = StabilizerState.__new__(StabilizerState)
        other.n = self.n
        other.x, other.z, other.r = self.x.copy(), self.z.copy(), self.r.copy()
        other.rng = self.rng
        return other

    # -- gates -----------------------------------------------------------
    def _check(self, q: int) -> None:
        if not 0 <= q < self.n:
            raise IndexError(f"qubit {q} out of range [0, {self.n})")

    def h(self, q: int) -> None:
        self._check(q)
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def cx(self, c: int, t: int) -> None:
        self._check(c)
        self._check(t)
        x, z = self.x, self.z
        self.r ^= x[:, c] & z[:, t] & (x[:, t] ^ z[:, c] ^ 1)
        x[:, t] ^= x[:, c]
        z[:, c] ^= z[:, t]

    def pauli(self, q: int, letter: str) -> None:
        self._check(q)
        letter = letter.upper()
        if letter == "X":
            self.r ^= self.z[:, q]
        elif letter == "Z":
            self.r ^= self.x[:, q]
        elif letter == "Y":
            self.r ^= self.x[:, q] ^ self.z[:, q]
        elif letter != "I":
            raise ValueError(letter)

    def apply_pauli_string(self, p: PauliString) -> None:
        for q in p.support():
            self.pauli(q, p.letter(q))

    # -- row algebra -----------------------------------------------------
    def _rowsum_many(self, rows: np.ndarray, src: int) -> None:
        """rows[h] <- src * rows[h] for every h in ``rows`` (all rows independent)."""
        if len(rows) == 0:
            return
        e = _phase_exponent(self.x[src], self.z[src], self.x[rows], self.z[rows]).sum(axis=1)
        total = (2 * self.r[rows].astype(np.int64) + 2 * int(self.r[src]) + e) % 4
        self.r[rows] = (total // 2).astype(np.uint8)
        self.x[rows] ^= self.x[src]
        self.z[rows] ^= self.z[src]

    def _product_phase(self, rows) -> tuple[int, np.ndarray, np.ndarray]:
        sx = np.zeros(self.n, np.uint8)
        sz = np.zeros(self.n, np.uint8)
        sr = 0
        for i in rows:
            e = int(_phase_exponent(self.x[i], self.z[i], sx, sz).sum())
            sr = ((2 * sr + 2 * int(self.r[i]) + e) % 4) // 2
            sx ^= self.x[i]
            sz ^= self.z[i]
        return sr, sx, sz

    # -- measurement -----------------------------------------------------
    def measure_pauli(self, p: PauliString, forced: int | None = None) -> int:
        """Measure a Hermitian Pauli product; returns the outcome bit (1 means -1).

        ``forced`` fixes the outcome of a random measurement (used for branch
        enumeration); it is ignored when the outcome is deterministic.
        """
        if p.n != self.n:
            raise ValueError("Pauli length mismatch")
        px = p.xs.astype(np.uint8)
        pz = p.zs.astype(np.uint8)
        anti = ((self.x @ pz + self.z @ px) % 2).astype(bool)
        n = self.n
        stab_anti = np.flatnonzero(anti[n:])
        if len(stab_anti):
            piv = n + int(stab_anti[0])
            others = np.flatnonzero(anti)
            others = others[others != piv]
            self._rowsum_many(others, piv)
            self.x[piv - n], self.z[piv - n], self.r[piv - n] = self.x[piv], self.z[piv], self.r[piv]
            outcome = int(self.rng.integers(2)) if forced is None else int(forced)
            self.x[piv] = px
            self.z[piv] = pz
            self.r[piv] = outcome ^ (1 if p.sign == -1 else 0)
            return outcome
        rows = n + np.flatnonzero(anti[:n])
        sr, sx, sz = self._product_phase(rows)
        if not (np.array_equal(sx, px) and np.array_equal(sz, pz)):
            raise RuntimeError("measured Pauli is not in the stabilizer group")
        return sr ^ (1 if p.sign == -1 else 0)

    def measure_z(self, q: int, forced: int | None = None) -> int:
        self._check(q)
        return self.measure_pauli(PauliString.from_support(self.n, z_support=[q]), forced)

    def is_deterministic(self, p: PauliString) -> bool:
        px = p.xs.astype(np.uint8)
        pz = p.zs.astype(np.uint8)
        return not ((self.x[self.n:] @ pz + self.z[self.n:] @ px) % 2).any()

    def peek(self, p: PauliString) -> int | None:
        """Expectation-free look at a Pauli: outcome bit if deterministic, else None."""
        if not self.is_deterministic(p):
            return None
        return self.copy().measure_pauli(p)

    def reset(self, q: int) -> None:
        if self.measure_z(q):
            self.pauli(q, "X")

    # -- inspection ------------------------------------------------------
    def stabilizers(self) -> list[PauliString]:
        return [
            PauliString(self.x[i].astype(bool), self.z[i].astype(bool), -1 if self.r[i] else 1)
            for i in range(self.n, 2 * self.n)
        ]

    def stabilizers_commute(self) -> bool:
        s = slice(self.n, 2 * self.n)
        sym = (self.x[s].astype(np.int64) @ self.z[s].T.astype(np.int64)
               + self.z[s].astype(np.int64) @ self.x[s].T.astype(np.int64)) % 2
        return not sym.any()

    def rank(self) -> int:
        m = np.concatenate([self.x, self.z], axis=1).astype(np.uint8)
        return _gf2_rank(m)


def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy()
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = np.flatnonzero(m[rank:, c])
        if len(piv) == 0:
            continue
        p = rank + piv[0]
        m[[rank, p]] = m[[p, rank]]
        hits = np.flatnonzero(m[:, c])
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def apply_gate(state: StabilizerState, instr: CircuitInstruction) -> StabilizerState:
    """Apply a unitary instruction (or deterministic PauliError) in place and return the state."""
    kind = instr.kind
    for q in instr.targets:
        if not 0 <= q < state.n:
            raise IndexError(f"target {q} out of range [0, {state.n})")
    if kind == "H":
        for q in instr.targets:
            state.h(q)
    elif kind == "CX":
        state.cx(*instr.targets)
    elif kind in ("X", "Z"):
        for q in instr.targets:
            state.pauli(q, kind)
    elif kind == "PauliError":
        for q, letter in zip(instr.targets, instr.pauli):
            state.pauli(q, letter)
    elif kind == "Idle":
        pass
    else:
        raise CircuitError(f"apply_gate cannot execute {kind}; use measure_z/reset")
    return state


def measure_z(state: StabilizerState, qubit: int) -> int:
    return state.measure_z(qubit)


def run_tableau(circuit: Circuit, state: StabilizerState, noise_events=None) -> list[int]:
    """Execute ``circuit`` on ``state``; returns measurement outcomes in order.

    ``noise_events`` optionally maps (layer, position, 'before'|'after') to a
    list of (qubit, letter) Pauli applications; outcome flips use letter 'M'.
    """
    outcomes: list[int] = []
    for li, layer in enumerate(circuit.layers):
        for pi, ins in enumerate(layer.instructions):
            pre = noise_events.get((li, pi, "before"), ()) if noise_events else ()
            post = noise_events.get((li, pi, "after"), ()) if noise_events else ()
            flip = 0
            for q, letter in pre:
                if letter == "M":
                    flip ^= 1
                else:
                    state.pauli(q, letter)
            if ins.kind == "MeasureZ":
                outcomes.append(state.measure_z(ins.targets[0]) ^ flip)
            elif ins.kind == "Reset":
                for q in ins.targets:
                    state.reset(q)
            else:
                apply_gate(state, ins)
            for q, letter in post:
                if letter == "M":
                    outcomes[-1] ^= 1
                else:
                    state.pauli(q, letter)
    return outcomes

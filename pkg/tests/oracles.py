"""Independent reference models used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np

_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]])
_Z = np.diag([1, -1])
_Y = np.array([[0, -1j], [1j, 0]])
_P = {"I": np.eye(2), "X": _X, "Y": _Y, "Z": _Z}


def _apply_1q(psi, n, q, u):
    psi = psi.reshape([2] * n)
    psi = np.moveaxis(np.tensordot(u, psi, axes=([1], [q])), 0, q)
    return psi.reshape(-1)


def _apply_cx(psi, n, c, t):
    psi = psi.reshape([2] * n).copy()
    idx = [slice(None)] * n
    idx[c] = 1
    sub = psi[tuple(idx)]
    tt = t if t < c else t - 1
    psi[tuple(idx)] = np.flip(sub, axis=tt)
    return psi.reshape(-1)


def dense_distribution(circuit) -> dict[tuple[int, ...], float]:
    """Exact outcome distribution of a noiseless circuit by branching on every measurement."""
    n = circuit.n_qubits
    psi0 = np.zeros(2**n, complex)
    psi0[0] = 1
    branches = [(psi0, 1.0, ())]
    for ins in circuit.instructions():
        new = []
        for psi, w, out in branches:
            if ins.kind == "H":
                new.append((_apply_1q(psi, n, ins.targets[0], _H), w, out))
            elif ins.kind in ("X", "Z"):
                new.append((_apply_1q(psi, n, ins.targets[0], _P[ins.kind]), w, out))
            elif ins.kind == "PauliError":
                for q, letter in zip(ins.targets, ins.pauli):
                    psi = _apply_1q(psi, n, q, _P[letter.upper()])
                new.append((psi, w, out))
            elif ins.kind == "CX":
                new.append((_apply_cx(psi, n, *ins.targets), w, out))
            elif ins.kind in ("MeasureZ", "Reset"):
                q = ins.targets[0]
                t = psi.reshape([2] * n)
                for bit in (0, 1):
                    idx = [slice(None)] * n
                    idx[q] = bit
                    proj = np.zeros_like(t)
                    proj[tuple(idx)] = t[tuple(idx)]
                    pb = float(np.vdot(proj, proj).real)
                    if pb < 1e-12:
                        continue
                    proj = proj.reshape(-1) / np.sqrt(pb)
                    if ins.kind == "MeasureZ":
                        new.append((proj, w * pb, out + (bit,)))
                    else:
                        if bit:
                            proj = _apply_1q(proj, n, q, _X)
                        new.append((proj, w * pb, out))
            else:
                new.append((psi, w, out))
        branches = new
    dist: dict[tuple[int, ...], float] = {}
    for _, w, out in branches:
        dist[out] = dist.get(out, 0.0) + w
    return dist


def dense_stabilizer_expectation(circuit, pauli_text: str) -> float:
    """<P> for a measurement-free circuit."""
    n = circuit.n_qubits
    psi = np.zeros(2**n, complex)
    psi[0] = 1
    for ins in circuit.instructions():
        if ins.kind == "H":
            psi = _apply_1q(psi, n, ins.targets[0], _H)
        elif ins.kind == "CX":
            psi = _apply_cx(psi, n, *ins.targets)
        elif ins.kind in ("X", "Z"):
            psi = _apply_1q(psi, n, ins.targets[0], _P[ins.kind])
    sign = -1 if pauli_text.startswith("-") else 1
    body = pauli_text.lstrip("+-")
    phi = psi
    for q, letter in enumerate(body):
        if letter not in "I_":
            phi = _apply_1q(phi, n, q, _P[letter])
    return sign * float(np.vdot(psi, phi).real)


def tvd(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def brute_force_matching(dist: np.ndarray, boundary: np.ndarray) -> float:
    """Minimum total weight over all ways to pair defects or send them to the boundary."""
    k = len(boundary)

    def rec(remaining: tuple[int, ...]) -> float:
        if not remaining:
            return 0.0
        i, rest = remaining[0], remaining[1:]
        best = boundary[i] + rec(rest)
        for j_pos, j in enumerate(rest):
            best = min(best, dist[i, j] + rec(rest[:j_pos] + rest[j_pos + 1:]))
        return best

    return rec(tuple(range(k)))


def all_pauli_strings(n: int):
    for letters in itertools.product("IXYZ", repeat=n):
        yield "".join(letters)

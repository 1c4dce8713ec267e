"""Signed Pauli strings in symplectic (x, z) form.

A qubit with ``x=1, z=1`` carries a Y (not XZ); products keep track of the
sign only, so multiplying anticommuting strings is rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_LETTERS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1), "_": (0, 0)}


def _phase_exponent(x1, z1, x2, z2) -> np.ndarray:
    """Power of i picked up per qubit when multiplying P1 * P2 (Aaronson-Gottesman g)."""
    x1 = np.asarray(x1, dtype=np.int8)
    z1 = np.asarray(z1, dtype=np.int8)
    x2 = np.asarray(x2, dtype=np.int8)
    z2 = np.asarray(z2, dtype=np.int8)
    out = np.zeros(np.broadcast(x1, x2).shape, dtype=np.int8)
    y1 = (x1 == 1) & (z1 == 1)
    xo = (x1 == 1) & (z1 == 0)
    zo = (x1 == 0) & (z1 == 1)
    out = np.where(y1, z2 - x2, out)
    out = np.where(xo, z2 * (2 * x2 - 1), out)
    out = np.where(zo, x2 * (1 - 2 * z2), out)
    return out


@dataclass(eq=False)
class PauliString:
    xs: np.ndarray
    zs: np.ndarray
    sign: int = 1
    n: int = field(init=False)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=bool).copy()
        self.zs = np.asarray(self.zs, dtype=bool).copy()
        if self.xs.shape != self.zs.shape or self.xs.ndim != 1:
            raise ValueError("xs and zs must be 1-D arrays of equal length")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        self.n = len(self.xs)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(np.zeros(n, bool), np.zeros(n, bool))

    @classmethod
    def from_str(cls, text: str) -> PauliString:
        """Parse ``"+XZ_Y"`` / ``"-XX"`` style strings."""
        sign = 1
        if text and text[0] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        try:
            bits = [_LETTERS[c] for c in text.upper()]
        except KeyError as exc:
            raise ValueError(f"bad Pauli letter in {text!r}") from exc
        xs = [b[0] for b in bits]
        zs = [b[1] for b in bits]
        return cls(np.array(xs, bool), np.array(zs, bool), sign)

    @classmethod
    def from_support(cls, n: int, x_support=(), z_support=(), sign: int = 1) -> PauliString:
        xs = np.zeros(n, bool)
        zs = np.zeros(n, bool)
        xs[list(x_support)] = True
        zs[list(z_support)] = True
        return cls(xs, zs, sign)

    def __str__(self) -> str:
        letters = np.array(["_", "X", "Z", "Y"])
        body = "".join(letters[self.xs.astype(int) + 2 * self.zs.astype(int)])
        return ("+" if self.sign == 1 else "-") + body

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return (
            self.sign == other.sign
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.zs, other.zs)
        )

    def __hash__(self):
        return hash((self.sign, self.xs.tobytes(), self.zs.tobytes()))

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.xs | self.zs))

    def is_identity(self) -> bool:
        return not (self.xs.any() or self.zs.any())

    def commutes(self, other: PauliString) -> bool:
        return not bool(
            (np.count_nonzero(self.xs & other.zs) + np.count_nonzero(self.zs & other.xs)) % 2
        )

    def __mul__(self, other: PauliString) -> PauliString:
        if self.n != other.n:
            raise ValueError("length mismatch")
        e = int(_phase_exponent(self.xs, self.zs, other.xs, other.zs).sum()) % 4
        if e % 2:
            raise ValueError("product of anticommuting Paulis is not Hermitian")
        sign = self.sign * other.sign * (-1 if e == 2 else 1)
        return PauliString(self.xs ^ other.xs, self.zs ^ other.zs, sign)

    def __neg__(self) -> PauliString:
        return PauliString(self.xs, self.zs, -self.sign)

    def letter(self, q: int) -> str:
        return "_XZY"[int(self.xs[q]) + 2 * int(self.zs[q])]

    def support(self) -> list[int]:
        return [int(q) for q in np.flatnonzero(self.xs | self.zs)]

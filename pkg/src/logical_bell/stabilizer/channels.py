"""Stochastic Pauli channels.

Component codes pack two bits per qubit: bit ``2k`` is the X part and bit
``2k+1`` the Z part of qubit ``k``.  So for one qubit 0=I, 1=X, 2=Z, 3=Y.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .pauli import PauliString

LETTER_CODE = {"I": 0, "X": 1, "Z": 2, "Y": 3}
CODE_LETTER = "IXZY"


@dataclass(frozen=True)
class NoiseChannel:
    """A Pauli channel over ``arity`` qubits, or a classical outcome flip."""

    kind: str  # "pauli" | "flip"
    arity: int
    probs: tuple[float, ...]

    def __post_init__(self):
        if self.kind == "pauli":
            if self.arity not in (1, 2) or len(self.probs) != 4**self.arity:
                raise ValueError("pauli channel needs 4**arity probabilities")
        elif self.kind == "flip":
            if self.arity != 1 or len(self.probs) != 2:
                raise ValueError("flip channel needs (1-p, p)")
        else:
            raise ValueError(self.kind)
        if any(p < 0 or p > 1 for p in self.probs):
            raise ValueError(f"probabilities out of [0, 1]: {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(self.probs)}")

    @property
    def p_error(self) -> float:
        return 1.0 - self.probs[0] if self.probs[0] < 1 else 0.0

    def is_trivial(self) -> bool:
        return self.probs[0] >= 1.0

    def scaled(self, factor: float) -> NoiseChannel:
        """Same component shape with every non-identity weight multiplied by ``factor``."""
        rest = [p * factor for p in self.probs[1:]]
        return NoiseChannel(self.kind, self.arity, (1.0 - sum(rest), *rest))


def depolarizing(p_err: float, arity: int = 1) -> NoiseChannel:
    if not 0 <= p_err <= 1:
        raise ValueError(f"p_err must lie in [0, 1], got {p_err}")
    if arity not in (1, 2):
        raise ValueError("arity must be 1 or 2")
    k = 4**arity - 1
    return NoiseChannel("pauli", arity, (1.0 - p_err,) + (p_err / k,) * k)


def pauli_channel(px: float, py: float, pz: float) -> NoiseChannel:
    return NoiseChannel("pauli", 1, (1.0 - px - py - pz, px, pz, py))


def flip(p: float) -> NoiseChannel:
    if not 0 <= p <= 1:
        raise ValueError(f"flip probability must lie in [0, 1], got {p}")
    return NoiseChannel("flip", 1, (1.0 - p, p))


def exact_depolarizing_weights(p_err: Fraction | str, arity: int) -> list[Fraction]:
    """Rational Kraus weights; they sum to exactly one."""
    p = Fraction(p_err)
    k = 4**arity - 1
    return [1 - p] + [p / k] * k


def code_to_pauli(code: int, arity: int) -> PauliString:
    return PauliString.from_str("".join(CODE_LETTER[(code >> (2 * j)) & 3] for j in range(arity)))


def sample_depolarizing(p_err: float, arity: int, rng: np.random.Generator) -> PauliString:
    """Draw one Pauli from the depolarizing channel (identity with probability 1 - p_err)."""
    ch = depolarizing(p_err, arity)
    code = int(rng.choice(len(ch.probs), p=ch.probs))
    return code_to_pauli(code, arity)


def sample_codes(channel: NoiseChannel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draw of ``n`` component codes (0 = no error)."""
    return rng.choice(len(channel.probs), size=n, p=channel.probs)

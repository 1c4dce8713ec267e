"""Patch layouts and syndrome-extraction rounds.

Three families are supported at d in {3, 5}:

* rotated surface code, data on a d x d grid, weight-4 plaquettes plus
  weight-2 boundary checks, one ancilla per check;
* planar (unrotated) surface code on a (2d-1) x (2d-1) grid, d**2 + (d-1)**2
  data qubits, weight-3/4 checks;
* Bacon-Shor on an L x L grid, weight-2 XX gauges on horizontal pairs and ZZ
  gauges on vertical pairs, no ancillas.

Layouts are generated in global coordinates so that patches placed side by
side (for lattice surgery) reuse the same generator.  Rotated layouts use
doubled coordinates: data at (2c, 2r), plaquette centres at (2c+1, 2r+1).
Everywhere, the logical operator of the ``seam`` type runs along a column
and the other one along a row.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .stabilizer import Circuit, CircuitInstruction, Layer, PauliString
from .stabilizer.binding import ConfigurationError

FAMILIES = ("RotatedSurface", "PlanarSurface", "BaconShor")
SUPPORTED_DISTANCES = (3, 5)

Coord = tuple[int, int]


def other(basis: str) -> str:
    return "Z" if basis == "X" else "X"


@dataclass(frozen=True)
class GateTimes:
    t_H: float = 150e-6
    t_CX: float = 970e-6
    t_M: float = 130e-6

    def __post_init__(self):
        if min(self.t_H, self.t_CX, self.t_M) <= 0:
            raise ConfigurationError("gate times must be positive")


@dataclass(frozen=True)
class CodeSpec:
    family: str
    d: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown code family {self.family!r}; expected one of {FAMILIES}")
        if self.d not in SUPPORTED_DISTANCES:
            raise ConfigurationError(f"distance {self.d} unsupported; expected one of {SUPPORTED_DISTANCES}")

    @property
    def short(self) -> str:
        return {"RotatedSurface": "rotated", "PlanarSurface": "planar", "BaconShor": "bs"}[self.family]


def cycle_time(family: str, times: GateTimes) -> float:
    """Duration of one syndrome-extraction round."""
    if family == "BaconShor":
        return 4 * times.t_M + 8 * times.t_CX + 4 * times.t_H
    return 2 * times.t_H + 4 * times.t_CX + times.t_M


# -- coordinate-level generators -------------------------------------------

@dataclass(frozen=True)
class CoordCheck:
    """A measured check in global coordinates.

    ``slots`` has one entry per CX layer (``None`` when the ancilla is idle in
    that layer); ``key`` is the ancilla position.
    """

    basis: str
    key: Coord
    slots: tuple[Coord | None, ...]

    @property
    def support(self) -> frozenset[Coord]:
        return frozenset(s for s in self.slots if s is not None)


def rotated_data(c0: int, c1: int, h: int) -> list[Coord]:
    return [(2 * c, 2 * r) for r in range(h) for c in range(c0, c1 + 1)]


def rotated_checks(c0: int, c1: int, h: int, seam: str = "X") -> list[CoordCheck]:
    """Checks of a rotated patch covering data columns c0..c1 and rows 0..h-1.

    Plaquette type follows the global parity of its corner so that adjacent
    regions agree.  Top/bottom boundaries carry ``seam``-type checks and
    left/right boundaries the other type.
    """
    out = []
    low = other(seam)
    for pr in range(-1, h):
        for pc in range(c0 - 1, c1 + 1):
            corners = [(pc, pr), (pc + 1, pr), (pc, pr + 1), (pc + 1, pr + 1)]  # NW NE SW SE
            inside = [c0 <= c <= c1 and 0 <= r < h for c, r in corners]
            basis = seam if (pc + pr) % 2 == 0 else low
            n_in = sum(inside)
            if n_in == 2:
                vertical_edge = pc in (c0 - 1, c1)
                horizontal_edge = pr in (-1, h - 1)
                if horizontal_edge and not vertical_edge and basis != seam:
                    continue
                if vertical_edge and not horizontal_edge and basis != low:
                    continue
                if vertical_edge and horizontal_edge:
                    continue
            elif n_in != 4:
                continue
            order = (0, 1, 2, 3) if basis == seam else (0, 2, 1, 3)
            slots = tuple((2 * corners[i][0], 2 * corners[i][1]) if inside[i] else None for i in order)
            out.append(CoordCheck(basis, (2 * pc + 1, 2 * pr + 1), slots))
    return out


def planar_data(x0: int, x1: int, h: int) -> list[Coord]:
    return [(x, y) for y in range(h) for x in range(x0, x1 + 1) if (x + y) % 2 == 0]


def planar_checks(x0: int, x1: int, h: int, seam: str = "X") -> list[CoordCheck]:
    """Checks of a planar patch on columns x0..x1 (x0 even) and rows 0..h-1.

    ``seam``-type checks sit at odd x / even y, the others at even x / odd y.
    CX order is N,E,W,S for the seam type and N,W,E,S for the other.
    """
    out = []
    for y in range(h):
        for x in range(x0, x1 + 1):
            if (x + y) % 2 == 0:
                continue
            basis = seam if x % 2 == 1 else other(seam)
            n, s, e, w = (x, y - 1), (x, y + 1), (x + 1, y), (x - 1, y)
            order = (n, e, w, s) if basis == seam else (n, w, e, s)
            slots = tuple(q if (x0 <= q[0] <= x1 and 0 <= q[1] < h) else None for q in order)
            out.append(CoordCheck(basis, (x, y), slots))
    return out


@dataclass(frozen=True)
class Gauge:
    basis: str
    pair: tuple[Coord, Coord]


@dataclass(frozen=True)
class CoordStabilizer:
    """Bacon-Shor stabilizer: a product of gauge operators."""

    basis: str
    gauges: tuple[Gauge, ...]

    @property
    def support(self) -> frozenset[Coord]:
        acc: set[Coord] = set()
        for g in self.gauges:
            acc ^= set(g.pair)
        return frozenset(acc)


def baconshor_data(c0: int, c1: int, h: int) -> list[Coord]:
    return [(c, r) for r in range(h) for c in range(c0, c1 + 1)]


def baconshor_gauges(c0: int, c1: int, h: int) -> list[Gauge]:
    xx = [Gauge("X", ((c, r), (c + 1, r))) for r in range(h) for c in range(c0, c1)]
    zz = [Gauge("Z", ((c, r), (c, r + 1))) for r in range(h - 1) for c in range(c0, c1 + 1)]
    return xx + zz


def baconshor_stabilizers(c0: int, c1: int, h: int) -> list[CoordStabilizer]:
    """Adjacent-column X stabilizers and adjacent-row Z stabilizers, each of weight 2h / 2w."""
    xs = [
        CoordStabilizer("X", tuple(Gauge("X", ((c, r), (c + 1, r))) for r in range(h)))
        for c in range(c0, c1)
    ]
    zs = [
        CoordStabilizer("Z", tuple(Gauge("Z", ((c, r), (c, r + 1))) for c in range(c0, c1 + 1)))
        for r in range(h - 1)
    ]
    return xs + zs


# -- patch layout ------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    basis: str
    support: tuple[int, ...]
    ancilla: int | None
    schedule: tuple[int, ...]  # data index per CX layer, -1 when idle


@dataclass(frozen=True)
class PatchLayout:
    spec: CodeSpec
    data_coords: tuple[Coord, ...]
    ancilla_coords: tuple[Coord, ...]
    checks: tuple[Check, ...]
    logical_x: PauliString
    logical_z: PauliString
    gauge_ops: tuple[tuple[str, tuple[int, int]], ...] = ()
    coord_checks: tuple = field(default=(), repr=False)

    @property
    def n_data(self) -> int:
        return len(self.data_coords)

    @property
    def n_qubits(self) -> int:
        return len(self.data_coords) + len(self.ancilla_coords)

    def stabilizers(self) -> list[PauliString]:
        return [_pauli(self.n_data, c.basis, c.support) for c in self.checks]

    def gauges(self) -> list[PauliString]:
        return [_pauli(self.n_data, b, q) for b, q in self.gauge_ops]

    def index(self) -> dict[Coord, int]:
        coords = self.data_coords + self.ancilla_coords
        return {c: i for i, c in enumerate(coords)}


def _pauli(n: int, basis: str, support) -> PauliString:
    support = list(support)
    if basis == "X":
        return PauliString.from_support(n, x_support=support)
    return PauliString.from_support(n, z_support=support)


def patch_coords(family: str, d: int, col0: int = 0, seam: str = "X"):
    """(data coords, checks) for one patch whose leftmost data column is ``col0``."""
    if family == "RotatedSurface":
        return rotated_data(col0, col0 + d - 1, d), rotated_checks(col0, col0 + d - 1, d, seam)
    if family == "PlanarSurface":
        return planar_data(col0, col0 + 2 * d - 2, 2 * d - 1), planar_checks(col0, col0 + 2 * d - 2, 2 * d - 1, seam)
    return baconshor_data(col0, col0 + d - 1, d), baconshor_stabilizers(col0, col0 + d - 1, d)


def logical_coords(family: str, d: int, col0: int = 0) -> tuple[list[Coord], list[Coord]]:
    """(column representative, row-0 representative) of the two logical operators."""
    data = patch_coords(family, d, col0)[0]
    first_col = min(c[0] for c in data)
    column = [c for c in data if c[0] == first_col]
    row = [c for c in data if c[1] == 0]
    return column, row


def build_patch(spec: CodeSpec, seam: str = "X") -> PatchLayout:
    """Stand-alone patch with local indices: data first, then ancillas."""
    if not isinstance(spec, CodeSpec):
        raise ConfigurationError("build_patch expects a CodeSpec")
    data, checks = patch_coords(spec.family, spec.d, 0, seam)
    didx = {c: i for i, c in enumerate(data)}
    col, row = logical_coords(spec.family, spec.d)
    n = len(data)
    log_col = _pauli(n, seam, [didx[c] for c in col])
    log_row = _pauli(n, other(seam), [didx[c] for c in row])
    log_x, log_z = (log_col, log_row) if seam == "X" else (log_row, log_col)
    if spec.family == "BaconShor":
        gauges = tuple(
            (g.basis, (didx[g.pair[0]], didx[g.pair[1]])) for g in baconshor_gauges(0, spec.d - 1, spec.d)
        )
        out_checks = tuple(
            Check(s.basis, tuple(sorted(didx[q] for q in s.support)), None, ()) for s in checks
        )
        return PatchLayout(spec, tuple(data), (), out_checks, log_x, log_z, gauges, tuple(checks))
    anc = [c.key for c in checks]
    aidx = {c: n + i for i, c in enumerate(anc)}
    out_checks = tuple(
        Check(
            c.basis,
            tuple(sorted(didx[q] for q in c.support)),
            aidx[c.key],
            tuple(-1 if s is None else didx[s] for s in c.slots),
        )
        for c in checks
    )
    return PatchLayout(spec, tuple(data), tuple(anc), out_checks, log_x, log_z, (), tuple(checks))


# -- round construction -------------------------------------------------------

@dataclass
class RoundLayers:
    """Layers of one round plus the records they produce.

    ``layers`` holds (instructions, duration, group) triples; ``measured``
    lists, per MeasureZ in emission order, the check or gauge it reads out.
    """

    layers: list[tuple[list[CircuitInstruction], float, str | None]]
    measured: list


def surface_round(
    checks: list[CoordCheck],
    qidx: dict[Coord, int],
    times: GateTimes,
    tag: str,
    extra_h: list[int] = (),
    extra_m: list[tuple[int, str]] = (),
) -> RoundLayers:
    """Reset ancillas, H, four CX layers, H, measure.

    ``extra_h`` / ``extra_m`` let a split fold seam-qubit basis changes and
    measurements into the final two layers without extra time.
    """
    anc = [qidx[c.key] for c in checks]
    xanc = [qidx[c.key] for c in checks if c.basis == "X"]
    layers = [([CircuitInstruction("Reset", (a,)) for a in anc], 0.0, None)]
    layers.append(([CircuitInstruction("H", (a,), times.t_H) for a in xanc], times.t_H, None))
    n_slots = max(len(c.slots) for c in checks)
    for k in range(n_slots):
        ins = []
        for c in checks:
            q = c.slots[k] if k < len(c.slots) else None
            if q is None:
                continue
            a, dq = qidx[c.key], qidx[q]
            pair = (a, dq) if c.basis == "X" else (dq, a)
            ins.append(CircuitInstruction("CX", pair, times.t_CX))
        layers.append((ins, times.t_CX, None))
    hs = [CircuitInstruction("H", (a,), times.t_H) for a in list(xanc) + list(extra_h)]
    layers.append((hs, times.t_H, None))
    ms = [CircuitInstruction("MeasureZ", (qidx[c.key],), times.t_M, tag) for c in checks]
    ms += [CircuitInstruction("MeasureZ", (q,), times.t_M, t) for q, t in extra_m]
    layers.append((ms, times.t_M, None))
    return RoundLayers(layers, list(checks) + [("extra", q) for q, _ in extra_m])


def baconshor_round(
    gauges: list[Gauge],
    qidx: dict[Coord, int],
    times: GateTimes,
    tag: str,
) -> RoundLayers:
    """Four parity-measurement groups: XX on even then odd columns, ZZ on even then odd rows."""
    from .noise import transpile_parity_measurement

    def group_key(g: Gauge):
        (c, r), _ = g.pair
        return (0 if g.basis == "X" else 1, (c if g.basis == "X" else r) % 2)

    layers: list = []
    measured: list = []
    for gi, key in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        members = [g for g in gauges if group_key(g) == key]
        if not members:
            continue
        frags = [
            transpile_parity_measurement(g.basis, qidx[g.pair[0]], qidx[g.pair[1]], times, tag)
            for g in members
        ]
        group = f"{tag}.g{gi}"
        for step in range(len(frags[0])):
            ins = [ins for f in frags for ins in f[step].instructions]
            layers.append((ins, frags[0][step].duration, group))
        measured.extend(members)
    return RoundLayers(layers, measured)


@dataclass
class CyclePlan:
    layers: list[Layer]
    t_cycle: float
    circuit: Circuit
    measured: list


def syndrome_cycle(patch: PatchLayout, gate_times: GateTimes | None = None) -> CyclePlan:
    """One round on a stand-alone patch; idle data qubits get explicit Idle instructions."""
    times = gate_times or GateTimes()
    qidx = patch.index()
    if patch.spec.family == "BaconShor":
        d = patch.spec.d
        rl = baconshor_round(baconshor_gauges(0, d - 1, d), qidx, times, "cycle")
    else:
        rl = surface_round(list(patch.coord_checks), qidx, times, "cycle")
    circ = Circuit(patch.n_qubits)
    for ins, dur, group in rl.layers:
        circ.add_layer(ins, dur, group)
    circ.fill_idles()
    return CyclePlan(circ.layers, circ.duration, circ, rl.measured)


# -- layout checks and readout decoding ---------------------------------------

def commutation_matrix(paulis: list[PauliString]) -> np.ndarray:
    xs = np.array([p.xs for p in paulis], dtype=np.int64)
    zs = np.array([p.zs for p in paulis], dtype=np.int64)
    return (xs @ zs.T + zs @ xs.T) % 2


def min_logical_weight(patch: PatchLayout, basis: str, max_weight: int | None = None) -> int:
    """Smallest weight of a ``basis``-type Pauli that commutes with every check yet is not a stabilizer.

    Exhaustive over supports of increasing weight, so only meant for d = 3.
    """
    n = patch.n_data
    # a basis-type operator is detected by the opposite-type checks (or gauges for Bacon-Shor)
    detectors = [c for c in patch.stabilizers() if (c.zs if basis == "X" else c.xs).any()]
    if patch.spec.family == "BaconShor":
        detectors = [g for g in patch.gauges() if (g.zs if basis == "X" else g.xs).any()]
    det = np.array([(p.zs if basis == "X" else p.xs) for p in detectors], dtype=np.int64)
    same = [c for c in patch.stabilizers() if (c.xs if basis == "X" else c.zs).any()]
    if patch.spec.family == "BaconShor":
        same = [g for g in patch.gauges() if (g.xs if basis == "X" else g.zs).any()]
    span = np.array([(p.xs if basis == "X" else p.zs) for p in same], dtype=np.uint8)
    from .stabilizer.tableau import _gf2_rank

    base_rank = _gf2_rank(span)
    limit = max_weight or n
    for w in range(1, limit + 1):
        for supp in itertools.combinations(range(n), w):
            v = np.zeros(n, dtype=np.int64)
            v[list(supp)] = 1
            if (det @ v % 2).any():
                continue
            if _gf2_rank(np.vstack([span, v.astype(np.uint8)])) > base_rank:
                return w
    return -1


class ReadoutDecoder:
    """Minimum-weight decoding of a single transversal readout of one patch.

    The syndrome of the readout bits (in one basis) against that basis's
    checks is matched against a table of minimum-weight corrections.
    """

    def __init__(self, patch: PatchLayout, basis: str, max_weight: int | None = None):
        self.patch = patch
        self.basis = basis
        n = patch.n_data
        checks = [c for c in patch.checks if c.basis == basis]
        self.h = np.zeros((len(checks), n), dtype=np.uint8)
        for i, c in enumerate(checks):
            self.h[i, list(c.support)] = 1
        logical = patch.logical_z if basis == "Z" else patch.logical_x
        self.logical = (logical.zs if basis == "Z" else logical.xs).astype(np.uint8)
        self.table: dict[bytes, np.ndarray] = {np.zeros(len(checks), np.uint8).tobytes(): np.zeros(n, np.uint8)}
        limit = max_weight if max_weight is not None else patch.spec.d
        for w in range(1, limit + 1):
            for supp in itertools.combinations(range(n), w):
                e = np.zeros(n, dtype=np.uint8)
                e[list(supp)] = 1
                key = (self.h @ e % 2).astype(np.uint8).tobytes()
                self.table.setdefault(key, e)
            if len(self.table) == 2 ** np.linalg.matrix_rank(self.h.astype(float)):
                break

    def logical_value(self, bits: np.ndarray) -> int:
        """Decoded logical outcome bit of a readout ``bits`` (length n_data)."""
        bits = np.asarray(bits, dtype=np.uint8)
        syn = (self.h @ bits % 2).astype(np.uint8).tobytes()
        corr = self.table[syn]
        return int(((bits ^ corr) @ self.logical) % 2)


@dataclass
class LogicalFrame:
    """Logical Pauli corrections recorded in software, per patch ("A", "B")."""

    x: dict[str, int] = field(default_factory=lambda: {"A": 0, "B": 0})
    z: dict[str, int] = field(default_factory=lambda: {"A": 0, "B": 0})

    def copy(self) -> LogicalFrame:
        return LogicalFrame(dict(self.x), dict(self.z))


def logical_bell_error(
    patches: tuple[PatchLayout, PatchLayout],
    readout: dict[str, tuple[np.ndarray, np.ndarray]],
    frame: LogicalFrame | None = None,
) -> tuple[int, int]:
    """Decode transversal readouts and score them against |phi+>_L.

    ``readout`` maps a basis ("Z" or "X") to the pair of data-bit arrays for
    patches A and B.  Bases not present score 0.  A basis in which the two
    patches disagree in length raises ``ValueError``.
    """
    frame = frame or LogicalFrame()
    errs = {"Z": 0, "X": 0}
    for basis, (bits_a, bits_b) in readout.items():
        if basis not in ("X", "Z"):
            raise ValueError(f"unknown readout basis {basis!r}")
        if len(bits_a) != patches[0].n_data or len(bits_b) != patches[1].n_data:
            raise ValueError("readout length does not match patch size")
        if patches[0].spec != patches[1].spec:
            raise ValueError("patches must share family and distance")
        va = ReadoutDecoder(patches[0], basis).logical_value(bits_a)
        vb = ReadoutDecoder(patches[1], basis).logical_value(bits_b)
        # an X correction flips a Z readout and vice versa
        flips = frame.x if basis == "Z" else frame.z
        errs[basis] = va ^ vb ^ flips["A"] ^ flips["B"]
    return errs["Z"], errs["X"]


def layout_dump(patch: PatchLayout) -> str:
    """Plain-text description of qubits, checks and schedules."""
    lines = [f"family {patch.spec.family} d {patch.spec.d}"]
    lines.append(f"data {patch.n_data}")
    for i, c in enumerate(patch.data_coords):
        lines.append(f"  q{i} {c[0]} {c[1]}")
    lines.append(f"ancilla {len(patch.ancilla_coords)}")
    for i, c in enumerate(patch.ancilla_coords):
        lines.append(f"  q{patch.n_data + i} {c[0]} {c[1]}")
    lines.append(f"checks {len(patch.checks)}")
    for c in patch.checks:
        sched = ",".join(str(s) for s in c.schedule)
        anc = "-" if c.ancilla is None else f"q{c.ancilla}"
        lines.append(f"  {c.basis} anc={anc} support={','.join(map(str, c.support))} schedule={sched}")
    if patch.gauge_ops:
        lines.append(f"gauges {len(patch.gauge_ops)}")
        for b, (q0, q1) in patch.gauge_ops:
            lines.append(f"  {b}{b} {q0} {q1}")
    lines.append(f"logical_x {patch.logical_x}")
    lines.append(f"logical_z {patch.logical_z}")
    return "\n".join(lines) + "\n"

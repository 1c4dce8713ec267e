"""Lattice-surgery merge/split producing a logical Bell pair from two patches.

Geometry: patch A on the left, patch B on the right, and for surface codes
a seam column of auxiliary data qubits between them.  All data start in the
eigenstate of the non-seam basis, so both patches begin in a logical
eigenstate of the row-type logical.  The merged rounds measure the
column-type joint logical (X_L1 X_L2 for an X seam) as the product of the new
seam checks; measuring the seam qubits out splits the patches again and
fixes the row-type product (Z_L1 Z_L2) up to the sign ``b`` read from the
seam qubit on the logical's row.

Byproducts are never applied as gates.  They enter the logical observables
as extra record indices and, for single runs, through :func:`apply_byproduct`
on a :class:`LogicalFrame`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .builder import Experiment, ExperimentBuilder
from .codes import (
    CodeSpec,
    GateTimes,
    LogicalFrame,
    PatchLayout,
    baconshor_data,
    baconshor_gauges,
    baconshor_stabilizers,
    other,
    planar_checks,
    planar_data,
    rotated_checks,
    rotated_data,
)
from .stabilizer import Circuit
from .stabilizer.binding import ConfigurationError


@dataclass(frozen=True)
class MergeConfig:
    boundary: str = "X"
    cycles: int | None = None  # merged syndrome rounds; None means d
    settle_rounds: int = 1

    def __post_init__(self):
        if self.boundary not in ("X", "Z"):
            raise ConfigurationError(f"boundary must be X or Z, got {self.boundary!r}")
        if self.cycles is not None and self.cycles < 1:
            raise ConfigurationError("cycles must be >= 1")
        if self.settle_rounds < 0:
            raise ConfigurationError("settle_rounds must be >= 0")

    @property
    def aux_init_basis(self) -> str:
        """|0> for an X seam, |+> for a Z seam."""
        return "0" if self.boundary == "X" else "+"

    def merged_rounds(self, d: int) -> int:
        return (self.cycles if self.cycles is not None else d) + self.settle_rounds


@dataclass(frozen=True)
class ByproductPlan:
    seam_basis: str
    m_records: tuple[int, ...]
    b_records: tuple[int, ...]
    aux_records: tuple[int, ...]
    patch: str = "B"

    @property
    def m_correction(self) -> str:
        """Logical Pauli that fixes a -1 joint seam-type measurement."""
        return other(self.seam_basis)

    @property
    def b_correction(self) -> str:
        """Logical Pauli that fixes a -1 row-type product after the split."""
        return self.seam_basis


@dataclass
class MergeOutcome:
    b_i: list[int]
    m: int = 1

    @property
    def b(self) -> int:
        return -1 if sum(self.b_i) % 2 else 1

    @classmethod
    def from_records(cls, plan: ByproductPlan, bits) -> MergeOutcome:
        bits = np.asarray(bits)
        m = -1 if int(bits[list(plan.m_records)].sum()) % 2 else 1
        return cls([int(bits[i]) for i in plan.b_records], m)


def apply_byproduct(frame: LogicalFrame, outcome: MergeOutcome, plan: ByproductPlan) -> LogicalFrame:
    """Record the logical corrections implied by ``outcome`` on ``plan.patch``."""
    if outcome.b_i is None or len(outcome.b_i) != len(plan.b_records):
        raise ValueError("outcome bits do not match the byproduct plan")
    out = frame.copy()
    for sign, pauli in ((outcome.b, plan.b_correction), (outcome.m, plan.m_correction)):
        if sign == -1:
            target = out.x if pauli == "X" else out.z
            target[plan.patch] ^= 1
    return out


@dataclass
class TwoPatchGeometry:
    family: str
    d: int
    seam_basis: str
    data_a: list
    data_b: list
    seam: list
    merged_checks: list = field(default_factory=list)
    separate_checks: list = field(default_factory=list)
    merged_gauges: list = field(default_factory=list)
    separate_gauges: list = field(default_factory=list)
    row_a: list = field(default_factory=list)
    row_b: list = field(default_factory=list)
    row_seam: list = field(default_factory=list)
    link_qubits: list = field(default_factory=list)

    @property
    def all_data(self) -> list:
        return self.data_a + self.seam + self.data_b


def two_patch_geometry(family: str, d: int, seam: str = "X") -> TwoPatchGeometry:
    if family == "RotatedSurface":
        a, s_cols, b = (0, d - 1), d, (d + 1, 2 * d)
        g = TwoPatchGeometry(
            family, d, seam,
            rotated_data(*a, d), rotated_data(*b, d), [(2 * s_cols, 2 * r) for r in range(d)],
        )
        g.merged_checks = rotated_checks(0, 2 * d, d, seam)
        g.separate_checks = rotated_checks(*a, d, seam) + rotated_checks(*b, d, seam)
    elif family == "PlanarSurface":
        h = 2 * d - 1
        a, b = (0, 2 * d - 2), (2 * d, 4 * d - 2)
        g = TwoPatchGeometry(
            family, d, seam,
            planar_data(*a, h), planar_data(*b, h), [(2 * d - 1, y) for y in range(1, h, 2)],
        )
        g.merged_checks = planar_checks(0, 4 * d - 2, h, seam)
        g.separate_checks = planar_checks(*a, h, seam) + planar_checks(*b, h, seam)
    elif family == "BaconShor":
        if seam != "X":
            raise ConfigurationError("Bacon-Shor merge is implemented for an X boundary only")
        g = TwoPatchGeometry(family, d, seam, baconshor_data(0, d - 1, d), baconshor_data(d, 2 * d - 1, d), [])
        g.merged_gauges = baconshor_gauges(0, 2 * d - 1, d)
        g.separate_gauges = baconshor_gauges(0, d - 1, d) + baconshor_gauges(d, 2 * d - 1, d)
        g.merged_checks = baconshor_stabilizers(0, 2 * d - 1, d)
        g.separate_checks = baconshor_stabilizers(0, d - 1, d) + baconshor_stabilizers(d, 2 * d - 1, d)
    else:
        raise ConfigurationError(f"unknown family {family!r}")
    g.row_a = [c for c in g.data_a if c[1] == 0]
    g.row_b = [c for c in g.data_b if c[1] == 0]
    g.row_seam = [c for c in g.seam if c[1] == 0]
    if family == "BaconShor":
        g.link_qubits = [c for c in g.data_b if c[0] == d]
    else:
        g.link_qubits = list(g.seam)
    return g


def _new_seam_items(g: TwoPatchGeometry):
    """Merged seam-type checks (or gauges) that do not exist on the separate patches."""
    if g.family == "BaconShor":
        old = set(g.separate_gauges)
        return [x for x in g.merged_gauges if x not in old and x.basis == g.seam_basis]
    old = {(c.key, c.basis, c.support) for c in g.separate_checks}
    return [c for c in g.merged_checks if c.basis == g.seam_basis and (c.key, c.basis, c.support) not in old]


def _support_product(items) -> frozenset:
    acc: set = set()
    for x in items:
        acc ^= set(x.support) if hasattr(x, "support") else set(x.pair)
    return frozenset(acc)


def build_bell_experiment(
    spec: CodeSpec,
    config: MergeConfig | None = None,
    gate_times: GateTimes | None = None,
    *,
    gen_rounds: int = 1,
    m1: int = 1,
    transfer_time: float = 0.0,
    merge_wait: float = 0.0,
    link_noise: bool = False,
) -> Experiment:
    """Prepare, merge for ``cycles + settle_rounds`` rounds, split, then idle/store and read out.

    ``transfer_time`` inserts one idle of that length after the generation
    rounds (data in transit).  ``merge_wait`` idles every active qubit before
    each merged round and ``link_noise`` adds a zero-length Idle tagged
    ``link`` on the seam qubits at the same point; both model the auxiliary
    Bell-pair supply of the non-local protocol.
    """
    config = config or MergeConfig()
    times = gate_times or GateTimes()
    g = two_patch_geometry(spec.family, spec.d, config.boundary)
    seam, low = g.seam_basis, other(g.seam_basis)
    b = ExperimentBuilder(times)
    b.qubits(g.data_a + g.seam + g.data_b)
    b.prepare(g.all_data, low)
    n_rounds = config.merged_rounds(spec.d)
    new_items = _new_seam_items(g)
    m_support = _support_product(new_items)
    if m_support & set(g.seam):
        raise RuntimeError("joint logical support touches the seam")
    m_records: tuple[int, ...] = ()
    b_records: list[int] = []
    aux_records: list[int] = []
    bs = spec.family == "BaconShor"
    for k in range(1, n_rounds + 1):
        if merge_wait > 0:
            b.idle([], merge_wait, "wait")
        if link_noise and g.link_qubits:
            b.idle(g.link_qubits, 0.0, "link")
        tag = f"merge.cycle.{k}"
        if bs:
            b.baconshor_round(g.merged_gauges, g.merged_checks, tag, g.all_data)
            if k == 1:
                m_records = tuple(b.prev_gauges[x] for x in new_items)
            continue
        out = []
        if k == n_rounds:
            out = [(c, low, f"split.aux.{i}") for i, c in enumerate(g.seam)]
        recs = b.surface_round(g.merged_checks, tag, g.all_data, out)
        if k == 1:
            pos = {c.key: i for i, c in enumerate(g.merged_checks)}
            m_records = tuple(recs[pos[c.key]] for c in new_items)
        if out:
            aux = recs[len(g.merged_checks):]
            aux_records = list(aux)
            b_records = [r for c, r in zip(g.seam, aux) if c in g.row_seam]
    data = g.data_a + g.data_b
    rounds = [("gen.cycle", i) for i in range(gen_rounds)]
    for j, (tag, _) in enumerate(rounds):
        _patch_round(b, g, f"{tag}.{j + 1}" if gen_rounds > 1 else tag, data)
    if transfer_time > 0:
        b.idle([], transfer_time, "transfer")
    for j in range(m1):
        _patch_round(b, g, f"mem.cycle.{j + 1}", data)
    final = [(c.basis, frozenset(c.support)) for c in g.separate_checks]
    col_name = "xx" if seam == "X" else "zz"
    row_name = "zz" if seam == "X" else "xx"
    logicals = {
        row_name: (low, g.row_a + g.row_b, tuple(b_records)),
        col_name: (seam, sorted(m_support), m_records),
    }
    logicals = {k: logicals[k] for k in ("zz", "xx")}
    plan = ByproductPlan(seam, m_records, tuple(b_records), tuple(aux_records))
    meta = {
        "family": spec.family,
        "d": spec.d,
        "boundary": seam,
        "merged_rounds": n_rounds,
        "gen_rounds": gen_rounds,
        "m1": m1,
        "transfer_time": transfer_time,
        "merge_wait": merge_wait,
    }
    groups = {"A": g.data_a, "B": g.data_b, "seam": g.seam, "link": g.link_qubits}
    return b.finalize(data, final, logicals, groups, meta, plan)


def _patch_round(b: ExperimentBuilder, g: TwoPatchGeometry, tag: str, data) -> None:
    if g.family == "BaconShor":
        b.baconshor_round(g.separate_gauges, g.separate_checks, tag, data)
    else:
        b.surface_round(g.separate_checks, tag, data)


def _check_pair(patch_a: PatchLayout, patch_b: PatchLayout) -> CodeSpec:
    if patch_a.spec != patch_b.spec:
        raise ConfigurationError("patches must share family and distance")
    return patch_a.spec


def build_merge_split(
    patch_a: PatchLayout,
    patch_b: PatchLayout,
    config: MergeConfig | None = None,
    gate_times: GateTimes | None = None,
) -> tuple[Circuit, ByproductPlan]:
    """Merge/split circuit for two surface-code patches, no storage rounds."""
    spec = _check_pair(patch_a, patch_b)
    if spec.family == "BaconShor":
        raise ConfigurationError("use build_baconshor_merge for Bacon-Shor patches")
    exp = build_bell_experiment(spec, config, gate_times, gen_rounds=0, m1=0)
    return exp.circuit, exp.plan


def build_baconshor_merge(
    patch_a: PatchLayout,
    patch_b: PatchLayout,
    config: MergeConfig | None = None,
    gate_times: GateTimes | None = None,
) -> tuple[Circuit, ByproductPlan]:
    """Merge through XX gauges across the shared boundary; no seam qubits, so b is trivial."""
    spec = _check_pair(patch_a, patch_b)
    if spec.family != "BaconShor":
        raise ConfigurationError("build_baconshor_merge expects Bacon-Shor patches")
    exp = build_bell_experiment(spec, config, gate_times, gen_rounds=0, m1=0)
    return exp.circuit, exp.plan


def merge_duration(spec: CodeSpec, config: MergeConfig | None = None, gate_times: GateTimes | None = None) -> float:
    from .codes import cycle_time

    config = config or MergeConfig()
    return config.merged_rounds(spec.d) * cycle_time(spec.family, gate_times or GateTimes())

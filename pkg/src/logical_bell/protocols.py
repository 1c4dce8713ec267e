"""Protocol engine: time budgets, the auxiliary-pair scheduler and trials.

Protocol 1 builds the logical pair locally and ships every data qubit over a
multimode fiber; one lost qubit aborts the trial.  Protocol 2 keeps the
patches in the end-node memories and merges them through auxiliary Bell
pairs, regenerating a pair set whenever a capture window comes up short.

Trials are batched: timing is drawn per trial, logical errors come from one
frame-simulator batch over a shared experiment whose waits use the mean
scheduler delay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .codes import CodeSpec, GateTimes, cycle_time, build_patch, syndrome_cycle
from .decoders import MatchingDecoder, build_detector_graph
from .noise import (
    DepolarizingParams,
    ExtraNoise,
    PhysicalParams,
    bind_depolarizing,
    bind_physical,
    compose_channels,
    idle_channel,
    readout_channel,
)
from .photonics import FiberLink, LinkBudget, QNDMSetting, link_budget
from .stabilizer.binding import ConfigurationError
from .stabilizer.channels import NoiseChannel, depolarizing, sample_codes
from .stabilizer.frame import FrameSimulator, compile_program
from .surgery import MergeConfig, build_bell_experiment

PROTOCOL_TAU = {1: 0.70, 2: 0.17}
SUCCESS, ABORTED = "Success", "Aborted"


# -- time budget --------------------------------------------------------------

@dataclass(frozen=True)
class TimeBudget:
    t_cycle: float
    t_merge: float
    t_trav: float
    t_total: float

    def formatted(self, digits: int = 3) -> dict[str, str]:
        return {k: f"{v:.{digits - 1}e}" for k, v in self.__dict__.items()}


def compute_time_budget(
    code: CodeSpec,
    protocol: int,
    D: float = 1.0,
    gate_times: GateTimes | None = None,
    t_transfer: float = 100e-6,
    r_glass: float = 1.44,
) -> TimeBudget:
    """One generation plus one memory cycle.

    t_total = t_merge + 2 t_cycle + t_transfer + t_trav; Protocol 2 pays the
    fiber latency once per merged seam pair, d times in total.
    """
    if protocol not in (1, 2):
        raise ConfigurationError("protocol must be 1 or 2")
    t_cycle = cycle_time(code.family, gate_times or GateTimes())
    t_merge = (code.d + 1) * t_cycle
    latency = FiberLink(D, r_glass=r_glass).latency
    t_trav = latency if protocol == 1 else code.d * latency
    return TimeBudget(t_cycle, t_merge, t_trav, t_merge + 2 * t_cycle + t_transfer + t_trav)


def time_budget_table(D: float = 1.0, gate_times: GateTimes | None = None, t_transfer: float = 100e-6):
    """The four protocol/code rows at d = 3, surface rows shared by both lattices."""
    rows = []
    for protocol in (1, 2):
        for label, family in (("S[[18,2,3]]", "RotatedSurface"), ("BS[[18,2,3]]", "BaconShor")):
            tb = compute_time_budget(CodeSpec(family, 3), protocol, D, gate_times, t_transfer)
            rows.append({"protocol": protocol, "code": label, **tb.__dict__})
    return rows


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    model: str = "physical"  # physical | depolarizing | none
    p_err: float = 1e-3
    physical: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self):
        if self.model not in ("physical", "depolarizing", "none"):
            raise ConfigurationError(f"unknown noise model {self.model!r}")
        DepolarizingParams(self.p_err)


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: int = 2
    code: CodeSpec = field(default_factory=lambda: CodeSpec("RotatedSurface", 3))
    D: float = 1.0
    m1: int = 1
    t_rangeQ: float = 400e-6
    t_transfer: float = 100e-6
    t_qndm: float = 10e-6
    t_readout: float = 1e-6
    f_source: float = 33e6
    tau: float | None = None
    r_glass: float = 1.44
    eta_conv: float = 0.9
    p_trs: float = 0.5
    p_dark: float = 0.03
    qndm: QNDMSetting = field(default_factory=QNDMSetting)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    boundary: str = "X"
    aux_pairs: str = "per-cycle"  # per-cycle | once
    herald_override: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.protocol not in (1, 2):
            raise ConfigurationError("protocol must be 1 or 2")
        if self.m1 < 0:
            raise ConfigurationError("m1 must be >= 0")
        if min(self.t_rangeQ, self.f_source) <= 0 or min(self.t_transfer, self.t_qndm, self.t_readout) < 0:
            raise ConfigurationError("times must be non-negative and the window positive")
        if self.aux_pairs not in ("per-cycle", "once"):
            raise ConfigurationError("aux_pairs must be 'per-cycle' or 'once'")
        if self.herald_override is not None and not 0 <= self.herald_override <= 1:
            raise ConfigurationError("herald_override must lie in [0, 1]")
        if self.code.family == "BaconShor" and self.boundary != "X":
            raise ConfigurationError("Bacon-Shor merges use the X boundary")

    @property
    def link(self) -> FiberLink:
        return FiberLink(self.D, self.tau if self.tau is not None else PROTOCOL_TAU[self.protocol], self.r_glass)

    @property
    def budget(self) -> LinkBudget:
        return link_budget(self.link, self.qndm, self.eta_conv, self.p_trs, self.p_dark)

    @property
    def time_budget(self) -> TimeBudget:
        return compute_time_budget(self.code, self.protocol, self.D, self.noise.physical.gate_times, self.t_transfer, self.r_glass)

    def ideal(self) -> ProtocolConfig:
        """Every stage lossless, no dark counts and no noise."""
        return replace(self, herald_override=1.0, p_dark=0.0, noise=NoiseSpec("none"))


# -- heralding and scheduler --------------------------------------------------

@dataclass(frozen=True)
class Heralding:
    """Per-attempt statistics of one photon (Protocol 1) or one pair (Protocol 2)."""

    p_end: float  # one photon heralded (real or dark) and transferred
    p_dark_given_herald: float
    slot: float  # one QNDM attempt including the wait for the next pulse
    slots_per_window: int

    @property
    def p_pair(self) -> float:
        return self.p_end**2

    @property
    def p_pair_faulty(self) -> float:
        """A ready pair with at least one dark-count half."""
        return 1.0 - (1.0 - self.p_dark_given_herald) ** 2


def heralding(config: ProtocolConfig) -> Heralding:
    slot = config.t_qndm + config.t_readout + 1.0 / config.f_source
    k = int(math.floor(config.t_rangeQ / slot * (1 + 1e-12)))
    if config.herald_override is not None:
        return Heralding(config.herald_override, 0.0, slot, k)
    lb = config.budget
    real = lb.eta_channel * lb.eta_conv * lb.p_qndm_detect * lb.p_qndm_transmit
    dark = (1.0 - real) * config.p_dark
    seen = real + dark
    return Heralding(seen * lb.p_trs, dark / seen if seen > 0 else 0.0, slot, k)


@dataclass
class SchedulerState:
    window_deadline: float = 0.0
    acquired: int = 0
    qndm_busy_until: float = 0.0
    retries: int = 0


def run_window(h: Heralding, rng: np.random.Generator, state: SchedulerState | None = None, start: float = 0.0):
    """Event-by-event capture window: the QNDM watches one pulse at a time
    and stays busy for the readout; returns the ready times inside the window."""
    state = state or SchedulerState()
    state.window_deadline = start + h.slots_per_window * h.slot
    state.acquired = 0
    ready = []
    t = start
    while t + h.slot <= state.window_deadline * (1 + 1e-12):
        state.qndm_busy_until = t + h.slot
        if rng.random() < h.p_pair:
            ready.append(state.qndm_busy_until - start)
            state.acquired += 1
        t = state.qndm_busy_until
    return ready, state


def window_counts(config: ProtocolConfig, n_windows: int, rng: np.random.Generator) -> np.ndarray:
    """Ready auxiliary pairs per capture window, uncapped."""
    h = heralding(config)
    return rng.binomial(h.slots_per_window, h.p_pair, size=n_windows)


@dataclass(frozen=True)
class Acquisition:
    n_ready: int
    elapsed: float
    retries: int
    faulty: int


class Acquirer:
    """Repeated acquisitions of ``needed`` pairs under one configuration.

    The number of failed windows is geometric, so very lossy links cost one
    draw instead of a loop.  The last window's count is drawn conditioned on
    reaching ``needed``, then its ready slots are placed uniformly.
    """

    def __init__(self, config: ProtocolConfig, needed: int):
        from scipy import stats  # deferred: scipy.stats dominates CLI start-up

        self.config = config
        self.needed = needed
        self.h = heralding(config)
        k = self.h.slots_per_window
        self.p_win = float(stats.binom.sf(needed - 1, k, self.h.p_pair)) if needed > 0 else 1.0
        self.counts = np.arange(needed, k + 1)
        pmf = stats.binom.pmf(self.counts, k, self.h.p_pair)
        self.pmf = pmf / pmf.sum() if pmf.sum() > 0 else pmf

    def draw(self, rng: np.random.Generator) -> Acquisition:
        needed, h = self.needed, self.h
        if needed == 0:
            return Acquisition(0, 0.0, 0, 0)
        if self.p_win <= 0.0:
            return Acquisition(0, self.config.t_rangeQ, 1, 0)
        retries = int(rng.geometric(self.p_win)) - 1
        c = int(rng.choice(self.counts, p=self.pmf))
        slots = np.sort(rng.choice(h.slots_per_window, size=c, replace=False))
        elapsed = retries * self.config.t_rangeQ + (slots[needed - 1] + 1) * h.slot
        faulty = int(rng.binomial(needed, h.p_pair_faulty))
        return Acquisition(c, elapsed, retries, faulty)


def scheduler_acquire(config: ProtocolConfig, needed: int, rng: np.random.Generator) -> Acquisition:
    """Gather ``needed`` ready pairs, regenerating the set after a short window.

    If no window can ever succeed the result reports the single failed
    window with n_ready = 0.
    """
    return Acquirer(config, needed).draw(rng)


# -- trials -------------------------------------------------------------------

@dataclass(frozen=True)
class TrialOutcome:
    status: str
    zz_error: int | None
    xx_error: int | None
    wall_time: float
    aborts: int = 0
    retries: int = 0


@dataclass
class TrialBatch:
    success: np.ndarray
    zz: np.ndarray
    xx: np.ndarray
    wall_time: np.ndarray
    retries: np.ndarray

    def __len__(self) -> int:
        return len(self.success)

    def outcome(self, i: int) -> TrialOutcome:
        ok = bool(self.success[i])
        return TrialOutcome(
            SUCCESS if ok else ABORTED,
            int(self.zz[i]) if ok else None,
            int(self.xx[i]) if ok else None,
            float(self.wall_time[i]),
            0 if ok else 1,
            int(self.retries[i]),
        )

    @property
    def rate(self) -> float:
        return float(self.success.sum() / self.wall_time.sum())


def _depolarize_fully(f: float) -> NoiseChannel:
    """Replace the qubit by the maximally mixed state with probability f."""
    return depolarizing(0.75 * f, 1)


class ErrorSampler:
    """Shared experiment, noise binding and decoder for a batch of trials."""

    def __init__(self, config: ProtocolConfig, merge_wait: float = 0.0, transfer_time: float = 0.0, tagged=None):
        self.config = config
        noise = config.noise
        tagged = dict(tagged or {})
        self.experiment = build_bell_experiment(
            config.code,
            MergeConfig(boundary=config.boundary),
            noise.physical.gate_times,
            m1=config.m1,
            transfer_time=transfer_time,
            merge_wait=merge_wait,
            link_noise="link" in tagged,
        )
        extra = ExtraNoise(tagged)
        if noise.model == "none":
            self.binding = None
        elif noise.model == "depolarizing":
            self.binding = bind_depolarizing(self.experiment.circuit, DepolarizingParams(noise.p_err), extra)
        else:
            self.binding = bind_physical(self.experiment.circuit, noise.physical, extra)
        self.program = compile_program(self.experiment.circuit, self.binding, self.experiment.final_checks)

    @cached_property
    def decoder(self) -> MatchingDecoder:
        return MatchingDecoder(build_detector_graph(self.experiment, self.binding))

    def sample(self, shots: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Decoded logical (zz, xx) error bits."""
        if shots == 0:
            return np.zeros(0, np.uint8), np.zeros(0, np.uint8)
        sim = FrameSimulator(self.program)
        if self.binding is None:
            ref = self.experiment.reference_records(int(rng.integers(2**31)))
            rec, _, _ = sim.run(shots, rng, exact=True)
            det, obs = self.experiment.evaluate(rec ^ ref[:, None])
            # noiseless: detectors must be silent, so the raw observable is the error
            if det.any():
                raise RuntimeError("noiseless run fired a detector")
            err = obs.astype(np.uint8)
        else:
            rec, _, _ = sim.run(shots, rng)
            det, obs = self.experiment.evaluate(rec)
            err = obs.T.astype(np.uint8) ^ self.decoder.decode_batch(det.T)
            err = err.T
        return err[0], err[1]


def _protocol1_noise(config: ProtocolConfig, h: Heralding):
    tb = config.time_budget
    transit = config.t_transfer + tb.t_trav
    if config.noise.model != "physical":
        return transit, {}
    p = config.noise.physical
    ch = compose_channels(idle_channel(transit, p.T1, p.T2), _depolarize_fully(h.p_dark_given_herald))
    return transit, {"transfer": ch}


def run_protocol1_trials(config: ProtocolConfig, n: int, rng: np.random.Generator, score: bool = True) -> TrialBatch:
    if config.protocol != 1:
        config = replace(config, protocol=1)
    h = heralding(config)
    tb = config.time_budget
    n_data = 2 * build_patch(config.code).n_data
    lost = rng.binomial(n_data, 1.0 - h.p_end, size=n)
    success = lost == 0
    wall = np.where(success, tb.t_total, tb.t_merge + tb.t_cycle + tb.t_trav)
    zz = np.zeros(n, np.uint8)
    xx = np.zeros(n, np.uint8)
    k = int(success.sum())
    if score and k:
        transit, tagged = _protocol1_noise(config, h)
        a, b = ErrorSampler(config, transfer_time=transit, tagged=tagged).sample(k, rng)
        zz[success], xx[success] = a, b
    return TrialBatch(success, zz, xx, wall, np.zeros(n, np.int64))


def _acquisitions(config: ProtocolConfig) -> tuple[int, int]:
    """(number of acquisitions per trial, pairs needed per acquisition)."""
    g_link = build_bell_experiment(config.code, MergeConfig(boundary=config.boundary)).qubits["link"]
    rounds = MergeConfig(boundary=config.boundary).merged_rounds(config.code.d)
    needed = len(g_link)
    return (rounds, needed) if config.aux_pairs == "per-cycle" else (1, needed * rounds)


def run_protocol2_trials(config: ProtocolConfig, n: int, rng: np.random.Generator, score: bool = True) -> TrialBatch:
    if config.protocol != 2:
        config = replace(config, protocol=2)
    h = heralding(config)
    tb = config.time_budget
    n_acq, needed = _acquisitions(config)
    if h.p_pair == 0.0:
        raise ConfigurationError("no auxiliary pair can ever be heralded")
    wall = np.full(n, tb.t_total)
    retries = np.zeros(n, np.int64)
    waits = []
    acquirer = Acquirer(config, needed)
    for i in range(n):
        for _ in range(n_acq):
            acq = acquirer.draw(rng)
            wall[i] += acq.elapsed
            retries[i] += acq.retries
            waits.append(acq.elapsed - acq.retries * config.t_rangeQ)
    success = np.ones(n, bool)
    zz = np.zeros(n, np.uint8)
    xx = np.zeros(n, np.uint8)
    if score:
        wait = float(np.mean(waits)) if waits else 0.0
        tagged = {}
        if config.noise.model != "none":
            ch = _depolarize_fully(h.p_pair_faulty)
            if config.noise.model == "physical":
                p = config.noise.physical
                ch = compose_channels(idle_channel(wait + config.t_transfer, p.T1, p.T2), ch)
            tagged["link"] = ch
        merge_wait = wait if config.noise.model == "physical" else 0.0
        zz, xx = ErrorSampler(config, merge_wait=merge_wait, tagged=tagged).sample(n, rng)
    return TrialBatch(success, zz, xx, wall, retries)


def run_protocol_trials(config: ProtocolConfig, n: int, rng: np.random.Generator, score: bool = True) -> TrialBatch:
    runner = run_protocol1_trials if config.protocol == 1 else run_protocol2_trials
    return runner(config, n, rng, score)


def run_protocol1_trial(config: ProtocolConfig, rng: np.random.Generator | None = None) -> TrialOutcome:
    rng = rng or np.random.default_rng(config.seed)
    return run_protocol1_trials(config, 1, rng).outcome(0)


def run_protocol2_trial(config: ProtocolConfig, rng: np.random.Generator | None = None) -> TrialOutcome:
    rng = rng or np.random.default_rng(config.seed)
    return run_protocol2_trials(config, 1, rng).outcome(0)


def protocol_rate(config: ProtocolConfig, trials: int, rng: np.random.Generator) -> float:
    """Completed logical pairs per second of simulated wall time."""
    return run_protocol_trials(config, trials, rng, score=False).rate


# -- unencoded baseline -------------------------------------------------------

@dataclass(frozen=True)
class BaselineConfig:
    """A physical Bell pair stored for ``cycles`` syndrome cycles of ``family``.

    Depolarizing model: one idle channel per timed layer per qubit.
    Physical model: T1/T2 over the stored time plus a readout flip.
    """

    family: str = "RotatedSurface"
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec("depolarizing"))
    cycles: int = 1
    extra: NoiseChannel | None = None  # per-qubit link channel, if any

    def __post_init__(self):
        if self.cycles < 0:
            raise ConfigurationError("cycles must be >= 0")

    def layer_durations(self) -> list[float]:
        plan = syndrome_cycle(build_patch(CodeSpec(self.family, 3)), self.noise.physical.gate_times)
        return [layer.duration for layer in plan.layers if layer.duration > 0]

    def qubit_channels(self) -> list[NoiseChannel]:
        out = [] if self.extra is None else [self.extra]
        if self.noise.model == "depolarizing":
            out += [depolarizing(self.noise.p_err, 1)] * (len(self.layer_durations()) * self.cycles)
        elif self.noise.model == "physical":
            p = self.noise.physical
            t = self.cycles * sum(self.layer_durations())
            out += [idle_channel(t, p.T1, p.T2), readout_channel(p.gate_probabilities()["M"])]
        return out


def _net_channel(channels: list[NoiseChannel]) -> np.ndarray:
    acc = np.array([1.0, 0.0, 0.0, 0.0])
    for ch in channels:
        nxt = np.zeros(4)
        for i in range(4):
            for j in range(4):
                nxt[i ^ j] += acc[i] * ch.probs[j]
        acc = nxt
    return acc


def baseline_error_exact(config: BaselineConfig) -> dict[str, float]:
    """Exact ZZ, XX and any-error probabilities.

    On |Phi+> a Pauli on either half acts the same, so the pair error is the
    XOR of the two per-qubit Pauli codes (bit 0 = X flips ZZ, bit 1 = Z flips XX).
    """
    q = _net_channel(config.qubit_channels())
    pair = np.zeros(4)
    for i in range(4):
        for j in range(4):
            pair[i ^ j] += q[i] * q[j]
    return {"zz": float(pair[1] + pair[3]), "xx": float(pair[2] + pair[3]), "any": float(1.0 - pair[0])}


def run_unencoded_baseline(config: BaselineConfig, shots: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sampled (zz, xx) error bits of the stored physical pair."""
    code = np.zeros(shots, np.int64)
    for ch in config.qubit_channels():
        for _ in range(2):
            code ^= sample_codes(ch, shots, rng).astype(np.int64)
    return (code & 1).astype(np.uint8), ((code >> 1) & 1).astype(np.uint8)

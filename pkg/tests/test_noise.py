import math
from fractions import Fraction

import numpy as np
import pytest

from logical_bell.codes import CodeSpec, GateTimes, build_patch, syndrome_cycle
from logical_bell.noise import (
    READOUT_TAG,
    DepolarizingParams,
    ExtraNoise,
    PhysicalParams,
    bind_depolarizing,
    bind_physical,
    idle_channel,
    idle_probabilities,
    readout_channel,
    transpile_parity_measurement,
)
from logical_bell.stabilizer import (
    Circuit,
    ConfigurationError,
    PauliString,
    StabilizerState,
    depolarizing,
    flip,
    gate,
)
from logical_bell.stabilizer.channels import NoiseChannel, exact_depolarizing_weights
from logical_bell.stabilizer.tableau import run_tableau


def compose(a: NoiseChannel, b: NoiseChannel) -> np.ndarray:
    """Single-qubit Pauli channels compose by XOR-convolving their component codes."""
    out = np.zeros(4)
    for i, pa in enumerate(a.probs):
        for j, pb in enumerate(b.probs):
            out[i ^ j] += pa * pb
    return out


@pytest.mark.parametrize("p", ["1/1000", "1/3", "7/10", "0", "1"])
@pytest.mark.parametrize("arity", [1, 2])
def test_exact_kraus_weights_sum_to_one(p, arity):
    assert sum(exact_depolarizing_weights(p, arity)) == 1


@pytest.mark.parametrize(
    "channel",
    [depolarizing(1e-3, 1), depolarizing(8.3e-3, 2), flip(7.7e-3), readout_channel(7.7e-3), idle_channel(4.31e-3, 3.0, 0.5)],
)
def test_float_channels_are_normalised(channel):
    assert math.fsum(channel.probs) == pytest.approx(1.0, abs=2**-52)
    assert all(p >= 0 for p in channel.probs)


def test_unnormalised_channel_rejected():
    with pytest.raises(ValueError):
        NoiseChannel("pauli", 1, (0.5, 0.1, 0.1, 0.1))


def test_two_qubit_marginal_is_twelve_fifteenths():
    w = exact_depolarizing_weights("1/100", 2)
    # component code bits 0-1 belong to the first qubit
    hit = sum(p for code, p in enumerate(w) if code & 3)
    assert hit == Fraction(12, 15) * Fraction(1, 100)


@pytest.mark.parametrize("t1,t2", [(1e-3, 2e-3), (4.31e-3, 8.88e-3), (0.1, 0.37), (1.0, 2.5)])
def test_idle_semigroup(t1, t2):
    a = idle_channel(t1, 3.0, 0.5)
    b = idle_channel(t2, 3.0, 0.5)
    both = np.array(idle_channel(t1 + t2, 3.0, 0.5).probs)
    assert 0.5 * np.abs(compose(a, b) - both).sum() < 1e-6


def test_idle_channel_decay_rates():
    t, T1, T2 = 0.02, 3.0, 0.5
    p0, px, pz, py = idle_channel(t, T1, T2).probs
    # Pauli-channel eigenvalues: Z-eigenvalue = T1 decay, X and Y eigenvalues = T2 decay
    assert 1 - 2 * (px + py) == pytest.approx(math.exp(-t / T1), rel=1e-12)
    assert 1 - 2 * (py + pz) == pytest.approx(math.exp(-t / T2), rel=1e-12)
    assert 1 - 2 * (px + pz) == pytest.approx(math.exp(-t / T2), rel=1e-12)


def test_infinite_coherence_is_noiseless():
    px, py, pz = idle_probabilities(1.0, math.inf, math.inf)
    assert px == py == pz == 0.0


def test_bad_coherence_times():
    with pytest.raises(ConfigurationError):
        PhysicalParams(T1=1.0, T2=2.5)
    with pytest.raises(ConfigurationError):
        idle_probabilities(-1.0, 3.0, 0.5)
    with pytest.raises(ConfigurationError):
        idle_probabilities(1.0, 1.0, 10.0)


def test_xi_scales_gate_errors_only():
    base = PhysicalParams()
    scaled = base.scaled(2.0)
    for k, v in base.gate_probabilities().items():
        assert scaled.gate_probabilities()[k] == pytest.approx(2 * v)
    assert (scaled.T1, scaled.T2) == (base.T1, base.T2)
    with pytest.raises(ConfigurationError):
        base.scaled(200.0)


def test_readout_channel_flip_probability():
    p = 0.013
    _, px, pz, py = readout_channel(p).probs
    # a Z readout flips on X or Y, an X readout on Z or Y
    assert px + py == pytest.approx(p)
    assert pz + py == pytest.approx(p)


def _simple_circuit():
    c = Circuit(3)
    c.add_layer([gate("H", 0, duration=1.0)], 1.0)
    c.add_layer([gate("CX", 0, 1, duration=2.0)], 2.0)
    c.add_layer([gate("MeasureZ", 1, duration=1.0)], 1.0)
    return c.fill_idles()


def test_depolarizing_binding_placement():
    c = _simple_circuit()
    b = bind_depolarizing(c, DepolarizingParams(1e-3))
    by_kind = {}
    for ins, entry in zip(c.instructions(), b.entries):
        by_kind.setdefault(ins.kind, []).append(entry)
    (h,) = by_kind["H"][0]
    assert h.channel.arity == 1 and h.placement == "after"
    (cx,) = by_kind["CX"][0]
    assert cx.channel.arity == 2 and cx.qubits == (0, 1)
    (m,) = by_kind["MeasureZ"][0]
    assert m.placement == "before"
    # one idle channel per untouched qubit per layer: 2 + 1 + 2
    assert sum(len(e) for e in by_kind["Idle"]) == 5


def test_depolarizing_grouped_parity_measurement():
    plan = syndrome_cycle(build_patch(CodeSpec("BaconShor", 3)))
    b = bind_depolarizing(plan.circuit, DepolarizingParams(1e-3))
    instrs = list(plan.circuit.instructions())
    pairs = [e for ins, entry in zip(instrs, b.entries) for e in entry if e.channel.arity == 2]
    # one native two-qubit channel per gauge, placed ahead of the fragment
    assert len(pairs) == 12
    assert all(e.placement == "before" for e in pairs)
    for ins, entry in zip(instrs, b.entries):
        if ins.kind in ("H", "MeasureZ"):
            assert entry == ()


def test_unlayered_circuit_rejected():
    c = Circuit(2)
    c.add_layer([gate("H", 0, duration=1.0)], 1.0)
    with pytest.raises(ConfigurationError):
        bind_depolarizing(c, DepolarizingParams(1e-3))


def test_physical_binding():
    params = PhysicalParams()
    c = _simple_circuit()
    b = bind_physical(c, params)
    for ins, entry in zip(c.instructions(), b.entries):
        if ins.kind == "MeasureZ":
            assert entry[0].channel.kind == "flip"
            assert entry[0].channel.probs[1] == pytest.approx(params.p_err_M)
        if ins.kind == "Idle":
            expected = idle_channel(ins.duration, params.T1, params.T2).probs
            assert entry[0].channel.probs == pytest.approx(expected)
        if ins.kind == "CX":
            assert 1 - entry[0].channel.probs[0] == pytest.approx(params.p_err_CX)


def test_extra_noise_by_tag_and_readout():
    c = Circuit(2)
    c.add_layer([gate("Idle", 0, tag="link"), gate("Idle", 1, tag=READOUT_TAG)])
    extra = ExtraNoise({"link": depolarizing(0.02, 1)})
    for binder, params in ((bind_depolarizing, DepolarizingParams(0.01)), (bind_physical, PhysicalParams())):
        b = binder(c, params, extra)
        assert b.entries[0][0].channel.probs[0] == pytest.approx(0.98)
        assert b.entries[1][0].placement == "before"


def _run(layers, n, prep, seed=0):
    c = Circuit(n)
    for ins in prep:
        c.add_layer([ins])
    for layer in layers:
        c.add_layer(layer.instructions, layer.duration)
    state = StabilizerState(n, np.random.default_rng(seed))
    return run_tableau(c, state), state


def test_parity_zz_on_zero_state():
    outs, state = _run(transpile_parity_measurement("Z", 0, 1), 2, [])
    assert outs == [0]
    assert state.peek(PauliString.from_str("ZI")) == 0
    assert state.peek(PauliString.from_str("IZ")) == 0


def test_parity_zz_odd():
    outs, _ = _run(transpile_parity_measurement("Z", 0, 1), 2, [gate("X", 1)])
    assert outs == [1]


def test_parity_xx_on_bell_state():
    prep = [gate("H", 0), gate("CX", 0, 1)]
    for seed in range(5):
        outs, state = _run(transpile_parity_measurement("X", 0, 1), 2, prep, seed)
        assert outs == [0]
        assert state.peek(PauliString.from_str("ZZ")) == 0


def test_parity_fragment_duration():
    t = GateTimes()
    x = transpile_parity_measurement("X", 0, 1, t)
    z = transpile_parity_measurement("Z", 0, 1, t)
    assert sum(layer.duration for layer in x) == pytest.approx(2 * t.t_CX + 2 * t.t_H + t.t_M)
    assert sum(layer.duration for layer in z) == pytest.approx(2 * t.t_CX + t.t_M)
    with pytest.raises(ValueError):
        transpile_parity_measurement("Y", 0, 1)

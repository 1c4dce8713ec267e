import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from conftest import random_clifford_circuit
from oracles import dense_distribution, dense_stabilizer_expectation, tvd

from logical_bell.stabilizer import (
    BoundNoise,
    Circuit,
    CircuitError,
    CircuitInstruction,
    ConfigurationError,
    FrameSimulator,
    NoiseBinding,
    PauliString,
    StabilizerState,
    apply_gate,
    compile_program,
    depolarizing,
    flip,
    gate,
    measure_z,
    run_circuit,
    sample_depolarizing,
    sample_measurements,
)
from logical_bell.stabilizer.channels import exact_depolarizing_weights
from logical_bell.stabilizer.tableau import run_tableau


def test_pauli_algebra():
    x = PauliString.from_str("X")
    z = PauliString.from_str("Z")
    assert not x.commutes(z)
    assert PauliString.from_str("XX").commutes(PauliString.from_str("ZZ"))
    assert str(PauliString.from_str("-XZ_Y")) == "-XZ_Y"
    ident = PauliString.identity(3)
    assert ident.is_identity() and ident.sign == 1 and ident.weight == 0
    with pytest.raises(ValueError):
        _ = x * z
    assert (PauliString.from_str("XX") * PauliString.from_str("ZZ")) == PauliString.from_str("-YY")


def test_hadamard_maps_z_to_x():
    s = StabilizerState(1, 0)
    apply_gate(s, gate("H", 0))
    assert s.stabilizers()[0] == PauliString.from_str("X")


def test_cx_propagates_x_forward():
    s = StabilizerState(2, 0)
    apply_gate(s, gate("H", 0))
    apply_gate(s, gate("CX", 0, 1))
    assert s.peek(PauliString.from_str("XX")) == 0
    assert s.peek(PauliString.from_str("ZZ")) == 0
    assert s.peek(PauliString.from_str("XI")) is None


def test_apply_gate_errors():
    s = StabilizerState(2, 0)
    with pytest.raises(IndexError):
        apply_gate(s, gate("H", 5))
    with pytest.raises(CircuitError):
        apply_gate(s, gate("MeasureZ", 0))
    with pytest.raises(CircuitError):
        gate("CX", 1, 1)
    with pytest.raises(CircuitError):
        CircuitInstruction("H", (0,), duration=-1.0)


@pytest.mark.parametrize("seed", range(25))
def test_random_clifford_matches_dense_stabilizers(seed):
    rng = np.random.default_rng(seed)
    c = random_clifford_circuit(4, 30, rng, measure_p=0.0)
    c.layers = c.layers[:-4]  # drop readout
    s = StabilizerState(4, 0)
    for ins in c.instructions():
        apply_gate(s, ins)
    assert s.stabilizers_commute() and s.rank() == 8
    for p in s.stabilizers():
        assert dense_stabilizer_expectation(c, str(p)) == pytest.approx(1.0)


def test_measure_fresh_qubit_is_deterministic():
    s = StabilizerState(3, 0)
    assert s.is_deterministic(PauliString.from_support(3, z_support=[1]))
    assert measure_z(s, 1) == 0


def test_measure_after_h_is_fair():
    c = Circuit(1)
    c.add_layer([gate("H", 0)])
    c.add_layer([gate("MeasureZ", 0)])
    bits = sample_measurements(c, 100_000, np.random.default_rng(3))[:, 0]
    assert abs(bits.mean() - 0.5) < 0.01
    ones = sum(run_circuit(c, None, seed).outcomes[0] for seed in range(2000))
    assert abs(ones / 2000 - 0.5) < 0.05


def _bell_circuit():
    c = Circuit(2)
    c.add_layer([gate("H", 0)])
    c.add_layer([gate("CX", 0, 1)])
    c.add_layer([gate("MeasureZ", 0), gate("MeasureZ", 1)])
    return c


def test_bell_outcomes_correlated():
    c = _bell_circuit()
    for seed in range(200):
        a, b = run_circuit(c, None, seed).outcomes
        assert a == b
    bits = sample_measurements(c, 10_000, np.random.default_rng(0))
    assert (bits[:, 0] == bits[:, 1]).all()
    assert 0.4 < bits[:, 0].mean() < 0.6


def test_run_circuit_deterministic_bytes():
    c = random_clifford_circuit(4, 30, np.random.default_rng(9))
    binding = NoiseBinding([(BoundNoise(depolarizing(0.2), (ins.targets[0],)),) for ins in c.instructions()])
    a = run_circuit(c, binding, 77).to_bytes()
    b = run_circuit(c, binding, 77).to_bytes()
    assert a == b
    assert len(run_circuit(c, binding, 77).outcomes) == c.num_measurements


def test_binding_length_mismatch():
    c = _bell_circuit()
    with pytest.raises(ConfigurationError):
        run_circuit(c, NoiseBinding([()]), 0)


def _tableau_exact_distribution(c: Circuit) -> dict:
    branches = [(StabilizerState(c.n_qubits, 0), 1.0, ())]
    for ins in c.instructions():
        new = []
        for s, w, out in branches:
            if ins.kind == "MeasureZ":
                z = PauliString.from_support(c.n_qubits, z_support=ins.targets)
                if s.is_deterministic(z):
                    new.append((s, w, out + (s.measure_z(ins.targets[0]),)))
                else:
                    for bit in (0, 1):
                        t = s.copy()
                        t.measure_z(ins.targets[0], forced=bit)
                        new.append((t, w / 2, out + (bit,)))
            else:
                apply_gate(s, ins)
                new.append((s, w, out))
        branches = new
    dist: dict = {}
    for _, w, out in branches:
        dist[out] = dist.get(out, 0.0) + w
    return dist


@pytest.mark.parametrize("seed", range(40))
def test_tableau_distribution_equals_dense(seed):
    c = random_clifford_circuit(int(2 + seed % 3), 30 - 4, np.random.default_rng(1000 + seed))
    assert tvd(_tableau_exact_distribution(c), dense_distribution(c)) < 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_sampled_distribution_tvd(seed):
    c = random_clifford_circuit(4, 26, np.random.default_rng(2000 + seed))
    bits = sample_measurements(c, 100_000, np.random.default_rng(seed))
    counts = Counter(map(tuple, bits.astype(int).tolist()))
    emp = {k: v / len(bits) for k, v in counts.items()}
    assert tvd(emp, dense_distribution(c)) < 0.01


def test_serialization_round_trip():
    c = random_clifford_circuit(4, 30, np.random.default_rng(5))
    c.add_layer([CircuitInstruction("PauliError", (0, 2), pauli="XY")], duration=1.5e-6, group="g")
    c.add_layer([gate("Reset", 1, duration=0.1, tag="r")], duration=1 / 3)
    c.fill_idles()
    text = c.to_text()
    back = Circuit.from_text(text)
    assert back == c
    assert back.to_text() == text


def test_from_text_rejects_garbage():
    with pytest.raises(CircuitError):
        Circuit.from_text("H 0\n")
    with pytest.raises(CircuitError):
        Circuit.from_text("TICK\nFOO 0\n")


def test_sample_depolarizing_zero():
    rng = np.random.default_rng(0)
    assert all(sample_depolarizing(0.0, 2, rng).is_identity() for _ in range(200))
    with pytest.raises(ValueError):
        sample_depolarizing(1.5, 1, rng)


def test_sample_depolarizing_single_qubit_frequencies():
    rng = np.random.default_rng(1)
    counts = Counter(str(sample_depolarizing(1.0, 1, rng)).lstrip("+") for _ in range(100_000))
    for letter in "XYZ":
        assert abs(counts[letter] / 1e5 - 1 / 3) < 0.01


def test_depolarizing_two_qubit_frequencies():
    # 10^6 draws through the vectorised sampler, which shares the channel tables
    ch = depolarizing(0.15, 2)
    rng = np.random.default_rng(2)
    codes = rng.choice(16, size=1_000_000, p=ch.probs)
    freq = np.bincount(codes, minlength=16) / 1e6
    sigma = np.sqrt(0.01 * 0.99 / 1e6)
    for k in range(1, 16):
        assert abs(freq[k] - 0.01) < 0.002
        assert abs(freq[k] - 0.01) < 5 * sigma
    assert sum(exact_depolarizing_weights(Fraction(15, 100), 2)) == 1
    # and a smaller run through the public sampler
    draws = Counter(str(sample_depolarizing(0.15, 2, rng)) for _ in range(30_000))
    nonid = {k: v for k, v in draws.items() if k != "+__"}
    assert len(nonid) == 15
    for v in nonid.values():
        assert abs(v / 30_000 - 0.01) < 5 * np.sqrt(0.01 * 0.99 / 30_000)


def test_noise_channel_validation():
    with pytest.raises(ValueError):
        depolarizing(-0.1)
    with pytest.raises(ValueError):
        flip(2.0)


def _frame_vs_tableau_circuit():
    c = Circuit(3)
    c.add_layer([gate("H", 0)], duration=1.0)
    c.add_layer([gate("CX", 0, 1)], duration=1.0)
    c.add_layer([gate("CX", 1, 2)], duration=1.0)
    c.add_layer([gate("MeasureZ", 2)], duration=1.0)
    c.add_layer([gate("Reset", 2)])
    c.add_layer([gate("CX", 0, 2)], duration=1.0)
    c.add_layer([gate("CX", 1, 2)], duration=1.0)
    c.add_layer([gate("MeasureZ", 2), gate("MeasureZ", 0), gate("MeasureZ", 1)])
    return c


def test_frame_matches_tableau_under_noise():
    c = _frame_vs_tableau_circuit()
    entries = []
    for ins in c.instructions():
        if ins.kind == "CX":
            entries.append((BoundNoise(depolarizing(0.05, 2), ins.targets),))
        elif ins.kind == "MeasureZ":
            entries.append((BoundNoise(depolarizing(0.03), ins.targets, "before"), BoundNoise(flip(0.02), ins.targets)))
        else:
            entries.append((BoundNoise(depolarizing(0.04), ins.targets),))
    binding = NoiseBinding(entries)
    # parities that are deterministic without noise
    def parities(rec):
        rec = np.asarray(rec)
        return np.stack([rec[..., 1], rec[..., 0] ^ rec[..., 2], rec[..., 2] ^ rec[..., 3]], axis=-1)

    tab = np.array([parities(run_circuit(c, binding, s).outcomes) for s in range(4000)])
    rec, _, _ = FrameSimulator(compile_program(c, binding)).run(200_000, np.random.default_rng(0))
    fr = parities(rec[:4].T)
    for j in range(3):
        p_f = fr[:, j].mean()
        p_t = tab[:, j].mean()
        assert abs(p_f - p_t) < 5 * np.sqrt(p_f * (1 - p_f) / 4000) + 1e-3


def test_frame_final_checks():
    c = _bell_circuit()
    c.layers = c.layers[:-1]
    checks = [PauliString.from_str("XX"), PauliString.from_str("ZZ")]
    binding = NoiseBinding([(), (BoundNoise(depolarizing(1.0, 2), (0, 1)),)])
    rec, _, _ = FrameSimulator(compile_program(c, binding, checks)).run(150_000, np.random.default_rng(1))
    # uniform over 15 non-identity Paulis: XX flips for 8 of them, ZZ for 8
    assert abs(rec[0].mean() - 8 / 15) < 0.01
    assert abs(rec[1].mean() - 8 / 15) < 0.01
    assert abs((rec[0] & rec[1]).mean() - 4 / 15) < 0.01


def test_frame_noiseless_records_are_zero():
    c = random_clifford_circuit(4, 30, np.random.default_rng(4))
    rec, _, _ = FrameSimulator(compile_program(c)).run(1000, np.random.default_rng(0))
    assert not rec.any()


def test_run_tableau_noise_events():
    c = _bell_circuit()
    out = run_tableau(c, StabilizerState(2, 0), {(1, 0, "after"): [(1, "X")]})
    assert out[0] != out[1]


def test_state_invariants_after_many_ops():
    rng = np.random.default_rng(11)
    s = StabilizerState(6, 1)
    for i in range(3000):
        k = rng.integers(3)
        if k == 0:
            s.h(int(rng.integers(6)))
        elif k == 1:
            a, b = rng.choice(6, 2, replace=False)
            s.cx(int(a), int(b))
        else:
            s.measure_z(int(rng.integers(6)))
        if i % 1000 == 999:
            assert s.stabilizers_commute() and s.rank() == 12


def test_all_two_qubit_paulis_measure_consistently():
    # measuring any Pauli twice gives the same answer
    for letters in itertools.product("IXYZ", repeat=2):
        if letters == ("I", "I"):
            continue
        s = StabilizerState(2, 3)
        s.h(0)
        s.cx(0, 1)
        p = PauliString.from_str("".join(letters))
        first = s.measure_pauli(p)
        assert s.measure_pauli(p) == first

import math
from dataclasses import replace

import numpy as np
import pytest

from logical_bell.codes import CodeSpec, build_patch
from logical_bell.photonics import FiberLink
from logical_bell.protocols import (
    ABORTED,
    SUCCESS,
    BaselineConfig,
    NoiseSpec,
    ProtocolConfig,
    baseline_error_exact,
    compute_time_budget,
    heralding,
    protocol_rate,
    run_protocol1_trials,
    run_protocol2_trial,
    run_protocol2_trials,
    run_unencoded_baseline,
    run_window,
    scheduler_acquire,
    time_budget_table,
    window_counts,
)
from logical_bell.stabilizer import ConfigurationError

# published budget at D = 1 km, 3 significant figures
TABLE = {
    (1, "S[[18,2,3]]"): ("4.31e-03", "1.72e-02", "4.80e-06", "2.60e-02"),
    (1, "BS[[18,2,3]]"): ("8.88e-03", "3.55e-02", "4.80e-06", "5.34e-02"),
    (2, "S[[18,2,3]]"): ("4.31e-03", "1.72e-02", "1.44e-05", "2.60e-02"),
    (2, "BS[[18,2,3]]"): ("8.88e-03", "3.55e-02", "1.44e-05", "5.34e-02"),
}


def test_time_budget_table():
    rows = time_budget_table(1.0)
    assert len(rows) == 4
    for r in rows:
        got = tuple(f"{r[k]:.2e}" for k in ("t_cycle", "t_merge", "t_trav", "t_total"))
        assert got == TABLE[(r["protocol"], r["code"])]


def test_time_budget_zero_distance_has_no_travel():
    tb = compute_time_budget(CodeSpec("RotatedSurface", 3), 2, D=0.0)
    assert tb.t_trav == 0.0
    assert tb.t_total == pytest.approx(tb.t_merge + 2 * tb.t_cycle + 100e-6)


def test_time_budget_scales_with_d():
    a = compute_time_budget(CodeSpec("RotatedSurface", 3), 2)
    b = compute_time_budget(CodeSpec("RotatedSurface", 5), 2)
    assert b.t_merge / a.t_merge == pytest.approx(6 / 4)
    assert b.t_trav / a.t_trav == pytest.approx(5 / 3)


def test_bad_protocol_number():
    with pytest.raises(ConfigurationError):
        compute_time_budget(CodeSpec("RotatedSurface", 3), 3)
    with pytest.raises(ConfigurationError):
        ProtocolConfig(protocol=0)


# -- heralding and scheduler --------------------------------------------------

def test_slots_per_window():
    h = heralding(ProtocolConfig())
    assert h.slot == pytest.approx(11e-6 + 1 / 33e6)
    assert h.slots_per_window == 36


def test_herald_probability_from_budget():
    cfg = ProtocolConfig()
    h = heralding(cfg)
    real = cfg.budget.eta_tot / cfg.p_trs
    assert h.p_end == pytest.approx((real + (1 - real) * cfg.p_dark) * cfg.p_trs)
    assert h.p_pair == pytest.approx(h.p_end**2)


def test_perfect_heralding_fills_slots_in_order():
    cfg = ProtocolConfig(herald_override=1.0)
    h = heralding(cfg)
    ready, state = run_window(h, np.random.default_rng(0))
    assert state.acquired == h.slots_per_window
    assert ready[2] == pytest.approx(3 * h.slot)
    acq = scheduler_acquire(cfg, 3, np.random.default_rng(0))
    assert acq.retries == 0
    assert acq.elapsed == pytest.approx(3 * (cfg.t_qndm + cfg.t_readout) + 3 / cfg.f_source)


def test_dead_link_never_acquires():
    cfg = ProtocolConfig(herald_override=0.0)
    acq = scheduler_acquire(cfg, 2, np.random.default_rng(0))
    assert acq.n_ready == 0 and acq.retries == 1
    with pytest.raises(ConfigurationError):
        run_protocol2_trials(cfg, 3, np.random.default_rng(0))


def test_window_counts_match_event_simulation():
    cfg = ProtocolConfig()
    h = heralding(cfg)
    rng = np.random.default_rng(7)
    events = [run_window(h, rng)[1].acquired for _ in range(4000)]
    binom = window_counts(cfg, 4000, np.random.default_rng(8))
    se = math.sqrt(h.slots_per_window * h.p_pair * (1 - h.p_pair) * 2 / 4000)
    assert abs(np.mean(events) - np.mean(binom)) < 4 * se


def test_acquisition_needs_met():
    cfg = ProtocolConfig(D=10.0)
    rng = np.random.default_rng(3)
    for _ in range(200):
        acq = scheduler_acquire(cfg, 2, rng)
        assert acq.n_ready >= 2
        assert 0 < acq.elapsed - acq.retries * cfg.t_rangeQ <= cfg.t_rangeQ


# -- trials -------------------------------------------------------------------

def test_protocol1_abort_frequency():
    cfg = ProtocolConfig(protocol=1, D=0.05, herald_override=0.999)
    n = 100_000
    batch = run_protocol1_trials(cfg, n, np.random.default_rng(11), score=False)
    n_data = 2 * build_patch(cfg.code).n_data
    p_abort = 1 - 0.999**n_data
    se = math.sqrt(p_abort * (1 - p_abort) / n)
    assert abs((1 - batch.success.mean()) - p_abort) < 3 * se


def test_protocol1_aborts_at_default_loss():
    batch = run_protocol1_trials(ProtocolConfig(protocol=1), 200, np.random.default_rng(0), score=False)
    assert not batch.success.any()
    assert batch.outcome(0).status == ABORTED and batch.outcome(0).zz_error is None


@pytest.mark.parametrize("protocol", [1, 2])
@pytest.mark.parametrize("family", ["RotatedSurface", "PlanarSurface", "BaconShor"])
def test_noiseless_runs_are_error_free(protocol, family):
    cfg = ProtocolConfig(protocol=protocol, code=CodeSpec(family, 3)).ideal()
    run = run_protocol1_trials if protocol == 1 else run_protocol2_trials
    batch = run(cfg, 2000, np.random.default_rng(5))
    assert batch.success.all()
    assert not batch.zz.any() and not batch.xx.any()


def test_wall_time_at_least_budget():
    cfg = ProtocolConfig(noise=NoiseSpec("none"))
    batch = run_protocol2_trials(cfg, 300, np.random.default_rng(1), score=False)
    assert (batch.wall_time >= cfg.time_budget.t_total).all()


def test_single_trial_wrapper():
    out = run_protocol2_trial(ProtocolConfig().ideal(), np.random.default_rng(0))
    assert out.status == SUCCESS and out.zz_error == 0 and out.xx_error == 0


def test_rate_decreases_with_distance():
    rates = [protocol_rate(ProtocolConfig(D=D), 3000, np.random.default_rng(4)) for D in (1, 20, 40)]
    assert rates[0] > rates[1] > rates[2] > 0


def test_rate_independent_of_batch_split():
    cfg = ProtocolConfig()
    whole = run_protocol2_trials(cfg, 400, np.random.default_rng(9), score=False)
    rng = np.random.default_rng(9)
    parts = [run_protocol2_trials(cfg, 200, rng, score=False) for _ in range(2)]
    assert np.allclose(whole.wall_time, np.concatenate([p.wall_time for p in parts]))


def test_physical_noise_errors_are_rare_at_one_km():
    batch = run_protocol2_trials(ProtocolConfig(), 2000, np.random.default_rng(2))
    p = float((batch.zz | batch.xx).mean())
    assert 0 < p < 0.5


# -- baseline -----------------------------------------------------------------

@pytest.mark.parametrize("model", ["depolarizing", "physical"])
def test_baseline_sampling_matches_exact(model):
    cfg = BaselineConfig("RotatedSurface", NoiseSpec(model, p_err=3e-3))
    exact = baseline_error_exact(cfg)
    zz, xx = run_unencoded_baseline(cfg, 200_000, np.random.default_rng(0))
    for got, key in ((zz.mean(), "zz"), (xx.mean(), "xx"), ((zz | xx).mean(), "any")):
        se = math.sqrt(exact[key] * (1 - exact[key]) / 200_000)
        assert abs(got - exact[key]) < 4 * se


def test_baseline_depolarizing_value():
    # seven timed layers per surface cycle, one depolarizing channel each, on both halves
    p = 1e-3
    single = (1 + 3 * (1 - 4 * p / 3) ** 7) / 4
    pair_ok = single**2 + 3 * ((1 - single) / 3) ** 2
    assert baseline_error_exact(BaselineConfig())["any"] == pytest.approx(1 - pair_ok, rel=1e-12)


def test_baseline_grows_with_cycles():
    vals = [baseline_error_exact(BaselineConfig(cycles=c))["any"] for c in range(4)]
    assert vals[0] == 0.0
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_baseline_is_noiseless_without_noise():
    cfg = BaselineConfig(noise=NoiseSpec("none"))
    assert baseline_error_exact(cfg)["any"] == 0.0


def test_fiber_link_for_protocol_defaults():
    assert ProtocolConfig(protocol=1).link == FiberLink(1.0, 0.70)
    assert replace(ProtocolConfig(), tau=0.2).link.tau == 0.2

import dataclasses

import numpy as np
import pytest

from qeraser import (
    ALWAYS_IN,
    ALWAYS_OUT,
    ApparatusConfig,
    BinningMismatchError,
    CoincidenceWindow,
    IdlerDetector,
    LowStatisticsError,
    RunConfig,
    UnresolvedLogError,
    build_sampler,
    conditional_density,
    fit_fringes,
    fringe_visibility,
    gate_coincidences,
    goodness_of_fit_chi2,
    histogram,
    marginal_density_d0,
    no_signaling_test,
    normalized_marginal,
    phase_shift_estimate,
    run_experiment,
    sample_signal,
    sum_rule_check,
    two_sample_chi2,
)
from qeraser.analysis import GatedHistogram, expected_bin_probabilities
from qeraser.engine import DET_D1, DET_D2, EventLog, SIGNAL_STREAM, stream

BS_IN_CFG = ApparatusConfig(beam_splitter_in=True)
BS_OUT_CFG = ApparatusConfig(beam_splitter_in=False)
D1, D2 = IdlerDetector.D1, IdlerDetector.D2


def make_run(policy=ALWAYS_IN, n=50_000, seed=7, cfg=None):
    return run_experiment(RunConfig(
        apparatus=cfg or (BS_IN_CFG if policy is ALWAYS_IN else BS_OUT_CFG),
        n_pairs=n, seed=seed, policy=policy))


def synthetic_log(u_values, cfg, detector_code=DET_D1):
    n = len(u_values)
    t = np.arange(1, n + 1, dtype=np.int64) * 1_000_000
    return EventLog(
        apparatus=cfg,
        pair_id=np.arange(n, dtype=np.int64),
        t_signal_ps=t,
        u_signal=np.asarray(u_values, dtype=float),
        bs_code=np.ones(n, dtype=np.int8),
        det_code=np.full(n, detector_code, dtype=np.int8),
        t_idler_ps=t + 8000,
    )


class TestCoincidenceWindow:
    def test_defaults(self):
        w = CoincidenceWindow()
        assert w.expected_offset_ns == 8.0 and w.half_width_ns == 1.0

    @pytest.mark.parametrize("kwargs", [dict(half_width_ns=0.0),
                                        dict(half_width_ns=9.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            CoincidenceWindow(**kwargs)


class TestGateCoincidences:
    def test_every_pair_self_matches(self):
        log = make_run(n=20_000, seed=7)
        m = gate_coincidences(log)
        assert len(m) == len(log)
        assert m.mismatched_pair_count(log) == 0
        assert len(m.unmatched_signals) == 0 and len(m.unmatched_idlers) == 0

    def test_narrower_window_same_matching(self):
        log = make_run(n=5000, seed=7)
        wide = gate_coincidences(log)
        narrow = gate_coincidences(log, CoincidenceWindow(half_width_ns=0.5))
        assert np.array_equal(wide.signal_idx, narrow.signal_idx)
        assert np.array_equal(wide.idler_idx, narrow.idler_idx)

    def test_empty_log(self):
        empty = synthetic_log(np.empty(0), BS_IN_CFG)
        m = gate_coincidences(empty)
        assert len(m) == 0
        assert len(m.unmatched_signals) == 0 and len(m.unmatched_idlers) == 0

    def test_unresolved_rejected(self):
        log = make_run(n=100)
        log.det_code = np.zeros(len(log), dtype=np.int8)
        with pytest.raises(UnresolvedLogError):
            gate_coincidences(log)

    def test_out_of_window_idler_unmatched(self):
        log = make_run(n=50, seed=3)
        log.t_idler_ps = log.t_idler_ps.copy()
        log.t_idler_ps[10] += 5000   # 5 ns late: outside 8 +- 1 ns
        m = gate_coincidences(log)
        assert 10 in m.unmatched_signals or len(m.unmatched_idlers) > 0
        assert len(m) == len(log) - 1

    def test_greedy_matching_with_close_pairs(self):
        # two pairs closer than the window width still match one-to-one in
        # time order with no pair-id mismatches
        cfg = BS_IN_CFG
        t = np.array([0, 500, 10_000], dtype=np.int64) * 1 + 1000
        log = EventLog(
            apparatus=cfg,
            pair_id=np.arange(3, dtype=np.int64),
            t_signal_ps=t,
            u_signal=np.zeros(3),
            bs_code=np.ones(3, dtype=np.int8),
            det_code=np.array([DET_D1, DET_D2, DET_D1], dtype=np.int8),
            t_idler_ps=t + 8000,
        )
        m = gate_coincidences(log)
        assert len(m) == 3
        assert m.mismatched_pair_count(log) == 0


class TestHistogram:
    def test_partition_identity(self):
        log = make_run(n=30_000)
        h1 = histogram(log, D1)
        h2 = histogram(log, D2)
        hu = histogram(log)
        assert np.array_equal(h1.counts + h2.counts, hu.counts)
        assert hu.counts.sum() == len(log)

    def test_gate_names_and_edges(self):
        log = make_run(n=2000)
        h = histogram(log, D1, bins=64)
        assert h.gate_name == "D1"
        assert len(h.bin_edges) == 65
        assert h.bin_edges[0] == -5.0 and h.bin_edges[-1] == 5.0
        assert histogram(log).gate_name == "UNGATED"

    def test_needs_resolution_for_gating(self):
        log = make_run(n=1000)
        log.det_code = np.zeros(len(log), dtype=np.int8)
        with pytest.raises(UnresolvedLogError):
            histogram(log, D1)
        histogram(log)   # ungated is fine on pending logs

    def test_selection_subset(self):
        log = make_run(n=1000)
        h = histogram(log, selection=np.arange(100))
        assert h.counts.sum() == 100

    def test_min_bins(self):
        log = make_run(n=1000)
        with pytest.raises(ValueError):
            histogram(log, bins=1)


class TestFringeFit:
    def test_visibility_of_erased_run(self):
        log = make_run(ALWAYS_IN, n=200_000, seed=7)
        assert fringe_visibility(histogram(log, D1)) > 0.95
        assert fringe_visibility(histogram(log, D2)) > 0.95

    def test_visibility_of_which_path_run(self):
        log = make_run(ALWAYS_OUT, n=200_000, seed=7)
        assert fringe_visibility(histogram(log, D1)) < 0.05
        assert fringe_visibility(histogram(log, D2)) < 0.05

    @pytest.mark.parametrize("v_true", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_injected_visibility_recovered(self, v_true):
        # synthetic-injection oracle: draw from env * (1 + V sin(2 pi u + phi)),
        # renormalized on the truncated range (the sin/cos tails leave ~1e-5)
        from scipy.integrate import simpson
        from qeraser import symmetric_grid

        cfg = BS_IN_CFG
        phi = 0.7

        def raw(u):
            env = normalized_marginal(u, cfg)
            return env * (1.0 + v_true * np.sin(2 * np.pi * u + phi))

        grid = symmetric_grid(cfg.detector_range)
        scale = simpson(raw(grid), x=grid)

        def density(u):
            return raw(u) / scale

        samp = build_sampler(density, cfg, f"inject-{v_true}")
        draws = sample_signal(samp, stream(31, SIGNAL_STREAM), size=10**6)
        log = synthetic_log(draws, cfg)
        fit = fit_fringes(histogram(log, D1))
        assert abs(fit.visibility - v_true) < 0.02
        if v_true > 0:
            assert abs((fit.phase - phi + np.pi) % (2 * np.pi) - np.pi) < 0.05

    def test_low_statistics_error(self):
        log = make_run(n=2000)
        h = histogram(log, D1, bins=16)
        h.counts = (h.counts * 0.1).astype(np.int64)
        with pytest.raises(LowStatisticsError):
            fit_fringes(h)

    def test_exact_density_counts_give_unit_visibility(self):
        # noise-free expected counts from the conditional itself
        cfg = BS_IN_CFG
        edges = np.linspace(-5, 5, 129)
        h = GatedHistogram(bin_edges=edges, counts=np.zeros(128, dtype=np.int64),
                           gate=D1, total_events=0, apparatus=cfg)
        probs = expected_bin_probabilities(h, lambda u: conditional_density(u, D1, cfg))
        h.counts = np.rint(probs * 10**7).astype(np.int64)
        fit = fit_fringes(h)
        assert fit.visibility > 0.999


class TestPhaseShift:
    def test_self_shift_is_zero(self):
        log = make_run(ALWAYS_IN, n=100_000)
        h = histogram(log, D1)
        assert phase_shift_estimate(h, h) == 0.0

    def test_antifringe_shift_half_period(self):
        log = make_run(ALWAYS_IN, n=200_000, seed=7)
        shift = phase_shift_estimate(histogram(log, D1), histogram(log, D2))
        assert abs(abs(shift) - 0.5) < 0.02

    def test_independent_seeds_same_law(self):
        h1 = histogram(make_run(ALWAYS_IN, n=200_000, seed=101), D1)
        h2 = histogram(make_run(ALWAYS_IN, n=200_000, seed=202), D1)
        assert abs(phase_shift_estimate(h1, h2)) < 0.02

    def test_requires_gated_and_same_binning(self):
        log = make_run(ALWAYS_IN, n=20_000)
        with pytest.raises(ValueError):
            phase_shift_estimate(histogram(log), histogram(log, D1))
        with pytest.raises(BinningMismatchError):
            phase_shift_estimate(histogram(log, D1, bins=64), histogram(log, D2, bins=128))


class TestSumRule:
    def test_partition_exact(self):
        log = make_run(ALWAYS_IN, n=50_000)
        rep = sum_rule_check(histogram(log, D1), histogram(log, D2), histogram(log),
                             same_log=True)
        assert rep.verdict == "consistent"
        assert rep.statistic_value == 0.0
        assert "partition" in rep.note

    def test_partition_violation_detected(self):
        log = make_run(ALWAYS_IN, n=50_000)
        hu = histogram(log)
        hu.counts = hu.counts.copy()
        hu.counts[64] += 10 * int(np.sqrt(hu.counts[64]))
        rep = sum_rule_check(histogram(log, D1), histogram(log, D2), hu, same_log=True)
        assert rep.verdict == "inconsistent"

    def test_cross_log_consistent(self):
        # erased run, gated sum vs an independent which-path run, ungated:
        # the marginals agree even though the subpopulations are wildly
        # different
        log_in = make_run(ALWAYS_IN, n=100_000, seed=41)
        log_out = make_run(ALWAYS_OUT, n=100_000, seed=42)
        rep = sum_rule_check(histogram(log_in, D1), histogram(log_in, D2),
                             histogram(log_out), same_log=False)
        assert rep.verdict == "consistent"
        assert 0.0 <= rep.p_value <= 1.0

    def test_corrupted_bin_detected_cross_log(self):
        # one 10-sigma bin adds ~+50 to a dof-127 statistic, so detection
        # needs a baseline that is not unusually low; seeds pinned on a pair
        # with comfortable margin (corrupted p ~ 3e-4)
        log_in = make_run(ALWAYS_IN, n=100_000, seed=45)
        hu = histogram(make_run(ALWAYS_OUT, n=100_000, seed=46))
        hu.counts = hu.counts.copy()
        hu.counts[60] += 10 * int(np.sqrt(max(hu.counts[60], 1)))
        rep = sum_rule_check(histogram(log_in, D1), histogram(log_in, D2), hu,
                             same_log=False)
        assert rep.verdict == "inconsistent"

    def test_binning_mismatch(self):
        log = make_run(ALWAYS_IN, n=20_000)
        with pytest.raises(BinningMismatchError):
            sum_rule_check(histogram(log, D1, bins=64), histogram(log, D2),
                           histogram(log), same_log=True)


class TestNoSignaling:
    def test_same_seed_exact(self):
        log_in = make_run(ALWAYS_IN, n=20_000, seed=5, cfg=BS_IN_CFG)
        log_out = make_run(ALWAYS_OUT, n=20_000, seed=5, cfg=BS_OUT_CFG)
        rep = no_signaling_test(log_in, log_out)
        assert rep.verdict == "consistent"
        assert rep.statistic_value == 0.0
        assert "exact" in rep.note

    def test_independent_seeds_consistent(self):
        log_in = make_run(ALWAYS_IN, n=200_000, seed=51)
        log_out = make_run(ALWAYS_OUT, n=200_000, seed=52)
        rep = no_signaling_test(log_in, log_out)
        assert rep.verdict == "consistent"
        assert rep.statistic_value > 0.0

    def test_power_against_gated_subpopulation(self):
        # replacing one log by draws from the D1 conditional must trip the
        # test: fringes are not the envelope
        log_in = make_run(ALWAYS_IN, n=100_000, seed=61)
        samp = build_sampler(lambda u: conditional_density(u, D1, BS_IN_CFG),
                             BS_IN_CFG, "cond-d1")
        fake = synthetic_log(sample_signal(samp, stream(62, SIGNAL_STREAM), size=100_000),
                             BS_IN_CFG)
        rep = no_signaling_test(log_in, fake)
        assert rep.verdict == "inconsistent"


class TestChiSquareMachinery:
    def test_two_sample_identical_distribution(self):
        rng = np.random.default_rng(1)
        a = rng.poisson(100, size=64).astype(np.int64)
        b = rng.poisson(100, size=64).astype(np.int64)
        rep = two_sample_chi2(a, b)
        assert rep.dof == 63
        assert 0.0 < rep.p_value < 1.0

    def test_low_count_bins_pooled(self):
        a = np.array([0, 1, 0, 500, 480, 1, 0, 0])
        b = np.array([1, 0, 1, 490, 510, 0, 1, 1])
        rep = two_sample_chi2(a, b)
        assert rep.dof < len(a) - 1
        assert rep.verdict == "consistent"

    def test_goodness_of_fit_consistent(self):
        cfg = BS_OUT_CFG
        u = sample_signal(build_sampler(lambda x: normalized_marginal(x, cfg), cfg),
                          stream(8, SIGNAL_STREAM), size=200_000)
        counts, _ = np.histogram(u, bins=128, range=(-5, 5))
        h = GatedHistogram(bin_edges=np.linspace(-5, 5, 129),
                           counts=counts.astype(np.int64), gate=None,
                           total_events=200_000, apparatus=cfg)
        probs = expected_bin_probabilities(h, lambda x: normalized_marginal(x, cfg))
        rep = goodness_of_fit_chi2(counts, probs * counts.sum())
        assert rep.verdict == "consistent"
        assert rep.p_value > 0.001

    def test_goodness_of_fit_power(self):
        cfg = BS_IN_CFG
        samp = build_sampler(lambda x: conditional_density(x, D1, cfg), cfg)
        u = sample_signal(samp, stream(9, SIGNAL_STREAM), size=200_000)
        counts, _ = np.histogram(u, bins=128, range=(-5, 5))
        h = GatedHistogram(bin_edges=np.linspace(-5, 5, 129),
                           counts=counts.astype(np.int64), gate=None,
                           total_events=200_000, apparatus=cfg)
        probs = expected_bin_probabilities(h, lambda x: normalized_marginal(x, cfg))
        rep = goodness_of_fit_chi2(counts, probs * counts.sum())
        assert rep.verdict == "inconsistent"

    def test_report_fields(self):
        a = np.full(32, 1000)
        rep = two_sample_chi2(a, a)
        d = rep.to_dict()
        assert set(d) == {"statistic_name", "statistic_value", "p_value", "verdict",
                          "alpha", "dof", "note"}
        assert d["statistic_name"] == "chi-square"
        assert 0.0 <= d["p_value"] <= 1.0

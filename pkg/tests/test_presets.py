import json

import numpy as np
import pytest

from qeraser import ApparatusConfig, read_event_log
from qeraser.presets import (
    ExperimentPreset,
    PresetOptions,
    run_fig1,
    run_fig2,
    run_fig3,
    run_nosignal,
    run_preset,
    run_redsox_phase1,
    run_redsox_phase2,
)
from qeraser.reports import read_histogram_csv, recompute_verdicts


def opts(tmp_path, n=60_000, seed=7, **kw):
    return PresetOptions(n_pairs=n, seed=seed, out_dir=tmp_path, **kw)


def test_fig1_report_and_artifacts(tmp_path):
    report = run_fig1(opts(tmp_path))
    assert report["passed"]
    assert report["fits"]["D1"]["visibility"] <= 0.05
    assert report["fits"]["D2"]["visibility"] <= 0.05
    assert report["comparisons"]["ungated_vs_envelope"]["p_value"] >= 0.01
    for name in ("events.log", "hist_ungated.csv", "hist_d1.csv", "hist_d2.csv", "report.json"):
        assert (tmp_path / name).exists()
    log, _ = read_event_log(tmp_path / "events.log",
                            apparatus=ApparatusConfig(beam_splitter_in=False))
    assert len(log) == 60_000


def test_fig2_refuses_gated_analysis(tmp_path):
    report = run_fig2(opts(tmp_path))
    assert report["passed"]
    assert report["fits"] == {}
    assert "omitted by design" in report["gated_analysis"]
    assert not (tmp_path / "hist_d1.csv").exists()
    assert (tmp_path / "hist_reference_ungated.csv").exists()


def test_fig3_report(tmp_path):
    report = run_fig3(opts(tmp_path))
    assert report["passed"]
    assert report["fits"]["D1"]["visibility"] >= 0.95
    assert report["fits"]["D2"]["visibility"] >= 0.95
    assert 0.48 <= abs(report["phase_shift_periods"]) <= 0.52
    assert report["comparisons"]["sum_rule"]["statistic_value"] == 0.0
    assert report["coincidences"]["matched"] == 60_000


def test_nosignal_report(tmp_path):
    report = run_nosignal(opts(tmp_path, n=40_000))
    assert report["passed"]
    assert report["comparisons"]["shared_seed"]["statistic_value"] == 0.0
    assert report["comparisons"]["power_check"]["verdict"] == "inconsistent"
    assert "invariant under the idler-arm choice" in report["conclusion"]
    assert (tmp_path / "events_bs_in.log").exists()
    assert (tmp_path / "events_bs_out.log").exists()


def test_redsox_two_phase(tmp_path):
    report1 = run_redsox_phase1(opts(tmp_path, n=40_000))
    assert report1["passed"]
    report2 = run_redsox_phase2(tmp_path / "phase1_checkpoint.log", choice=True,
                                out_dir=tmp_path)
    assert report2["passed"]
    names = {v["name"] for v in report2["verdicts"]}
    assert "ungated_histogram_unchanged_bin_for_bin" in names
    assert "d1_gated_visibility_high" in names

    # running phase 2 with the opposite choice from the same checkpoint
    report3 = run_redsox_phase2(tmp_path / "phase1_checkpoint.log", choice=False,
                                out_dir=tmp_path)
    assert report3["passed"]
    assert {v["name"] for v in report3["verdicts"]} >= {"d1_gated_visibility_low"}


def test_reports_are_self_consistent(tmp_path):
    report = run_fig3(opts(tmp_path, n=40_000))
    assert recompute_verdicts(report) == [v["passed"] for v in report["verdicts"]]
    # observed numbers in verdicts trace back to the stored fits
    by_name = {v["name"]: v for v in report["verdicts"]}
    assert by_name["d1_gated_visibility_high"]["observed"] == report["fits"]["D1"]["visibility"]
    assert by_name["sum_rule_exact"]["observed"] == \
        report["comparisons"]["sum_rule"]["statistic_value"]
    # the JSON artifact carries the identical document
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk["verdicts"] == report["verdicts"]


def test_histogram_csv_round_trip(tmp_path):
    run_fig1(opts(tmp_path, n=20_000))
    edges, counts = read_histogram_csv(tmp_path / "hist_ungated.csv")
    assert len(edges) == 129 and len(counts) == 128
    assert counts.sum() == 20_000
    header = (tmp_path / "hist_ungated.csv").read_text().splitlines()[0]
    assert header == "bin_lo,bin_hi,count"


def test_run_preset_dispatch(tmp_path):
    report = run_preset(ExperimentPreset.FIG1, opts(tmp_path, n=20_000))
    assert report["preset"] == "fig1"
    with pytest.raises(ValueError):
        run_preset(ExperimentPreset.REDSOX, opts(tmp_path))


def test_phase2_histograms_match_choice_independent_signals(tmp_path):
    run_redsox_phase1(opts(tmp_path, n=30_000))
    run_redsox_phase2(tmp_path / "phase1_checkpoint.log", choice=True, out_dir=tmp_path)
    _, ungated_phase1 = read_histogram_csv(tmp_path / "hist_ungated_phase1.csv")
    _, ungated_phase2 = read_histogram_csv(tmp_path / "hist_phase2_ungated.csv")
    assert np.array_equal(ungated_phase1, ungated_phase2)

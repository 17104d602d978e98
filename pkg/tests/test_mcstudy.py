import math
import warnings

import numpy as np
import pytest

from bilocality import mcstudy
from bilocality.biloc import A_FIXED, BA_FIXED, Scenario, max_b_2233, max_b_exhaustive, uniform_table
from bilocality.errors import InvalidInputError
from bilocality.frames import CANONICAL_TRIAD, FrameParams, bc_frame_from_params, rotations_from_uniforms
from bilocality.mcstudy import (
    CountSample,
    StudyConfig,
    convergence_series,
    density_and_violation_curve,
    estimate_b_with_error,
    run_study,
    sample_counts,
    subset_mean_by_integration,
    subset_surface,
    violation_probability,
)
from bilocality.biloc import quantum_probability_table, shared_randomness_table
from bilocality.presets import separable_singlet
from bilocality.qcore import NoiseModel, singlet

ROOT4_2 = 2**0.25


def _files(paths):
    return {k: p.read_bytes() for k, p in paths.items()}


# --- configuration --------------------------------------------------------------


def test_config_validation():
    for bad in (dict(kind="sweep9"), dict(n=0), dict(dist="gauss"), dict(noise_v=1.5), dict(bins=0),
                dict(seed=-1), dict(hist_range=(1, 0))):
        kw = dict(kind="sweep2233", n=10, seed=1) | bad
        with pytest.raises(InvalidInputError):
            StudyConfig(**kw)
    with pytest.raises(InvalidInputError):
        StudyConfig("no_calibration", 10, 1, settings=5)
    with pytest.raises(InvalidInputError):
        StudyConfig.from_dict({"kind": "sweep2233", "n": 5, "seed": 1, "colour": "red"})


def test_config_roundtrip():
    cfg = StudyConfig("sweep3333", 12, 5, dist="haar", bins=7)
    assert StudyConfig.from_dict(cfg.to_dict()) == cfg


# --- single samples against the direct maximiser --------------------------------------


def test_single_sample_2233_params():
    for seed in range(5):
        rep = run_study(StudyConfig("sweep2233", 1, seed))
        b, c = bc_frame_from_params(FrameParams(*rep.params[0]))
        scn = Scenario.from_vectors(singlet(), singlet(), A_FIXED, BA_FIXED, b, c)
        assert rep.values[0] == pytest.approx(max_b_exhaustive(scn)[0], abs=1e-12)
        assert rep.values[0] == pytest.approx(max_b_2233(scn).B, abs=1e-12)


def test_single_sample_2233_haar():
    rep = run_study(StudyConfig("sweep2233", 1, 3, dist="haar"))
    r = rotations_from_uniforms(*rep.params[0])
    scn = Scenario.from_vectors(singlet(), singlet(), A_FIXED, BA_FIXED, CANONICAL_TRIAD, r.T)
    assert rep.values[0] == pytest.approx(max_b_exhaustive(scn)[0], abs=1e-12)


def test_single_sample_3333_params():
    rep = run_study(StudyConfig("sweep3333", 1, 4))
    p = rep.params[0]
    sub_a, outer_a = bc_frame_from_params(FrameParams(*p[:3]))
    sub_c, outer_c = bc_frame_from_params(FrameParams(*p[3:]))
    scn = Scenario.from_vectors(singlet(), singlet(), outer_a, sub_a, sub_c, outer_c)
    assert rep.values[0] == pytest.approx(max_b_exhaustive(scn)[0], abs=1e-12)


def test_single_sample_no_calibration():
    rep = run_study(StudyConfig("no_calibration", 1, 9, settings=3))
    u = rep.params[0]
    d = lambda k: np.array([  # noqa: E731
        math.sqrt(1 - (2 * u[k] - 1) ** 2) * math.cos(2 * math.pi * u[k + 1]),
        math.sqrt(1 - (2 * u[k] - 1) ** 2) * math.sin(2 * math.pi * u[k + 1]),
        2 * u[k] - 1,
    ])
    scn = Scenario.from_vectors(
        singlet(), singlet(),
        np.array([d(8 + 4 * k) for k in range(3)]), np.array([d(0), d(2)]),
        np.array([d(4), d(6)]), np.array([d(10 + 4 * k) for k in range(3)]),
    )
    assert rep.values[0] == pytest.approx(max_b_exhaustive(scn)[0], abs=1e-12)


# --- report invariants ----------------------------------------------------------------


def test_report_statistics():
    rep = run_study(StudyConfig("sweep2233", 5000, 1, bins=50))
    assert rep.hist_counts.sum() == 5000
    assert rep.mean == pytest.approx(rep.values.mean())
    assert rep.stderr == pytest.approx(rep.values.std(ddof=1) / math.sqrt(5000))
    assert rep.min >= ROOT4_2 - 1e-9 and rep.max <= math.sqrt(2) + 1e-12
    assert len(set(rep.assignment_ids.tolist())) > 1


def test_noise_scales_minimum():
    base = run_study(StudyConfig("sweep3333", 2000, 2))
    noisy = run_study(StudyConfig("sweep3333", 2000, 2, noise_v=0.8))
    assert noisy.min == pytest.approx(0.8 * base.min, abs=1e-15)
    assert np.allclose(noisy.values, 0.8 * base.values, atol=0)


def test_workers_and_blocks_do_not_change_output(tmp_path, monkeypatch):
    monkeypatch.setattr(mcstudy, "BLOCK", 700)
    cfg = StudyConfig("sweep3333", 3000, 21, dist="haar")
    one = _files(run_study(cfg).write(tmp_path / "w1"))
    three = _files(run_study(StudyConfig("sweep3333", 3000, 21, dist="haar", workers=3)).write(tmp_path / "w3"))
    assert one["samples"] == three["samples"] and one["histogram"] == three["histogram"]
    monkeypatch.setattr(mcstudy, "BLOCK", 8192)
    again = _files(run_study(cfg).write(tmp_path / "w1b"))
    assert again == one


def test_prefix_of_larger_study_is_identical():
    small = run_study(StudyConfig("sweep2233", 100, 8))
    big = run_study(StudyConfig("sweep2233", 1000, 8))
    assert np.array_equal(small.values, big.values[:100])


def test_seed_changes_output():
    assert not np.array_equal(run_study(StudyConfig("sweep2233", 50, 1)).values,
                              run_study(StudyConfig("sweep2233", 50, 2)).values)


def test_samples_csv_layout(tmp_path):
    paths = run_study(StudyConfig("sweep2233", 10, 1)).write(tmp_path)
    lines = paths["samples"].read_text().splitlines()
    assert lines[0] == "index,beta,gamma1,gamma2,max_b,assignment_id"
    assert len(lines) == 11


def test_random_file_source(tmp_path):
    words = np.random.default_rng(0).integers(0, 2**64, size=4 * 20, dtype=np.uint64).astype("<u8")
    path = tmp_path / "bits.bin"
    path.write_bytes(words.tobytes())
    rep = run_study(StudyConfig("sweep2233", 20, 0, random_file=str(path)))
    expected = 2 * math.pi * (words[:3].astype(np.float64) / 2.0**64)
    assert np.allclose(rep.params[0], expected)
    with pytest.raises(InvalidInputError, match="exhausted"):
        run_study(StudyConfig("sweep2233", 21, 0, random_file=str(path)))


# --- subset family --------------------------------------------------------------------


def test_subset_grid():
    grid, surf = subset_surface(64)
    assert surf[0, 0] == pytest.approx(ROOT4_2, abs=1e-12)  # aligned point: gamma1 = gamma2 = 0
    assert surf.min() >= ROOT4_2 - 1e-9
    with pytest.raises(InvalidInputError):
        subset_surface(32)


def test_subset_quadrature_converges():
    coarse = subset_mean_by_integration(128).mean
    fine = subset_mean_by_integration(256).mean
    assert abs(coarse - fine) < 1e-3


def test_subset_mc_agrees_with_quadrature():
    rep = run_study(StudyConfig("subset2233", 20_000, 5))
    assert abs(rep.mean - subset_mean_by_integration(128).mean) < 5 * rep.stderr + 1e-3


# --- convergence and noise curves ------------------------------------------------------------


def test_convergence_series_is_reproducible():
    a = convergence_series("sweep2233", [10, 100], 3)
    b = convergence_series("sweep2233", [10, 100], 3)
    assert a == b
    assert [r[0] for r in a] == [10, 100]


def test_violation_probability():
    vals = np.array([0.5, 1.0, 1.2, 1.4])
    assert violation_probability(vals, 1.0) == 0.5
    assert violation_probability(vals, 0.5) == 0.0


def test_noise_curves_monotone():
    grid = np.round(np.arange(0.5, 1.001, 0.05), 2)
    curves = {s: density_and_violation_curve(s, 5000, grid, 11) for s in (2, 3, 4)}
    for d in curves.values():
        p = d.curve.probabilities
        assert np.all(np.diff(p) >= 0)
        widths = np.diff(d.report.hist_edges)
        assert (d.density * widths).sum() == pytest.approx(1.0)
    for lo, hi in ((2, 3), (3, 4)):
        assert np.all(curves[hi].curve.probabilities >= curves[lo].curve.probabilities)
        # common random numbers: each sample can only gain settings
        assert np.all(curves[hi].report.values >= curves[lo].report.values - 1e-12)


def test_density_rejects_noise_config():
    with pytest.raises(InvalidInputError):
        density_and_violation_curve(2, 10, [0.9], 1, noise_v=0.5)


# --- finite statistics ------------------------------------------------------------------


def test_counts_follow_table():
    table = quantum_probability_table(separable_singlet())
    events = 1_000_000
    counts = sample_counts(table, events, np.random.default_rng(1))
    assert np.all(counts.totals == events)
    freq = counts.counts / events
    assert np.max(np.abs(freq - table)) < 5 / math.sqrt(events)


def test_counts_on_deterministic_table():
    table = shared_randomness_table(1.0, 0)  # only even-parity outcomes for y = 0
    counts = sample_counts(table, 1000, np.random.default_rng(2))
    assert counts.counts[..., 0, :][table[..., 0, :] == 0].sum() == 0


def test_counts_poisson_totals_vary():
    counts = sample_counts(uniform_table(), 10_000, np.random.default_rng(3), poisson=True)
    assert len(set(counts.totals.ravel().tolist())) > 1


def test_counts_frozen_seed():
    t = quantum_probability_table(separable_singlet())
    a = sample_counts(t, 100, np.random.default_rng(5)).counts
    b = sample_counts(t, 100, np.random.default_rng(5)).counts
    assert np.array_equal(a, b)


def test_bootstrap_centres_on_truth():
    noisy = separable_singlet(NoiseModel.symmetric(0.8989))
    table = quantum_probability_table(noisy)
    rng = np.random.default_rng(6)
    est = estimate_b_with_error(sample_counts(table, 100_000, rng), 300, rng)
    assert abs(est.b_hat - 0.8989 * math.sqrt(2)) < 4 * est.sigma
    assert est.sigma > 0


def test_bootstrap_sigma_shrinks_with_events():
    table = quantum_probability_table(separable_singlet())
    rng = np.random.default_rng(7)
    s_small = estimate_b_with_error(sample_counts(table, 1_000, rng), 400, rng).sigma
    s_big = estimate_b_with_error(sample_counts(table, 100_000, rng), 400, rng).sigma
    assert 7 < s_small / s_big < 13


def test_single_resample_warns():
    rng = np.random.default_rng(8)
    counts = sample_counts(uniform_table(), 50, rng)
    with pytest.warns(RuntimeWarning):
        est = estimate_b_with_error(counts, 1, rng)
    assert est.sigma == 0 and est.degenerate


def test_zero_event_context_rejected():
    counts = np.zeros((2,) * 6, dtype=np.int64)
    totals = np.zeros((2, 2, 2), dtype=np.int64)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(InvalidInputError):
            estimate_b_with_error(CountSample(counts, totals), 10)

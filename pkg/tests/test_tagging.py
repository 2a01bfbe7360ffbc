import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtag.errors import ConfigError
from qtag.tagging import (
    STATIC_EDGES,
    TagBinning,
    calibration_check,
    effective_efficiency,
    equal_population_bins,
    format_report,
    static_bins,
    tag_report,
)

TABLE_EPS = (0.159, 0.215, 0.292, 0.120, 0.103, 0.074, 0.036)
TABLE_W = (0.482, 0.400, 0.272, 0.158, 0.091, 0.043, 0.015)


def test_static_edges_and_assignment():
    b = static_bins()
    assert b.boundaries == STATIC_EDGES
    # 0-based indices
    np.testing.assert_array_equal(b.assign([0.7, 0.0, 1.0, 0.25, 0.0999, 0.875]), [4, 0, 6, 2, 0, 6])
    r = np.random.default_rng(0).random(100)
    np.testing.assert_array_equal(b.assign(r), b.assign(r))


def test_binning_validation():
    with pytest.raises(ConfigError):
        TagBinning((0.0, 0.5, 0.5, 1.0), "static")
    with pytest.raises(ConfigError):
        TagBinning((0.1, 1.0), "static")


def test_table_efficiency():
    assert effective_efficiency(TABLE_EPS, TABLE_W) == pytest.approx(0.2903, abs=0.003)


def test_perfect_and_random_taggers():
    y = np.array([1, -1, 1, 1, -1])
    assert tag_report(y.astype(float), y).epsilon_eff == 1.0
    # half wrong in every populated bin
    qr = np.array([0.05, 0.05, 0.3, 0.3, 0.9, 0.9])
    labels = np.array([1, -1, 1, -1, 1, -1])
    rep = tag_report(qr, labels)
    assert rep.epsilon_eff == 0.0
    assert rep.epsilon.sum() == pytest.approx(1.0)


def test_report_errors():
    with pytest.raises(ConfigError):
        tag_report([0.1, 0.2], [1])
    with pytest.raises(ConfigError):
        tag_report([1.5], [1])


def test_empty_bins_and_single_bin_calibration():
    rep = tag_report(np.full(10, 0.8), np.ones(10, dtype=int))
    assert rep.counts.sum() == 10 and rep.wrong[0] == 0.0 and rep.epsilon[0] == 0.0
    assert calibration_check(rep) == [(pytest.approx(0.8), 1.0)]


def test_calibrated_tagger_monte_carlo():
    rng = np.random.default_rng(12)
    n = 10_000
    r = rng.random(n)
    labels = rng.choice([-1, 1], n)
    correct = rng.random(n) < (1 + r) / 2
    qr = np.where(correct, labels, -labels) * r
    pairs = calibration_check(tag_report(qr, labels))
    assert max(abs(a - b) for a, b in pairs) < 0.05


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 300))
def test_report_properties(seed, n):
    rng = np.random.default_rng(seed)
    qr = rng.uniform(-1, 1, n)
    labels = rng.choice([-1, 1], n)
    rep = tag_report(qr, labels)
    assert rep.epsilon.sum() == pytest.approx(1.0, abs=1e-12)
    assert 0 <= rep.epsilon_eff <= 1
    perm = rng.permutation(n)
    assert tag_report(qr[perm], labels[perm]).epsilon_eff == pytest.approx(rep.epsilon_eff, abs=1e-12)
    # (1 - 2w)^2 only grows as w falls while w <= 1/2
    bins = static_bins().assign(np.abs(qr))
    wrong = np.flatnonzero((np.where(qr >= 0, 1, -1) != labels) & (rep.wrong[bins] <= 0.5))
    if wrong.size:
        fixed = labels.copy()
        fixed[wrong[0]] *= -1
        assert tag_report(qr, fixed).epsilon_eff >= rep.epsilon_eff - 1e-12


def test_equal_population_bins():
    r = np.linspace(0.001, 0.999, 700)
    b = equal_population_bins(r, 7)
    counts = np.bincount(b.assign(r), minlength=7)
    assert np.all(np.abs(counts - 100) <= 1)
    assert b.boundaries[0] == 0.0 and b.boundaries[-1] == 1.0
    assert equal_population_bins(r, 1).boundaries == (0.0, 1.0)
    with pytest.raises(ConfigError, match="degenerate r distribution"):
        equal_population_bins(np.full(50, 0.3), 7)
    with pytest.raises(ConfigError):
        equal_population_bins(r[:5], 7)


def test_format_report():
    rep = tag_report(np.array([0.05, -0.3, 0.95]), np.array([1, 1, 1]))
    text = format_report(rep)
    lines = text.splitlines()
    assert lines[0] == "bin_lo\tbin_hi\tepsilon_i\tw_i\tmean_r_i"
    assert len(lines) == 9 and lines[-1].startswith("epsilon_eff\t")

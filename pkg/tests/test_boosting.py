import json

import numpy as np
import pytest

from qtag.backends import CvBackend, QubitBackend, derive_seed, member_seeds
from qtag.boosting import (
    BoostedModel,
    boosted_qr,
    ensemble_qr,
    ensemble_votes,
    load_ensemble,
    qr_from_ensemble_votes,
    qr_from_votes,
    save_ensemble,
    stage_weight,
    train_adaboost,
    train_ensemble,
)
from qtag.data import SyntheticSpec, apply_standardizer, fit_standardizer, generate_synthetic
from qtag.errors import ConfigError, NumericError
from qtag.gram import gram
from qtag.svm import predict, train_svm


def _noisy_problem(seed, n=60):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = np.where(X[:, 0] + 0.8 * rng.normal(size=n) > 0, 1, -1)
    K = np.exp(-0.3 * ((X[:, None] - X[None]) ** 2).sum(-1))
    return K, y


@pytest.fixture(scope="module")
def data():
    d = generate_synthetic(SyntheticSpec(6, 2, 1.5, 4, 300))
    return apply_standardizer(d, fit_standardizer(d))


def test_stage_weight_formula():
    assert stage_weight(0.3) == pytest.approx(0.5 * np.log(7 / 3), abs=1e-12)
    assert stage_weight(0.3) == pytest.approx(0.423649, abs=1e-6)
    assert stage_weight(0.0) == pytest.approx(0.5 * np.log((1 - 1e-10) / 1e-10))


def test_separable_data_stops_after_one_stage():
    X = np.concatenate([np.linspace(-3, -1, 10), np.linspace(1, 3, 10)])
    y = np.repeat([-1, 1], 10)
    K = np.exp(-0.5 * (X[:, None] - X[None]) ** 2)
    m = train_adaboost(K, y, G=5, C_reg=10.0)
    assert len(m.stages) == 1 and m.errors == [0.0]
    assert m.stage_weights[0] > 10
    np.testing.assert_array_equal(np.sign(boosted_qr(m, K)), y)


def test_reweighting_rule():
    K, y = _noisy_problem(0)
    m = train_adaboost(K, y, G=2)
    svm, alpha = m.stages[0]
    h = np.where(K[:, svm.support_indices] @ svm.dual_coeffs + svm.bias >= 0, 1, -1)
    w0 = np.full(len(y), 1 / len(y))
    w1 = w0 * np.exp(-alpha * y * h)
    w1 /= w1.sum()
    assert w1.sum() == pytest.approx(1.0, abs=1e-12)
    wrong = h != y
    assert wrong.any() and np.all(w1[wrong] > w0[wrong])
    second = train_svm(K, y, w1)
    np.testing.assert_array_equal(second.support_indices, m.stages[1][0].support_indices)


def test_stage_errors_and_loss_bound():
    for seed in range(4):
        K, y = _noisy_problem(seed)
        m = train_adaboost(K, y, G=8)
        errs = np.array(m.errors[: len(m.stages)])
        assert np.all(errs < 0.5)
        bound = m.loss_bound()
        assert np.all(np.diff(bound) < 0) and bound[0] < 1


def test_no_usable_stage():
    # constant kernel: every weighted SVM predicts a single class
    y = np.array([1, 1, -1, -1])
    with pytest.raises(NumericError, match="no usable stage"):
        train_adaboost(np.ones((4, 4)), y, G=3)
    with pytest.raises(ConfigError):
        train_adaboost(np.eye(4), y, G=0)


def test_vote_arithmetic():
    assert qr_from_votes([1, 1, 2], np.array([[1], [1], [-1]]))[0] == 0.0
    np.testing.assert_array_equal(qr_from_votes([0.7], np.array([[1, -1]])), [1.0, -1.0])
    np.testing.assert_allclose(qr_from_votes([1, 1, 2], np.array([[1], [1], [-1]]), generations=2), [1.0])
    votes = [(np.array([1.0]), np.array([[1]])), (np.array([2.0]), np.array([[1]])), (np.array([1.0]), np.array([[-1]]))]
    assert qr_from_ensemble_votes(votes)[0] == pytest.approx(1 / 3)
    agree = [(np.array([1.0]), np.array([[1, 1]]))] * 4
    np.testing.assert_array_equal(qr_from_ensemble_votes(agree), [1.0, 1.0])


def test_boosted_qr_bounded_and_shape_checked():
    K, y = _noisy_problem(1)
    m = train_adaboost(K, y, G=6)
    qr = boosted_qr(m, K)
    assert np.all(np.abs(qr) <= 1)
    with pytest.raises(ConfigError):
        boosted_qr(m, K[:, :3])


def test_seed_scheme():
    assert member_seeds(5, 3) == (derive_seed(5, 3, 0), derive_seed(5, 3, 1))
    assert len({member_seeds(0, k)[0] for k in range(50)}) == 50


def test_ensemble_n1_g1_is_plain_svm(data):
    be = QubitBackend(3, 2)
    e = train_ensemble(data, 1, 60, 1, be, 1.0, master_seed=9)
    subset_seed, angle_seed = e.member_seeds[0]
    m = e.members[0]
    emb = be.embedding(data.feature_count, angle_seed)
    Xs, ys = data.X[m.training_subset], data.y[m.training_subset]
    svm = train_svm(gram(emb, Xs), ys)
    X_test = np.random.default_rng(0).normal(size=(20, data.feature_count))
    K_test = gram(emb, X_test, Xs[svm.support_indices])
    np.testing.assert_array_equal(np.sign(ensemble_qr(e, X_test)), predict(svm, K_test))


def _serialised(tmp_path, e, name):
    save_ensemble(e, tmp_path / name)
    return {p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())}


def test_determinism_and_thread_independence(data, tmp_path):
    be = QubitBackend(3, 2)
    a = train_ensemble(data, 4, 50, 3, be, master_seed=2)
    b = train_ensemble(data, 4, 50, 3, be, master_seed=2, threads=3)
    assert _serialised(tmp_path, a, "a") == _serialised(tmp_path, b, "b")
    subsets = [set(m.training_subset) for m in a.members]
    assert all(subsets[i] != subsets[j] for i in range(4) for j in range(i + 1, 4))
    assert len({s[1] for s in a.member_seeds}) == 4


def test_adding_members_keeps_existing_ones(data):
    be = QubitBackend(2, 2)
    small = train_ensemble(data, 2, 40, 2, be, master_seed=7)
    big = train_ensemble(data, 4, 40, 2, be, master_seed=7)
    assert big.member_seeds[:2] == small.member_seeds
    for p, q in zip(small.members, big.members):
        assert json.dumps(p.to_dict()) == json.dumps(q.to_dict())


def test_member_order_invariance(data):
    e = train_ensemble(data, 5, 40, 2, QubitBackend(3, 2), master_seed=1)
    X_test = data.X[:30]
    votes = ensemble_votes(e, X_test)
    qr = qr_from_ensemble_votes(votes)
    perm = [3, 0, 4, 2, 1]
    np.testing.assert_allclose(qr_from_ensemble_votes([votes[k] for k in perm]), qr, atol=1e-15)
    assert np.all(np.abs(qr) <= 1)


def test_cv_ensemble_shares_embedding(data):
    e = train_ensemble(data, 3, 50, 2, CvBackend(1, 0.3), master_seed=0)
    assert len({s[1] for s in e.member_seeds}) == 1
    qr = ensemble_qr(e, data.X[:40])
    assert qr.shape == (40,) and np.all(np.abs(qr) <= 1)


def test_save_load_roundtrip(data, tmp_path):
    e = train_ensemble(data, 3, 50, 3, QubitBackend(2, 2), master_seed=3)
    save_ensemble(e, tmp_path / "m", {"note": "x"})
    back = load_ensemble(tmp_path / "m", data.X)
    np.testing.assert_array_equal(ensemble_qr(back, data.X[:25]), ensemble_qr(e, data.X[:25]))
    with pytest.raises(ConfigError):
        load_ensemble(tmp_path / "missing", data.X)
    m = e.members[0]
    assert BoostedModel.from_dict(m.to_dict()).to_dict() == m.to_dict()


def test_ensemble_input_checks(data):
    with pytest.raises(ConfigError):
        train_ensemble(data, 2, len(data) + 1, 1, QubitBackend(2, 1))
    e = train_ensemble(data, 1, 30, 1, QubitBackend(2, 1))
    with pytest.raises(ConfigError):
        ensemble_qr(e, np.zeros((3, data.feature_count + 1)))

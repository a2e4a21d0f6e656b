import warnings

import numpy as np
import pytest
from scipy import stats

from zsecg.classifiers import (CNN_PATH, PROB_PATH, Cnn1DClassifier, CnnModel,
                               EnsembleClassifier, EnsembleModel, NpeLikelihoodClassifier,
                               ResidualDistributions, ResidualThresholdDetector,
                               ThresholdClassifier, TrainConfig, best_threshold,
                               cnn_forward, cnn_train, confidence_grid, ensemble_classify,
                               exponential_pdf, f1_vs_confidence, f1_vs_threshold,
                               fit_distributions, fit_exponential, fit_gaussian,
                               gaussian_pdf, prob_classify, select_confidence, shape_chain,
                               threshold_classify)
from zsecg.classifiers.cnn import PARAM_NAMES, log_softmax, softmax
from zsecg.classifiers.probabilistic import exponential_loglik, gaussian_loglik
from zsecg.exceptions import DegenerateDistribution, InvalidArgument, InvalidTrainingSet
from zsecg.sparse import build_annihilator
from zsecg.sparse.residuals import npe_energies

from conftest import random_unit_rows


def blobs(rng, n, noise=0.3):
    """Two-channel beats: class 0 a bump at 40, class 1 a bump at 88."""
    t = np.arange(128)
    y = np.arange(n) % 2
    centers = np.where(y == 1, 88, 40)
    base = np.exp(-0.5 * ((t[None] - centers[:, None]) / 5.0) ** 2)
    X = np.stack([base, base[:, ::-1]], axis=1) + noise * rng.standard_normal((n, 2, 128))
    X /= np.linalg.norm(X, axis=2, keepdims=True)
    return X, y


# --- threshold -------------------------------------------------------------------

def test_threshold_classify_cases():
    assert threshold_classify(ThresholdClassifier("NPE", 0.3), 0.0) == 0
    assert threshold_classify(ThresholdClassifier("NPE", 0.5), 1.0) == 1
    assert threshold_classify(ThresholdClassifier("NPE", 0.5), 0.5) == 0
    np.testing.assert_array_equal(
        threshold_classify(ThresholdClassifier("SAE", 0.2), [0.1, 0.3]), [0, 1])
    with pytest.raises(InvalidArgument):
        ThresholdClassifier("NPE", 1.5)


def test_f1_vs_threshold_single_peak_region(rng):
    normal = rng.beta(2, 20, 500)
    abnormal = rng.beta(8, 6, 300)
    e = np.r_[normal, abnormal]
    y = np.r_[np.zeros(500), np.ones(300)].astype(int)
    grid, f1 = f1_vs_threshold(e, y)
    peak = np.flatnonzero(f1 >= f1.max() - 0.02)
    assert np.all(np.diff(peak) == 1)  # one contiguous region near the top
    thr = best_threshold(e, y)
    assert thr in grid and f1[np.searchsorted(grid, thr)] == f1.max()


def test_residual_threshold_detector(beats):
    bs = next(iter(beats.values()))
    det = ResidualThresholdDetector(n_iter=3).fit(bs.single, bs.y)
    assert 0 <= det.classifier_.threshold <= 1
    pred = det.predict(bs.single)
    assert set(np.unique(pred)) <= {0, 1}
    assert det.score(bs.single, bs.y) > 0.8


# --- probabilistic -----------------------------------------------------------------

def test_fit_exponential_cases():
    assert fit_exponential([1, 2, 3]) == 2
    assert fit_exponential([0.7]) == 0.7
    with pytest.raises(InvalidArgument):
        fit_exponential([])
    with pytest.raises(InvalidArgument):
        fit_exponential([1.0, -0.1])


def test_fit_exponential_matches_scipy(rng):
    xs = rng.exponential(0.2, 500)
    _, scale = stats.expon.fit(xs, floc=0)
    assert fit_exponential(xs) == pytest.approx(scale, rel=1e-12)


def test_fit_gaussian_cases(rng):
    assert fit_gaussian([0, 2]) == (1.0, 1.0)
    xs = rng.normal(0.6, 0.1, 300)
    mu, sigma = fit_gaussian(xs)
    ref_mu, ref_sigma = stats.norm.fit(xs)
    assert (mu, sigma) == pytest.approx((ref_mu, ref_sigma), rel=1e-12)
    with pytest.raises(InvalidArgument):
        fit_gaussian([1.0])


def test_fit_gaussian_degenerate():
    with pytest.warns(DegenerateDistribution):
        mu, sigma = fit_gaussian([5, 5, 5])
    assert (mu, sigma) == (5.0, 1e-6)


@pytest.mark.parametrize("scale", [0.9, 1.1])
def test_mle_beats_perturbations(rng, scale):
    xs = rng.exponential(0.1, 200)
    beta = fit_exponential(xs)
    assert exponential_loglik(xs, beta) > exponential_loglik(xs, scale * beta)
    zs = rng.normal(0.5, 0.2, 200)
    mu, sigma = fit_gaussian(zs)
    best = gaussian_loglik(zs, mu, sigma)
    assert best > gaussian_loglik(zs, scale * mu, sigma)
    assert best > gaussian_loglik(zs, mu, scale * sigma)


def test_densities_match_scipy(rng):
    x = rng.uniform(-0.5, 2, 50)
    np.testing.assert_allclose(exponential_pdf(x, 0.3), stats.expon.pdf(x, scale=0.3))
    np.testing.assert_allclose(gaussian_pdf(x, 0.7, 0.2), stats.norm.pdf(x, 0.7, 0.2))


def test_prob_classify_cases():
    d = ResidualDistributions(0.1, 1.0, 0.2)
    assert exponential_pdf(0.05, 0.1) == pytest.approx(6.065, abs=1e-3)
    assert gaussian_pdf(0.05, 1.0, 0.2) == pytest.approx(2.6e-5, rel=0.05)
    assert prob_classify(d, 0.05) == 0
    assert prob_classify(d, -0.01) == 1
    assert prob_classify(ResidualDistributions(1e6, 1.0, 0.2), 1.0) == 1
    np.testing.assert_array_equal(prob_classify(d, [0.05, 1.0]), [0, 1])


def test_prob_classify_tie_is_abnormal():
    # Far in the tail both densities underflow to exactly 0.
    d = ResidualDistributions(1.0, 0.0, 1.0)
    assert exponential_pdf(1e4, 1.0) == gaussian_pdf(1e4, 0.0, 1.0) == 0.0
    assert prob_classify(d, 1e4) == 1


def test_distributions_validate():
    with pytest.raises(InvalidArgument):
        ResidualDistributions(0.0, 1.0, 1.0)
    with pytest.raises(InvalidArgument):
        ResidualDistributions(1.0, 1.0, 0.0)


def test_npe_likelihood_estimator(rng):
    x = np.r_[rng.exponential(0.05, 300), rng.normal(0.6, 0.1, 100)]
    y = np.r_[np.zeros(300), np.ones(100)].astype(int)
    est = NpeLikelihoodClassifier().fit(x, y)
    assert est.distributions_ == fit_distributions(x[:300], x[300:])
    assert est.score(x, y) > 0.95


# --- CNN ----------------------------------------------------------------------------

def test_shape_chain():
    assert shape_chain() == [128, 122, 40, 34, 11, 5, 1, 16, 32, 2]


def test_forward_shapes(rng):
    X = rng.standard_normal((3, 2, 128))
    out, cache = CnnModel.initialize(0).forward(X, keep=True)
    conv_cache, h_shape, flat, z1, a1, _ = cache
    assert [c[2][2] for c in conv_cache] == [122, 34, 5]
    assert [c[4].shape[2] for c in conv_cache] == [40, 11, 1]
    assert flat.shape == (3, 16) and z1.shape == (3, 32) and out.shape == (3, 2)


def test_zero_model_is_uniform():
    log_probs, conf = cnn_forward(CnnModel.zeros(), np.ones((2, 128)))
    np.testing.assert_allclose(np.exp(log_probs), [0.5, 0.5])
    assert conf == 0.5


def test_softmax_consistency(rng):
    z = 10 * rng.standard_normal((50, 2))
    np.testing.assert_allclose(np.exp(log_softmax(z)), softmax(z), atol=1e-9)
    log_probs, conf = cnn_forward(CnnModel.initialize(3), rng.standard_normal((20, 2, 128)))
    np.testing.assert_allclose(np.exp(log_probs).sum(axis=1), 1, atol=1e-6)
    assert np.all((conf >= 0.5) & (conf <= 1))


@pytest.mark.parametrize("name", PARAM_NAMES)
def test_backward_matches_finite_differences(name):
    rng = np.random.default_rng(11)
    model = CnnModel.initialize(5)
    for k in model.params:  # larger weights so every layer carries signal
        model.params[k] *= 3.0
    X = rng.standard_normal((10, 2, 128))
    y = np.arange(10) % 2
    _, grads = model.loss_and_grads(X, y)
    p = model.params[name]
    idx = rng.choice(p.size, min(p.size, 25), replace=False)
    h = 1e-6
    fd, an = [], []
    for i in idx:
        orig = p.flat[i]
        p.flat[i] = orig + h
        up = model.loss(X, y)
        p.flat[i] = orig - h
        down = model.loss(X, y)
        p.flat[i] = orig
        fd.append((up - down) / (2 * h))
        an.append(grads[name].flat[i])
    fd, an = np.array(fd), np.array(an)
    assert np.linalg.norm(an - fd) / np.linalg.norm(fd) < 1e-3


def test_train_separable_blobs(rng):
    X, y = blobs(rng, 400)
    Xv, yv = blobs(rng, 100)
    model, hist = cnn_train(CnnModel.initialize(0), (X, y), (Xv, yv),
                            TrainConfig(max_epochs=50, patience=50))
    acc = np.mean(model.predict_log_proba(Xv).argmax(axis=1) == yv)
    assert acc >= 0.95
    assert len(hist.val_loss) == len(hist.train_loss) <= 50
    assert model.loss(Xv, yv) == pytest.approx(min(hist.val_loss), rel=1e-12)
    assert hist.best_val_loss == min(hist.val_loss)
    assert hist.best_epoch == int(np.argmin(hist.val_loss))


def test_train_early_stopping(rng):
    X, y = blobs(rng, 100)
    Xv, yv = blobs(rng, 40)
    _, hist = cnn_train(CnnModel.initialize(0), (X, y), (Xv, yv),
                        TrainConfig(lr=0.05, max_epochs=200, patience=3))
    assert len(hist.val_loss) - 1 - hist.best_epoch == 3 or len(hist.val_loss) == 200


def test_train_errors(rng):
    X, y = blobs(rng, 20)
    with pytest.raises(InvalidTrainingSet):
        cnn_train(CnnModel.initialize(0), (X, np.zeros(20, int)), (X, y))
    with pytest.raises(InvalidTrainingSet):
        cnn_train(CnnModel.initialize(0), (X, y), (X[:0], y[:0]))


def test_train_reproducible(rng):
    X, y = blobs(rng, 60)
    cfg = TrainConfig(max_epochs=3, seed=4)
    a, _ = cnn_train(CnnModel.initialize(4), (X, y), (X, y), cfg)
    b, _ = cnn_train(CnnModel.initialize(4), (X, y), (X, y), cfg)
    for k in PARAM_NAMES:
        np.testing.assert_array_equal(a.params[k], b.params[k])


def test_cnn_estimator(rng):
    X, y = blobs(rng, 200)
    est = Cnn1DClassifier(max_epochs=20, patience=20).fit(X, y)
    assert est.score(X, y) >= 0.95
    np.testing.assert_allclose(est.predict_proba(X[:5]).sum(axis=1), 1)
    assert est.get_params()["patience"] == 20


def test_model_dict_round_trip():
    m = CnnModel.initialize(2)
    r = CnnModel.from_dict(m.to_dict())
    for k in PARAM_NAMES:
        np.testing.assert_array_equal(m.params[k], r.params[k])


# --- ensemble ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def random_ensemble():
    rng = np.random.default_rng(99)
    D = rng.standard_normal((128, 20))
    D /= np.linalg.norm(D, axis=0)
    F = build_annihilator(D)
    pairs = np.stack([random_unit_rows(rng, 1000), random_unit_rows(rng, 1000)], axis=1)
    e = npe_energies(F, pairs[:, 0])
    dist = ResidualDistributions(float(np.median(e)) / 2, float(np.median(e)), 0.02)
    model = CnnModel.initialize(8)
    for k in model.params:
        model.params[k] *= 4.0  # spread the confidences over (0.5, 1)
    return EnsembleModel(model, dist, F), pairs, e


@pytest.mark.parametrize("C", [0.0, 0.3, 0.5])
def test_ensemble_low_threshold_is_cnn(random_ensemble, C):
    ens, pairs, _ = random_ensemble
    ens = EnsembleModel(ens.cnn, ens.dist, ens.annihilator, C)
    decisions, paths = ensemble_classify(ens, pairs, pairs[:, 0])
    np.testing.assert_array_equal(decisions, ens.cnn.predict_log_proba(pairs).argmax(axis=1))
    assert np.all(paths == CNN_PATH)


@pytest.mark.parametrize("C", [1.0 + 1e-9, 1.5])
def test_ensemble_high_threshold_is_probabilistic(random_ensemble, C):
    ens, pairs, e = random_ensemble
    ens = EnsembleModel(ens.cnn, ens.dist, ens.annihilator, C)
    decisions, paths = ensemble_classify(ens, pairs, pairs[:, 0])
    np.testing.assert_array_equal(decisions, prob_classify(ens.dist, e))
    assert np.all(paths == PROB_PATH)
    assert 0 < decisions.sum() < len(decisions)


def test_ensemble_path_mix_and_single(random_ensemble):
    ens, pairs, e = random_ensemble
    conf = np.exp(ens.cnn.predict_log_proba(pairs)).max(axis=1)
    C = float(np.median(conf))
    ens = EnsembleModel(ens.cnn, ens.dist, ens.annihilator, C)
    decisions, paths = ensemble_classify(ens, pairs, pairs[:, 0])
    assert (paths == CNN_PATH).sum() + (paths == PROB_PATH).sum() == len(pairs)
    np.testing.assert_array_equal(paths == CNN_PATH, conf >= C)
    d0, p0 = ensemble_classify(ens, pairs[0], pairs[0, 0])
    assert (d0, p0) == (decisions[0], paths[0])


def test_confidence_grid():
    g = confidence_grid()
    assert len(g) == 50 and g[0] == 0.5 and g[-1] == 0.99
    np.testing.assert_allclose(np.diff(g), 0.01)


class StubCnn:
    """Returns the abnormal probability stored in sample ``[0, 1]`` of each pair."""

    def predict_log_proba(self, pairs):
        p = pairs[:, 1, 0]
        return np.log(np.c_[1 - p, p])


def _stub_fixture(cnn_good):
    y = np.r_[np.zeros(20), np.ones(20)].astype(int)
    F = build_annihilator(np.eye(128)[:, :20])
    singles = np.zeros((40, 128))
    # Single-beat NPE: sqrt(energy) on coordinate 30.  Normal energy 0.01, abnormal 0.8.
    singles[:, 30] = np.sqrt(np.where(y == 1, 0.8, 0.01))
    dist = ResidualDistributions(0.02, 0.8, 0.1)
    pairs = np.zeros((40, 2, 128))
    pairs[:, 0] = singles
    if cnn_good:
        # CNN right with low confidence, probabilistic branch fed the wrong energies.
        pairs[:, 1, 0] = np.where(y == 1, 0.505, 0.3)
        singles = singles[::-1].copy()
        pairs[:, 0] = singles
    else:
        pairs[:, 1, 0] = np.where(y == 1, 0.1, 0.9)  # CNN confident and wrong
    ens = EnsembleModel(StubCnn(), dist, F)
    return ens, (pairs, singles, y)


def test_select_confidence_prefers_probabilistic():
    ens, val = _stub_fixture(cnn_good=False)
    assert prob_classify(ens.dist, npe_energies(ens.annihilator, val[1])).tolist() == val[2].tolist()
    assert select_confidence(ens, val) == 0.99


def test_select_confidence_prefers_cnn():
    ens, val = _stub_fixture(cnn_good=True)
    grid, f1 = f1_vs_confidence(ens.cnn.predict_log_proba(val[0]),
                                npe_energies(ens.annihilator, val[1]), val[2], ens.dist)
    assert f1[0] == 1.0 and f1[1:].max() < 1.0
    assert select_confidence(ens, val) == 0.5


def test_select_confidence_in_grid(random_ensemble, rng):
    ens, pairs, _ = random_ensemble
    y = rng.integers(0, 2, len(pairs))
    assert select_confidence(ens, (pairs, pairs[:, 0], y)) in confidence_grid()


def test_ensemble_estimator(rng):
    X, y = blobs(rng, 240)
    normals = X[y == 0, 0]
    est = EnsembleClassifier(cnn=Cnn1DClassifier(max_epochs=15, patience=15))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateDistribution)
        est.fit(X, y, normal_beats=normals)
    assert est.model_.confidence_threshold in confidence_grid()
    assert est.score(X, y) >= 0.9
    paths = est.paths(X)
    assert set(np.unique(paths)) <= {CNN_PATH, PROB_PATH}
    with pytest.raises(InvalidArgument):
        EnsembleClassifier().fit(X, y)

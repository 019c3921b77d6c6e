import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dual_qp_projected_gradient, rbf_gram_loops
from soundsource import DataError, InvariantViolation
from soundsource.corpus import AudioClip
from soundsource.svm import (
    BinaryMachine,
    SvmConfig,
    SvmModel,
    apply_standardizer,
    check_machine,
    dual_objective,
    fit_standardizer,
    gate_human,
    predict,
    predict_batch,
    rbf_gram,
    rbf_kernel,
    smo_solve,
    train_binary_smo,
    train_multiclass,
)
from soundsource.synthgen import apply_channel, default_profiles, synth_voice


def kkt_violation(alpha, bias, K, y, C):
    """Largest violation of the soft-margin KKT conditions over all points."""
    m = y * ((alpha * y) @ K + bias)
    at_zero, at_c = alpha <= 0, alpha >= C
    free = ~at_zero & ~at_c
    v = np.zeros(len(y))
    v[at_zero] = np.maximum(0, 1 - m[at_zero])
    v[at_c] = np.maximum(0, m[at_c] - 1)
    v[free] = np.abs(m[free] - 1)
    return v.max()


def random_problem(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 13))
    X = r.normal(size=(n, int(r.integers(1, 5)))) * 1.5
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    r.shuffle(y)
    return X, y


# --- kernel ------------------------------------------------------------------


def test_kernel_closed_form():
    assert rbf_kernel([0.0, 0.0], [2.0, 0.0], 0.25) == pytest.approx(np.exp(-1), abs=1e-12)
    assert rbf_kernel([0.3, -2.0], [0.3, -2.0], 0.25) == 1.0
    with pytest.raises(DataError):
        rbf_kernel([0.0], [0.0, 1.0], 0.25)


def test_gram_matches_loops_and_is_psd(rng):
    for _ in range(20):
        X = rng.standard_normal((5, 3))
        K = rbf_gram(X, gamma=0.25)
        assert np.abs(K - rbf_gram_loops(X, 0.25)).max() < 1e-12
        assert np.array_equal(K, K.T) and np.all(np.diag(K) == 1)
        assert np.linalg.eigvalsh(K).min() >= -1e-9


# --- standardizer --------------------------------------------------------------


def test_standardizer_hand_example():
    s = fit_standardizer(np.array([[0.0, 10.0], [2.0, 10.0]]))
    assert np.array_equal(s.center, [1.0, 10.0])
    assert np.array_equal(s.scale, [1.0, 1.0])
    assert list(s.constant) == [False, True]
    assert np.array_equal(apply_standardizer(s, np.array([2.0, 10.0])), [1.0, 0.0])


def test_standardizer_properties(rng):
    X = rng.normal(5, 3, size=(40, 6))
    Z = fit_standardizer(X).apply(X)
    assert np.abs(Z.mean(axis=0)).max() < 1e-9
    assert np.abs(Z.std(axis=0) - 1).max() < 1e-9
    far = fit_standardizer(X).apply(np.full(6, 1e12))
    assert np.all(np.isfinite(far)) and far.min() > 1e10
    M = fit_standardizer(X, "minmax").apply(X)
    assert M.min() == 0.0 and M.max() == 1.0
    with pytest.raises(DataError):
        fit_standardizer(X[:1])


# --- binary SMO ----------------------------------------------------------------


def test_two_point_symmetry():
    m = train_binary_smo(np.array([[-1.0], [1.0]]), np.array([-1.0, 1.0]))
    assert m.alpha[0] == pytest.approx(m.alpha[1], abs=1e-12)
    assert abs(m.bias) < 1e-6
    K = rbf_gram(np.array([[-1.0], [1.0]]), np.array([[0.0]]), 0.25)
    assert abs(m.coef @ K[m.support, 0] + m.bias) < 1e-6


def test_xor_against_dual_grid():
    X = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    K = rbf_gram(X, gamma=0.25)
    grid = np.linspace(0, 1, 21)
    best, best_a = -np.inf, None
    for a in itertools.product(grid, repeat=4):
        a = np.array(a)
        if abs(a @ y) < 1e-12:
            obj = dual_objective(a, K, y)
            if obj > best:
                best, best_a = obj, a
    # the grid optimum already separates the training set
    f_grid = (best_a * y) @ K
    b = np.median(y - f_grid)
    assert np.all(np.sign(f_grid + b) == y)
    m = train_binary_smo(X, y)
    f = (m.alpha * y) @ K + m.bias
    assert np.all(np.sign(f) == y)
    assert dual_objective(m.alpha, K, y) >= best - 1e-3


def test_smo_matches_qp_oracle_on_random_problems():
    for seed in range(50):
        X, y = random_problem(seed)
        K = rbf_gram(X, gamma=0.25)
        alpha, bias, _, converged = smo_solve(K, y, 1.0, 1e-3)
        _, ref = dual_qp_projected_gradient(K, y, 1.0)
        assert converged
        assert abs(dual_objective(alpha, K, y) - ref) < 1e-3
        assert kkt_violation(alpha, bias, K, y, 1.0) <= 1e-3
        assert np.all((alpha >= 0) & (alpha <= 1.0)) and abs(alpha @ y) <= 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_training_predictions_survive_row_permutation(seed, rnd):
    X, y = random_problem(seed)
    order = np.array(rnd.sample(range(len(y)), len(y)))
    def train_predict(rows):
        m = train_binary_smo(X[rows], y[rows])
        f = m.coef @ rbf_gram(X[rows][m.support], X, 0.25) + m.bias
        return np.sign(f)

    assert np.array_equal(train_predict(np.arange(len(y))), train_predict(order))


def test_binary_errors():
    with pytest.raises(DataError):
        train_binary_smo(np.zeros((3, 2)), np.ones(3))
    with pytest.raises(DataError):
        train_binary_smo(np.zeros((2, 2)), np.array([1.0, 0.0]))
    bad = BinaryMachine("a", "b", np.array([0, 1]), np.array([0.5, 0.2]), 0.0)
    with pytest.raises(InvariantViolation):
        check_machine(bad, 1.0)


# --- multiclass ----------------------------------------------------------------


def blobs(seed=0, n=15):
    r = np.random.default_rng(seed)
    centers = {"human": (0.0, 0.0), "ipod": (6.0, 0.0), "headphone": (0.0, 6.0)}
    X = np.vstack([r.normal(c, 0.5, size=(n, 2)) for c in centers.values()])
    labels = [lab for lab in centers for _ in range(n)]
    return X, labels, centers


def test_blobs_fit_perfectly():
    X, labels, centers = blobs()
    model = train_multiclass(X, labels)
    assert len(model.machines) == 3
    assert predict_batch(model, X) == labels
    for m in model.machines:
        check_machine(m, 1.0)
    # a point at a class centre wins every one of its pairwise votes
    label, rec = predict(model, np.array(centers["ipod"]))
    assert label == "ipod" and rec.votes["ipod"] == 2


def test_four_classes_six_machines():
    r = np.random.default_rng(1)
    labels = [lab for lab in ("human", "loudspeaker", "ipod", "headphone") for _ in range(4)]
    model = train_multiclass(r.standard_normal((16, 3)), labels)
    assert len(model.machines) == 6


def test_two_class_model_is_the_binary_machine():
    X, labels, _ = blobs(2)
    keep = [i for i, lab in enumerate(labels) if lab != "headphone"]
    X2, l2 = X[keep], [labels[i] for i in keep]
    model = train_multiclass(X2, l2)
    probe = np.random.default_rng(3).uniform(-2, 8, size=(30, 2))
    dec = model.decision_values(model.prepare(probe))[:, 0]
    for x, f in zip(probe, dec):
        label, rec = predict(model, x)
        assert len(rec.decisions) == 1
        assert label == ("human" if f > 0 else "ipod")


def _fixed_model(biases, classes=("human", "ipod", "headphone")):
    """Model whose machines have no support vectors, so each decision equals its bias."""
    std = fit_standardizer(np.array([[0.0], [1.0]]))
    machines = [
        BinaryMachine(a, b, np.array([], dtype=np.int64), np.array([]), bias)
        for (a, b), bias in zip(itertools.combinations(classes, 2), biases)
    ]
    return SvmModel(list(classes), machines, np.zeros((0, 1)), std, SvmConfig())


def test_vote_ties():
    # human beats ipod, headphone beats human, ipod beats headphone: one vote each
    label, rec = predict(_fixed_model([0.5, -2.0, 1.0]), np.array([0.0]))
    assert set(rec.votes.values()) == {1}
    assert label == "headphone"  # largest |decision| among its wins
    for _ in range(3):
        assert predict(_fixed_model([0.5, -2.0, 1.0]), np.array([0.0]))[0] == "headphone"
    # equal confidence falls back to class order
    assert predict(_fixed_model([1.0, -1.0, 1.0]), np.array([0.0]))[0] == "human"


def test_model_round_trip_bit_exact(tmp_path):
    X, labels, _ = blobs(4)
    model = train_multiclass(X, labels, feature_indices=[1, 0])
    text = model.dumps()
    again = SvmModel.loads(text)
    probe = np.random.default_rng(9).uniform(-3, 9, size=(50, 2))
    assert np.array_equal(
        model.decision_values(model.prepare(probe)), again.decision_values(again.prepare(probe))
    )
    assert predict_batch(model, probe) == predict_batch(again, probe)
    assert again.dumps() == text
    with pytest.raises(DataError):
        SvmModel.loads('{"format": "other"}')
    with pytest.raises(DataError):
        predict(model, np.zeros(3))


def test_multiclass_errors():
    with pytest.raises(DataError, match="2 classes"):
        train_multiclass(np.zeros((4, 2)), ["human"] * 4)
    with pytest.raises(DataError, match="ipod"):
        train_multiclass(np.random.default_rng(0).standard_normal((4, 2)), ["human"] * 3 + ["ipod"])


# --- gate ------------------------------------------------------------------------


def _profile_clip(label, seed):
    rng = np.random.default_rng([seed, 777])
    clip = synth_voice(rng, rng.uniform(90, 250), rng.uniform(0.6, 1.0))
    return apply_channel(clip, default_profiles()[label], rng)


@pytest.mark.slow
def test_gate_on_reference_model(reference_model):
    for seed in range(5):
        assert gate_human(reference_model, _profile_clip("human", seed)) == "accept"
        assert gate_human(reference_model, _profile_clip("loudspeaker", seed)) == "reject"
    assert gate_human(reference_model, AudioClip(np.zeros(16000))) == "reject"


def test_gate_needs_human_class():
    with pytest.raises(DataError):
        gate_human(_fixed_model([1.0], classes=("ipod", "headphone")), AudioClip(np.ones(1000)))

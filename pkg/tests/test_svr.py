"""Tests for the epsilon-insensitive linear SVR."""

from __future__ import annotations

import numpy as np
import pytest

from reflowshift.errors import NotConverged, ShapeMismatch
from reflowshift.preprocess import Scaler, fit_scaler
from reflowshift.svr import SvrModel, predict_svr, svr_objective, train_svr


def grid_oracle(X, y, C=1.0, epsilon=0.1):
    """Two-stage dense grid search over (w, b); independent of the solver.

    Scans a coarse lattice over a generous data-driven range, then
    refines around the coarse winner.  Never returns less than the true
    minimum, so solver_objective <= oracle + tol certifies optimality.
    """
    p = X.shape[1]

    def objective(W, b_grid):
        # W: (m, p), b_grid: (q,) -> (m, q) objective values
        raw = X @ W.T  # (n, m)
        res = np.abs(y[:, None, None] - (raw[:, :, None] + b_grid[None, None, :]))
        slack = np.maximum(0.0, res - epsilon)
        return 0.5 * (W * W).sum(axis=1)[:, None] + C * slack.sum(axis=0)

    span = 2.0
    axes = [np.linspace(-span, span, 41) for _ in range(p)]
    b_axis = np.linspace(y.min() - 1.0, y.max() + 1.0, 41)
    W = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = objective(W, b_axis)
    k = np.unravel_index(np.argmin(vals), vals.shape)
    w0, b0 = W[k[0]], b_axis[k[1]]

    fine = 0.12
    axes = [np.linspace(c - fine, c + fine, 25) for c in w0]
    b_axis = np.linspace(b0 - fine, b0 + fine, 25)
    W = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = objective(W, b_axis)
    return float(vals.min())


def test_objective_zero_inside_tube():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    y = 5.0 + rng.uniform(-0.05, 0.05, size=20)
    model = SvrModel(w=np.zeros(3), b=5.0)
    assert svr_objective(model, X, y) == 0.0


def test_objective_slack_arithmetic():
    model = SvrModel(w=np.array([0.0]), b=0.0, epsilon=0.1, C=1.0)
    X = np.array([[1.0]])
    y = np.array([1.1])  # residual = epsilon + 1
    assert svr_objective(model, X, y) == pytest.approx(1.0)


def test_objective_hand_computed_three_points():
    model = SvrModel(w=np.array([0.5]), b=0.1, epsilon=0.1, C=2.0)
    X = np.array([[1.0], [-2.0], [0.0]])
    y = np.array([1.0, 0.0, 0.05])
    # residuals: 1-(0.5+0.1)=0.4 -> slack 0.3; 0-(-1+0.1)=0.9 -> 0.8;
    # 0.05-0.1=-0.05 -> slack 0.  objective = 0.5*0.25 + 2*(0.3+0.8)
    assert svr_objective(model, X, y) == pytest.approx(0.125 + 2.2)


def test_objective_shape_mismatch():
    model = SvrModel(w=np.array([0.5]), b=0.0)
    with pytest.raises(ShapeMismatch):
        svr_objective(model, np.ones((3, 2)), np.ones(3))


def test_constant_targets_zero_weights():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(25, 4))
    y = np.full(25, 3.0)
    model = train_svr(X, y)
    assert np.allclose(model.w, 0.0, atol=1e-9)
    assert model.b == pytest.approx(3.0, abs=1e-9)
    assert svr_objective(model, X, y) == pytest.approx(0.0, abs=1e-9)


def test_noise_free_linear_recovery():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 3))
    y = X @ np.array([0.8, -0.4, 0.2]) + 0.1
    model = train_svr(X, y)
    pred = predict_svr(model, X)
    assert np.all(np.abs(pred - y) <= model.epsilon + 1e-3)
    # Held-out points from the same generating line also fall in the tube.
    Xq = rng.normal(size=(20, 3))
    yq = Xq @ np.array([0.8, -0.4, 0.2]) + 0.1
    assert np.all(np.abs(predict_svr(model, Xq) - yq) <= model.epsilon + 1e-3)


def test_four_point_instance_matches_grid():
    X = np.array([[-1.0], [0.0], [0.5], [1.0]])
    y = np.array([-0.8, 0.2, 0.1, 1.1])
    model = train_svr(X, y)
    assert svr_objective(model, X, y) <= grid_oracle(X, y) + 1e-3


def test_random_small_instances_beat_grid_oracle():
    rng = np.random.default_rng(3)
    for trial in range(12):
        n = int(rng.integers(4, 21))
        p = int(rng.integers(1, 3))
        X = rng.normal(size=(n, p))
        y = np.tanh(X @ rng.normal(size=p)) + rng.normal(scale=0.2, size=n)
        model = train_svr(X, y)
        oracle = grid_oracle(X, y)
        assert svr_objective(model, X, y) <= oracle + 1e-3, f"trial {trial}"


def test_epsilon_insensitivity_of_optimum():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    y = X @ np.array([0.5, -0.3]) + rng.normal(scale=0.02, size=30)
    base = train_svr(X, y)
    obj_base = svr_objective(base, X, y)
    # Nudge targets without letting any residual leave the tube.
    resid = y - predict_svr(base, X)
    room = base.epsilon - np.abs(resid)
    delta = 0.5 * room * np.sign(rng.normal(size=30))
    moved = train_svr(X, y + delta)
    obj_moved = svr_objective(moved, X, y + delta)
    assert obj_moved == pytest.approx(obj_base, abs=2e-4)


def test_dual_objective_monotone_per_iteration():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 3))
    y = X @ np.array([1.0, 0.3, -0.5]) + rng.normal(scale=0.3, size=60)
    model = train_svr(X, y, record_history=True)
    hist = np.array(model.dual_history)
    assert len(hist) > 1
    assert np.all(np.diff(hist) <= 1e-9 * np.maximum(1.0, np.abs(hist[:-1])))


def test_kkt_violation_small_at_solution():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(120, 4))
    y = X @ np.array([0.5, -0.2, 0.0, 0.3]) + rng.normal(scale=0.05, size=120)
    model = train_svr(X, y, tol=1e-5)
    assert model.gap <= 1e-5 * max(1.0, svr_objective(model, X, y))


def test_prediction_is_affine():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 3))
    y = X @ np.array([0.4, 0.1, -0.2]) + rng.normal(scale=0.1, size=40)
    model = train_svr(X, y)
    x1, x2 = rng.normal(size=3), rng.normal(size=3)
    for alpha in (0.0, 0.25, 0.5, 0.9, 1.0):
        blend = alpha * x1 + (1 - alpha) * x2
        expect = alpha * predict_svr(model, x1) + (1 - alpha) * predict_svr(model, x2)
        assert predict_svr(model, blend) == pytest.approx(expect, abs=1e-9)


def test_predict_fixed_models():
    model = SvrModel(w=np.zeros(4), b=7.0)
    assert predict_svr(model, np.ones(4)) == 7.0
    model = SvrModel(w=np.array([1.0, -1.0]), b=0.0)
    assert predict_svr(model, np.array([3.0, 1.0])) == pytest.approx(2.0)
    with pytest.raises(ShapeMismatch):
        predict_svr(model, np.ones(3))


def test_predict_applies_stored_transforms():
    rng = np.random.default_rng(8)
    X = rng.normal(loc=10.0, scale=4.0, size=(80, 2))
    y_raw = X @ np.array([3.0, -1.0]) + 5.0
    scaler = fit_scaler(X)
    ym, ys = y_raw.mean(), y_raw.std()
    model = train_svr(scaler.transform(X), (y_raw - ym) / ys)
    model.feature_scaler = scaler
    model.target_center = ym
    model.target_scale = ys
    pred = predict_svr(model, X)
    assert np.allclose(pred, y_raw, atol=(model.epsilon + 1e-3) * ys)


def test_duplicate_rows_with_conflicting_targets():
    X = np.tile(np.array([[1.0, 0.0]]), (6, 1))
    y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    model = train_svr(X, y)  # slack absorbs the conflict, no error
    assert np.isfinite(svr_objective(model, X, y))


def test_not_converged_carries_best_iterate():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(300, 5))
    y = rng.normal(size=300)
    with pytest.raises(NotConverged) as info:
        train_svr(X, y, max_iter=3)
    assert info.value.model is not None
    assert info.value.gap is not None and info.value.gap > 0


def test_input_validation():
    with pytest.raises(ShapeMismatch):
        train_svr(np.ones((1, 2)), np.ones(1))
    with pytest.raises(ValueError):
        train_svr(np.ones((3, 2)), np.ones(3), C=-1.0)

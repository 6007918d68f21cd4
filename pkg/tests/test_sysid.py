import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrodyn.actuator import ActuatorCoeffs, predict_log
from hydrodyn.errors import ContractError, InsufficientExcitation
from hydrodyn.log import TrajectoryLog
from hydrodyn.sysid import (
    RegressionProblem,
    build_regression,
    fit_coefficients,
    fit_log,
    format_report,
    regression_features,
)

TRUE = ActuatorCoeffs(4e5, 0.02, 1e3, 50.0, 0.05)


def model_log(k=TRUE, n=20_000, seed=0, noise=0.0, impacts=True):
    """Log whose torque evolves exactly by the torque-form model."""
    rng = np.random.default_rng(seed)
    q = np.cumsum(rng.normal(0, 0.002, n))
    q_des = q + rng.normal(0, 0.02, n)
    qd = rng.normal(0, 2.0, n)
    tau = np.zeros(n)
    tau[0] = 50.0 if impacts else 50.0 * np.sign(q_des[0] - q[0])
    for t in range(n - 1):
        tau[t + 1] = predict_log(k, q[t], q_des[t], qd[t], tau[t])
        if not impacts:
            # keep torque on the side of the commanded displacement
            tau[t + 1] = abs(tau[t + 1]) * np.sign(q_des[t + 1] - q[t + 1])
    rms = np.sqrt(np.mean(tau ** 2))
    tau_obs = tau + noise * rms * rng.standard_normal(n)
    col = lambda a: a[:, None]
    return TrajectoryLog(np.arange(n) * 1e-3, col(q), col(q_des), col(qd), col(tau_obs))


def test_row_count():
    prob = build_regression(model_log(n=20_000), 0.05)
    assert prob.features.shape == (19_999, 4)
    assert prob.skipped == 0


def test_hand_feature_rows():
    row = regression_features(0.05, [1.0], [1.01], [0.1], [100.0])[0]
    np.testing.assert_allclose(row, [2.5e-5, -100.0, -2.5e-4, 0.0], rtol=1e-9)
    row = regression_features(0.05, [1.0], [1.01], [0.1], [-100.0])[0]
    assert row[3] == pytest.approx(0.05, rel=1e-9)


def test_gaps_are_skipped_and_counted():
    log = model_log(n=1000)
    log.t = log.t.copy()
    log.t[500:] += 0.005
    prob = build_regression(log, 0.05)
    assert prob.skipped == 1
    assert len(prob.targets) == 998


def test_noiseless_recovery():
    coeffs, rep = fit_coefficients(build_regression(model_log(), 0.05))
    for name in ("k1", "k2", "k3", "k4"):
        assert getattr(coeffs, name) == pytest.approx(getattr(TRUE, name), rel=1e-9)
    assert rep.residual_rms < 1e-9


def test_noisy_recovery_and_speed():
    prob = build_regression(model_log(noise=0.01, seed=5), 0.05)
    t0 = time.perf_counter()
    coeffs, rep = fit_coefficients(prob)
    assert time.perf_counter() - t0 < 1.0
    for name in ("k1", "k2", "k3"):
        assert getattr(coeffs, name) == pytest.approx(getattr(TRUE, name), rel=0.02)
    assert np.all(np.isfinite(rep.stderr))


def test_constant_log_is_insufficient():
    n = 200
    z = np.zeros((n, 1))
    log = TrajectoryLog(np.arange(n) * 1e-3, z, z, z, z)
    with pytest.raises(InsufficientExcitation, match="insufficient excitation") as e:
        fit_coefficients(build_regression(log, 0.05))
    assert "k1" in str(e.value)


def test_missing_velocity_column_is_named():
    log = model_log(n=500)
    log.qd = np.zeros_like(log.qd)
    with pytest.raises(InsufficientExcitation) as e:
        fit_coefficients(build_regression(log, 0.05))
    assert e.value.columns == ["k3"]


def test_no_impacts_leaves_k4_unidentified():
    log = model_log(k=ActuatorCoeffs(4e5, 0.02, 1e3, 0.0, 0.05), n=3000, impacts=False)
    coeffs, rep = fit_coefficients(build_regression(log, 0.05))
    assert rep.impact_fraction == 0.0
    assert rep.flags["k4"] == "unidentified"
    assert coeffs.k4 == 0.0
    assert "k4:unidentified" in format_report([rep])


def test_ols_beats_single_coefficient_models():
    prob = build_regression(model_log(noise=0.01, seed=2, n=5000), 0.05)
    _, rep = fit_coefficients(prob)
    X, y = prob.features, prob.targets
    for i in range(4):
        xi = X[:, i]
        b = (xi @ y) / (xi @ xi)
        sub = np.sqrt(np.mean((y - b * xi) ** 2))
        assert rep.residual_rms <= sub + 1e-12


@settings(max_examples=10, deadline=None)
@given(shift=st.floats(-100.0, 100.0))
def test_fit_invariant_to_time_reindexing(shift):
    log = model_log(noise=0.01, seed=3, n=3000)
    a, _ = fit_coefficients(build_regression(log, 0.05))
    log.t = np.arange(len(log)) * 1e-3 + np.round(shift)
    b, _ = fit_coefficients(build_regression(log, 0.05))
    np.testing.assert_allclose(b.as_array(), a.as_array(), rtol=1e-9)


def test_k2_clamp_flags():
    # a torque that grows each step asks for negative k2
    n = 400
    rng = np.random.default_rng(0)
    q = np.zeros(n)
    q_des = rng.normal(0, 0.01, n)
    qd = rng.normal(0, 1.0, n)
    tau = 10.0 * 1.01 ** np.arange(n)
    X = regression_features(0.05, q, q_des, qd, tau)[:-1]
    y = np.diff(tau)
    coeffs, rep = fit_coefficients(RegressionProblem(X, y))
    assert coeffs.k2 == 0.0
    assert rep.flags.get("k2") == "clamped"
    assert rep.raw[1] < 0


def test_problem_contract():
    with pytest.raises(ContractError):
        RegressionProblem(np.zeros((3, 4)), np.zeros(3))
    with pytest.raises(ContractError):
        RegressionProblem(np.zeros((10, 3)), np.zeros(10))


def test_fit_log_per_joint_and_report_json():
    logs = [model_log(seed=s, n=2000) for s in range(3)]
    merged = TrajectoryLog(logs[0].t, *(np.hstack([getattr(l, c) for l in logs])
                                        for c in ("q", "q_des", "qd", "tau")))
    coeffs, reports = fit_log(merged, 0.05)
    assert len(coeffs) == 3
    for c in coeffs:
        assert c.k1 == pytest.approx(TRUE.k1, rel=1e-9)
    d = reports[1].to_dict()
    assert d["joint_id"] == 1 and set(d["coeffs"]) == {"k1", "k2", "k3", "k4"}

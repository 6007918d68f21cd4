import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrodyn.actuator import (
    ActuatorCoeffs,
    ImpactParams,
    JointSnapshot,
    coeffs_from_json,
    coeffs_to_json,
    impact_correction,
    load_coeffs,
    pack_coeffs,
    pack_states,
    predict_batch12,
    predict_force_delta,
    predict_log,
    predict_torque_next,
    save_coeffs,
)
from hydrodyn.errors import ContractError, DomainError

BASE = ActuatorCoeffs(4e5, 0.02, 1e3, 0.0, 0.05)
finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_force_delta_rest_is_zero():
    assert predict_force_delta(BASE, 0.0, 0.3, 0.3, 0.0) == 0.0


def test_force_delta_hand_value():
    c = ActuatorCoeffs(1000.0, 0.02, 10.0, 0.0, 0.05)
    assert predict_force_delta(c, 100.0, 0.0, 0.01, 0.1) == pytest.approx(7.0, abs=1e-12)


def test_force_delta_impact_branch():
    c = ActuatorCoeffs(0.0, 0.0, 0.0, 50.0, 0.05)
    assert predict_force_delta(c, -100.0, 0.0, 0.01, 0.0) == pytest.approx(50.0, abs=1e-12)


def test_torque_next_identity():
    assert predict_torque_next(BASE, JointSnapshot(0.4, 0.4, 0.0, 0.0)) == 0.0


def test_torque_next_hand_value():
    s = JointSnapshot(q=1.0, q_des=1.01, qd=0.1, tau=100.0)
    assert predict_torque_next(BASE, s) == pytest.approx(107.75, abs=1e-9)


def test_torque_next_impact_branch():
    c = ActuatorCoeffs(0.0, 0.0, 0.0, 50.0, 0.05)
    s = JointSnapshot(q=0.0, q_des=0.01, qd=0.0, tau=-100.0)
    assert predict_torque_next(c, s) == pytest.approx(-97.5, abs=1e-12)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_inputs_rejected(bad):
    with pytest.raises(DomainError):
        predict_torque_next(BASE, JointSnapshot(bad, 0.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        predict_force_delta(BASE, 0.0, 0.0, bad, 0.0)


@pytest.mark.parametrize("kw", [dict(R=0.0), dict(k1=-1.0), dict(k2=1.0), dict(k2=-0.1),
                                dict(k3=-1.0), dict(k4=-1.0), dict(k1=math.nan)])
def test_coeff_invariants(kw):
    args = dict(k1=1.0, k2=0.1, k3=1.0, k4=1.0, R=0.05) | kw
    with pytest.raises(DomainError):
        ActuatorCoeffs(**args)


def test_impact_correction_hand_value():
    p = ImpactParams(B=1.5e9, A=1e-3, V=1e-4, f_max=1.5e4)
    assert impact_correction(p, -1e3, 1e-3) == pytest.approx(-1000.0, rel=1e-12)
    assert impact_correction(p, 1e3, 1e-3) == 0.0
    assert impact_correction(p, 0.0, 1e-3) == 0.0
    assert impact_correction(p, -1e3, 0.0) == 0.0


def test_impact_params_positive():
    with pytest.raises(DomainError):
        ImpactParams(B=0.0, A=1e-3, V=1e-4, f_max=1.5e4)


@given(k1=st.floats(0, 1e6), k2=st.floats(0, 0.99), k3=st.floats(0, 1e4), k4=st.floats(0, 100),
       R=st.floats(0.01, 0.2), q=finite, dq=st.floats(-0.1, 0.1), qd=st.floats(-10, 10),
       tau=st.floats(-1e3, 1e3))
def test_force_and_torque_forms_agree(k1, k2, k3, k4, R, q, dq, qd, tau):
    c = ActuatorCoeffs(k1, k2, k3, k4, R)
    s = JointSnapshot(q, q + dq, qd, tau)
    f = tau / R
    via_force = R * (f + predict_force_delta(c, f, R * s.q, R * s.q_des, R * qd))
    direct = predict_torque_next(c, s)
    assert direct == pytest.approx(via_force, rel=1e-9, abs=1e-9)


@given(tau=st.floats(-1e3, 1e3), dq=st.floats(-0.1, 0.1))
def test_impact_term_off_when_torque_agrees(tau, dq):
    c = ActuatorCoeffs(0.0, 0.0, 0.0, 40.0, 0.05)
    s = JointSnapshot(0.0, dq, 0.0, tau)
    sg = (dq > 0) - (dq < 0)
    if tau * sg >= 0:
        assert predict_torque_next(c, s) == tau


@given(alpha=st.floats(-10, 10), dq=st.floats(-0.1, 0.1), tau=st.floats(-500, 500))
def test_linear_in_displacement_without_damping(alpha, dq, tau):
    c = ActuatorCoeffs(3e5, 0.0, 0.0, 0.0, 0.05)
    d1 = predict_torque_next(c, JointSnapshot(0.0, dq, 0.0, tau)) - tau
    d2 = predict_torque_next(c, JointSnapshot(0.0, alpha * dq, 0.0, tau)) - tau
    assert d2 == pytest.approx(alpha * d1, rel=1e-12, abs=1e-9)


def test_batch_identity_and_replication():
    cs = [BASE] * 12
    assert np.all(predict_batch12(cs, [JointSnapshot(0.1, 0.1, 0.0, 0.0)] * 12) == 0.0)
    out = predict_batch12(cs, [JointSnapshot(1.0, 1.01, 0.1, 100.0)] * 12)
    np.testing.assert_allclose(out, 107.75, atol=1e-9)


def test_batch_bitwise_equals_scalar_calls():
    rng = np.random.default_rng(3)
    cs = [ActuatorCoeffs(rng.uniform(1e5, 5e5), rng.uniform(0, 0.1), rng.uniform(0, 5e3),
                         rng.uniform(0, 50), rng.uniform(0.03, 0.08)) for _ in range(12)]
    k = pack_coeffs(cs)
    out = np.empty(12)
    for _ in range(1000):
        states = [JointSnapshot(*rng.normal(0, [0.5, 0.5, 2.0, 200.0])) for _ in range(12)]
        predict_batch12(k, pack_states(states), out)
        ref = [predict_torque_next(c, s) for c, s in zip(cs, states)]
        assert out.tolist() == ref


def test_batch_length_mismatch():
    with pytest.raises(ContractError):
        predict_batch12([BASE] * 11, [JointSnapshot(0, 0, 0, 0)] * 12)
    with pytest.raises(ContractError):
        predict_batch12(np.zeros((12, 5)), np.zeros((12, 3)))


def test_batch_packed_path_does_not_allocate():
    import tracemalloc
    k = pack_coeffs([BASE] * 12)
    s = np.tile([0.0, 0.01, 0.1, 10.0], (12, 1))
    out = np.empty(12)
    predict_batch12(k, s, out)
    tracemalloc.start()
    before = tracemalloc.get_traced_memory()[1]
    for _ in range(10_000):
        predict_batch12(k, s, out)
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    # no growth proportional to the call count
    assert peak - before < 10_000


def test_predict_log_matches_scalar():
    rng = np.random.default_rng(0)
    c = ActuatorCoeffs(3e5, 0.01, 2e3, 20.0, 0.05)
    q, q_des, qd, tau = rng.normal(0, [[0.3], [0.3], [2.0], [150.0]], (4, 200))
    vec = predict_log(c, q, q_des, qd, tau)
    ref = [predict_torque_next(c, JointSnapshot(*v)) for v in zip(q, q_des, qd, tau)]
    np.testing.assert_allclose(vec, ref, rtol=1e-12, atol=1e-9)


def test_json_round_trip(tmp_path):
    cs = [ActuatorCoeffs(1e5 + j, 0.01, 10.0, 0.5, 0.05) for j in range(12)]
    rows = json.loads(coeffs_to_json(cs))
    assert [r["joint_id"] for r in rows] == list(range(12))
    assert set(rows[0]) == {"joint_id", "k1", "k2", "k3", "k4", "R"}
    assert coeffs_from_json(coeffs_to_json(cs)) == cs
    save_coeffs(tmp_path / "c.json", cs)
    assert load_coeffs(tmp_path / "c.json") == cs


def test_json_bad_joint_ids():
    rows = json.loads(coeffs_to_json([BASE] * 2))
    rows[1]["joint_id"] = 5
    with pytest.raises(ContractError):
        coeffs_from_json(json.dumps(rows))


@settings(max_examples=25)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_rest_state_with_zero_torque_stays_zero(vals):
    q = vals[0]
    assert predict_torque_next(BASE, JointSnapshot(q, q, 0.0, 0.0)) == 0.0

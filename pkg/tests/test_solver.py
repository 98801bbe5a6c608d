import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import anchored_gda as ag
from anchored_gda.solver import IterateState


def test_step_first_iterate_hand_value(bilinear2d, sched_new):
    # beta_0 = 1 kills the anchor term at t=0: z_1 = z_0 - alpha_0 G(z_0)
    state = IterateState(t=0, z_t=np.array([1.0, 1.0]), z0=np.array([1.0, 1.0]))
    nxt = ag.step(state, bilinear2d, sched_new)
    a0 = 1.0 / math.sqrt(2.0)
    np.testing.assert_allclose(nxt.z_t, [1.0 - a0, 1.0 + a0], rtol=1e-15)
    assert nxt.t == 1
    np.testing.assert_array_equal(nxt.z_prev, [1.0, 1.0])


def test_step_fixed_point_at_saddle(bilinear2d, sched_new):
    state = IterateState(t=0, z_t=np.zeros(2), z0=np.zeros(2))
    for _ in range(20):
        state = ag.step(state, bilinear2d, sched_new)
        assert np.array_equal(state.z_t, np.zeros(2))


def test_plain_gda_squared_norm_growth(bilinear2d):
    # (I - alpha M) with skew M scales every norm by sqrt(1 + alpha^2)
    s = ag.Schedule("plain-gda", const_alpha=0.1)
    state = IterateState(t=0, z_t=np.array([1.0, 0.0]), z0=np.array([1.0, 0.0]))
    nxt = ag.step(state, bilinear2d, s)
    assert float(nxt.z_t @ nxt.z_t) == pytest.approx(1.01, rel=1e-15)


def test_plain_gda_growth_matches_matrix_power(bilinear2d):
    alpha = 0.1
    s = ag.Schedule("plain-gda", const_alpha=alpha)
    T = 50
    trace = ag.run(bilinear2d, s, [1.0, 0.0], T, record_every=1)
    step_matrix = np.eye(2) - alpha * np.array([[0.0, 1.0], [-1.0, 0.0]])
    z = np.array([1.0, 0.0])
    for row in trace.rows:
        expected = np.linalg.matrix_power(step_matrix, row.t) @ z
        assert row.dist_opt_sq == pytest.approx(float(expected @ expected),
                                                rel=1e-12)


def test_run_fixed_point_trace_is_zero(bilinear2d, sched_new):
    trace = ag.run(bilinear2d, sched_new, np.zeros(2), 50, record_every=1)
    for row in trace.rows:
        assert row.grad_norm_sq == 0.0
        assert row.dist_opt_sq == 0.0
        assert row.dist_anchor == 0.0


def test_run_is_bitwise_deterministic(bilinear2d, sched_new, tmp_path):
    a = ag.run(bilinear2d, sched_new, np.ones(2), 500, record_every=7)
    b = ag.run(bilinear2d, sched_new, np.ones(2), 500, record_every=7)
    assert a.rows == b.rows
    for t in a.iterates:
        assert np.array_equal(a.iterates[t], b.iterates[t])
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    ag.write_csv(a, pa)
    ag.write_csv(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_run_records_mandatory_rows(bilinear2d, sched_new):
    T = 1000
    trace = ag.run(bilinear2d, sched_new, np.ones(2), T, record_every=300)
    ts = {row.t for row in trace.rows}
    assert {0, 1, 2, T - 1, T} <= ts
    assert set(trace.iterates) == {0, 1, 2, T - 1, T}
    assert trace.rows[-1].diff_norm is None
    assert all(r.diff_norm is not None for r in trace.rows[:-1])


def test_run_rows_strictly_increasing(bilinear2d, sched_new):
    trace = ag.run(bilinear2d, sched_new, np.ones(2), 100, record_every=9)
    ts = [r.t for r in trace.rows]
    assert ts == sorted(set(ts))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 16))
def test_update_rule_residual(seed, quad10d):
    # recompute z_{t+1} - z_t + alpha G(z_t) - beta (z0 - z_t) from kept
    # iterates; it must vanish to rounding
    s = ag.parse_schedule("anchored-new:gamma=2", quad10d.lipschitz_K)
    rng = np.random.default_rng(seed)
    z0 = rng.standard_normal(quad10d.dim)
    trace = ag.run(quad10d, s, z0, 3, record_every=1)
    for t in (0, 1, 2):
        z, z_next = trace.iterates[t], trace.iterates[t + 1]
        g = ag.eval_operator(quad10d, z)
        resid = z_next - z + ag.alpha(s, t) * g - ag.beta(s, t) * (z0 - z)
        scale = max(np.linalg.norm(z_next - z), ag.alpha(s, t) * np.linalg.norm(g),
                    1e-300)
        assert np.linalg.norm(resid) <= 1e-14 * max(1.0, scale)


def test_run_schedule_problem_K_mismatch(bilinear2d):
    s = ag.Schedule("anchored-new", gamma=2.0, lipschitz_K=2.0)
    with pytest.raises(ag.UsageError):
        ag.run(bilinear2d, s, np.ones(2), 10)


def test_run_validates_arguments(bilinear2d, sched_new):
    with pytest.raises(ag.UsageError):
        ag.run(bilinear2d, sched_new, np.ones(2), 0)
    with pytest.raises(ag.UsageError):
        ag.run(bilinear2d, sched_new, np.ones(2), 10, record_every=0)
    with pytest.raises(ag.UsageError):
        ag.run(bilinear2d, sched_new, np.ones(3), 10)


def test_plain_gda_divergence_halts(bilinear2d):
    s = ag.Schedule("plain-gda", const_alpha=0.1)
    with pytest.raises(ag.DivergenceError) as exc_info:
        ag.run(bilinear2d, s, np.ones(2), 100_000, record_every=100)
    err = exc_info.value
    assert err.t is not None and 1 <= err.t <= 100_000
    assert err.partial_trace is not None
    assert err.partial_trace.rows[-1].t < err.t
    # oracle: the norm grows by exactly sqrt(1.01) per step, so the first
    # coordinate crossing happens within ~70 steps of the norm crossing
    # (coordinates trail the norm by at most a factor sqrt(2) of rotation)
    t_norm = (150 * math.log(10) - math.log(math.sqrt(2.0))) \
        / (0.5 * math.log(1.01))
    assert t_norm <= err.t <= t_norm + 75


def test_anchored_new_tripwire_bounded(long_trace):
    # Boundedness tripwire on the main run: never above 12x the start
    d0 = long_trace.rows[0].dist_opt_sq
    assert all(r.dist_opt_sq <= 12.0 * d0 for r in long_trace.rows)


def test_reconstruct_gradient_norm_values(sched_new):
    row = ag.TraceRow(t=2, grad_norm_sq=1.0, dist_opt_sq=None,
                      diff_norm=0.1, dist_anchor=1.0)
    # alpha_2 = 1/2, beta_2 = 1/2: bound = 2*0.1 + 1*1 = 1.2
    assert ag.reconstruct_gradient_norm(row, sched_new) == pytest.approx(1.2)
    zero = ag.TraceRow(t=2, grad_norm_sq=0.0, dist_opt_sq=None,
                       diff_norm=0.0, dist_anchor=0.0)
    assert ag.reconstruct_gradient_norm(zero, sched_new) == 0.0


def test_reconstruct_gradient_norm_missing_column(sched_new):
    row = ag.TraceRow(t=5, grad_norm_sq=1.0, dist_opt_sq=None,
                      diff_norm=None, dist_anchor=1.0)
    with pytest.raises(ag.DataError):
        ag.reconstruct_gradient_norm(row, sched_new)


def test_reconstruct_bound_dominates_recorded_norm(long_trace, sched_new):
    for row in long_trace.rows:
        if row.diff_norm is None:
            continue
        bound = ag.reconstruct_gradient_norm(row, sched_new)
        assert bound >= math.sqrt(row.grad_norm_sq) * (1.0 - 1e-10)


# ---------------------------------------------------------------------------
# trace CSV round-trip


def test_csv_round_trip(bilinear2d, sched_new, tmp_path):
    trace = ag.run(bilinear2d, sched_new, np.ones(2), 200, record_every=13)
    path = tmp_path / "t.csv"
    ag.write_csv(trace, path)
    back = ag.read_csv(path)
    assert back.problem_id == trace.problem_id
    assert back.schedule_str == trace.schedule_str
    assert back.T == trace.T and back.K == trace.K and back.gamma == trace.gamma
    assert back.rows == trace.rows  # 17 significant digits are lossless


def test_csv_rejects_truncated_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# T: 10\n# K: 1\n# gamma: 2\n"
                    "t,grad_norm_sq,dist_opt_sq,diff_norm,dist_anchor\n"
                    "0,1.0,1.0\n")
    with pytest.raises(ag.DataError, match="5"):
        ag.read_csv(path)


def test_csv_rejects_missing_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# T: 10\n")
    with pytest.raises(ag.DataError):
        ag.read_csv(path)


# ---------------------------------------------------------------------------
# estimator wrapper


def test_estimator_fit_and_params(bilinear2d):
    est = ag.AnchoredGDA(schedule="anchored-new:gamma=2", max_iter=200,
                         record_every=10)
    params = est.get_params()
    assert params["max_iter"] == 200
    est.set_params(max_iter=300)
    fitted = est.fit(bilinear2d, np.ones(2))
    assert fitted is est
    assert est.trace_.T == 300
    assert est.n_iter_ == 300
    np.testing.assert_array_equal(est.predict(bilinear2d), est.z_final_)
    assert np.linalg.norm(est.z_final_) < 1.0  # moved toward the saddle


def test_estimator_predict_before_fit(bilinear2d):
    with pytest.raises(RuntimeError):
        ag.AnchoredGDA().predict(bilinear2d)


def test_estimator_clone_compatible(bilinear2d):
    from sklearn.base import clone
    est = ag.AnchoredGDA(max_iter=50)
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()

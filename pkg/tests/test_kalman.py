import numpy as np
import pytest

from varstream.errors import InputDataError, NumericalError
from varstream.kalman import (
    build_observation_matrix,
    covariance_bytes,
    kf_init,
    kf_step,
    run_kf,
    state_dim,
)
from varstream.model import SimSpec, build_regressor, simulate_tvvar


def dense_kf_step(a, cov, x, u, p, q_sigma, r):
    """Independent textbook filter: full observation matrix, explicit Joseph."""
    n = a.size
    pr = cov + (q_sigma ** 2) * np.eye(n)
    c = np.kron(np.eye(p), u[None, :])
    s = c @ pr @ c.T + r
    gain = pr @ c.T @ np.linalg.inv(s)
    a_new = a + gain @ (x - c @ a)
    ikc = np.eye(n) - gain @ c
    cov_new = ikc @ pr @ ikc.T + gain @ r @ gain.T
    return a_new, cov_new


def rls_step(theta, p_mat, x_scalar, u):
    """Classical single-output recursive least squares."""
    pu = p_mat @ u
    denom = 1.0 + u @ pu
    gain = pu / denom
    theta_new = theta + gain * (x_scalar - u @ theta)
    p_new = p_mat - np.outer(gain, pu)
    return theta_new, p_new


class TestObservationMatrix:
    def test_p1_is_row(self):
        u = np.array([1.0, 2.0, 3.0])
        c = build_observation_matrix(u, 1)
        assert c.shape == (1, 3)
        assert np.array_equal(c[0], u)

    def test_explicit_kronecker(self):
        c = build_observation_matrix(np.array([3.0, 4.0]), 2)
        assert np.array_equal(c, [[3.0, 4.0, 0.0, 0.0], [0.0, 0.0, 3.0, 4.0]])

    def test_block_structure(self, rng):
        p, k = 3, 2
        u = rng.normal(size=k * p)
        c = build_observation_matrix(u, p)
        for i in range(p):
            row = c[i]
            assert np.array_equal(row[i * k * p : (i + 1) * k * p], u)
            mask = np.ones(p * k * p, dtype=bool)
            mask[i * k * p : (i + 1) * k * p] = False
            assert np.all(row[mask] == 0.0)

    def test_reshape_consistency(self, rng):
        # C a equals Phi u after reshaping the state into the coefficient block.
        for _ in range(10):
            p, k = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            u = rng.normal(size=k * p)
            a = rng.normal(size=p * k * p)
            c = build_observation_matrix(u, p)
            assert np.allclose(c @ a, a.reshape(p, k * p) @ u, atol=1e-12)


class TestStep:
    def test_matches_dense_textbook_filter(self, rng):
        for p, k in [(1, 1), (2, 2), (3, 2)]:
            state = kf_init(rng.normal(size=(k, p)), q_sigma=1e-3, k=k)
            for _ in range(50):
                x = rng.normal(size=p)
                u = build_regressor(state.buffer)
                a_exp, cov_exp = dense_kf_step(
                    state.a.copy(), state.cov.copy(), x, u, p, state.q_sigma, state.r
                )
                _, phi = kf_step(state, x)
                scale = max(1.0, np.abs(a_exp).max())
                assert np.abs(state.a - a_exp).max() <= 1e-9 * scale
                assert np.abs(state.cov - cov_exp).max() <= 1e-9
                assert np.array_equal(phi, state.a.reshape(p, k * p))

    def test_zero_regressor_is_identity_update(self, rng):
        p, k = 2, 1
        state = kf_init(np.zeros((k, p)), q_sigma=0.1, k=k)
        a0, cov0 = state.a.copy(), state.cov.copy()
        kf_step(state, rng.normal(size=p))
        assert np.array_equal(state.a, a0)
        assert np.allclose(state.cov, cov0 + 0.01 * np.eye(state_dim(p, k)), atol=1e-14)

    def test_rls_equivalence_with_zero_q(self, rng):
        # Q=0, R=I block-decouples the filter into one RLS per output row.
        p, k = 2, 2
        data = rng.normal(size=(300, p))
        state = kf_init(data[:k], q_sigma=0.0, k=k)
        thetas = [np.zeros(k * p) for _ in range(p)]
        pmats = [np.eye(k * p) for _ in range(p)]
        buf = data[:k].copy()
        for t in range(k, 300):
            x = data[t]
            u = build_regressor(buf)
            _, phi = kf_step(state, x)
            for i in range(p):
                thetas[i], pmats[i] = rls_step(thetas[i], pmats[i], x[i], u)
                assert np.abs(phi[i] - thetas[i]).max() <= 1e-8
            buf[:-1] = buf[1:]
            buf[-1] = x

    def test_covariance_stays_symmetric_psd(self, rng):
        p, k = 3, 1
        state = kf_init(rng.normal(size=(k, p)), q_sigma=1e-2, k=k)
        for _ in range(200):
            kf_step(state, rng.normal(size=p))
            assert np.abs(state.cov - state.cov.T).max() <= 1e-9
            assert np.linalg.eigvalsh(state.cov).min() >= -1e-9

    def test_singular_innovation_raises(self):
        state = kf_init(np.ones((1, 1)), q_sigma=0.0, r=np.zeros((1, 1)), k=1)
        state.cov[:] = 0.0
        with pytest.raises(NumericalError):
            kf_step(state, np.array([1.0]))


class TestRun:
    def test_converges_on_constant_coefficients(self):
        # With sigma = 0 the filter is RLS: error shrinks as data accumulates.
        phi_true = np.array([[0.6, 0.1], [0.0, 0.5]])
        t_total = 3000
        spec = SimSpec(p=2, k=1, t_total=t_total, seed=5)
        x = simulate_tvvar(spec, np.tile(phi_true, (t_total, 1, 1)))
        track = run_kf(x, q_sigma=0.0, k=1)
        errs = np.abs(track.phis - phi_true).mean(axis=(1, 2))
        first, second = errs[: len(errs) // 2].mean(), errs[len(errs) // 2 :].mean()
        assert second < first
        assert errs[-1] < 0.05

    def test_zero_data_stays_at_zero(self):
        track = run_kf(np.zeros((80, 2)), q_sigma=1e-3, k=1)
        assert np.all(track.phis == 0.0)

    def test_output_alignment(self, rng):
        x = rng.normal(size=(60, 2))
        track = run_kf(x, q_sigma=1e-3, k=2)
        assert track.t0 == 2
        assert len(track) == 58

    def test_covariance_footprint(self):
        state = kf_init(np.zeros((2, 3)), q_sigma=0.0, k=2)
        n = state_dim(3, 2)
        assert state.cov.nbytes == n * n * 8 == covariance_bytes(3, 2)

    def test_bad_inputs(self):
        with pytest.raises(InputDataError):
            kf_init(np.zeros((2, 2)), q_sigma=-1.0, k=2)
        with pytest.raises(InputDataError):
            run_kf(np.zeros((2, 2)), q_sigma=0.1, k=2)

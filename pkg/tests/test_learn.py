import numpy as np
import pytest

from koopman_lift.learn import (
    KoopmanModel,
    TrainConfig,
    dmd_fit,
    edmd_fit,
    load_model,
    matching_pursuit_fit,
    parameter_count,
    save_model,
    sgd_train,
    training_loss,
)
from koopman_lift.lifting import DictParams, Dictionary, lift, make_dictionary
from koopman_lift.simulate import SnapshotSet, build_snapshots, make_dataset
from koopman_lift.systems import SystemDef, get_system


def _pairs_snapshots(X, Xp, dt=0.1, test_fraction_ids=()):
    split = np.zeros(X.shape[0], dtype=int)
    return SnapshotSet(dt=dt, X=X, Xp=Xp, split=split)


def _linear_system(rates):
    rates = np.asarray(rates, dtype=float)
    box = np.tile([[-1.0, 1.0]], (rates.size, 1))
    return SystemDef("lin", rates.size, lambda x: rates * x, box, {})


def _vdp_snapshots(n_traj=6, steps=30, seed=3):
    data = make_dataset(get_system("vanderpol"), n_trajectories=n_traj, steps=steps,
                        dt=0.05, substeps=2, seed=seed)
    return build_snapshots(data, 0.8, seed=seed)


class TestEdmdFit:
    def test_decoupled_decay_matches_exponential(self):
        # one-step map of dx/dt = diag(r) x over dt is diag(exp(r dt)), so the
        # state block of K must reproduce it
        rates = np.array([-0.1, -0.2])
        dt = 0.05
        data = make_dataset(_linear_system(rates), n_trajectories=10, steps=20,
                            dt=dt, seed=0)
        snaps = build_snapshots(data, 1.0, seed=0)
        model = dmd_fit(snaps, ridge=0.0)
        expected = np.diag(np.exp(rates * dt))
        assert np.allclose(model.K[1:3, 1:3], expected, atol=1e-6)
        assert np.allclose(model.K[1:3, 0], 0.0, atol=1e-6)

    def test_constant_row_is_unit_vector(self):
        snaps = _vdp_snapshots()
        d = make_dictionary("augsill", 2, 8, rng=np.random.default_rng(0),
                            data=snaps.X_train)
        model = edmd_fit(d, snaps, ridge=0.0)
        e1 = np.zeros(d.n_out)
        e1[0] = 1.0
        assert np.allclose(model.K[0], e1, atol=1e-8)

    def test_exactly_realizable_linear_map(self):
        rng = np.random.default_rng(1)
        B = np.array([[0.9, 0.1], [-0.2, 0.8]])
        X = rng.uniform(-1, 1, size=(60, 2))
        snaps = _pairs_snapshots(X, X @ B.T)
        model = dmd_fit(snaps, ridge=0.0)
        assert training_loss(model, snaps.X, snaps.Xp) < 1e-24
        assert np.allclose(model.K[1:, 1:], B, atol=1e-10)

    def test_identity_map_gives_identity_k_for_any_dictionary(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(-2, 2, size=(200, 2))
        snaps = _pairs_snapshots(X, X.copy())
        d = make_dictionary("augsill", 2, 8, rng=rng, data=X)
        model = edmd_fit(d, snaps, ridge=0.0)
        assert np.allclose(model.K, np.eye(d.n_out), atol=1e-6)

    def test_huge_ridge_shrinks_k_toward_zero(self):
        snaps = _vdp_snapshots()
        model = dmd_fit(snaps, ridge=1e12)
        assert np.max(np.abs(model.K)) < 1e-6

    def test_underdetermined_falls_back_to_regularized(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(-1, 1, size=(4, 2))
        snaps = _pairs_snapshots(X, X * 0.5)
        d = make_dictionary("augsill", 2, 10, rng=rng, data=X)
        model = edmd_fit(d, snaps, ridge=0.0)
        assert np.all(np.isfinite(model.K))
        assert model.training_meta["ridge"] > 0.0

    def test_meta_records_condition_and_count(self):
        snaps = _vdp_snapshots()
        model = dmd_fit(snaps)
        assert model.training_meta["gram_condition"] > 1.0
        assert model.training_meta["parameter_count"] == 9
        assert parameter_count(model) == 9

    def test_rejects_negative_ridge(self):
        snaps = _vdp_snapshots()
        with pytest.raises(ValueError):
            dmd_fit(snaps, ridge=-1.0)


class TestSgdGradients:
    @staticmethod
    def _loss(d, K, X, Xp):
        E = lift(d, Xp) - lift(d, X) @ K.T
        return float(np.mean(np.sum(E * E, axis=1)))

    def test_one_step_matches_finite_differences(self):
        # one full-batch step with tiny rate recovers the gradient; checked
        # against central differences of the loss in every coordinate
        rng = np.random.default_rng(7)
        X = rng.uniform(-1.5, 1.5, size=(16, 2))
        Xp = X + 0.1 * np.tanh(X)
        snaps = _pairs_snapshots(X, Xp)
        d0 = Dictionary(kind="augsill", m=2,
                        logistic_terms=[DictParams([0.2, -0.3], [1.0, 1.5])],
                        rbf_terms=[DictParams([-0.5, 0.4], [2.0, 0.7])])
        eta = 1e-7
        cfg = TrainConfig(epochs=1, batch_size=16, learning_rate=eta,
                          grad_clip=1e18, alpha_floor=1e-8)
        model = sgd_train(d0, snaps, cfg)
        K0 = np.eye(d0.n_out)
        g_K = (K0 - model.K) / eta
        h = 1e-6
        for i in range(d0.n_out):
            for j in range(d0.n_out):
                Kp, Km = K0.copy(), K0.copy()
                Kp[i, j] += h
                Km[i, j] -= h
                fd = (self._loss(d0, Kp, X, Xp) - self._loss(d0, Km, X, Xp)) / (2 * h)
                assert g_K[i, j] == pytest.approx(fd, rel=2e-4, abs=1e-9)

        d1 = model.dictionary
        for terms0, terms1 in ((d0.logistic_terms, d1.logistic_terms),
                               (d0.rbf_terms, d1.rbf_terms)):
            for t0, t1 in zip(terms0, terms1):
                for attr in ("mu", "alpha"):
                    g = (getattr(t0, attr) - getattr(t1, attr)) / eta
                    for i in range(2):
                        dp, dm = d0.copy(), d0.copy()
                        tp = (dp.logistic_terms + dp.rbf_terms)[
                            (d0.logistic_terms + d0.rbf_terms).index(t0)]
                        tm = (dm.logistic_terms + dm.rbf_terms)[
                            (d0.logistic_terms + d0.rbf_terms).index(t0)]
                        getattr(tp, attr)[i] += h
                        getattr(tm, attr)[i] -= h
                        fd = (self._loss(dp, K0, X, Xp) - self._loss(dm, K0, X, Xp)) / (2 * h)
                        assert g[i] == pytest.approx(fd, rel=2e-4, abs=1e-9)


class TestSgdTraining:
    def test_loss_decreases_on_vanderpol(self):
        snaps = _vdp_snapshots()
        d = make_dictionary("augsill", 2, 10, rng=np.random.default_rng(0),
                            data=snaps.X_train)
        cfg = TrainConfig(epochs=60, log_every=20, seed=0)
        model = sgd_train(d, snaps, cfg)
        trace = model.training_meta["loss_trace"]
        assert len(trace) == 60
        assert trace[-1] < trace[0]
        assert not model.training_meta["diverged"]
        assert len(model.training_meta["test_trace"]) == 3

    def test_alpha_floor_is_enforced(self):
        snaps = _vdp_snapshots()
        d = make_dictionary("augsill", 2, 8, rng=np.random.default_rng(1),
                            data=snaps.X_train, alpha_init=0.06)
        cfg = TrainConfig(epochs=30, learning_rate=0.05, alpha_floor=0.05)
        model = sgd_train(d, snaps, cfg)
        for t in model.dictionary.logistic_terms + model.dictionary.rbf_terms:
            assert np.all(t.alpha >= 0.05)

    def test_divergent_rate_sets_flag_and_restores_finite_state(self):
        snaps = _vdp_snapshots()
        d = make_dictionary("augsill", 2, 8, rng=np.random.default_rng(2),
                            data=snaps.X_train)
        cfg = TrainConfig(epochs=40, learning_rate=1e9, grad_clip=None, log_every=5)
        model = sgd_train(d, snaps, cfg)
        assert model.training_meta["diverged"]
        assert np.all(np.isfinite(model.K))

    def test_deterministic_given_seed(self):
        snaps = _vdp_snapshots()
        rng_a = np.random.default_rng(3)
        rng_b = np.random.default_rng(3)
        d_a = make_dictionary("augsill", 2, 8, rng=rng_a, data=snaps.X_train)
        d_b = make_dictionary("augsill", 2, 8, rng=rng_b, data=snaps.X_train)
        m_a = sgd_train(d_a, snaps, TrainConfig(epochs=15, seed=4))
        m_b = sgd_train(d_b, snaps, TrainConfig(epochs=15, seed=4))
        assert np.array_equal(m_a.K, m_b.K)
        for ta, tb in zip(m_a.dictionary.logistic_terms, m_b.dictionary.logistic_terms):
            assert np.array_equal(ta.mu, tb.mu)
            assert np.array_equal(ta.alpha, tb.alpha)
        assert m_a.training_meta["loss_trace"] == m_b.training_meta["loss_trace"]

    def test_polynomial_dictionary_trains_k_only(self):
        snaps = _vdp_snapshots()
        d = make_dictionary("legendre", 2, 8, rng=np.random.default_rng(0),
                            data=snaps.X_train)
        domain_before = d.poly_domain.copy()
        model = sgd_train(d, snaps, TrainConfig(epochs=10))
        assert np.array_equal(model.dictionary.poly_domain, domain_before)
        assert model.training_meta["loss_trace"][-1] < model.training_meta["loss_trace"][0]

    def test_input_dictionary_not_mutated(self):
        snaps = _vdp_snapshots()
        d = make_dictionary("augsill", 2, 8, rng=np.random.default_rng(9),
                            data=snaps.X_train)
        mu_before = d.logistic_terms[0].mu.copy()
        sgd_train(d, snaps, TrainConfig(epochs=5))
        assert np.array_equal(d.logistic_terms[0].mu, mu_before)


class TestMatchingPursuit:
    def test_reduces_to_dmd_at_minimum_size(self):
        snaps = _vdp_snapshots()
        mp = matching_pursuit_fit("augsill", snaps, 3, seed=0)
        base = dmd_fit(snaps)
        assert np.allclose(mp.K, base.K, atol=1e-12)

    def test_objective_trace_non_increasing(self):
        snaps = _vdp_snapshots()
        model = matching_pursuit_fit("augsill", snaps, 8, pool_size=40, seed=1)
        trace = model.training_meta["objective_trace"]
        assert len(trace) == 6
        for prev, cur in zip(trace, trace[1:]):
            assert cur <= prev * (1 + 1e-9) + 1e-12

    def test_beats_linear_baseline(self):
        snaps = _vdp_snapshots()
        model = matching_pursuit_fit("augsill", snaps, 10, pool_size=60, seed=2)
        base = dmd_fit(snaps)
        assert model.training_meta["train_loss"] < base.training_meta["train_loss"]

    def test_alternates_term_types_for_augsill(self):
        snaps = _vdp_snapshots()
        model = matching_pursuit_fit("augsill", snaps, 9, pool_size=40, seed=3)
        d = model.dictionary
        assert d.n_logistic + d.n_rbf == 6
        assert d.n_out == 9

    def test_sill_pool_only_grows_logistic_terms(self):
        snaps = _vdp_snapshots()
        model = matching_pursuit_fit("sill", snaps, 6, pool_size=30, seed=0)
        assert model.dictionary.n_rbf == 0
        assert model.dictionary.n_logistic == 3

    def test_deterministic_given_seed(self):
        snaps = _vdp_snapshots()
        a = matching_pursuit_fit("augsill", snaps, 6, pool_size=30, seed=5)
        b = matching_pursuit_fit("augsill", snaps, 6, pool_size=30, seed=5)
        assert np.array_equal(a.K, b.K)

    def test_rejects_polynomial_kind_and_small_target(self):
        snaps = _vdp_snapshots()
        with pytest.raises(ValueError):
            matching_pursuit_fit("legendre", snaps, 8)
        with pytest.raises(ValueError):
            matching_pursuit_fit("augsill", snaps, 2)


class TestModelIO:
    def test_round_trip_is_bit_exact(self, tmp_path):
        snaps = _vdp_snapshots()
        d = make_dictionary("augsill", 2, 8, rng=np.random.default_rng(0),
                            data=snaps.X_train)
        model = sgd_train(d, snaps, TrainConfig(epochs=5))
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert np.array_equal(back.K, model.K)
        assert back.dt == model.dt
        assert back.training_meta == model.training_meta
        for ta, tb in zip(model.dictionary.rbf_terms, back.dictionary.rbf_terms):
            assert np.array_equal(ta.mu, tb.mu)
            assert np.array_equal(ta.alpha, tb.alpha)
        X = snaps.X_test
        assert np.array_equal(lift(model.dictionary, X) @ model.K.T,
                              lift(back.dictionary, X) @ back.K.T)

    def test_save_is_deterministic(self, tmp_path):
        snaps = _vdp_snapshots()
        model = dmd_fit(snaps)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()

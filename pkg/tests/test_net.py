import numpy as np
import pytest

from cvrptw import net


def rand_batch(rng, n):
    X = rng.standard_normal((n, net.LAYER_DIMS[0]))
    y = rng.standard_normal(n)
    return X, y


class TestInit:
    def test_shapes(self):
        p = net.init(0)
        dims = net.LAYER_DIMS
        assert [w.shape for w in p.weights] == list(zip(dims, dims[1:]))
        assert [b.shape for b in p.biases] == [(d,) for d in dims[1:]]

    def test_bounds_and_zero_biases(self):
        p = net.init(1)
        for w, fan_in in zip(p.weights, net.LAYER_DIMS):
            bound = 1.0 / np.sqrt(fan_in)
            assert np.abs(w).max() <= bound
        for b in p.biases:
            assert not b.any()

    def test_seed_determinism(self):
        a, b = net.init(7), net.init(7)
        assert np.array_equal(a.flat(), b.flat())
        c = net.init(8)
        assert not np.array_equal(a.flat(), c.flat())

    def test_bad_dims_rejected(self):
        p = net.init(0)
        w = [a.copy() for a in p.weights]
        w[1] = w[1][:, :-1]
        with pytest.raises(ValueError):
            net.NetworkParams(w, [b.copy() for b in p.biases])


class TestForward:
    def test_zero_network_outputs_zero(self):
        p = net.init(0)
        for w in p.weights:
            w[:] = 0.0
        x = np.ones(net.LAYER_DIMS[0])
        assert net.forward(p, x) == 0.0

    def test_output_bias_passthrough(self):
        p = net.init(0)
        for w in p.weights:
            w[:] = 0.0
        p.biases[-1][:] = 3.25
        assert net.forward(p, np.zeros(net.LAYER_DIMS[0])) == 3.25

    def test_independent_oracle(self):
        """Re-derive the forward pass with explicit loops."""
        p = net.init(11)
        rng = np.random.Generator(np.random.PCG64(5))
        x = rng.standard_normal(net.LAYER_DIMS[0])
        h = x
        for i in range(len(p.weights)):
            out = np.empty(p.weights[i].shape[1])
            for j in range(len(out)):
                acc = p.biases[i][j]
                for k in range(len(h)):
                    acc += h[k] * p.weights[i][k, j]
                out[j] = acc
            h = np.tanh(out) if i < len(p.weights) - 1 else out
        assert net.forward(p, x) == pytest.approx(float(h[0]), abs=1e-10)

    def test_batch_matches_single(self):
        p = net.init(2)
        rng = np.random.Generator(np.random.PCG64(9))
        X = rng.standard_normal((6, net.LAYER_DIMS[0]))
        vb = net.forward_batch(p, X)
        for i in range(6):
            assert net.forward(p, X[i]) == pytest.approx(vb[i], abs=1e-12)

    def test_rejects_bad_input(self):
        p = net.init(0)
        with pytest.raises(ValueError):
            net.forward(p, np.zeros(5))
        bad = np.zeros(net.LAYER_DIMS[0])
        bad[3] = np.nan
        with pytest.raises(ValueError):
            net.forward(p, bad)


class TestGradients:
    def test_finite_difference_check(self):
        """Analytic gradients vs central differences on every layer."""
        p = net.init(3)
        rng = np.random.Generator(np.random.PCG64(4))
        X, y = rand_batch(rng, 8)
        loss0, gw, gb = net.gradients(p, X, y)
        eps = 1e-6

        def loss_at():
            err = net.forward_batch(p, X) - y
            return float(np.mean(err * err))

        for i in range(len(p.weights)):
            idx = (int(rng.integers(p.weights[i].shape[0])),
                   int(rng.integers(p.weights[i].shape[1])))
            orig = p.weights[i][idx]
            p.weights[i][idx] = orig + eps
            up = loss_at()
            p.weights[i][idx] = orig - eps
            dn = loss_at()
            p.weights[i][idx] = orig
            num = (up - dn) / (2 * eps)
            assert gw[i][idx] == pytest.approx(num, rel=1e-4, abs=1e-7)

            j = int(rng.integers(len(p.biases[i])))
            ob = p.biases[i][j]
            p.biases[i][j] = ob + eps
            up = loss_at()
            p.biases[i][j] = ob - eps
            dn = loss_at()
            p.biases[i][j] = ob
            num = (up - dn) / (2 * eps)
            assert gb[i][j] == pytest.approx(num, rel=1e-4, abs=1e-7)

    def test_zero_error_gives_zero_gradients(self):
        p = net.init(6)
        rng = np.random.Generator(np.random.PCG64(1))
        X = rng.standard_normal((5, net.LAYER_DIMS[0]))
        y = net.forward_batch(p, X)
        loss, gw, gb = net.gradients(p, X, y)
        assert loss == 0.0
        assert all(np.abs(g).max() == 0.0 for g in gw)
        assert all(np.abs(g).max() == 0.0 for g in gb)

    def test_train_returns_pre_step_loss(self):
        p = net.init(0)
        rng = np.random.Generator(np.random.PCG64(2))
        X, y = rand_batch(rng, 16)
        cfg = net.TrainConfig(learning_rate=0.01)
        snapshot = p.copy()
        loss = net.train_batch(p, X, y, cfg)
        err = net.forward_batch(snapshot, X) - y
        assert loss == pytest.approx(float(np.mean(err * err)), abs=1e-12)
        assert not np.array_equal(p.flat(), snapshot.flat())

    def test_overfit_single_sample(self):
        p = net.init(5)
        x = np.full((1, net.LAYER_DIMS[0]), 0.5)
        y = np.array([1.7])
        cfg = net.TrainConfig(learning_rate=0.05)
        for _ in range(10000):
            loss = net.train_batch(p, x, y, cfg)
            if loss < 1e-6:
                break
        assert loss < 1e-6

    def test_synthetic_regression_loss_drops(self):
        """Fit a smooth synthetic target; MSE must fall by >= 90%."""
        rng = np.random.Generator(np.random.PCG64(12))
        X = rng.uniform(-1, 1, size=(2048, net.LAYER_DIMS[0]))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] * X[:, 2]
        p = net.init(1)
        cfg = net.TrainConfig(learning_rate=0.01)
        first = net.train_batch(p, X, y, cfg)
        last = first
        for _ in range(2000):
            last = net.train_batch(p, X, y, cfg)
            if last < 0.1 * first:
                break
        assert last < 0.1 * first

    def test_momentum_path_differs(self):
        rng = np.random.Generator(np.random.PCG64(3))
        X, y = rand_batch(rng, 32)
        plain, mom = net.init(0), net.init(0)
        for _ in range(5):
            net.train_batch(plain, X, y, net.TrainConfig(learning_rate=0.01))
            net.train_batch(mom, X, y, net.TrainConfig(learning_rate=0.01, momentum=0.9))
        assert not np.array_equal(plain.flat(), mom.flat())

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            net.train_batch(net.init(0), np.zeros((0, 17)), np.zeros(0), net.TrainConfig())


class TestConfig:
    def test_epsilon_schedule(self):
        cfg = net.TrainConfig(epsilon_start=1.0, epsilon_decay=0.9995)
        assert cfg.epsilon(0) == 1.0
        assert cfg.epsilon(100) == pytest.approx(0.9995 ** 100)
        assert cfg.epsilon(1) < cfg.epsilon(0)

    def test_validation(self):
        with pytest.raises(ValueError):
            net.TrainConfig(gamma=1.5)
        with pytest.raises(ValueError):
            net.TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            net.TrainConfig(batch_size=0)


class TestReplayBuffer:
    def test_fifo_overwrite(self):
        buf = net.ReplayBuffer(capacity=4)
        for i in range(5):
            buf.push(np.full(17, float(i)), float(i))
        assert buf.count == 4
        # oldest entry (0) evicted, slot now holds 4
        stored = set(buf.y.tolist())
        assert stored == {1.0, 2.0, 3.0, 4.0}

    def test_default_capacity(self):
        assert net.ReplayBuffer().capacity == 65536

    def test_sample_before_fill_uses_replacement(self):
        buf = net.ReplayBuffer(capacity=16)
        buf.push(np.zeros(17), 1.0)
        buf.push(np.ones(17), 2.0)
        rng = np.random.Generator(np.random.PCG64(0))
        X, y = buf.sample(10, rng)
        assert X.shape == (10, 17)
        assert set(y.tolist()) <= {1.0, 2.0}

    def test_sample_without_replacement_when_full_enough(self):
        buf = net.ReplayBuffer(capacity=64)
        for i in range(40):
            buf.push(np.zeros(17), float(i))
        rng = np.random.Generator(np.random.PCG64(0))
        _, y = buf.sample(40, rng)
        assert sorted(y.tolist()) == [float(i) for i in range(40)]

    def test_sample_uniformity(self):
        """Frequency of each stored item within 3 sigma of uniform."""
        buf = net.ReplayBuffer(capacity=8)
        for i in range(8):
            buf.push(np.zeros(17), float(i))
        rng = np.random.Generator(np.random.PCG64(123))
        draws = 16000
        counts = np.zeros(8)
        for _ in range(draws // 4):
            _, y = buf.sample(4, rng)
            for v in y:
                counts[int(v)] += 1
        expect = draws / 8
        sigma = np.sqrt(draws * (1 / 8) * (7 / 8))
        assert np.abs(counts - expect).max() < 3 * sigma

    def test_empty_sample_rejected(self):
        buf = net.ReplayBuffer(capacity=4)
        rng = np.random.Generator(np.random.PCG64(0))
        with pytest.raises(ValueError):
            buf.sample(1, rng)
        buf.push(np.zeros(17), 0.0)
        with pytest.raises(ValueError):
            buf.sample(0, rng)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        p = net.init(99)
        path = str(tmp_path / "m.ckpt")
        net.save(p, path)
        q = net.load(path)
        assert np.array_equal(p.flat(), q.flat())
        vals = net.forward_batch(q, np.eye(17))
        assert np.array_equal(vals, net.forward_batch(p, np.eye(17)))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACHECKPOINT" + b"\x00" * 64)
        with pytest.raises(net.CheckpointError, match="magic"):
            net.load(str(path))

    def test_truncated(self, tmp_path):
        p = net.init(0)
        path = str(tmp_path / "t.ckpt")
        net.save(p, path)
        data = open(path, "rb").read()
        open(path, "wb").write(data[: len(data) // 2])
        with pytest.raises(net.CheckpointError, match="truncated"):
            net.load(path)

    def test_trailing_bytes(self, tmp_path):
        p = net.init(0)
        path = str(tmp_path / "x.ckpt")
        net.save(p, path)
        with open(path, "ab") as f:
            f.write(b"\x00" * 8)
        with pytest.raises(net.CheckpointError, match="trailing"):
            net.load(path)

import numpy as np
import pytest

from synq.nets import AdamState, LayerSpec, Network, adam_step, soft_update


def random_specs(rng, max_layers=3, max_units=16):
    n_layers = int(rng.integers(1, max_layers + 1))
    dims = [int(rng.integers(1, max_units + 1)) for _ in range(n_layers + 1)]
    acts = [str(rng.choice(["relu", "tanh", "identity"])) for _ in range(n_layers)]
    return [LayerSpec(dims[i], dims[i + 1], acts[i]) for i in range(n_layers)]


def finite_difference_check(net, x, upstream, h=1e-5, rel_tol=1e-4):
    """Central finite differences of sum(output * upstream) over every
    parameter and the input; returns the worst relative error."""
    grads, input_grad = net.backward(x, upstream)

    def objective():
        return float(np.dot(net.forward(x), upstream))

    worst = 0.0

    def compare(analytic, param):
        nonlocal worst
        flat_param = param.ravel()
        flat_grad = analytic.ravel()
        for i in range(flat_param.size):
            orig = flat_param[i]
            flat_param[i] = orig + h
            up = objective()
            flat_param[i] = orig - h
            down = objective()
            flat_param[i] = orig
            numeric = (up - down) / (2 * h)
            scale = max(abs(numeric), abs(flat_grad[i]), 1e-8)
            worst = max(worst, abs(numeric - flat_grad[i]) / scale)

    for (dw, db), w, b in zip(grads, net.weights, net.biases):
        compare(dw, w)
        compare(db, b)
    xi = x.copy()
    for i in range(xi.size):
        orig = xi[i]
        xi[i] = orig + h
        up = float(np.dot(net.forward(xi), upstream))
        xi[i] = orig - h
        down = float(np.dot(net.forward(xi), upstream))
        xi[i] = orig
        numeric = (up - down) / (2 * h)
        scale = max(abs(numeric), abs(input_grad[i]), 1e-8)
        worst = max(worst, abs(numeric - input_grad[i]) / scale)
    assert worst < rel_tol, f"gradient mismatch: rel err {worst:.2e}"
    return worst


class TestForward:
    def test_identity_layer_passes_input_through(self):
        net = Network([LayerSpec(4, 4, "identity")], [np.eye(4)], [np.zeros(4)])
        x = np.array([0.5, -1.0, 2.0, 0.0])
        assert np.array_equal(net.forward(x), x)

    def test_tanh_output_in_open_interval(self):
        rng = np.random.default_rng(0)
        net = Network.initialize([LayerSpec(6, 8, "relu"), LayerSpec(8, 3, "tanh")], rng)
        for _ in range(50):
            y = net.forward(rng.uniform(-5, 5, 6))
            assert np.all(y > -1.0) and np.all(y < 1.0)

    def test_two_layer_fixed_net_matches_matrix_oracle(self):
        w1 = np.array([[1.0, -0.5], [0.25, 2.0], [0.0, 1.0]])
        b1 = np.array([0.1, -0.2])
        w2 = np.array([[2.0], [-1.0]])
        b2 = np.array([0.05])
        net = Network([LayerSpec(3, 2, "relu"), LayerSpec(2, 1, "identity")],
                      [w1, w2], [b1, b2])
        x = np.array([0.3, -0.7, 1.2])
        # Independent evaluation with plain matrix arithmetic.
        hidden = np.maximum(x @ w1 + b1, 0.0)
        expected = hidden @ w2 + b2
        assert np.allclose(net.forward(x), expected, atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(1)
        net = Network.initialize([LayerSpec(3, 2, "relu")], rng)
        with pytest.raises(ValueError):
            net.forward(np.zeros(4))
        with pytest.raises(ValueError):
            Network.initialize([LayerSpec(3, 2, "relu"), LayerSpec(3, 1, "identity")],
                               rng)

    def test_batch_matches_per_row(self):
        rng = np.random.default_rng(2)
        net = Network.initialize([LayerSpec(5, 7, "tanh"), LayerSpec(7, 2, "identity")],
                                 rng)
        xs = rng.standard_normal((4, 5))
        batch = net.forward(xs)
        rows = np.stack([net.forward(x) for x in xs])
        assert np.allclose(batch, rows, atol=1e-15)


class TestBackward:
    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            specs = random_specs(rng)
            net = Network.initialize(specs, rng)
            x = rng.standard_normal(specs[0].in_dim)
            upstream = rng.standard_normal(specs[-1].out_dim)
            finite_difference_check(net, x, upstream)

    def test_zero_upstream_gives_zero_gradients(self):
        rng = np.random.default_rng(8)
        net = Network.initialize([LayerSpec(4, 6, "relu"), LayerSpec(6, 2, "tanh")],
                                 rng)
        grads, gx = net.backward(rng.standard_normal(4), np.zeros(2))
        assert all(np.all(dw == 0) and np.all(db == 0) for dw, db in grads)
        assert np.all(gx == 0)

    def test_identity_layer_input_gradient_is_upstream(self):
        net = Network([LayerSpec(3, 3, "identity")], [np.eye(3)], [np.zeros(3)])
        upstream = np.array([0.5, -2.0, 1.0])
        _, gx = net.backward(np.array([1.0, 2.0, 3.0]), upstream)
        assert np.allclose(gx, upstream, atol=1e-15)


class TestAdam:
    def test_zero_gradient_leaves_parameters_unchanged(self):
        rng = np.random.default_rng(9)
        net = Network.initialize([LayerSpec(3, 2, "relu")], rng)
        opt = AdamState.for_network(net, lr=0.01)
        before = [w.copy() for w in net.weights]
        grads = [(np.zeros_like(net.weights[0]), np.zeros_like(net.biases[0]))]
        adam_step(net, grads, opt)
        assert np.array_equal(net.weights[0], before[0])

    def test_first_step_closed_form(self):
        # Single scalar parameter, g=1: bias-corrected m=g, v=g^2, so the
        # first update is lr * 1 / (1 + eps).
        net = Network([LayerSpec(1, 1, "identity")],
                      [np.array([[2.0]])], [np.array([0.0])])
        opt = AdamState.for_network(net, lr=0.001)
        adam_step(net, [(np.array([[1.0]]), np.array([0.0]))], opt)
        expected_delta = 0.001 * 1.0 / (1.0 + opt.eps)
        assert net.weights[0][0, 0] == pytest.approx(2.0 - expected_delta, abs=1e-12)
        assert expected_delta == pytest.approx(0.001, abs=1e-6)

    def test_step_count_increments(self):
        rng = np.random.default_rng(10)
        net = Network.initialize([LayerSpec(2, 2, "identity")], rng)
        opt = AdamState.for_network(net, lr=0.01)
        grads = [(np.ones_like(net.weights[0]), np.ones_like(net.biases[0]))]
        for expected in (1, 2, 3):
            adam_step(net, grads, opt)
            assert opt.step_count == expected


class TestSoftUpdate:
    def make_pair(self, seed=11):
        rng = np.random.default_rng(seed)
        specs = [LayerSpec(3, 4, "relu"), LayerSpec(4, 1, "identity")]
        return Network.initialize(specs, rng), Network.initialize(specs, rng)

    def test_tau_one_copies_source(self):
        target, source = self.make_pair()
        soft_update(target, source, 1.0)
        for tw, sw in zip(target.weights, source.weights):
            assert np.array_equal(tw, sw)

    def test_tau_zero_keeps_target(self):
        target, source = self.make_pair()
        before = [w.copy() for w in target.weights]
        soft_update(target, source, 0.0)
        for tw, bw in zip(target.weights, before):
            assert np.array_equal(tw, bw)

    def test_midpoint(self):
        specs = [LayerSpec(1, 1, "identity")]
        target = Network(specs, [np.array([[2.0]])], [np.array([2.0])])
        source = Network(specs, [np.array([[4.0]])], [np.array([4.0])])
        soft_update(target, source, 0.5)
        assert target.weights[0][0, 0] == pytest.approx(3.0, abs=1e-15)
        assert target.biases[0][0] == pytest.approx(3.0, abs=1e-15)

    def test_contraction_toward_source(self):
        target, source = self.make_pair(seed=12)
        initial = max(np.abs(tw - sw).max()
                      for tw, sw in zip(target.weights, source.weights))
        for _ in range(200):
            soft_update(target, source, 0.1)
        final = max(np.abs(tw - sw).max()
                    for tw, sw in zip(target.weights, source.weights))
        assert final < 1e-6 * initial

    def test_architecture_mismatch_rejected(self):
        rng = np.random.default_rng(13)
        a = Network.initialize([LayerSpec(3, 2, "relu")], rng)
        b = Network.initialize([LayerSpec(4, 2, "relu")], rng)
        with pytest.raises(ValueError):
            soft_update(a, b, 0.5)


class TestDeterminismAndExport:
    def test_seeded_init_identical(self):
        specs = [LayerSpec(5, 8, "relu"), LayerSpec(8, 1, "tanh")]
        a = Network.initialize(specs, np.random.default_rng(99))
        b = Network.initialize(specs, np.random.default_rng(99))
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_export_import_round_trip(self):
        rng = np.random.default_rng(14)
        specs = [LayerSpec(4, 6, "relu"), LayerSpec(6, 2, "identity")]
        a = Network.initialize(specs, rng)
        b = Network.initialize(specs, rng)
        b.import_params(a.export_params())
        x = rng.standard_normal(4)
        assert np.array_equal(a.forward(x), b.forward(x))

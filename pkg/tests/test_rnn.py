import numpy as np
import pytest

from rdsrnn.errors import ConfigurationError, NonFiniteError
from rdsrnn.presets import ou_identity_network
from rdsrnn.rnn import (Network, NetworkState, Topology, as_general,
                        build_memory_bank, forward_step, initial_state,
                        lipschitz_feedback_bound, memory_bank_step,
                        memory_bank_trace, network_from_json, network_to_json,
                        one_hot, rollout, rollout_batch)
from rdsrnn.systems import OuSystem, simulate


def random_last_layer_net(widths, seed, scale=0.4):
    gen = np.random.default_rng(seed)
    top = Topology(widths, feedback="last-layer")
    weights = [scale * gen.standard_normal((widths[l + 1], widths[l]))
               for l in range(len(widths) - 1)]
    biases = [scale * gen.standard_normal(widths[l + 1])
              for l in range(len(widths) - 1)]
    phi_w = [scale * gen.standard_normal((widths[1], widths[-1]))]
    phi_b = [scale * gen.standard_normal(widths[1])]
    return Network(top, weights, biases, phi_w, phi_b)


class TestTopology:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            Topology((2, 3), feedback="last-layer")
        with pytest.raises(ConfigurationError):
            Topology((2, 0, 2))
        with pytest.raises(ConfigurationError):
            Topology((2, 3, 2), feedback="ring")
        with pytest.raises(ConfigurationError):
            Topology((1, 5, 2), feedback="memory-bank", horizon=2)  # width must be 5? no: 1+2+2*1=5 -> ok
        Topology((1, 5, 2), feedback="memory-bank", horizon=2)

    def test_feedback_dims(self):
        assert Topology((2, 6, 2)).feedback_dim == 2
        assert Topology((2, 6, 4, 2), feedback="general").feedback_dim == 12


class TestForwardStep:
    def test_identity_net_fixed_point(self):
        net = ou_identity_network(20.0, 0.99, 1e6, 0.0)
        out, state = forward_step(net, NetworkState([20.0]), [0.0])
        assert out[0] == pytest.approx(20.0, abs=1e-9)
        assert np.array_equal(state.feedback, out)

    def test_zero_network_outputs_zero(self):
        top = Topology((3, 4, 2))
        net = Network(top, [np.zeros((4, 3)), np.zeros((2, 4))],
                      [np.zeros(4), np.zeros(2)],
                      [np.zeros((4, 2))], [np.zeros(4)])
        out, _ = forward_step(net, NetworkState([5.0, -2.0]), [1.0, 2.0, 3.0])
        assert np.array_equal(out, [0.0, 0.0])

    def test_offset_network_shifts_output(self):
        net = ou_identity_network(20.0, 0.99, 1e6, 0.1)
        out, _ = forward_step(net, NetworkState([20.0]), [0.0])
        assert out[0] == pytest.approx(20.1, abs=1e-9)

    def test_single_step_map_agreement(self):
        # with the bias active the network map equals the true update
        spec = OuSystem(20.0, 0.99, 1.0)
        net = ou_identity_network(20.0, 0.99, 1e6, 0.0)
        gen = np.random.default_rng(0)
        for _ in range(200):
            x = gen.normal(20.0, 10.0)
            u = gen.normal(0.0, 1.0)
            true_next = 20.0 + 0.99 * (x - 20.0) + u
            out, _ = forward_step(net, NetworkState([x]), [u])
            assert abs(out[0] - true_next) < 1e-9

    def test_non_finite_rejected(self):
        net = ou_identity_network(0.0, 0.5, 10.0)
        with pytest.raises(NonFiniteError):
            forward_step(net, NetworkState([0.0]), [np.nan])
        with pytest.raises(NonFiniteError):
            Network(net.topology, [np.array([[np.inf]]), np.array([[1.0]])],
                    net.biases, net.phi_weights, net.phi_biases)


class TestRollout:
    def test_matches_simulation_when_exact(self):
        spec = OuSystem(20.0, 0.5, 1.0)
        net = ou_identity_network(20.0, 0.5, 1e6, 0.0)
        traj = simulate(spec, [0.0], 200, 9)
        outs = rollout(net, initial_state(net, [0.0]), traj.inputs)
        assert np.max(np.abs(outs[:, 0] - traj.states[1:, 0])) < 1e-9

    def test_empty_inputs(self):
        net = ou_identity_network(0.0, 0.5, 10.0)
        outs = rollout(net, initial_state(net, [0.0]), np.zeros((0, 1)))
        assert outs.shape == (0, 1)

    def test_batch_matches_single(self):
        net = random_last_layer_net((2, 6, 2), seed=1)
        gen = np.random.default_rng(2)
        inputs = gen.standard_normal((4, 30, 2))
        starts = gen.standard_normal((4, 2))
        batched = rollout_batch(net, starts, inputs)
        for n in range(4):
            single = rollout(net, initial_state(net, starts[n]), inputs[n])
            assert np.allclose(batched[n], single, rtol=0, atol=1e-12)

    def test_deep_batch_matches_single(self):
        net = random_last_layer_net((2, 5, 4, 2), seed=3)
        gen = np.random.default_rng(4)
        inputs = gen.standard_normal((3, 20, 2))
        starts = gen.standard_normal((3, 2))
        batched = rollout_batch(net, starts, inputs)
        for n in range(3):
            single = rollout(net, initial_state(net, starts[n]), inputs[n])
            assert np.allclose(batched[n], single, rtol=0, atol=1e-12)

    def test_general_topology_rejected(self):
        net = as_general(random_last_layer_net((2, 6, 2), seed=1))
        with pytest.raises(ConfigurationError):
            rollout_batch(net, np.zeros((1, 2)), np.zeros((1, 3, 2)))


class TestGeneralEquivalence:
    def test_last_layer_is_special_case(self):
        net = random_last_layer_net((3, 5, 4, 2), seed=7)
        general = as_general(net)
        gen = np.random.default_rng(8)
        inputs = gen.standard_normal((25, 3))
        x0 = gen.standard_normal(2)

        fb0 = np.zeros(general.topology.feedback_dim)
        fb0[-2:] = x0
        outs_special = rollout(net, initial_state(net, x0), inputs)
        outs_general = rollout(general, NetworkState(fb0), inputs)
        assert np.array_equal(outs_special, outs_general)


class TestMemoryBank:
    def test_two_step_recovery(self):
        layer, state = build_memory_bank(2, 1, 2, 50.0, np.array([3.0, 4.0]))
        assert layer.width == 5
        trace = memory_bank_trace(layer, state, np.array([[0.5], [0.7]]))
        assert np.allclose(trace[1], [2.0, 3.0, 4.0, 0.7, 0.5], rtol=0, atol=1e-12)

    def test_single_slot_zero_input(self):
        layer, state = build_memory_bank(2, 1, 1, 10.0, np.array([1.5, -0.5]))
        out, _ = memory_bank_step(layer, state, [0.0])
        assert np.allclose(out, [1.0, 1.5, -0.5, 0.0], rtol=0, atol=0)

    def test_saturation_clamps_stored_value(self):
        bias = 25.0
        layer, state = build_memory_bank(1, 1, 2, bias, np.array([0.0]))
        out, _ = memory_bank_step(layer, state, [-2.0 * bias])
        assert out[2] == -bias  # clamped, not the true input

    def test_recovered_slots_near_exact(self):
        bias = 40.0
        layer, state = build_memory_bank(2, 1, 8, bias, np.array([0.3, -0.7]))
        gen = np.random.default_rng(5)
        inputs = gen.standard_normal((8, 1))
        trace = memory_bank_trace(layer, state, inputs)
        for t in range(8):
            expect = np.concatenate([[t + 1], [0.3, -0.7], inputs[:t + 1, 0][::-1]])
            got = trace[t][:len(expect)]
            tol = 2 * np.spacing(bias + np.abs(expect))
            assert np.all(np.abs(got - expect) <= tol)

    def test_parameter_validation(self):
        with pytest.raises(ConfigurationError):
            build_memory_bank(2, 1, 0, 10.0, np.zeros(2))
        with pytest.raises(ConfigurationError):
            build_memory_bank(2, 1, 3, -1.0, np.zeros(2))


class TestLipschitzBound:
    def test_identity_net_bound_is_alpha(self):
        net = ou_identity_network(20.0, 0.99, 1e6, 0.0)
        assert lipschitz_feedback_bound(net) == pytest.approx(0.99, abs=1e-12)

    def test_zero_feedback_gives_zero(self):
        net = random_last_layer_net((2, 6, 2), seed=1)
        net.phi_weights[0][:] = 0.0
        assert lipschitz_feedback_bound(net) == 0.0

    def test_orthogonal_half_scale_three_layers(self):
        gen = np.random.default_rng(11)
        h, dx, du = 4, 4, 3

        def orth(n):
            q, _ = np.linalg.qr(gen.standard_normal((n, n)))
            return q

        top = Topology((du, h, h, dx), feedback="last-layer")
        net = Network(
            top,
            [0.5 * orth(h)[:, :du], 0.5 * orth(h), 0.5 * orth(h)],
            [np.zeros(h), np.zeros(h), np.zeros(dx)],
            [0.5 * orth(h)[:, :dx]],
            [np.zeros(h)],
        )
        assert lipschitz_feedback_bound(net) == pytest.approx(0.125, rel=1e-9)

    def test_wrong_topology_rejected(self):
        net = as_general(random_last_layer_net((2, 6, 2), seed=1))
        with pytest.raises(ConfigurationError):
            lipschitz_feedback_bound(net)

    def test_empirical_ratio_below_bound(self):
        net = random_last_layer_net((2, 6, 2), seed=13, scale=0.7)
        bound = lipschitz_feedback_bound(net)
        gen = np.random.default_rng(14)
        u = gen.standard_normal(2)
        n = 10000
        xa = gen.standard_normal((n, 2)) * 3.0
        xb = xa + gen.standard_normal((n, 2))
        inputs = np.broadcast_to(u, (n, 1, 2))
        fa = rollout_batch(net, xa, inputs)[:, 0]
        fb = rollout_batch(net, xb, inputs)[:, 0]
        num = np.linalg.norm(fa - fb, axis=1)
        den = np.linalg.norm(xa - xb, axis=1)
        assert np.all(num <= (bound + 1e-9) * den)


class TestSerialization:
    def test_round_trip_bit_exact(self):
        net = random_last_layer_net((2, 6, 2), seed=21)
        net.weights[0][0, 0] = np.nextafter(1.0, 2.0)
        net.weights[1][0, 0] = 1e-300
        net.biases[0][1] = -0.1 + 0.2  # a value with a long repr
        text = network_to_json(net)
        back = network_from_json(text)
        for a, b in zip(net.weights, back.weights):
            assert np.array_equal(a, b)
        for a, b in zip(net.biases, back.biases):
            assert np.array_equal(a, b)
        assert np.array_equal(net.phi_weights[0], back.phi_weights[0])
        assert network_to_json(back) == text

    def test_memory_bank_round_trip(self):
        layer, _ = build_memory_bank(1, 1, 2, 30.0, np.array([2.0]))
        from rdsrnn.rnn import memory_bank_network
        net = memory_bank_network(layer, [np.ones((1, layer.width))], [np.zeros(1)])
        back = network_from_json(network_to_json(net))
        assert back.topology == net.topology
        assert np.array_equal(back.post_bias, net.post_bias)

    def test_schema_checked(self):
        with pytest.raises(ConfigurationError):
            network_from_json('{"schema": "other/9"}')


class TestOneHot:
    def test_encoding(self):
        out = one_hot(np.array([[0, 1], [1, 1]]), 2)
        assert out.shape == (2, 2, 2)
        assert np.array_equal(out[0, 0], [1.0, 0.0])
        assert np.array_equal(out[1, 1], [0.0, 1.0])

    def test_range_check(self):
        with pytest.raises(ValueError):
            one_hot(np.array([2]), 2)

import json

import numpy as np
import pytest

from rdsrnn.errors import ConfigurationError
from rdsrnn.presets import barnsley_fern, simplified_fern
from rdsrnn.rng import stream
from rdsrnn.systems import (AffineMap, Ar1Input, CategoricalInput, GaussianInput,
                            IfsSystem, LinearSystem, MapEnsemble, OuSystem,
                            SwitchedAffineSystem, backward_compose,
                            draw_input_batch, evolve, sample_map_index, simulate,
                            simulate_batch, spec_from_json, spec_to_json,
                            stack_linear, step, trajectory_to_csv)


class TestSampleMapIndex:
    def test_fern_probabilities_low_draw(self):
        assert sample_map_index([0.01, 0.85, 0.07, 0.07], 0.005) == 0

    def test_first_bin_boundary(self):
        assert sample_map_index([0.5, 0.5], 0.0) == 0

    def test_left_closed_bins(self):
        # a draw exactly on the boundary belongs to the next bin
        assert sample_map_index([0.2993, 0.7007], 0.2993) == 1

    def test_invalid_probabilities(self):
        with pytest.raises(ConfigurationError):
            sample_map_index([0.6, 0.6], 0.1)
        with pytest.raises(ConfigurationError):
            sample_map_index([-0.1, 1.1], 0.1)

    def test_draw_out_of_range(self):
        with pytest.raises(ValueError):
            sample_map_index([0.5, 0.5], 1.0)


class TestTypes:
    def test_affine_map_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            AffineMap(np.eye(2), [1.0, 2.0, 3.0])
        with pytest.raises(ConfigurationError):
            AffineMap(np.ones((2, 3)), [1.0, 2.0])
        with pytest.raises(ConfigurationError):
            AffineMap([[np.nan, 0], [0, 1]], [0, 0])

    def test_ensemble_probability_validation(self):
        m = AffineMap(np.eye(2), np.zeros(2))
        with pytest.raises(ConfigurationError):
            MapEnsemble((m, m), [0.5, 0.6])
        with pytest.raises(ConfigurationError):
            MapEnsemble((), [])
        ens = MapEnsemble((m, m), [0.25, 0.75])
        assert ens.dim == 2

    def test_switched_affine_needs_matching_categories(self):
        m = AffineMap(np.eye(2), np.zeros(2))
        ens = MapEnsemble((m, m), [0.5, 0.5])
        with pytest.raises(ConfigurationError):
            SwitchedAffineSystem(ens, CategoricalInput([1.0]))


class TestStep:
    def test_fern_first_map(self):
        # hand arithmetic: [[0,0],[0,.16]] @ (1,1) + 0 = (0, 0.16)
        fern = barnsley_fern()
        out = step(fern, [1.0, 1.0], 0)
        assert np.allclose(out, [0.0, 0.16], rtol=0, atol=0)

    def test_ou_fixed_point(self):
        spec = OuSystem(20.0, 0.99, 1.0)
        assert step(spec, [20.0], 0.0) == pytest.approx([20.0], abs=0)

    def test_linear_zero_transition(self):
        spec = LinearSystem(np.zeros((2, 2)), np.eye(2),
                            GaussianInput([0.0, 0.0], np.eye(2)))
        assert np.array_equal(step(spec, [9.0, -4.0], [3.0, 4.0]), [3.0, 4.0])

    def test_switched_index_out_of_range(self):
        fern = barnsley_fern()
        with pytest.raises(ValueError):
            step(fern, [0.0, 0.0], 4)


class TestSimulate:
    def test_zero_horizon(self):
        traj = simulate(barnsley_fern(), [1.0, 2.0], 0, 0)
        assert traj.states.shape == (1, 2)
        assert traj.inputs.shape == (0,)
        assert np.array_equal(traj.states[0], [1.0, 2.0])

    def test_ou_zero_noise_closed_form(self):
        traj = simulate(OuSystem(20.0, 0.5, 0.0), [0.0], 3, 11)
        assert np.allclose(traj.states.ravel(), [0.0, 10.0, 15.0, 17.5],
                           rtol=0, atol=1e-12)

    def test_bit_identical_determinism(self):
        spec = simplified_fern()
        a = simulate(spec, [0.0, 0.0], 500, 123)
        b = simulate(spec, [0.0, 0.0], 500, 123)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.inputs, b.inputs)

    def test_batch_rows_independent_of_batch_size(self):
        spec = simplified_fern()
        small = simulate_batch(spec, [0.0, 0.0], 50, 3, 9)
        large = simulate_batch(spec, [0.0, 0.0], 50, 8, 9)
        assert np.array_equal(small.states, large.states[:3])
        single = simulate(spec, [0.0, 0.0], 50, 9)
        assert np.array_equal(single.states, large.states[0])

    def test_stream_offset_matches_full_batch(self):
        proc = simplified_fern().input_process
        full = draw_input_batch(proc, 20, 6, 5)
        tail = draw_input_batch(proc, 20, 2, 5, stream_offset=4)
        assert np.array_equal(full[4:], tail)

    def test_gaussian_linear_simulation_matches_manual(self):
        spec = LinearSystem([[0.5]], [[1.0]], GaussianInput([0.0], [[1.0]]))
        traj = simulate(spec, [2.0], 4, 77)
        u = spec.input_process.draw(4, stream(77, 0))
        x = 2.0
        for t in range(4):
            x = 0.5 * x + u[t, 0]
            assert traj.states[t + 1, 0] == pytest.approx(x, abs=1e-15)

    def test_fern_histogram_stable_across_seeds(self):
        # the invariant measure concentrates on the fern: two independent
        # long runs give nearly identical occupancy histograms
        fern = barnsley_fern()

        def occupancy(seed):
            t = simulate(fern, [0.0, 0.0], 100000, seed)
            h, _, _ = np.histogram2d(t.states[:, 0], t.states[:, 1], bins=20,
                                     range=[[-3.0, 3.0], [0.0, 10.2]])
            return h / h.sum()

        a, b = occupancy(0), occupancy(1)
        assert 0.5 * np.abs(a - b).sum() < 0.06
        t = simulate(fern, [0.0, 0.0], 100000, 2)
        assert t.states[:, 0].min() > -3.0 and t.states[:, 0].max() < 3.0
        assert t.states[:, 1].min() >= 0.0 and t.states[:, 1].max() < 10.2


class TestAr1Input:
    def test_draw_matches_manual_recursion(self):
        proc = Ar1Input(np.array([[0.9]]), GaussianInput([0.0], [[1.0]]),
                        [2.0], [[0.25]])
        drawn = proc.draw(5, stream(42, 0))
        gen = stream(42, 0)
        u = 2.0 + 0.5 * gen.standard_normal(1)
        shocks = gen.standard_normal((5, 1))
        for t in range(5):
            u = 0.9 * u + shocks[t]
            assert drawn[t, 0] == pytest.approx(u[0], abs=1e-14)

    def test_dimension_validation(self):
        with pytest.raises(ConfigurationError):
            Ar1Input(np.eye(2), GaussianInput([0.0], [[1.0]]), [0.0, 0.0], np.eye(2))


class TestBackwardCompose:
    def test_identity_ensemble_is_constant(self):
        ident = MapEnsemble((AffineMap(np.eye(2), np.zeros(2)),), [1.0])
        ys = backward_compose(IfsSystem(ident), [3.0, -1.0], 10, 0)
        assert np.array_equal(ys, np.tile([3.0, -1.0], (10, 1)))

    def test_ou_zero_noise_geometric(self):
        ys = backward_compose(OuSystem(20.0, 0.5, 0.0), [0.0], 20, 0)
        # k maps applied plus the outermost one: 20 * (1 - 0.5**(k+1))
        expect = 20.0 * (1.0 - 0.5 ** (np.arange(1, 21) + 1))
        assert np.allclose(ys[:, 0], expect, rtol=0, atol=1e-12)

    def test_fern_starts_coalesce(self):
        fern = barnsley_fern()
        for seed in range(3):
            a = backward_compose(fern, [0.0, 0.0], 200, seed)
            b = backward_compose(fern, [10.0, 10.0], 200, seed)
            gaps = np.linalg.norm(a - b, axis=1)
            assert gaps[-1] < 1e-8
            # coarse monotonicity: checkpoint distances do not grow
            marks = gaps[[49, 99, 149, 199]]
            assert np.all(np.diff(marks) <= 1e-12)

    def test_ar1_inputs_rejected(self):
        proc = Ar1Input(np.array([[0.9]]), GaussianInput([0.0], [[1.0]]),
                        [0.0], [[1.0]])
        spec = LinearSystem([[0.5]], [[1.0]], proc)
        with pytest.raises(ConfigurationError):
            backward_compose(spec, [0.0], 5, 0)


class TestStackLinear:
    def test_block_assembly(self):
        trans, inp = stack_linear(0.5 * np.eye(2), np.eye(2), 0.9 * np.eye(2))
        assert np.array_equal(trans[:2, :2], 0.5 * np.eye(2))
        assert np.array_equal(trans[:2, 2:], 0.9 * np.eye(2))
        assert np.array_equal(trans[2:, 2:], 0.9 * np.eye(2))
        assert np.array_equal(trans[2:, :2], np.zeros((2, 2)))
        assert np.array_equal(inp[:2, :2], np.eye(2))
        assert np.array_equal(inp[2:, 2:], np.eye(2))

    def test_zero_input_process_keeps_spectrum(self):
        a = np.array([[0.3, 0.7], [0.0, -0.4]])
        trans, _ = stack_linear(a, np.ones((2, 1)), np.zeros((1, 1)))
        assert np.max(np.abs(np.linalg.eigvals(trans))) == pytest.approx(
            np.max(np.abs(np.linalg.eigvals(a))), abs=1e-12)

    def test_spectrum_is_union_of_blocks(self):
        gen = np.random.default_rng(0)
        for _ in range(20):
            a = gen.standard_normal((2, 2))
            b = gen.standard_normal((2, 2))
            g = gen.standard_normal((2, 2))
            trans, _ = stack_linear(a, b, g)
            got = np.sort_complex(np.linalg.eigvals(trans))
            want = np.sort_complex(np.concatenate(
                [np.linalg.eigvals(a), np.linalg.eigvals(g)]))
            assert np.allclose(got, want, rtol=0, atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            stack_linear(np.eye(2), np.ones((2, 1)), np.eye(2))


class TestOuMoments:
    def test_mean_and_variance_laws(self):
        # closed forms: mean_t = (1-a^t) m + a^t m0,
        # var_t = a^(2t) s0^2 + (1-a^(2t)) s^2 / (1-a^2)
        mean, alpha, sigma = 20.0, 0.9, 1.0
        m0, s0 = 10.0, 1.0
        n = 4000
        spec = OuSystem(mean, alpha, sigma)
        x0 = np.empty((n, 1))
        inputs = np.empty((n, 20))
        for i in range(n):
            gen = stream(31, i)
            x0[i, 0] = m0 + s0 * gen.standard_normal()
            inputs[i] = spec.input_process.draw(20, gen)[:, 0]
        states = evolve(spec, x0, inputs)[:, :, 0]
        for t in (1, 10, 20):
            m_t = (1 - alpha ** t) * mean + alpha ** t * m0
            v_t = alpha ** (2 * t) * s0 ** 2 + (1 - alpha ** (2 * t)) * sigma ** 2 / (1 - alpha ** 2)
            assert abs(states[:, t].mean() - m_t) < 4 * np.sqrt(v_t / n)
            assert abs(states[:, t].var(ddof=1) - v_t) < 4 * v_t * np.sqrt(2.0 / (n - 1))


class TestSerialization:
    def test_round_trip_all_kinds(self):
        specs = [
            barnsley_fern(),
            SwitchedAffineSystem(simplified_fern().ensemble,
                                 CategoricalInput([0.4, 0.6])),
            LinearSystem([[0.5, 0.1], [0.0, 0.3]], [[1.0], [0.2]],
                         GaussianInput([0.1], [[2.0]])),
            LinearSystem([[0.5]], [[1.0]],
                         Ar1Input(np.array([[0.9]]), GaussianInput([0.0], [[1.0]]),
                                  [0.0], [[1.0]])),
            OuSystem(20.0, 0.99, 1.0),
        ]
        for spec in specs:
            text = spec_to_json(spec)
            back = spec_from_json(text)
            assert spec_to_json(back) == text
            assert back.kind == spec.kind
            a = simulate(spec, np.zeros(spec.state_dim), 10, 5)
            b = simulate(back, np.zeros(spec.state_dim), 10, 5)
            assert np.array_equal(a.states, b.states)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigurationError):
            spec_from_json(json.dumps({"kind": "mystery"}))


class TestCsvExport:
    def test_header_and_first_row(self, tmp_path):
        traj = simulate(simplified_fern(), [0.0, 0.0], 5, 1)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,x_0,x_1,u_0"
        assert len(lines) == 7
        assert lines[1] == "0,0.0,0.0,"
        row = lines[2].split(",")
        assert row[0] == "1" and row[3] in ("0", "1")
        assert float(row[1]) == traj.states[1, 0]

    def test_float_inputs_round_trip(self, tmp_path):
        traj = simulate(OuSystem(0.0, 0.5, 1.0), [0.3], 4, 2)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        lines = path.read_text().strip().split("\n")
        parsed = [float(v) for v in lines[2].split(",")[1:]]
        assert parsed[0] == traj.states[1, 0]
        assert parsed[1] == traj.inputs[0, 0]

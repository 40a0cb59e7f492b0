import itertools

import numpy as np
import pytest

from rdsrnn.contraction import (DecayFit, contraction_report, estimate_contraction,
                                exact_affine_bound, fit_decay)
from rdsrnn.errors import CouplingCollapseError, EnumerationLimitError
from rdsrnn.presets import barnsley_fern, crossed_expansion_ensemble
from rdsrnn.systems import (AffineMap, IfsSystem, MapEnsemble, OuSystem,
                            draw_input_batch, evolve)


def brute_force_bound(ensemble, window, p):
    """Independent oracle: explicit product enumeration with SVD norms."""
    mats = ensemble.matrices()
    probs = ensemble.probabilities
    total = 0.0
    for seq in itertools.product(range(len(probs)), repeat=window):
        product = np.eye(ensemble.dim)
        weight = 1.0
        for i in seq:
            product = mats[i] @ product
            weight *= probs[i]
        total += weight * np.linalg.svd(product, compute_uv=False)[0] ** p
    return total


class TestExactAffineBound:
    def test_crossed_expansion_one_step(self):
        assert exact_affine_bound(crossed_expansion_ensemble(), 1, 1) == pytest.approx(
            10.0 / 9.0, abs=1e-12)

    def test_crossed_expansion_two_steps(self):
        bound = exact_affine_bound(crossed_expansion_ensemble(), 2, 1)
        # (1/4)|A1A1| + (1/2)|A1A2| + (1/4)|A2A2| with diagonal products
        expect = 0.5 * (10.0 / 9.0) ** 2 + 0.5 * (5.0 / 9.0)
        assert bound == pytest.approx(expect, abs=1e-12)
        assert 0.89 < bound < 0.90

    def test_identity_ensemble(self):
        ident = MapEnsemble((AffineMap(np.eye(3), np.zeros(3)),), [1.0])
        for k in (1, 2, 5):
            assert exact_affine_bound(ident, k, 2) == pytest.approx(1.0, abs=1e-12)

    def test_matches_brute_force_enumeration(self):
        gen = np.random.default_rng(4)
        for _ in range(5):
            maps = tuple(AffineMap(0.8 * gen.standard_normal((2, 2)),
                                   gen.standard_normal(2)) for _ in range(3))
            probs = gen.random(3)
            probs /= probs.sum()
            probs[-1] = 1.0 - probs[:-1].sum()
            ens = MapEnsemble(maps, probs)
            for k in (1, 2, 3):
                assert exact_affine_bound(ens, k, 1.5) == pytest.approx(
                    brute_force_bound(ens, k, 1.5), rel=1e-10)

    def test_enumeration_guard(self):
        maps = tuple(AffineMap(np.eye(1), np.zeros(1)) for _ in range(10))
        ens = MapEnsemble(maps, np.full(10, 0.1))
        with pytest.raises(EnumerationLimitError):
            exact_affine_bound(ens, 8, 1)

    def test_submultiplicative_in_window(self):
        gen = np.random.default_rng(9)
        for _ in range(10):
            maps = tuple(AffineMap(gen.standard_normal((2, 2)),
                                   np.zeros(2)) for _ in range(2))
            ens = MapEnsemble(maps, [0.3, 0.7])
            b = {k: exact_affine_bound(ens, k, 2) for k in (1, 2, 3, 4)}
            for j, k in ((1, 1), (1, 2), (2, 2), (1, 3)):
                assert b[j + k] <= b[j] * b[k] * (1 + 1e-12)


class TestEstimateContraction:
    def test_fern_window_decays(self):
        fern = barnsley_fern()
        estimates = [estimate_contraction(fern, [1.0, 0.0], [0.0, 0.0], 0, t, 1.0,
                                          2000, 5) for t in (5, 10, 20)]
        assert estimates[0] < 1.0
        assert estimates[1] < estimates[0]
        assert estimates[2] < estimates[1]

    def test_fern_estimate_below_exact_bound(self):
        fern = barnsley_fern()
        x, x0 = np.array([1.0, 0.0]), np.array([0.0, 0.0])
        for t in (1, 2, 3):
            bound = exact_affine_bound(fern.ensemble, t, 1.0)
            n = 4000
            inputs = draw_input_batch(fern.input_process, t, n, 17)
            a = evolve(fern, np.broadcast_to(x, (n, 2)), inputs)
            b = evolve(fern, np.broadcast_to(x0, (n, 2)), inputs)
            ratios = np.linalg.norm(a[:, t] - b[:, t], axis=1) / np.linalg.norm(x - x0)
            se = ratios.std(ddof=1) / np.sqrt(n)
            est = estimate_contraction(fern, x, x0, 0, t, 1.0, n, 17)
            assert est == pytest.approx(ratios.mean(), rel=1e-12)
            assert est <= bound + 4 * se

    def test_unstable_ou_grows_at_alpha_rate(self):
        spec = OuSystem(0.0, 1.001, 1.0)
        est = estimate_contraction(spec, [1.0], [0.0], 0, 400, 1.0, 50, 3)
        assert est == pytest.approx(1.001 ** 400, rel=1e-9)

    def test_stable_ou_exact_power(self):
        # coupling cancels the noise: the ratio is alpha^(2(t-s)) exactly
        spec = OuSystem(5.0, 0.9, 1.0)
        est = estimate_contraction(spec, [2.0], [1.0], 2, 9, 2.0, 100, 21)
        assert est == pytest.approx(0.9 ** 14, rel=1e-9)

    def test_rank_zero_map_gives_zero(self):
        ens = MapEnsemble((AffineMap(np.zeros((2, 2)), np.array([1.0, 2.0])),), [1.0])
        spec = IfsSystem(ens)
        assert estimate_contraction(spec, [5.0, 0.0], [0.0, 0.0], 0, 3, 1.0, 10, 0) == 0.0

    def test_collapsed_coupling_raises(self):
        ens = MapEnsemble((AffineMap(np.zeros((2, 2)), np.array([1.0, 2.0])),), [1.0])
        spec = IfsSystem(ens)
        with pytest.raises(CouplingCollapseError):
            estimate_contraction(spec, [5.0, 0.0], [0.0, 0.0], 1, 3, 1.0, 10, 0)

    def test_equal_starts_rejected(self):
        with pytest.raises(ValueError):
            estimate_contraction(barnsley_fern(), [1.0, 1.0], [1.0, 1.0], 0, 2, 1.0, 10, 0)


class TestFitDecay:
    def test_exact_geometric(self):
        fit = fit_decay([(1, 0.5), (2, 0.25), (3, 0.125)])
        assert fit.contractive
        assert fit.scale == pytest.approx(1.0, abs=1e-12)
        assert fit.rate == pytest.approx(0.5, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_crossed_expansion_contracts_despite_first_window(self):
        ens = crossed_expansion_ensemble()
        bounds = [(k, exact_affine_bound(ens, k, 1)) for k in range(1, 9)]
        assert bounds[0][1] > 1.0
        fit = fit_decay(bounds)
        assert fit.contractive and fit.rate < 1.0

    def test_constant_bounds_flagged(self):
        fit = fit_decay([(1, 1.0), (2, 1.0), (3, 1.0)])
        assert not fit.contractive
        assert fit.rate is None and fit.scale is None

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            fit_decay([(1, 0.5), (2, 0.0), (3, 0.1)])
        with pytest.raises(ValueError):
            fit_decay([(1, 0.5), (2, 0.25)])

    def test_noisy_fit_below_gate_flagged(self):
        fit = fit_decay([(1, 1.0), (2, 0.01), (3, 0.9), (4, 0.005), (5, 0.7)])
        assert not fit.contractive


class TestReport:
    def test_report_serializes(self):
        report = contraction_report(crossed_expansion_ensemble(), range(1, 5), 1.0)
        doc = report.to_dict()
        assert doc["window_bounds"][0] == [1, pytest.approx(10.0 / 9.0)]
        assert doc["contractive"] is True
        assert isinstance(report.fit, DecayFit)

from __future__ import annotations

import math

import numpy as np
import pytest

from fibmon import gaussian as g
from fibmon import oracle
from fibmon.config import RunConfig, stream
from fibmon.errors import ConfigError, SizeError, StateError
from fibmon.records import Op
from fibmon.schedule import fib_prefix

LN2 = math.log(2)


def random_antisymmetric(n: int, seed: int) -> np.ndarray:
    a = np.random.default_rng(seed).standard_normal((n, n))
    return a - a.T


class TestPfaffian:
    @pytest.mark.parametrize("n", [2, 4, 6, 10, 16])
    def test_square_is_determinant(self, n):
        A = random_antisymmetric(n, n)
        assert g.pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-10)

    def test_known_value(self):
        A = np.zeros((4, 4))
        A[0, 1], A[0, 2], A[0, 3], A[1, 2], A[1, 3], A[2, 3] = 1, 2, 3, 4, 5, 6
        A = A - A.T
        assert g.pfaffian(A) == pytest.approx(1 * 6 - 2 * 5 + 3 * 4)

    def test_odd_dimension_is_zero(self):
        assert g.pfaffian(np.zeros((3, 3))) == 0.0


class TestStates:
    def test_x_polarized(self):
        s = g.init_x_polarized(6)
        assert g.purity_error(s.gamma) < 1e-14
        assert all(g.x_expectation(s.gamma, j) == pytest.approx(1.0) for j in range(6))
        assert g.entropy(s.gamma, 3) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("parity", [1, -1])
    def test_ghz_sector(self, parity):
        s = g.init_ghz_sector(6, parity)
        assert g.fermion_parity(s.gamma) == pytest.approx(parity)
        assert g.zz_string_correlator(s.gamma, 0, 4) == pytest.approx(1.0)
        assert g.entropy(s.gamma, 3) == pytest.approx(LN2)

    def test_size_limit(self):
        with pytest.raises(SizeError):
            g.init_x_polarized(g.MAX_L + 1)

    def test_impure_input_rejected(self):
        with pytest.raises(StateError):
            g.weak_measure_pair(0.5 * g.init_x_polarized(3).gamma, (1, 2), 0.3, 1, "exponent-tau")

    def test_non_contiguous_region(self):
        with pytest.raises(ConfigError):
            g.entropy(g.init_x_polarized(6).gamma, [0, 2])


class TestAgainstOracle:
    @pytest.mark.parametrize("conv", ["exponent-tau", "exponent-half-tau"])
    @pytest.mark.parametrize("protocol", ["born", "postselected"])
    def test_trajectories_match(self, conv, protocol):
        L, depth = 6, 34
        cfg = RunConfig(protocol=protocol, L=L, depth=depth, tau_x=0.37, tau_zz=0.61, kraus_convention=conv,
                        cuts=tuple(range(1, L)), record_outcomes=True)
        word = fib_prefix(depth)
        for i in range(3):
            sg, rg, _ = g.run_trajectory(cfg, word, stream(2, i))
            so, ro, _ = oracle.run_trajectory(cfg, word, stream(2, i))
            np.testing.assert_array_equal(rg.outcome, ro.outcome)
            np.testing.assert_allclose(rg.prob, ro.prob, atol=1e-11)
            np.testing.assert_allclose(sg.values, so.values, atol=1e-10)

    def test_coherent_information_matches(self):
        L, depth = 5, 21
        cfg = RunConfig(protocol="born", L=L, depth=depth, tau_x=0.5, tau_zz=0.8, with_reference=True)
        word = fib_prefix(depth)
        for i in range(3):
            _, _, og = g.run_trajectory(cfg, word, stream(4, i))
            _, _, oo = oracle.run_trajectory(cfg, word, stream(4, i))
            assert og["coherent_information"] == pytest.approx(oo["coherent_information"], abs=1e-10)

    def test_correlators_and_wrapped_regions(self):
        L = 6
        rng = stream(1, 0)
        gs, os_ = g.init_x_polarized(L), oracle.init_plus(L)
        for t, sym in enumerate(fib_prefix(13).bits):
            for j in range(L):
                op = Op(int(sym), j)
                s, gs, _ = g.born_step(gs, op, 0.45 if sym else 0.7, rng)
                os_ = oracle.normalize(oracle.apply_kraus(os_, op, 0.45 if sym else 0.7, s))
        for i, j in [(0, 1), (1, 4), (0, 5)]:
            assert g.zz_string_correlator(gs.gamma, i, j) == pytest.approx(oracle.zz_correlator(os_, i, j), abs=1e-10)
        assert g.fermion_parity(gs.gamma) == pytest.approx(oracle.parity(os_), abs=1e-10)
        assert g.entropy(gs.gamma, [5, 0, 1]) == pytest.approx(oracle.region_entropy(os_, [5, 0, 1]), abs=1e-10)


class TestStability:
    def test_purity_drift_without_reorthogonalization(self):
        rng = stream(0, 0)
        s = g.init_x_polarized(12)
        steps = 0
        for sym in fib_prefix(400).bits:
            for j in range(12):
                _, s, _ = g.born_step(s, Op(int(sym), j), 0.4, rng, "exponent-half-tau")
                steps += 1
        assert steps >= 4000
        assert g.purity_error(s.gamma) < 1e-9
        assert np.abs(s.gamma + s.gamma.T).max() < 1e-12

    def test_reorthogonalize_restores_purity(self):
        G = g.init_x_polarized(5).gamma + 1e-6 * random_antisymmetric(10, 3)
        assert g.purity_error(g.reorthogonalize(G)) < 1e-12

    def test_projective_limit(self):
        s = g.init_x_polarized(4)
        s, _ = g.postselect_step(s, Op.zz(1), math.inf)
        assert g.zz_string_correlator(s.gamma, 1, 2) == pytest.approx(1.0)
        assert g.entropy(s.gamma, 2) == pytest.approx(LN2)

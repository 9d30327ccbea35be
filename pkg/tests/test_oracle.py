from __future__ import annotations

import math

import numpy as np
import pytest

from fibmon import oracle
from fibmon.config import KrausConvention, RunConfig, stream
from fibmon.errors import ConfigError, SizeError
from fibmon.records import Op
from fibmon.schedule import fib_prefix

LN2 = math.log(2)


class TestStates:
    def test_plus_state_entropy_zero(self):
        s = oracle.init_plus(4)
        assert oracle.entanglement_entropy(s, 2) == pytest.approx(0.0, abs=1e-12)
        assert oracle.expectation(s, Op.x(1)) == pytest.approx(1.0)

    def test_reference_pair(self):
        s = oracle.init_plus(3, with_reference=True)
        assert oracle.coherent_information(s) == pytest.approx(LN2)
        assert oracle.parity(s) == pytest.approx(0.0, abs=1e-12)

    def test_size_limit(self):
        with pytest.raises(SizeError):
            oracle.init_plus(oracle.MAX_L + 1)

    def test_bad_site(self):
        with pytest.raises(ConfigError):
            oracle.expectation(oracle.init_plus(3), Op.x(3))


class TestKraus:
    @pytest.mark.parametrize("conv", list(KrausConvention))
    @pytest.mark.parametrize("tau", [0.0, 0.4, 3.0, math.inf])
    def test_completeness(self, conv, tau):
        L = 3
        basis = np.eye(2 ** L, dtype=complex)
        for op in (Op.x(0), Op.zz(2)):
            gram = sum(
                np.stack([oracle.apply_kraus(oracle.PureState(basis[i], L), op, tau, s, conv).amps
                          for i in range(2 ** L)], axis=1).conj().T
                @ np.stack([oracle.apply_kraus(oracle.PureState(basis[i], L), op, tau, s, conv).amps
                            for i in range(2 ** L)], axis=1)
                for s in (1, -1))
            np.testing.assert_allclose(gram, np.eye(2 ** L), atol=1e-12)

    @pytest.mark.parametrize("conv,arg", [("exponent-tau", 2 * 0.7), ("exponent-half-tau", 0.7)])
    def test_born_probability_formula(self, conv, arg):
        """p(+) = (1 + tanh(2a) <O>)/2 with a the Kraus exponent."""
        s = oracle.normalize(oracle.apply_kraus(oracle.init_plus(3), Op.zz(0), 0.5, 1))
        ev = oracle.expectation(s, Op.x(1))
        p, q = oracle.branch_probabilities(s, Op.x(1), 0.7, conv)
        assert p + q == pytest.approx(1.0, abs=1e-14)
        assert p == pytest.approx(0.5 * (1 + math.tanh(arg) * ev), abs=1e-13)

    def test_projective_zz_makes_bell_pair(self):
        s = oracle.normalize(oracle.apply_kraus(oracle.init_plus(2), Op.zz(0), math.inf, 1))
        assert oracle.entanglement_entropy(s, 1) == pytest.approx(LN2, abs=1e-12)
        assert oracle.zz_correlator(s, 0, 1) == pytest.approx(1.0)

    def test_outcome_validation(self):
        with pytest.raises(ConfigError):
            oracle.apply_kraus(oracle.init_plus(2), Op.x(0), 0.3, 0)


class TestTrajectory:
    def test_postselected_is_deterministic(self):
        cfg = RunConfig(protocol="postselected", L=5, depth=13, tau_x=0.3, tau_zz=0.5)
        a, _, _ = oracle.run_trajectory(cfg, fib_prefix(13), stream(0, 0))
        b, _, _ = oracle.run_trajectory(cfg, fib_prefix(13), stream(9, 9))
        np.testing.assert_array_equal(a.values, b.values)

    def test_record_shape_and_probabilities(self):
        cfg = RunConfig(protocol="born", L=6, depth=20, tau_x=0.3, tau_zz=0.5, cuts=(2, 4), record_outcomes=True)
        ser, rec, _ = oracle.run_trajectory(cfg, fib_prefix(20), stream(0, 1))
        assert len(rec) == 6 * 20
        assert np.all((rec.prob > 0) & (rec.prob <= 1))
        assert ser.values.shape == (20, 2)
        assert np.all(ser.values <= 2 * LN2 + 1e-12)

    def test_rejects_clifford(self):
        with pytest.raises(ConfigError):
            oracle.run_trajectory(RunConfig(protocol="clifford", p_x=0.5, p_zz=0.5, L=4), fib_prefix(5), stream(0, 0))

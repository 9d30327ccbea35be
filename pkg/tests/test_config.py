from __future__ import annotations

import math

import numpy as np
import pytest

from fibmon.config import KrausConvention, Protocol, RunConfig, kraus_exponent, p_from_tau, stream, tau_from_p
from fibmon.errors import ConfigError


class TestConversion:
    @pytest.mark.parametrize("tau", [0.0, 1e-9, 0.1, 0.6931471805599453, 2.0, 12.0])
    def test_round_trip(self, tau):
        assert tau_from_p(p_from_tau(tau)) == pytest.approx(tau, abs=1e-12, rel=1e-12)

    def test_vectorised(self):
        p = np.linspace(0, 0.99, 50)
        np.testing.assert_allclose(p_from_tau(tau_from_p(p)), p, atol=1e-12)

    def test_projective_limit(self):
        assert tau_from_p(1.0) == math.inf
        assert p_from_tau(math.inf) == 1.0

    def test_ln2_is_half(self):
        assert p_from_tau(math.log(2)) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("conv,a", [("exponent-tau", 0.8), ("exponent-half-tau", 0.4)])
    def test_kraus_exponent(self, conv, a):
        assert kraus_exponent(0.8, conv) == a

    def test_negative_strength(self):
        with pytest.raises(ConfigError):
            kraus_exponent(-0.1)


class TestRunConfig:
    def test_fills_other_parametrisation(self):
        c = RunConfig(protocol="clifford", p_x=0.5, p_zz=0.25)
        assert c.tau_x == pytest.approx(math.log(2))
        assert c.protocol is Protocol.CLIFFORD

    def test_with_drops_stale(self):
        c = RunConfig(tau_x=0.1, tau_zz=0.2).with_(p_x=0.5)
        assert c.tau_x == pytest.approx(math.log(2))

    def test_dict_round_trip(self):
        c = RunConfig(protocol="born", L=12, tau_x=0.3, tau_zz=0.5, cuts=(2, 6),
                      kraus_convention=KrausConvention.EXPONENT_HALF_TAU)
        assert RunConfig.from_dict(c.to_dict()) == c

    def test_hash_ignores_trajectory_count(self):
        c = RunConfig(tau_x=0.1, tau_zz=0.2)
        assert c.config_hash() == c.with_(n_trajectories=9).config_hash()
        assert c.config_hash() != c.with_(master_seed=1).config_hash()

    @pytest.mark.parametrize("bad", [dict(L=0), dict(depth=0), dict(n_trajectories=0), dict(cuts=(0,)),
                                     dict(cuts=(16,)), dict(schedule="random"), dict(tau_x=-1.0),
                                     dict(protocol="unitary")])
    def test_invalid(self, bad):
        kw = dict(tau_x=0.1, tau_zz=0.2)
        kw.update(bad)
        with pytest.raises(ValueError):
            RunConfig(**kw)

    def test_missing_strength(self):
        with pytest.raises(ConfigError):
            RunConfig(tau_x=0.1)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"tau_x": 0.1, "tau_zz": 0.1, "gamma": 3})

    def test_sample_times(self):
        c = RunConfig(tau_x=0.1, tau_zz=0.1, depth=40)
        assert c.sample_times().tolist() == list(range(1, 41))
        assert c.with_(fibonacci_only_sampling=True).sample_times().tolist() == [1, 2, 3, 5, 8, 13, 21, 34, 40]
        assert c.with_(final_only_sampling=True).sample_times().tolist() == [40]


class TestStreams:
    def test_reproducible(self):
        np.testing.assert_array_equal(stream(3, 7).random(5), stream(3, 7).random(5))

    def test_distinct_indices_and_seeds(self):
        a = stream(3, 7).random(5)
        assert not np.allclose(a, stream(3, 8).random(5))
        assert not np.allclose(a, stream(4, 7).random(5))

    def test_cross_correlation_of_bits(self):
        """Outcome bits of neighbouring streams agree half the time, within 3 sigma over 1e6 bits."""
        n = 1_000_000
        a = stream(0, 0).random(n) < 0.5
        b = stream(0, 1).random(n) < 0.5
        agree = np.mean(a == b)
        assert abs(agree - 0.5) < 3 * 0.5 / math.sqrt(n)

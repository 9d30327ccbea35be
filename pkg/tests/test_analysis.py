from __future__ import annotations

import math

import numpy as np
import pytest

from fibmon import analysis as A
from fibmon import analytics as an
from fibmon.errors import ConfigError, FitError
from fibmon.records import MeasurementRecord, X_KIND, ZZ_KIND
from fibmon.schedule import PHI


def synthetic_arc(L: int, c: float, b: float = 0.3, noise: float = 0.0, seed: int = 0) -> A.Arc:
    l = np.arange(1, L)
    S = c / 3 * np.log(L / np.pi * np.sin(np.pi * l / L)) + b
    err = np.full(l.size, max(noise, 1e-3))
    S = S + noise * np.random.default_rng(seed).standard_normal(l.size)
    return A.Arc(L, l, S, err)


class TestArcFit:
    @pytest.mark.parametrize("c", [0.5, 0.573, 0.793])
    def test_exact_recovery(self, c):
        est, se = A.fit_cent(synthetic_arc(64, c))
        assert est == pytest.approx(c, abs=1e-10)

    def test_joint_fit(self):
        arcs = [synthetic_arc(L, 0.8, noise=0.002, seed=L) for L in (16, 32, 64)]
        est, se = A.fit_cent(arcs)
        assert abs(est - 0.8) < 4 * se + 1e-3

    def test_too_few_cuts(self):
        with pytest.raises(FitError):
            A.fit_cent(synthetic_arc(8, 0.5))

    def test_from_samples(self):
        arc = A.Arc.from_samples(4, [1, 2, 3], np.array([[1.0, 2.0, 1.0], [3.0, 2.0, 1.0]]))
        np.testing.assert_allclose(arc.S, [2, 2, 1])
        np.testing.assert_allclose(arc.err, [1, 0, 0])

    def test_zero_frequency_scaling(self):
        amps = {L: 0.25 * math.log(L) + 1 for L in (16, 32, 64)}
        assert A.zero_freq_scaling(amps)[0] == pytest.approx(0.75)


class TestCollapse:
    @staticmethod
    def curves(tau_c=0.62, nu=1.3, sizes=(16, 32, 64), noise=0.0):
        rng = np.random.default_rng(0)
        x = np.linspace(0.5, 0.75, 26)
        out = {}
        for L in sizes:
            y = 0.5 * (1 - np.tanh((x - tau_c) * L ** (1 / nu)))
            out[L] = (x, y + noise * rng.standard_normal(x.size), np.full(x.size, max(noise, 1e-3)))
        return out

    def test_recovers_parameters(self):
        r = A.fss_collapse(self.curves(), (0.55, 0.7), (0.5, 3.0), n_bootstrap=0)
        assert r.tau_c == pytest.approx(0.62, abs=2e-3)
        assert r.nu == pytest.approx(1.3, rel=0.03)

    def test_bootstrap_interval_covers(self):
        r = A.fss_collapse(self.curves(noise=0.01), (0.55, 0.7), (0.5, 3.0), n_bootstrap=40)
        assert r.nu_ci[0] - 0.15 <= 1.3 <= r.nu_ci[1] + 0.15
        assert r.bootstrap.shape[1] == 2

    def test_cost_is_minimal_at_truth(self):
        curves = [A.Curve(L, *v) for L, v in self.curves().items()]
        best = A.collapse_cost(curves, 0.62, 1.3)[0]
        assert best < A.collapse_cost(curves, 0.60, 1.3)[0]
        assert best < A.collapse_cost(curves, 0.62, 2.0)[0]

    def test_needs_three_sizes(self):
        with pytest.raises(FitError):
            A.fss_collapse(self.curves(sizes=(16, 32)), (0.55, 0.7))


class TestSpectra:
    def test_single_tone(self):
        t = np.arange(1, 1025)
        x = np.cos(2 * np.pi * 64 / 1024 * t)
        sp = A.fourier_spectrum(x, (1, 1024))
        assert abs(sp.at(2 * np.pi * 64 / 1024)[0]) == pytest.approx(0.5, abs=1e-12)
        assert sp.parseval_error() < 1e-12

    def test_absolute_time_phase(self):
        """The same tone on shifted windows gives the same complex amplitude."""
        t = np.arange(1, 3000)
        w = 2 * np.pi * 0.1
        x = np.exp(1j * w * t).real
        a = A.fourier_spectrum(x, (100, 1099)).at(w)[0]
        b = A.fourier_spectrum(x, (1000, 1999)).at(w)[0]
        assert a == pytest.approx(b, abs=1e-12)

    def test_golden_peaks_on_formula(self):
        t = np.arange(1, 4182)
        sp = A.fourier_spectrum(an.projective_entropy(t).astype(float), (610, 4181))
        ns = np.arange(1, 6)
        ref = [abs(an.fourier_coefficient(n)) for n in ns]
        np.testing.assert_allclose(A.golden_peaks(sp, ns), ref, rtol=1e-3)

    def test_power_law(self):
        ns = np.arange(1, 100)
        alpha, _ = A.peak_powerlaw(ns, 3.0 * ns ** -1.5)
        assert alpha == pytest.approx(1.5)

    def test_window_validation(self):
        with pytest.raises(ConfigError):
            A.fourier_spectrum(np.ones(30), (1, 30))


def make_record(kinds, sites, outcomes, layers):
    n = len(kinds)
    return MeasurementRecord(np.asarray(layers), np.asarray(sites), np.asarray(kinds, np.int8),
                             np.zeros(n), np.asarray(outcomes, np.int8), np.full(n, 0.5))


class TestRecords:
    def test_pairs_next_of_kind(self):
        rec = make_record([X_KIND, ZZ_KIND, X_KIND, X_KIND], [0, 0, 0, 0], [1, 1, -1, -1], [0, 1, 2, 3])
        a, b = A.record_pairs(rec, X_KIND)
        np.testing.assert_array_equal(a, [1, -1])
        np.testing.assert_array_equal(b, [-1, -1])
        a, b = A.record_pairs(rec, X_KIND, "adjacent")
        np.testing.assert_array_equal(a, [-1])

    def test_stats(self):
        rec = make_record([X_KIND] * 4 + [ZZ_KIND] * 2, [0, 0, 1, 1, 0, 0], [1, 1, 1, -1, 1, -1], [0, 1, 0, 1, 2, 4])
        st = A.record_stats(rec)
        assert st.p_plus["X"].value == 0.75
        assert st.p_repeat["X"].value == 0.5
        assert st.p_repeat["ZZ"].value == 0.0

    def test_projective_repeat_value(self):
        assert A.projective_repeat_probability() == pytest.approx(0.690983, abs=1e-6)
        assert A.projective_repeat_probability() == pytest.approx(1 - 1 / (2 * PHI))

    def test_bad_pairing(self):
        with pytest.raises(ConfigError):
            A.record_pairs(make_record([1], [0], [1], [0]), X_KIND, "random")

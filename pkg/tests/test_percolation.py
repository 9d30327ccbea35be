from __future__ import annotations

import math

import numpy as np
import pytest

from fibmon import percolation as P
from fibmon import stabilizer as st
from fibmon.config import RunConfig, stream
from fibmon.errors import ConfigError
from fibmon.schedule import PHI, DilutedFibonacci, Word, fib_prefix, full_mask, realize_dilution
from fibmon.schedule import DilutionMask

LN2 = math.log(2)


def canonical(labels: np.ndarray) -> np.ndarray:
    """Relabel components in order of first appearance."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv]


class TestUnionFind:
    def test_basic(self):
        uf = P.UnionFind(5)
        uf.union(0, 1)
        uf.union(3, 4)
        uf.union(1, 4)
        assert uf.find(0) == uf.find(3)
        assert uf.find(2) != uf.find(0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_csgraph(self, seed):
        mask = realize_dilution(DilutedFibonacci(0.5, 0.6), 12, 30, stream(seed, 0))
        lat = P.build_lattice(mask, with_reference=True)
        a = P.cluster_labels(lat, "csgraph")
        b = P.cluster_labels(lat, "unionfind")
        np.testing.assert_array_equal(canonical(a), canonical(b))

    def test_unknown_method(self):
        lat = P.build_lattice(full_mask(fib_prefix(3), 4))
        with pytest.raises(ConfigError):
            P.cluster_labels(lat, "bfs")


class TestCountingRule:
    def test_single_bond(self):
        """One ZZ slot glues two sites into a Bell pair across cut 1."""
        mask = DilutionMask(Word("0"), np.array([[True, False, False, False]]))
        lat = P.build_lattice(mask)
        np.testing.assert_allclose(P.arc_proxy(lat), [LN2, 0, 0])

    def test_x_layer_cuts_world_lines(self):
        mask = DilutionMask(Word("01"), np.array([[True, True, True, True], [True, False, False, False]]))
        lat = P.build_lattice(mask)
        # site 0 is detached by the X slot; sites 1..3 remain one cluster
        np.testing.assert_allclose(P.arc_proxy(lat), [0, LN2, LN2])

    @pytest.mark.parametrize("seed", range(30))
    def test_equals_tableau(self, seed):
        L, depth = 10, 34
        rng = stream(seed, 0)
        mask = realize_dilution(DilutedFibonacci(0.5, P.critical_line_p(0.5)), L, depth, rng)
        cfg = RunConfig(protocol="clifford", L=L, depth=depth, p_x=0.5, p_zz=0.5, with_reference=True,
                        cuts=tuple(range(1, L)), final_only_sampling=True)
        ser, _, tab = st.run_clifford_trajectory(cfg, mask, rng)
        lat = P.build_lattice(mask, with_reference=True)
        np.testing.assert_allclose(P.arc_proxy(lat), ser.values[-1], atol=1e-12)
        assert P.coherent_information(lat) == pytest.approx(st.coherent_information(tab))

    def test_cut_range(self):
        lat = P.build_lattice(full_mask(fib_prefix(3), 4))
        with pytest.raises(ConfigError):
            P.final_entropy_proxy(lat, 4)


class TestCriticalLine:
    def test_endpoints(self):
        assert P.critical_line_p(0.0) == 0.0
        assert P.critical_line_p(1.0) == 1.0

    def test_is_tau_line(self):
        px = 0.37
        tx = -math.log1p(-px)
        assert P.critical_line_p(px) == pytest.approx(-math.expm1(-PHI * tx))

    def test_series_bound(self):
        p = np.linspace(1e-4, 0.1, 500)
        assert np.all(np.abs(P.critical_line_p(p) - P.critical_line_series(p)) <= 0.7 * p ** 3)

    def test_frozen_value(self):
        assert abs(P.critical_line_p(0.05) - P.critical_line_series(0.05)) == pytest.approx(8.1e-6, rel=0.02)

    def test_domain(self):
        with pytest.raises(ConfigError):
            P.critical_line_p(1.5)


class TestSweep:
    def test_monotone_in_p_zz(self):
        cfg = RunConfig(protocol="percolation", L=16, depth=64, p_x=0.5, p_zz=0.5, with_reference=True)
        lo, hi = P.sweep_percolation(cfg, 200, [(0.5, 0.3), (0.5, 0.95)])
        assert lo.mean_ic < hi.mean_ic

    def test_rejects_weak_protocol(self):
        with pytest.raises(ConfigError):
            P.sweep_percolation(RunConfig(tau_x=0.1, tau_zz=0.1), 2)

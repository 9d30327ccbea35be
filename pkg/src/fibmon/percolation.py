"""Space-time bond percolation picture of the diluted projective circuit.

Nodes are world-line segments: site j starts with one segment and every active X
slot on j starts a new one. An active ZZ slot on bond (j, j+1) at layer t glues the
current segments of j and j+1. Starting from |+...+>, the state after any such
circuit is a product of GHZ states, one per cluster of final-time segments.

Frozen counting rule, verified slot-for-slot against the stabilizer tableau: the
entropy of sites [0, l) is ln 2 times the number of clusters whose final-time sites
include some j < l and some j >= l. With a reference qubit, R is glued to every
initial segment and counts as lying outside any chain region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import Protocol, RunConfig, stream as make_stream
from .errors import ConfigError
from .records import X_KIND
from .schedule import PHI, DilutedFibonacci, DilutionMask, realize_dilution

LN2 = math.log(2.0)


@dataclass(frozen=True)
class BondLattice:
    """Bond masks of one realization.

    ``cuts[t, j]``: world line of site j is broken after layer t (active X slot).
    ``bonds[t, j]``: sites j and j+1 mod L are glued at layer t (active ZZ slot).
    """

    L: int
    T: int
    cuts: np.ndarray
    bonds: np.ndarray
    with_reference: bool = False

    @property
    def segment_ids(self) -> np.ndarray:
        """(T+1, L) ids; row t is the segment of each site after t layers."""
        per_site = np.vstack([np.zeros((1, self.L), np.int64), np.cumsum(self.cuts, axis=0)])
        return per_site + np.arange(self.L) * (self.T + 1)

    @property
    def n_nodes(self) -> int:
        return self.L * (self.T + 1) + int(self.with_reference)

    def edges(self) -> np.ndarray:
        """(k, 2) node pairs of all vertical bonds (plus reference links)."""
        seg = self.segment_ids
        t, j = np.nonzero(self.bonds)
        a = seg[t + 1, j]
        b = seg[t + 1, (j + 1) % self.L]
        pairs = [np.stack([a, b], axis=1)]
        if self.with_reference:
            R = self.n_nodes - 1
            pairs.append(np.stack([np.full(self.L, R), seg[0]], axis=1))
        return np.concatenate(pairs).astype(np.int64)


def build_lattice(realization: DilutionMask, L: int | None = None, T: int | None = None,
                  with_reference: bool = False) -> BondLattice:
    active = np.asarray(realization.active, bool)
    L = realization.L if L is None else L
    T = realization.depth if T is None else T
    if active.shape[1] != L or active.shape[0] < T:
        raise ConfigError(f"realization shape {active.shape} does not match L={L}, T={T}")
    active = active[:T]
    is_x = (realization.word.bits[:T] == X_KIND)[:, None]
    return BondLattice(L, T, active & is_x, active & ~is_x, with_reference)


class UnionFind:
    """Disjoint sets with path halving and union by rank."""

    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.rank = np.zeros(n, np.int8)

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return int(a)

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return ra

    def labels(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(self.parent.size)])


def cluster_labels(lattice: BondLattice, method: str = "csgraph") -> np.ndarray:
    """Component label of every node; ``method`` is "csgraph" or "unionfind"."""
    e = lattice.edges()
    n = lattice.n_nodes
    if method == "unionfind":
        uf = UnionFind(n)
        for a, b in e:
            uf.union(int(a), int(b))
        return uf.labels()
    if method != "csgraph":
        raise ConfigError(f"unknown labelling method {method!r}")
    adj = coo_matrix((np.ones(len(e), np.int8), (e[:, 0], e[:, 1])), shape=(n, n))
    return connected_components(adj, directed=False)[1]


def final_clusters(lattice: BondLattice, labels: np.ndarray | None = None) -> np.ndarray:
    """Cluster label of each site's final-time segment."""
    labels = cluster_labels(lattice) if labels is None else labels
    return labels[lattice.segment_ids[-1]]


def _straddle_counts(lattice: BondLattice, labels: np.ndarray) -> np.ndarray:
    """n[l] for l = 0..L: clusters with final sites on both sides of the cut before site l."""
    L = lattice.L
    fin = labels[lattice.segment_ids[-1]]
    uniq, inv = np.unique(fin, return_inverse=True)
    k = uniq.size
    lo = np.full(k, L, np.int64)
    hi = np.full(k, -1, np.int64)
    sites = np.arange(L)
    np.minimum.at(lo, inv, sites)
    np.maximum.at(hi, inv, sites)
    if lattice.with_reference:
        hi[uniq == labels[-1]] = L  # R sits beyond the last chain site
    # cluster c straddles cut l iff lo < l <= hi
    diff = np.zeros(L + 2, np.int64)
    np.add.at(diff, lo + 1, 1)
    np.add.at(diff, hi + 1, -1)
    return np.cumsum(diff)[: L + 1]


def final_entropy_proxy(lattice: BondLattice, cut: int, labels: np.ndarray | None = None) -> float:
    """Entropy (nats) of sites [0, cut) read off the final-time clusters."""
    if not 1 <= cut < lattice.L:
        raise ConfigError(f"cut {cut} outside [1, {lattice.L - 1}]")
    labels = cluster_labels(lattice) if labels is None else labels
    return LN2 * float(_straddle_counts(lattice, labels)[cut])


def arc_proxy(lattice: BondLattice, labels: np.ndarray | None = None) -> np.ndarray:
    """Entropies for every cut l = 1..L-1."""
    labels = cluster_labels(lattice) if labels is None else labels
    return LN2 * _straddle_counts(lattice, labels)[1: lattice.L].astype(float)


def coherent_information(lattice: BondLattice, labels: np.ndarray | None = None) -> float:
    """ln 2 if the reference still shares a cluster with a final-time segment, else 0."""
    if not lattice.with_reference:
        raise ConfigError("coherent information needs a lattice with a reference node")
    labels = cluster_labels(lattice) if labels is None else labels
    return LN2 if np.any(labels[lattice.segment_ids[-1]] == labels[-1]) else 0.0


def critical_line_p(p_x):
    """p_zz = 1 - (1 - p_x)^phi, the image of tau_x = tau_zz / phi."""
    p = np.asarray(p_x, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ConfigError("p_x must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        out = -np.expm1(PHI * np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def critical_line_series(p_x):
    """Second-order expansion phi p_x - p_x^2 / 2 of :func:`critical_line_p`."""
    p = np.asarray(p_x, dtype=float)
    return PHI * p - p * p / 2.0


def realization_stats(config: RunConfig, index: int) -> dict:
    """Draw realization ``index`` and return its arc and coherent information."""
    rng = make_stream(config.master_seed, index)
    mask = realize_dilution(DilutedFibonacci(config.p_x, config.p_zz), config.L, config.depth, rng)
    lat = build_lattice(mask, with_reference=config.with_reference)
    labels = cluster_labels(lat)
    out = {"arc": arc_proxy(lat, labels)}
    if config.with_reference:
        out["coherent_information"] = coherent_information(lat, labels)
    return out


@dataclass(frozen=True)
class PercolationStats:
    p_x: float
    p_zz: float
    L: int
    n: int
    mean_arc: np.ndarray
    sem_arc: np.ndarray
    mean_ic: float | None = None
    sem_ic: float | None = None

    @property
    def mean_half(self) -> float:
        return float(self.mean_arc[self.L // 2 - 1])


def sweep_percolation(config: RunConfig, n_realizations: int | None = None,
                      grid=None) -> list[PercolationStats]:
    """Ensemble arcs over a list of (p_x, p_zz) points (default: the config's point).

    Realization i at every grid point uses stream (master_seed, i), so neighbouring
    grid points are correlated, which sharpens differences along a sweep.
    """
    if config.protocol not in (Protocol.CLIFFORD, Protocol.PERCOLATION):
        raise ConfigError("percolation sweeps need the Clifford or percolation protocol")
    n = config.n_trajectories if n_realizations is None else int(n_realizations)
    grid = [(config.p_x, config.p_zz)] if grid is None else list(grid)
    out = []
    for px, pzz in grid:
        cfg = config.with_(p_x=float(px), p_zz=float(pzz))
        arcs = np.empty((n, cfg.L - 1))
        ics = np.empty(n)
        for i in range(n):
            r = realization_stats(cfg, i)
            arcs[i] = r["arc"]
            ics[i] = r.get("coherent_information", np.nan)
        sem = arcs.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(cfg.L - 1)
        ic_mean = ic_sem = None
        if cfg.with_reference:
            ic_mean = float(ics.mean())
            ic_sem = float(ics.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(PercolationStats(float(px), float(pzz), cfg.L, n, arcs.mean(axis=0), sem, ic_mean, ic_sem))
    return out

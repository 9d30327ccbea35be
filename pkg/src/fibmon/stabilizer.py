"""Sign-tracking stabilizer tableau for projective X / ZZ measurements.

Rows 0..n-1 are destabilizers, rows n..2n-1 stabilizers (Aaronson-Gottesman layout).
The X and Z parts are packed 64 qubits per ``uint64`` word; qubit q lives in bit
q % 64 of word q // 64. With a reference qubit it is qubit index L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Protocol, RunConfig
from .errors import ConfigError, SizeError, StateError
from .records import X_KIND, EntropySeries, Op, RecordBuilder
from .schedule import DilutionMask

LN2 = math.log(2.0)
MAX_L = 4096


def _nwords(n: int) -> int:
    return (n + 63) // 64


def _bit(q: int) -> tuple[int, np.uint64]:
    return q >> 6, np.uint64(1) << np.uint64(q & 63)


@dataclass
class StabilizerTableau:
    n: int
    x: np.ndarray  # (2n, nw) uint64
    z: np.ndarray  # (2n, nw) uint64
    r: np.ndarray  # (2n,) uint8, sign bit (1 means -)
    L: int
    has_reference: bool = False

    @classmethod
    def zero_state(cls, n: int, L: int | None = None, has_reference: bool = False) -> StabilizerTableau:
        """|0...0>: destabilizers X_q, stabilizers Z_q."""
        nw = _nwords(n)
        x = np.zeros((2 * n, nw), np.uint64)
        z = np.zeros((2 * n, nw), np.uint64)
        for q in range(n):
            w, b = _bit(q)
            x[q, w] |= b
            z[n + q, w] |= b
        return cls(n, x, z, np.zeros(2 * n, np.uint8), n if L is None else L, has_reference)

    def copy(self) -> StabilizerTableau:
        return StabilizerTableau(self.n, self.x.copy(), self.z.copy(), self.r.copy(), self.L, self.has_reference)

    # ----------------------------------------------------------- Clifford gates

    def _col(self, arr: np.ndarray, q: int) -> np.ndarray:
        w, b = _bit(q)
        return ((arr[:, w] & b) != 0).astype(np.uint8)

    def _set_col(self, arr: np.ndarray, q: int, bits: np.ndarray) -> None:
        w, b = _bit(q)
        arr[:, w] = np.where(bits.astype(bool), arr[:, w] | b, arr[:, w] & ~b)

    def h(self, q: int) -> None:
        xq, zq = self._col(self.x, q), self._col(self.z, q)
        self.r ^= xq & zq
        self._set_col(self.x, q, zq)
        self._set_col(self.z, q, xq)

    def cnot(self, c: int, t: int) -> None:
        xc, zc, xt, zt = self._col(self.x, c), self._col(self.z, c), self._col(self.x, t), self._col(self.z, t)
        self.r ^= xc & zt & (xt ^ zc ^ 1)
        self._set_col(self.x, t, xt ^ xc)
        self._set_col(self.z, c, zc ^ zt)

    # ----------------------------------------------------------- Pauli algebra

    def pauli(self, op: Op) -> tuple[np.ndarray, np.ndarray]:
        """Packed (x, z) vectors of X_j or Z_j Z_{j+1 mod L}."""
        nw = self.x.shape[1]
        px = np.zeros(nw, np.uint64)
        pz = np.zeros(nw, np.uint64)
        if not 0 <= op.site < self.L:
            raise ConfigError(f"site {op.site} outside chain of length {self.L}")
        target = px if op.kind == X_KIND else pz
        for q in op.sites(self.L):
            w, b = _bit(q)
            target[w] ^= b
        return px, pz

    def anticommuting(self, px: np.ndarray, pz: np.ndarray, rows: slice = slice(None)) -> np.ndarray:
        sym = (self.x[rows] & pz) ^ (self.z[rows] & px)
        return (np.bitwise_count(sym).sum(axis=1) & 1).astype(bool)

    def _rowsum_into(self, targets: np.ndarray, src: int) -> None:
        """Row_t <- Row_src * Row_t for every t in ``targets`` with exact sign tracking."""
        x1, z1 = self.x[src], self.z[src]
        x2, z2 = self.x[targets], self.z[targets]
        self.r[targets] = _product_sign(x1, z1, self.r[src], x2, z2, self.r[targets])
        self.x[targets] = x2 ^ x1
        self.z[targets] = z2 ^ z1

    # ----------------------------------------------------------- measurement

    def measure(self, op: Op, u: float, need_outcome: bool = True) -> tuple[int, float]:
        """Projective measurement of ``op`` with uniform draw ``u``.

        Returns ``(s, p)`` with p the probability of the realised outcome (1/2 or 1).
        A determined outcome leaves the tableau untouched; with ``need_outcome``
        false its sign is not evaluated and ``s`` is reported as 0.
        """
        n = self.n
        px, pz = self.pauli(op)
        anti = self.anticommuting(px, pz)
        stab_hits = np.flatnonzero(anti[n:])
        if stab_hits.size:
            p = n + int(stab_hits[0])
            others = np.flatnonzero(anti)
            others = others[others != p]
            if others.size:
                self._rowsum_into(others, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            s = 1 if u < 0.5 else -1
            self.x[p], self.z[p], self.r[p] = px, pz, 0 if s == 1 else 1
            return s, 0.5
        if not need_outcome:
            return 0, 1.0
        return self._determined_sign(anti[:n]), 1.0

    def _determined_sign(self, destab_anti: np.ndarray) -> int:
        n = self.n
        nw = self.x.shape[1]
        sx = np.zeros((1, nw), np.uint64)
        sz = np.zeros((1, nw), np.uint64)
        sr = np.zeros(1, np.uint8)
        for i in np.flatnonzero(destab_anti):
            k = n + int(i)
            sr = _product_sign(self.x[k], self.z[k], self.r[k], sx, sz, sr)
            sx ^= self.x[k]
            sz ^= self.z[k]
        return 1 if sr[0] == 0 else -1

    def expectation_sign(self, op: Op) -> int:
        """+-1 if +-op is in the stabilizer group, 0 otherwise."""
        px, pz = self.pauli(op)
        if self.anticommuting(px, pz, slice(self.n, None)).any():
            return 0
        return self._determined_sign(self.anticommuting(px, pz, slice(0, self.n)))

    # ----------------------------------------------------------- bits and invariants

    def stabilizer_bits(self) -> tuple[np.ndarray, np.ndarray]:
        """Unpacked (n, n) X and Z parts of the stabilizer generators."""
        n = self.n
        ux = np.unpackbits(self.x[n:].view(np.uint8), axis=1, bitorder="little")[:, :n]
        uz = np.unpackbits(self.z[n:].view(np.uint8), axis=1, bitorder="little")[:, :n]
        return ux, uz

    def check_invariants(self) -> None:
        """Independent, mutually commuting stabilizers; destabilizers conjugate to them."""
        n = self.n
        ux, uz = np.unpackbits(self.x.view(np.uint8), axis=1, bitorder="little")[:, :n], \
            np.unpackbits(self.z.view(np.uint8), axis=1, bitorder="little")[:, :n]
        ux = ux.astype(np.int64)
        uz = uz.astype(np.int64)
        omega = (ux @ uz.T + uz @ ux.T) & 1
        stab = omega[n:, n:]
        if stab.any():
            raise StateError("stabilizer generators do not commute")
        if not np.array_equal(omega[:n, n:], np.eye(n, dtype=np.int64)):
            raise StateError("destabilizers are not conjugate to the stabilizers")
        if gf2_rank(np.hstack([ux[n:], uz[n:]])) != n:
            raise StateError("stabilizer generators are dependent")


def _product_sign(x1, z1, r1, x2, z2, r2) -> np.ndarray:
    """Sign bit of (P1)(P2) for P1 = (x1, z1, r1) and rows P2 = (x2, z2, r2)."""
    nx1, nz1, nx2, nz2 = ~x1, ~z1, ~x2, ~z2
    plus = (x1 & z1 & nx2 & z2) | (x1 & nz1 & x2 & z2) | (nx1 & z1 & x2 & nz2)
    minus = (x1 & z1 & x2 & nz2) | (x1 & nz1 & nx2 & z2) | (nx1 & z1 & x2 & z2)
    g = np.bitwise_count(plus).sum(axis=-1).astype(np.int64) - np.bitwise_count(minus).sum(axis=-1)
    tot = 2 * np.asarray(r2, np.int64) + 2 * int(r1) + g
    return ((tot % 4) // 2).astype(np.uint8)


def gf2_rank(M: np.ndarray) -> int:
    """Rank over the two-element field (row reduction on a copy)."""
    A = np.array(M, dtype=bool)
    rank = 0
    rows, cols = A.shape
    for c in range(cols):
        if rank == rows:
            break
        piv = np.flatnonzero(A[rank:, c])
        if not piv.size:
            continue
        p = rank + int(piv[0])
        if p != rank:
            A[[rank, p]] = A[[p, rank]]
        hit = np.flatnonzero(A[:, c])
        hit = hit[hit != rank]
        A[hit] ^= A[rank]
        rank += 1
    return rank


# ----------------------------------------------------------------- public API


def init_plus_tableau(L: int, with_reference: bool = False) -> StabilizerTableau:
    """|+...+> or the GHZ state of chain and reference, (|0..0>|0> + |1..1>|1>)/sqrt(2)."""
    if not 2 <= L <= MAX_L:
        raise SizeError(f"stabilizer backend supports 2 <= L <= {MAX_L}, got {L}")
    n = L + int(with_reference)
    tab = StabilizerTableau.zero_state(n, L, with_reference)
    if with_reference:
        tab.h(0)
        for q in range(n - 1):
            tab.cnot(q, q + 1)
    else:
        for q in range(n):
            tab.h(q)
    return tab


def project(tableau: StabilizerTableau, op: Op, stream: np.random.Generator) -> tuple[int, StabilizerTableau]:
    """Measure ``op`` in place; draws one uniform from ``stream``."""
    s, _ = tableau.measure(op, stream.random())
    return s, tableau


def _region_list(tab: StabilizerTableau, region) -> list[int]:
    if isinstance(region, (int, np.integer)):
        return list(range(int(region)))
    return sorted(set(int(q) for q in region))


def entropy(tableau: StabilizerTableau, region) -> float:
    """Entanglement entropy (nats) of ``region`` (a cut length l or a list of qubits)."""
    qs = _region_list(tableau, region)
    if not qs:
        return 0.0
    if qs[0] < 0 or qs[-1] >= tableau.n:
        raise ConfigError("region outside the tableau")
    ux, uz = tableau.stabilizer_bits()
    rank = gf2_rank(np.hstack([ux[:, qs], uz[:, qs]]))
    return LN2 * (rank - len(qs))


def arc_entropies(tableau: StabilizerTableau, cuts=None) -> np.ndarray:
    cuts = range(1, tableau.L) if cuts is None else cuts
    return np.array([entropy(tableau, int(l)) for l in cuts])


def coherent_information(tableau: StabilizerTableau) -> float:
    """S(rho_Q) - S(rho_QR) for the chain Q and reference R."""
    if not tableau.has_reference:
        raise ConfigError("coherent information needs a tableau with a reference qubit")
    chain = range(tableau.L)
    return entropy(tableau, chain) - entropy(tableau, range(tableau.n))


def spin_glass_correlator(tableau: StabilizerTableau, i: int, j: int) -> int:
    """<Z_i Z_j> in {-1, 0, +1}."""
    for q in (i, j):
        if not 0 <= q < tableau.L:
            raise ConfigError(f"site {q} outside chain")
    if i == j:
        return 1
    nw = tableau.x.shape[1]
    px = np.zeros(nw, np.uint64)
    pz = np.zeros(nw, np.uint64)
    for q in (i, j):
        w, b = _bit(q)
        pz[w] ^= b
    if tableau.anticommuting(px, pz, slice(tableau.n, None)).any():
        return 0
    return tableau._determined_sign(tableau.anticommuting(px, pz, slice(0, tableau.n)))


def run_clifford_trajectory(config: RunConfig, realization: DilutionMask, stream: np.random.Generator):
    """Projective dynamics on the active slots of ``realization``.

    One uniform is drawn per active slot. Returns ``(EntropySeries, MeasurementRecord,
    tableau_final)``.
    """
    if config.protocol not in (Protocol.CLIFFORD, Protocol.PERCOLATION):
        raise ConfigError(f"stabilizer backend runs the Clifford protocol, not {config.protocol.value}")
    L = config.L
    if realization.L != L or realization.depth < config.depth:
        raise ConfigError(f"realization shape {realization.active.shape} does not match L={L}, depth={config.depth}")
    tab = init_plus_tableau(L, config.with_reference)
    bits = realization.word.bits
    cuts = config.resolved_cuts
    times = config.sample_times()
    want = set(times.tolist())
    rec = RecordBuilder()
    values = []
    for t in range(config.depth):
        sym = int(bits[t])
        tau = config.tau_x if sym == X_KIND else config.tau_zz
        for j in np.flatnonzero(realization.active[t]):
            s, p = tab.measure(Op(sym, int(j)), stream.random(), config.record_outcomes)
            if config.record_outcomes:
                rec.add(t, int(j), sym, tau, s, p)
        if t + 1 in want:
            values.append([entropy(tab, l) for l in cuts])
    series = EntropySeries(times, cuts, np.asarray(values, float).reshape(len(times), len(cuts)))
    return series, rec.build(), tab

"""Pure fermionic Gaussian states for the weak-measurement protocols.

Majorana convention (0-based sites): X_j = i g_{2j} g_{2j+1} and
Z_j Z_{j+1} = i g_{2j+1} g_{2j+2}.  The periodic bond closes through the
Jordan-Wigner string, Z_{L-1} Z_0 = -P i g_{2L-1} g_0, so in the parity sector
P = p it is the pair (2L-1, 0) with sign -p.

The covariance is Gamma_ab = (i/2)<[g_a, g_b]>.  A Kraus operator exp(a s O),
O = i g_a g_b, maps Gamma in closed form (T = tanh 2a):

    Gamma'_ab = (Gamma_ab + s T) / (1 + s T Gamma_ab)
    Gamma'_al = Gamma_al sech(2a) / (1 + s T Gamma_ab)          (same for row b)
    Gamma'_kl = Gamma_kl + s T (Gamma_al Gamma_bk - Gamma_ak Gamma_bl) / (1 + s T Gamma_ab)

The last line follows from Wick's theorem for <O i g_k g_l>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

from .config import KrausConvention, Protocol, RunConfig, kraus_exponent
from .errors import ConfigError, NumericalError, SizeError, StateError
from .records import X_KIND, EntropySeries, Op, RecordBuilder
from .schedule import Word

MAX_L = 1024
PURITY_TOL = 1e-8
_CLIP_TOL = 1e-9


# ------------------------------------------------------------------ linear algebra


def pfaffian(A: np.ndarray) -> float:
    """Pfaffian of a real antisymmetric matrix (Parlett-Reid with pivoting)."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("pfaffian needs a square matrix")
    if n % 2:
        return 0.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k, k + 1:])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        piv = A[k, k + 1]
        if piv == 0.0:
            return 0.0
        pf *= piv
        if k + 2 < n:
            tau = A[k, k + 2:] / piv
            col = A[k + 2:, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    if not math.isfinite(pf):
        raise NumericalError("pfaffian overflow")
    return pf


def reorthogonalize(G: np.ndarray) -> np.ndarray:
    """Nearest real orthogonal antisymmetric matrix (polar factor)."""
    U, _, Vt = np.linalg.svd(G)
    Q = U @ Vt
    return np.asfortranarray(0.5 * (Q - Q.T))


def purity_error(G: np.ndarray) -> float:
    return float(np.abs(G @ G.T - np.eye(G.shape[0])).max())


def _binary_entropy_sum(x: np.ndarray) -> float:
    """sum over eigenvalues x of -(1+x)/2 ln((1+x)/2); pairs +-nu give h((1+nu)/2)."""
    if np.any(np.abs(x) > 1.0 + _CLIP_TOL):
        raise NumericalError(f"covariance eigenvalue {np.abs(x).max():.3g} exceeds 1")
    p = (1.0 + np.clip(x, -1.0, 1.0)) / 2.0
    p = p[p > 0.0]
    return float(-np.sum(p * np.log(p)))


# ------------------------------------------------------------------ state


@dataclass
class GaussianState:
    """Mutable trajectory state: covariance, chain length and parity sector."""

    gamma: np.ndarray
    L: int
    parity: int = 1
    log_weight: float = 0.0

    def copy(self) -> GaussianState:
        return GaussianState(self.gamma.copy(order="F"), self.L, self.parity, self.log_weight)


def _check_L(L: int) -> None:
    if not 2 <= L <= MAX_L:
        raise SizeError(f"gaussian backend supports 2 <= L <= {MAX_L}, got {L}")


def init_x_polarized(L: int) -> GaussianState:
    """|++...+>: Gamma_{2j,2j+1} = 1, i.e. <X_j> = 1."""
    _check_L(L)
    G = np.zeros((2 * L, 2 * L), order="F")
    idx = np.arange(L)
    G[2 * idx, 2 * idx + 1] = 1.0
    G[2 * idx + 1, 2 * idx] = -1.0
    return GaussianState(G, L, parity=1)


def init_ghz_sector(L: int, parity: int) -> GaussianState:
    """(|0..0> + p|1..1>)/sqrt(2): all Z_j Z_{j+1} = +1 in the parity-p sector."""
    _check_L(L)
    if parity not in (1, -1):
        raise ConfigError("parity must be +-1")
    G = np.zeros((2 * L, 2 * L))
    idx = np.arange(L - 1)
    G[2 * idx + 1, 2 * idx + 2] = 1.0
    G[2 * L - 1, 0] = -parity
    return GaussianState(np.asfortranarray(G - G.T), L, parity=parity)


def majorana_pair(op: Op, L: int, parity: int = 1) -> tuple[int, int, int]:
    """(a, b, sign) with O = sign * i g_a g_b."""
    j = op.site
    if not 0 <= j < L:
        raise ConfigError(f"site {j} outside chain of length {L}")
    if op.kind == X_KIND:
        return 2 * j, 2 * j + 1, 1
    if j < L - 1:
        return 2 * j + 1, 2 * j + 2, 1
    return 2 * L - 1, 0, -parity


def _measure_pair_inplace(G: np.ndarray, a: int, b: int, T: float, sech: float, s: int) -> float:
    """Closed-form update; returns (1 + s T Gamma_ab), the relative branch weight times 2."""
    g = G[a, b]
    denom = 1.0 + s * T * g
    if denom <= 1e-300:
        raise NumericalError("Kraus branch with vanishing norm")
    u = G[a].copy()
    v = G[b].copy()
    c = s * T / denom
    if G.flags.f_contiguous:
        # two in-place BLAS rank-1 updates; an order of magnitude faster than outer products
        dger(c, v, u, a=G, overwrite_a=1)
        dger(-c, u, v, a=G, overwrite_a=1)
    else:
        M = np.outer(v, u)
        M -= M.T
        G += c * M
    f = sech / denom
    G[a] = u * f
    G[b] = v * f
    G[:, a] = -G[a]
    G[:, b] = -G[b]
    gab = (g + s * T) / denom
    G[a, b] = gab
    G[b, a] = -gab
    G[a, a] = G[b, b] = 0.0
    return denom


def _strength(tau: float, convention) -> tuple[float, float]:
    a = kraus_exponent(tau, convention)
    if math.isinf(a):
        return 1.0, 0.0
    return math.tanh(2 * a), 1.0 / math.cosh(2 * a)


def weak_measure_pair(gamma: np.ndarray, pair: tuple[int, int], tau: float, s: int,
                      convention: KrausConvention | str = KrausConvention.EXPONENT_TAU,
                      check: bool = True) -> np.ndarray:
    """Covariance after exp(a s i g_a g_b) (a = tau or tau/2 by ``convention``)."""
    a, b = pair
    if a == b:
        raise ConfigError("Majorana pair needs two distinct indices")
    if s not in (1, -1):
        raise ConfigError(f"outcome must be +-1, got {s}")
    G = np.array(gamma, dtype=float, order="F")
    if check and purity_error(G) > PURITY_TOL:
        raise StateError("input covariance is not pure")
    T, sech = _strength(tau, convention)
    _measure_pair_inplace(G, a, b, T, sech, s)
    return G


def born_probability(gamma: np.ndarray, op: Op, L: int, tau: float, s: int = 1,
                     convention=KrausConvention.EXPONENT_TAU, parity: int = 1) -> float:
    a, b, sign = majorana_pair(op, L, parity)
    T, _ = _strength(tau, convention)
    return 0.5 * (1.0 + s * T * sign * gamma[a, b])


def born_step(state: GaussianState, op: Op, tau: float, stream: np.random.Generator,
              convention: KrausConvention | str = KrausConvention.EXPONENT_TAU) -> tuple[int, GaussianState, float]:
    """Sample s (s = +1 iff u < p(+1) for one uniform u) and update ``state`` in place."""
    a, b, sign = majorana_pair(op, state.L, state.parity)
    T, sech = _strength(tau, convention)
    p_plus = 0.5 * (1.0 + T * sign * state.gamma[a, b])
    s = 1 if stream.random() < p_plus else -1
    p = p_plus if s == 1 else 1.0 - p_plus
    if p <= 0.0:
        raise NumericalError("selected a zero-probability branch")
    _measure_pair_inplace(state.gamma, a, b, T, sech, s * sign)
    state.log_weight += math.log(p)
    return s, state, p


def postselect_step(state: GaussianState, op: Op, tau: float,
                    convention: KrausConvention | str = KrausConvention.EXPONENT_TAU) -> tuple[GaussianState, float]:
    """Force s = +1 (imaginary-time step); returns the would-be Born probability."""
    a, b, sign = majorana_pair(op, state.L, state.parity)
    T, sech = _strength(tau, convention)
    w = _measure_pair_inplace(state.gamma, a, b, T, sech, sign)
    state.log_weight += math.log(w / 2.0)
    return state, w / 2.0


# ------------------------------------------------------------------ observables


def _region_indices(sites, L: int) -> np.ndarray:
    sites = np.asarray(sorted(set(int(j) % L for j in sites)))
    return np.stack([2 * sites, 2 * sites + 1], axis=1).ravel()


def entropy(gamma: np.ndarray, region) -> float:
    """Entanglement entropy (nats) of a contiguous block of sites.

    ``region`` is either a cut length l (sites 0..l-1) or an iterable of sites that is
    contiguous on the ring. Wrapping blocks are evaluated on their complement.
    """
    L = gamma.shape[0] // 2
    sites = list(range(region)) if isinstance(region, (int, np.integer)) else sorted(set(int(j) % L for j in region))
    if not 0 < len(sites) < L:
        raise ConfigError("region must be a non-empty proper subset of the chain")
    if sites[-1] - sites[0] + 1 != len(sites):
        complement = [j for j in range(L) if j not in set(sites)]
        if complement[-1] - complement[0] + 1 != len(complement):
            raise ConfigError("region is not contiguous on the ring")
        sites = complement
    idx = _region_indices(sites, L)
    sub = gamma[np.ix_(idx, idx)]
    try:
        x = np.linalg.eigvalsh(1j * sub)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    return _binary_entropy_sum(x)


def arc_entropies(gamma: np.ndarray, cuts=None) -> np.ndarray:
    L = gamma.shape[0] // 2
    cuts = range(1, L) if cuts is None else cuts
    return np.array([entropy(gamma, int(l)) for l in cuts])


def zz_string_correlator(gamma: np.ndarray, i: int, j: int) -> float:
    """<Z_i Z_j> for i < j as the Pfaffian of Gamma on Majoranas 2i+1 .. 2j."""
    if not i < j:
        raise ConfigError("zz_string_correlator needs i < j")
    idx = np.arange(2 * i + 1, 2 * j + 1)
    return pfaffian(gamma[np.ix_(idx, idx)])


def x_expectation(gamma: np.ndarray, j: int) -> float:
    return float(gamma[2 * j, 2 * j + 1])


def fermion_parity(gamma: np.ndarray) -> float:
    """<prod_j X_j> = Pf(Gamma)."""
    return pfaffian(gamma)


# ------------------------------------------------------------------ reference-qubit states


@dataclass
class ReferencedGaussian:
    """Chain entangled with a reference qubit R, held as two parity sectors.

    (|0..0>|0>_R + |1..1>|1>_R)/sqrt(2) = (|GHZ+>|+>_R + |GHZ->|->_R)/sqrt(2).
    Every measured operator commutes with the chain parity, so each sector stays a
    pure Gaussian state; only the sector weights ``w`` couple them.
    """

    sectors: tuple[GaussianState, GaussianState]
    weights: np.ndarray

    @classmethod
    def init(cls, L: int) -> ReferencedGaussian:
        return cls((init_ghz_sector(L, 1), init_ghz_sector(L, -1)), np.array([0.5, 0.5]))

    @property
    def L(self) -> int:
        return self.sectors[0].L

    def _sector_probs(self, op: Op, tau: float, convention) -> tuple[np.ndarray, float, float]:
        T, sech = _strength(tau, convention)
        q = np.empty(2)
        for k, st in enumerate(self.sectors):
            a, b, sign = majorana_pair(op, st.L, st.parity)
            q[k] = 0.5 * (1.0 + T * sign * st.gamma[a, b])
        return q, T, sech

    def _apply(self, op: Op, s: int, q: np.ndarray, T: float, sech: float) -> float:
        qs = q if s == 1 else 1.0 - q
        p = float(np.dot(self.weights, qs))
        if p <= 0.0:
            raise NumericalError("selected a zero-probability branch")
        for k, st in enumerate(self.sectors):
            a, b, sign = majorana_pair(op, st.L, st.parity)
            if qs[k] > 0.0:
                _measure_pair_inplace(st.gamma, a, b, T, sech, s * sign)
        self.weights = self.weights * qs / p
        return p

    def born_step(self, op: Op, tau: float, stream: np.random.Generator,
                  convention=KrausConvention.EXPONENT_TAU) -> tuple[int, float]:
        q, T, sech = self._sector_probs(op, tau, convention)
        p_plus = float(np.dot(self.weights, q))
        s = 1 if stream.random() < p_plus else -1
        return s, self._apply(op, s, q, T, sech)

    def postselect_step(self, op: Op, tau: float, convention=KrausConvention.EXPONENT_TAU) -> float:
        q, T, sech = self._sector_probs(op, tau, convention)
        return self._apply(op, 1, q, T, sech)

    def coherent_information(self) -> float:
        """S(rho_Q) - S(rho_QR) = S(rho_R) = binary entropy of the sector weights."""
        w = np.clip(self.weights, 0.0, 1.0)
        w = w[w > 0.0]
        return float(-np.sum(w * np.log(w)))

    def reorthogonalize(self) -> None:
        for st in self.sectors:
            st.gamma = reorthogonalize(st.gamma)


# ------------------------------------------------------------------ trajectories


def run_trajectory(config: RunConfig, word: Word, stream: np.random.Generator):
    """Apply the layers of ``word`` (1: X on every site, 0: ZZ on every bond).

    Returns ``(EntropySeries, MeasurementRecord, observables)``. The observables dict
    holds the final covariance (``gamma``) or, with a reference qubit, the final
    coherent information.
    """
    if config.protocol not in (Protocol.POSTSELECTED, Protocol.BORN):
        raise ConfigError(f"gaussian backend runs weak-measurement protocols, not {config.protocol.value}")
    _check_L(config.L)
    bits = Word(word).bits[: config.depth]
    if bits.size < config.depth:
        raise SizeError("word shorter than depth")
    L = config.L
    born = config.protocol is Protocol.BORN
    conv = config.kraus_convention
    cuts = config.resolved_cuts
    times = config.sample_times()
    want = set(times.tolist())
    rec = RecordBuilder()
    values = []
    if config.with_reference:
        state = ReferencedGaussian.init(L)
        ic = []
        for t, sym in enumerate(bits):
            tau = config.tau_x if sym == X_KIND else config.tau_zz
            for j in range(L):
                op = Op(int(sym), j)
                if born:
                    s, p = state.born_step(op, tau, stream, conv)
                else:
                    s, p = 1, state.postselect_step(op, tau, conv)
                if config.record_outcomes:
                    rec.add(t, j, int(sym), tau, s, p)
            if (t + 1) % config.reorth_every == 0:
                state.reorthogonalize()
            if t + 1 in want:
                ic.append(state.coherent_information())
        # the single "cut" column holds I_c(t); the label L marks the whole chain
        series = EntropySeries(times, (L,), np.asarray(ic).reshape(-1, 1))
        return series, rec.build(), {"coherent_information": state.coherent_information(),
                                     "sector_weights": state.weights.tolist()}
    state = init_x_polarized(L)
    for t, sym in enumerate(bits):
        tau = config.tau_x if sym == X_KIND else config.tau_zz
        for j in range(L):
            op = Op(int(sym), j)
            if born:
                s, state, p = born_step(state, op, tau, stream, conv)
            else:
                state, p = postselect_step(state, op, tau, conv)
                s = 1
            if config.record_outcomes:
                rec.add(t, j, int(sym), tau, s, p)
        if (t + 1) % config.reorth_every == 0:
            state.gamma = reorthogonalize(state.gamma)
        if t + 1 in want:
            values.append([entropy(state.gamma, l) for l in cuts])
    series = EntropySeries(times, cuts, np.asarray(values, float).reshape(len(times), len(cuts)))
    return series, rec.build(), {"gamma": state.gamma, "log_weight": state.log_weight}

"""Dense pure-state simulator for small chains, the ground truth for the other backends.

Qubit q is tensor axis q of a ``(2,)*n`` amplitude array; with a reference
qubit, it is the last axis (index L). Periodic boundary conditions throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import KrausConvention, RunConfig, kraus_exponent
from .errors import ConfigError, NumericalError, SizeError, UsageError
from .records import X_KIND, EntropySeries, Op, RecordBuilder
from .schedule import Word

MAX_L = 14
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class PureState:
    amps: np.ndarray
    L: int
    has_reference: bool = False
    log_weight: float = 0.0

    @property
    def n(self) -> int:
        return self.L + int(self.has_reference)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amps, self.amps).real))

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n)


def init_plus(L: int, with_reference: bool = False) -> PureState:
    """|++...+> or, with a reference qubit R, (|0..0>|0>_R + |1..1>|1>_R)/sqrt(2)."""
    if not 1 <= L <= MAX_L:
        raise SizeError(f"statevector oracle supports 1 <= L <= {MAX_L}, got {L}")
    n = L + int(with_reference)
    if with_reference:
        amps = np.zeros(2 ** n, dtype=complex)
        amps[0] = amps[-1] = 1 / math.sqrt(2)
    else:
        amps = np.full(2 ** n, 2 ** (-n / 2), dtype=complex)
    return PureState(amps, L, with_reference)


def _z_diag(n: int, q: int) -> np.ndarray:
    shape = [1] * n
    shape[q] = 2
    return np.array([1.0, -1.0]).reshape(shape)


def apply_op(state: PureState, op: Op) -> np.ndarray:
    """O|psi> as a flat array, O = X_j or Z_j Z_{j+1}."""
    psi = state.tensor()
    _check_site(op.site, state.L)
    if op.kind == X_KIND:
        out = np.flip(psi, axis=op.site)
    else:
        i, j = op.sites(state.L)
        out = psi * (_z_diag(state.n, i) * _z_diag(state.n, j))
    return np.ascontiguousarray(out).reshape(-1)


def _check_site(j: int, L: int) -> None:
    if not 0 <= j < L:
        raise ConfigError(f"site {j} outside chain of length {L}")


def expectation(state: PureState, op: Op) -> float:
    psi = state.amps
    return float(np.vdot(psi, apply_op(state, op)).real / np.vdot(psi, psi).real)


def apply_kraus(state: PureState, op: Op, tau: float, s: int,
                convention: KrausConvention | str = KrausConvention.EXPONENT_TAU) -> PureState:
    """Apply the POVM-normalised Kraus operator M_s ~ exp(a s O); result is unnormalised.

    a = tau or tau/2 depending on ``convention``; tau = inf gives the projector (1 + s O)/2.
    """
    if s not in (1, -1):
        raise ConfigError(f"outcome must be +-1, got {s}")
    a = kraus_exponent(tau, convention)
    t = 1.0 if math.isinf(a) else math.tanh(a)
    amps = (state.amps + s * t * apply_op(state, op)) / math.sqrt(2.0 * (1.0 + t * t))
    return replace(state, amps=amps)


def normalize(state: PureState) -> PureState:
    nrm2 = np.vdot(state.amps, state.amps).real
    if not nrm2 > 0.0:
        raise NumericalError("zero-norm state")
    return replace(state, amps=state.amps / math.sqrt(nrm2), log_weight=state.log_weight + math.log(nrm2))


def branch_probabilities(state: PureState, op: Op, tau: float,
                         convention: KrausConvention | str = KrausConvention.EXPONENT_TAU) -> tuple[float, float]:
    """(p(+1), p(-1)) from the squared norms of both Kraus branches."""
    total = np.vdot(state.amps, state.amps).real
    probs = []
    for s in (1, -1):
        branch = apply_kraus(state, op, tau, s, convention).amps
        probs.append(float(np.vdot(branch, branch).real / total))
    return probs[0], probs[1]


def born_step(state: PureState, op: Op, tau: float, stream: np.random.Generator,
              convention: KrausConvention | str = KrausConvention.EXPONENT_TAU) -> tuple[int, PureState, float]:
    """Sample s with Born probability using one uniform draw (s = +1 iff u < p(+1))."""
    p_plus, p_minus = branch_probabilities(state, op, tau, convention)
    u = stream.random()
    s = 1 if u < p_plus else -1
    p = p_plus if s == 1 else p_minus
    if p <= 0.0:
        raise NumericalError("selected a zero-probability branch")
    return s, normalize(apply_kraus(state, op, tau, s, convention)), p


def _reduced_spectrum(state: PureState, qubits) -> np.ndarray:
    qubits = sorted(set(int(q) for q in qubits))
    rest = [q for q in range(state.n) if q not in qubits]
    psi = np.transpose(state.tensor(), qubits + rest).reshape(2 ** len(qubits), -1)
    psi = psi / np.linalg.norm(psi)
    sv = np.linalg.svd(psi, compute_uv=False)
    return sv ** 2


def region_entropy(state: PureState, qubits) -> float:
    """Von Neumann entropy (nats) of the reduced state on ``qubits`` (may include index L = R)."""
    qubits = list(qubits)
    if len(qubits) == 0 or len(set(qubits)) == state.n:
        return 0.0
    lam = _reduced_spectrum(state, qubits)
    lam = lam[lam > 1e-300]
    return float(-np.sum(lam * np.log(lam)))


def entanglement_entropy(state: PureState, l: int) -> float:
    """Entropy of chain sites 0..l-1."""
    if not 1 <= l < state.L:
        raise ConfigError(f"cut {l} outside [1, {state.L - 1}]")
    return region_entropy(state, range(l))


def coherent_information(state: PureState) -> float:
    """I_c = S(rho_Q) - S(rho_QR) on the trajectory's pure state."""
    if not state.has_reference:
        raise UsageError("coherent information needs a reference qubit")
    return region_entropy(state, range(state.L)) - region_entropy(state, range(state.n))


def zz_correlator(state: PureState, i: int, j: int) -> float:
    _check_site(i, state.L)
    _check_site(j, state.L)
    if i == j:
        return 1.0
    psi = state.tensor()
    zz = psi * (_z_diag(state.n, i) * _z_diag(state.n, j))
    return float(np.vdot(psi, zz).real / np.vdot(psi, psi).real)


def parity(state: PureState) -> float:
    """<prod_j X_j> over the chain."""
    psi = state.tensor()
    flipped = np.flip(psi, axis=tuple(range(state.L)))
    return float(np.vdot(psi, flipped).real / np.vdot(psi, psi).real)


def layer_ops(symbol: int, L: int) -> list[Op]:
    return [Op(int(symbol), j) for j in range(L)]


def run_trajectory(config: RunConfig, word: Word, stream: np.random.Generator):
    """Weak-measurement trajectory (post-selected or Born) on the dense state.

    Returns ``(EntropySeries, MeasurementRecord, observables)`` where observables
    holds the final coherent information when a reference qubit is present.
    """
    from .config import Protocol

    if config.protocol not in (Protocol.POSTSELECTED, Protocol.BORN):
        raise ConfigError(f"oracle runs weak-measurement protocols, not {config.protocol.value}")
    bits = Word(word).bits[: config.depth]
    if bits.size < config.depth:
        raise SizeError("word shorter than depth")
    state = init_plus(config.L, config.with_reference)
    cuts = config.resolved_cuts
    times = config.sample_times()
    want = set(times.tolist())
    values = []
    rec = RecordBuilder()
    for t, sym in enumerate(bits):
        tau = config.tau_x if sym == X_KIND else config.tau_zz
        for op in layer_ops(sym, config.L):
            if config.protocol is Protocol.BORN:
                s, state, p = born_step(state, op, tau, stream, config.kraus_convention)
            else:
                s = 1
                p = branch_probabilities(state, op, tau, config.kraus_convention)[0]
                state = normalize(apply_kraus(state, op, tau, 1, config.kraus_convention))
            if config.record_outcomes:
                rec.add(t, op.site, int(sym), tau, s, p)
        if t + 1 in want:
            values.append([entanglement_entropy(state, l) for l in cuts])
    series = EntropySeries(times, cuts, np.asarray(values, float).reshape(len(times), len(cuts)))
    obs = {"log_weight": state.log_weight}
    if config.with_reference:
        obs["coherent_information"] = coherent_information(state)
    return series, rec.build(), obs

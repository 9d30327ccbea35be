"""Closed-form results: momentum-space transfer matrices, critical lines, Fourier theory.

Transfer matrices act in particle-hole space. Products follow time order with the
later factor on the left, so M(w_{k+1}) = M(w_{k-1}) M(w_k) because w_{k+1} = w_k w_{k-1}.
Long products are kept as (unit-norm matrix, log scale) pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from .config import Protocol
from .errors import ConfigError, NumericalError, SizeError
from .records import X_KIND
from .schedule import MAX_GENERATION, PHI, Word, fib_word, fibonacci

SQRT5 = math.sqrt(5.0)
SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]])
RENORM_EVERY = 32
_POLE_TOL = 1e-9


# ------------------------------------------------------------------ transfer matrices


def momentum_transfer(k: float, tau: float, kind: int) -> np.ndarray:
    """Single-layer transfer matrix at momentum k.

    X layer: exp(-2 tau sigma_y).  ZZ layer: exp(ik/2 sigma_z) exp(2 tau sigma_y) exp(-ik/2 sigma_z).
    """
    if tau < 0:
        raise ConfigError("tau must be >= 0")
    c, s = math.cosh(2 * tau), math.sinh(2 * tau)
    if kind == X_KIND:
        return np.array([[c, 1j * s], [-1j * s, c]])
    e = np.exp(1j * k)
    return np.array([[c, -1j * s * e], [1j * s / e, c]])


@dataclass(frozen=True)
class ScaledMatrix:
    """``matrix * exp(log_scale)`` with ``matrix`` of unit spectral norm."""

    matrix: np.ndarray
    log_scale: float

    @classmethod
    def of(cls, M: np.ndarray, log_scale: float = 0.0) -> ScaledMatrix:
        nrm = np.linalg.norm(M, 2)
        if not nrm > 0 or not math.isfinite(nrm):
            raise NumericalError("degenerate transfer product")
        return cls(M / nrm, log_scale + math.log(nrm))

    def __matmul__(self, other: ScaledMatrix) -> ScaledMatrix:
        return ScaledMatrix.of(self.matrix @ other.matrix, self.log_scale + other.log_scale)

    def dense(self) -> np.ndarray:
        return self.matrix * math.exp(self.log_scale)

    @property
    def log_sv_max(self) -> float:
        return self.log_scale + math.log(np.linalg.norm(self.matrix, 2))


def word_transfer(word: Word | str, k: float, tau_x: float, tau_zz: float) -> ScaledMatrix:
    """Ordered product over the layers of ``word``, renormalised every 32 factors."""
    bits = Word(word).bits
    Mx = momentum_transfer(k, tau_x, X_KIND)
    Mz = momentum_transfer(k, tau_zz, 1 - X_KIND)
    acc = np.eye(2, dtype=complex)
    log_scale = 0.0
    for i, b in enumerate(bits, 1):
        acc = (Mx if b == X_KIND else Mz) @ acc
        if i % RENORM_EVERY == 0:
            nrm = np.linalg.norm(acc, 2)
            acc /= nrm
            log_scale += math.log(nrm)
    return ScaledMatrix.of(acc, log_scale)


def fibonacci_transfer(generation: int, k: float, tau_x: float, tau_zz: float) -> ScaledMatrix:
    """M(w_n) through the two-term recursion (O(n) matrix products)."""
    if not 0 <= generation <= MAX_GENERATION:
        raise SizeError(f"generation must lie in [0, {MAX_GENERATION}]")
    Mx = ScaledMatrix.of(momentum_transfer(k, tau_x, X_KIND))
    Mz = ScaledMatrix.of(momentum_transfer(k, tau_zz, 1 - X_KIND))
    prev, cur = Mx, Mz @ Mx  # w_0 = "1", w_1 = "10"
    if generation == 0:
        return prev
    for _ in range(generation - 1):
        prev, cur = cur, prev @ cur
    return cur


def word_length(generation: int) -> int:
    """|w_n| = f_{n+2} with f_1 = f_2 = 1."""
    return fibonacci(generation + 2)


def relaxation_spectrum(k: float, tau_x: float, tau_zz: float, generation: int = 30) -> float:
    """Gamma_k = (1/f) ln sigma_max(M(w_n)), f = |w_n|."""
    return fibonacci_transfer(generation, k, tau_x, tau_zz).log_sv_max / word_length(generation)


def signed_zero_mode_rate(tau_x: float, tau_zz: float, generation: int = 30) -> float:
    """Gamma_0 with the sign of the boost angle (the k = 0 product is exp(theta sigma_y))."""
    P = fibonacci_transfer(generation, 0.0, tau_x, tau_zz)
    sign = 1.0 if P.matrix[1, 0].imag >= 0 else -1.0
    return sign * P.log_sv_max / word_length(generation)


def zero_mode_rate_exact(tau_x: float, tau_zz: float, generation: int) -> float:
    """2 |tau_zz n_0 - tau_x n_1| / f for the commuting k = 0 factors."""
    w = fib_word(generation)
    n1 = int(w.bits.sum())
    n0 = len(w) - n1
    return 2.0 * abs(tau_zz * n0 - tau_x * n1) / len(w)


def gap_closing_point(tau_zz: float, generation: int = 30, tol: float = 1e-12) -> float:
    """tau_x at which the signed zero-mode rate changes sign (bisection)."""
    if tau_zz <= 0:
        raise ConfigError("tau_zz must be > 0")
    return bisect(lambda tx: signed_zero_mode_rate(tx, tau_zz, generation), 0.0, 2.0 * tau_zz, xtol=tol)


def dirac_velocity(tau_x: float, k: float = 1e-4, generation: int = 32) -> float:
    """Slope (Gamma_k - Gamma_0) / k on the post-selected critical line tau_zz = phi tau_x."""
    tzz = PHI * tau_x
    return (relaxation_spectrum(k, tau_x, tzz, generation) - relaxation_spectrum(0.0, tau_x, tzz, generation)) / k


def dirac_velocity_leading(tau_x: float) -> float:
    """Leading-order velocity sinh(2 tau_x / phi)."""
    return math.sinh(2.0 * tau_x / PHI)


# ------------------------------------------------------------------ couplings and critical lines


def effective_couplings(protocol: Protocol | str, tau_x: float, tau_zz: float) -> tuple[float, float]:
    """(J_x, J_zz): (tau_x/phi, tau_zz/phi^2) post-selected, (tau_x/sqrt(phi), tau_zz/phi) Born."""
    if tau_x < 0 or tau_zz < 0:
        raise ConfigError("tau must be >= 0")
    protocol = Protocol(protocol)
    if protocol is Protocol.POSTSELECTED:
        return tau_x / PHI, tau_zz / PHI ** 2
    if protocol is Protocol.BORN:
        return tau_x / math.sqrt(PHI), tau_zz / PHI
    raise ConfigError(f"no effective Ising couplings for protocol {protocol.value}")


def postselected_critical_line(tau_zz):
    return np.asarray(tau_zz, float) / PHI if np.ndim(tau_zz) else tau_zz / PHI


def born_critical_line(tau_zz):
    """tau_x = (tau_zz + tau_zz^3 / (8 phi^2)) / sqrt(phi)."""
    t = np.asarray(tau_zz, float)
    out = (t + t ** 3 / (8 * PHI ** 2)) / math.sqrt(PHI)
    return float(out) if out.ndim == 0 else out


def clifford_critical_line(p_x):
    """p_zz = 1 - (1 - p_x)^phi."""
    from .percolation import critical_line_p

    return critical_line_p(p_x)


@dataclass(frozen=True)
class CriticalLineSpec:
    protocol: Protocol
    variables: tuple[str, str]
    fn: Callable
    domain: tuple[float, float]

    def __call__(self, v):
        lo, hi = self.domain
        if np.any(np.asarray(v) < lo) or np.any(np.asarray(v) > hi):
            raise ConfigError(f"{self.variables[0]} outside {self.domain}")
        return self.fn(v)


CRITICAL_LINES = {
    Protocol.POSTSELECTED: CriticalLineSpec(Protocol.POSTSELECTED, ("tau_zz", "tau_x"), postselected_critical_line, (0.0, math.inf)),
    Protocol.BORN: CriticalLineSpec(Protocol.BORN, ("tau_zz", "tau_x"), born_critical_line, (0.0, math.inf)),
    Protocol.CLIFFORD: CriticalLineSpec(Protocol.CLIFFORD, ("p_x", "p_zz"), clifford_critical_line, (0.0, 1.0)),
}


# ------------------------------------------------------------------ Fourier theory


def _floor_over_phi(t: np.ndarray) -> np.ndarray:
    """floor(t / phi) in exact integer arithmetic: (isqrt(5 t^2) - t) // 2."""
    return np.fromiter(((math.isqrt(5 * v * v) - v) // 2 for v in t.tolist()), dtype=np.int64, count=t.size)


def drive_signal(t):
    """floor((t+1)/phi) - floor(t/phi); equals the t-th symbol (1-based) of the infinite word."""
    arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if np.any(arr < 1):
        raise ConfigError("drive_signal needs t >= 1")
    out = _floor_over_phi(arr + 1) - _floor_over_phi(arr)
    return int(out[0]) if np.ndim(t) == 0 else out


def projective_entropy(t):
    """Entropy (units of ln 2) after t layers of the undiluted projective circuit: 1 - drive."""
    d = drive_signal(t)
    return 1 - d


def fourier_coefficient(n: int, signal: str = "entropy") -> complex:
    """Fourier coefficient of the period-phi square wave behind the projective entropy.

    ``signal="entropy"``: exp(-i n pi/phi^2) sin(n pi/phi^2) / (n pi), mean 1/phi^2.
    ``signal="drive"``: the complementary wave 1 - entropy, i.e. minus the above for
    n != 0 and mean 1/phi at n = 0.
    """
    n = int(n)
    if signal not in ("entropy", "drive"):
        raise ConfigError("signal must be 'entropy' or 'drive'")
    if n == 0:
        return complex(1.0 / PHI ** 2) if signal == "entropy" else complex(1.0 / PHI)
    x = n * math.pi / PHI ** 2
    c = complex(math.cos(x), -math.sin(x)) * math.sin(x) / (n * math.pi)
    return c if signal == "entropy" else -c


def golden_frequency(n) -> np.ndarray:
    """omega_n = 2 pi n / phi folded into [0, 2 pi)."""
    return np.mod(2 * np.pi * np.asarray(n, float) / PHI, 2 * np.pi)


def fibonacci_harmonic_asymptote(n):
    """|F_n| ~ 1/(sqrt(5) n^2) for n a Fibonacci number."""
    n = np.asarray(n, float)
    return 1.0 / (SQRT5 * n ** 2)


def binet_remainder(k: int) -> float:
    """f_k / phi^2 - f_{k-2} (f_1 = f_2 = 1) from Binet's formula: psi^{k-2} (1 - psi^4) / sqrt(5)."""
    if k < 2:
        raise ConfigError("binet_remainder needs k >= 2")
    psi = -1.0 / PHI
    return psi ** (k - 2) * (1.0 - psi ** 4) / SQRT5


def _check_poles(alpha: np.ndarray, m: np.ndarray | None = None) -> None:
    folded = np.abs(np.mod(alpha + np.pi, 2 * np.pi) - np.pi)
    if np.any(folded < _POLE_TOL):
        raise NumericalError("frequency within 1e-9 of a kernel pole")


def integer_time_kernel(alpha, m_max: int | None = None, window: tuple[int, int] | None = None):
    """Sum of exp(i alpha t) over integer times.

    With ``window=(ta, tb)`` the finite geometric sum over ta..tb. Otherwise the
    distributional sum over t >= 1, -1/2 + sum_m Delta_m(alpha) with
    Delta_m(alpha) = i alpha / (alpha^2 - (2 pi m)^2); ``m_max=None`` uses the
    resummed value (i/2) cot(alpha/2).
    """
    a = np.asarray(alpha, float)
    if window is not None:
        ta, tb = window
        n = tb - ta + 1
        num = np.exp(1j * a * n) - 1.0
        den = np.exp(1j * a) - 1.0
        small = np.abs(den) < 1e-12
        safe = np.where(small, 1.0, den)
        return np.where(small, n * np.exp(1j * a * ta), np.exp(1j * a * ta) * num / safe)
    _check_poles(a)
    if m_max is None:
        return -0.5 + 0.5j / np.tan(a / 2)
    m = np.arange(-m_max, m_max + 1)
    delta = 1j * a[..., None] / (a[..., None] ** 2 - (2 * np.pi * m) ** 2)
    return -0.5 + delta.sum(axis=-1)


def broadened_spectrum(omega, n_max: int = 200, m_max: int | None = None,
                       window: tuple[int, int] | None = None):
    """sum_t exp(i omega t) S(t) for the projective entropy, via its harmonic series.

    Each harmonic n (|n| <= n_max) contributes F_n times the integer-time kernel at
    omega + omega_n. The series converges conditionally (|F_n| ~ 1/n); use
    :func:`broadened_spectrum_error` for a truncation estimate.
    """
    w = np.asarray(omega, float)
    ns = np.arange(-n_max, n_max + 1)
    coeffs = np.array([fourier_coefficient(int(n)) for n in ns])
    omn = 2 * np.pi * ns / PHI
    K = integer_time_kernel(w[..., None] + omn, m_max=m_max, window=window)
    out = (K * coeffs).sum(axis=-1)
    return complex(out) if out.ndim == 0 else out


def broadened_spectrum_error(omega, n_max: int = 200, m_max: int | None = None,
                             window: tuple[int, int] | None = None):
    """|S(n_max) - S(n_max // 2)|, a practical estimate of the harmonic truncation error."""
    a = broadened_spectrum(omega, n_max, m_max, window)
    b = broadened_spectrum(omega, max(n_max // 2, 1), m_max, window)
    return np.abs(np.asarray(a) - np.asarray(b))


# ------------------------------------------------------------------ Magnus sampling utility


@dataclass(frozen=True)
class MagnusSums:
    """Per-site bare sums over a measurement record of t layers."""

    S_x: np.ndarray
    S_zz: np.ndarray
    R_xz: np.ndarray
    t: int


def magnus_sums(outcomes: np.ndarray, word: Word | str) -> MagnusSums:
    """S_x = sqrt(phi)/t sum_n w_n s_j(n), S_zz = phi/t sum_n (1 - w_n) s_j(n),
    R_xz = (1/t) sum_{m<n} s_j(n) s_j(m) (w_n - w_m).

    ``outcomes`` is (t, L) with entry (n, j) the outcome of slot j in layer n
    (site j for X layers, bond (j, j+1) for ZZ layers).
    """
    s = np.asarray(outcomes, float)
    t = s.shape[0]
    w = Word(word).bits[:t].astype(float)
    if w.size < t:
        raise SizeError("word shorter than the record")
    wc = w[:, None]
    S_x = math.sqrt(PHI) / t * (wc * s).sum(axis=0)
    S_zz = PHI / t * ((1 - wc) * s).sum(axis=0)
    before = np.cumsum(s, axis=0) - s  # sum_{m<n} s(m)
    before_w = np.cumsum(wc * s, axis=0) - wc * s  # sum_{m<n} s(m) w_m
    R = (s * (wc * before - before_w)).sum(axis=0) / t
    return MagnusSums(S_x, S_zz, R, t)

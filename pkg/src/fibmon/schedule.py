"""Temporal layer sequences: Fibonacci words, Floquet words and dilution masks.

Symbol convention: ``1`` is a layer of single-site X measurements, ``0`` a
layer of nearest-neighbour ZZ measurements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, SizeError

PHI = (1.0 + math.sqrt(5.0)) / 2.0
PSI = -1.0 / PHI
MAX_GENERATION = 40


@dataclass(frozen=True)
class GoldenConstants:
    phi: float = PHI
    psi: float = PSI


GOLDEN = GoldenConstants()


class Word:
    """Immutable binary word stored as packed bits."""

    __slots__ = ("_packed", "_n")

    def __init__(self, symbols):
        if isinstance(symbols, Word):
            self._packed, self._n = symbols._packed, symbols._n
            return
        if isinstance(symbols, str):
            if set(symbols) - {"0", "1"}:
                raise ConfigError(f"word may only contain '0'/'1', got {symbols!r}")
            bits = np.frombuffer(symbols.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            bits = np.asarray(symbols, dtype=np.uint8).ravel()
            if bits.size and bits.max() > 1:
                raise ConfigError("word symbols must be 0 or 1")
        self._n = int(bits.size)
        self._packed = np.packbits(bits)
        self._packed.flags.writeable = False

    @property
    def bits(self) -> np.ndarray:
        """Unpacked symbols as a uint8 array (a fresh copy)."""
        return np.unpackbits(self._packed, count=self._n)

    def __len__(self) -> int:
        return self._n

    def __str__(self) -> str:
        return (self.bits + ord("0")).tobytes().decode("ascii")

    def __repr__(self) -> str:
        s = str(self) if self._n <= 40 else str(self.prefix(40)) + "..."
        return f"Word({s!r}, len={self._n})"

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Word(self.bits[idx])
        return int(self.bits[idx])

    def __add__(self, other: Word) -> Word:
        return Word(np.concatenate([self.bits, Word(other).bits]))

    def __eq__(self, other) -> bool:
        if isinstance(other, str):
            other = Word(other)
        if not isinstance(other, Word):
            return NotImplemented
        return self._n == other._n and bool(np.array_equal(self._packed, other._packed))

    def __hash__(self) -> int:
        return hash((self._n, self._packed.tobytes()))

    def prefix(self, n: int) -> Word:
        if n > self._n:
            raise SizeError(f"prefix length {n} exceeds word length {self._n}")
        return Word(self.bits[:n])


def fibonacci(n: int) -> int:
    """Fibonacci number with f1 = f2 = 1 (and f0 = 0)."""
    if n < 0:
        raise ConfigError("Fibonacci index must be non-negative")
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


@lru_cache(maxsize=8)
def _fib_bits(k: int) -> np.ndarray:
    prev, cur = np.array([1], np.uint8), np.array([1, 0], np.uint8)
    if k == 0:
        return prev
    for _ in range(k - 1):
        prev, cur = cur, np.concatenate([cur, prev])
    return cur


def fib_word(k: int) -> Word:
    """Generation-k Fibonacci word: w0 = 1, w1 = 10, w_k = w_{k-1} w_{k-2}."""
    if k < 0:
        raise ConfigError("generation must be >= 0")
    if k > MAX_GENERATION:
        raise SizeError(f"generation {k} exceeds cap {MAX_GENERATION}")
    return Word(_fib_bits(k))


def fib_prefix(depth: int) -> Word:
    """First ``depth`` symbols of the infinite Fibonacci word."""
    if depth < 0:
        raise ConfigError("depth must be >= 0")
    k = 0
    while fibonacci(k + 2) < depth:
        k += 1
    return fib_word(k).prefix(depth)


def dual_word(w: Word) -> Word:
    """Kramers-Wannier dual: flips every symbol."""
    return Word(1 - Word(w).bits)


def symbol_counts(w: Word) -> tuple[int, int]:
    """Return ``(n1, n0)``."""
    w = Word(w)
    n1 = int(w.bits.sum())
    return n1, len(w) - n1


def fibonacci_times(max_t: int) -> list[int]:
    """Distinct Fibonacci numbers <= max_t (f1 = f2 = 1, so f15 = 610, f19 = 4181)."""
    out: list[int] = []
    a, b = 1, 2
    while a <= max_t:
        out.append(a)
        a, b = b, a + b
    return out


def fibonacci_index(t: int) -> int | None:
    """Index k with f_k = t (largest index for t = 1), else None."""
    k, a, b = 1, 1, 1
    while a < t:
        a, b = b, a + b
        k += 1
    if a != t:
        return None
    return 2 if t == 1 else k


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class Fibonacci:
    generation: int | None = None

    def word(self, depth: int) -> Word:
        if self.generation is None:
            return fib_prefix(depth)
        w = fib_word(self.generation)
        if depth > len(w):
            raise SizeError(f"depth {depth} exceeds backing word length {len(w)}")
        return w.prefix(depth)


@dataclass(frozen=True)
class Floquet:
    period: str = "10"

    def word(self, depth: int) -> Word:
        p = Word(self.period)
        if len(p) == 0:
            raise ConfigError("Floquet period word is empty")
        reps = -(-depth // len(p))
        return Word(np.tile(p.bits, reps)[:depth])


@dataclass(frozen=True)
class DilutedFibonacci:
    p_x: float
    p_zz: float
    generation: int | None = None

    def __post_init__(self):
        for name in ("p_x", "p_zz"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0 or math.isnan(v):
                raise ConfigError(f"{name}={v} outside [0, 1]")

    def word(self, depth: int) -> Word:
        return Fibonacci(self.generation).word(depth)


ScheduleKind = Fibonacci | Floquet | DilutedFibonacci


@dataclass(frozen=True)
class DilutionMask:
    """Gate placement: ``active[t, j]`` is slot j (site j or bond (j, j+1)) of layer t."""

    word: Word
    active: np.ndarray

    @property
    def depth(self) -> int:
        return self.active.shape[0]

    @property
    def L(self) -> int:
        return self.active.shape[1]


def realize_dilution(kind: DilutedFibonacci, L: int, depth: int, stream: np.random.Generator) -> DilutionMask:
    """Draw independent Bernoulli activations, rate p_x on X layers and p_zz on ZZ layers."""
    if not isinstance(kind, DilutedFibonacci):
        raise ConfigError("realize_dilution needs a DilutedFibonacci schedule")
    if L < 1 or depth < 0:
        raise ConfigError("L must be >= 1 and depth >= 0")
    word = kind.word(depth)
    rates = np.where(word.bits == 1, kind.p_x, kind.p_zz)
    active = stream.random((depth, L)) < rates[:, None]
    active.flags.writeable = False
    return DilutionMask(word, active)


def full_mask(word: Word, L: int) -> DilutionMask:
    """Mask with every slot active (undiluted schedule)."""
    active = np.ones((len(word), L), dtype=bool)
    active.flags.writeable = False
    return DilutionMask(Word(word), active)

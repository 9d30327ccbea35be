from __future__ import annotations

import numpy as np
import pytest

from fibmon.errors import ConfigError, SizeError
from fibmon.schedule import (PHI, DilutedFibonacci, Fibonacci, Floquet, Word, dual_word, fib_prefix, fib_word,
                             fibonacci, fibonacci_index, fibonacci_times, full_mask, realize_dilution, symbol_counts)
from fibmon.config import stream


class TestFibonacciNumbers:
    @pytest.mark.parametrize("n,f", [(0, 0), (1, 1), (2, 1), (12, 144), (15, 610), (17, 1597), (19, 4181)])
    def test_values(self, n, f):
        assert fibonacci(n) == f

    def test_times_are_distinct(self):
        assert fibonacci_times(34) == [1, 2, 3, 5, 8, 13, 21, 34]

    @pytest.mark.parametrize("t,k", [(610, 15), (4181, 19), (2, 3), (1, 2), (4, None)])
    def test_index(self, t, k):
        assert fibonacci_index(t) == k


class TestWords:
    def test_first_generations(self):
        assert str(fib_word(0)) == "1"
        assert str(fib_word(1)) == "10"
        assert str(fib_word(4)) == "10110101"

    @pytest.mark.parametrize("k", range(2, 18))
    def test_concatenation_rule(self, k):
        assert fib_word(k) == fib_word(k - 1) + fib_word(k - 2)

    @pytest.mark.parametrize("k", range(0, 20))
    def test_length(self, k):
        assert len(fib_word(k)) == fibonacci(k + 2)

    def test_no_double_zero(self):
        assert "00" not in str(fib_word(16))

    def test_symbol_ratio_tends_to_phi(self):
        n1, n0 = symbol_counts(fib_word(25))
        assert n1 / n0 == pytest.approx(PHI, rel=1e-8)

    def test_prefix_is_stable(self):
        a = fib_prefix(1000)
        assert a == fib_word(20).prefix(1000)
        assert fib_prefix(610) == fib_word(13)

    def test_dual_flips(self):
        assert str(dual_word(Word("1011"))) == "0100"

    def test_bad_symbols(self):
        with pytest.raises(ConfigError):
            Word("102")
        with pytest.raises(ConfigError):
            Word([0, 2])

    def test_generation_cap(self):
        with pytest.raises(SizeError):
            fib_word(41)

    def test_prefix_too_long(self):
        with pytest.raises(SizeError):
            Word("10").prefix(3)

    def test_bits_copy_does_not_alias(self):
        w = Word("101")
        b = w.bits
        b[0] = 0
        assert str(w) == "101"


class TestSchedules:
    def test_floquet_period(self):
        assert str(Floquet().word(7)) == "1010101"

    def test_fibonacci_generation_backing(self):
        with pytest.raises(SizeError):
            Fibonacci(generation=3).word(6)

    def test_dilution_rates(self):
        kind = DilutedFibonacci(0.3, 0.7)
        m = realize_dilution(kind, 64, 610, stream(5, 0))
        bits = m.word.bits
        assert m.active[bits == 1].mean() == pytest.approx(0.3, abs=0.01)
        assert m.active[bits == 0].mean() == pytest.approx(0.7, abs=0.01)
        assert not m.active.flags.writeable

    def test_dilution_reproducible(self):
        kind = DilutedFibonacci(0.5, 0.5)
        a = realize_dilution(kind, 8, 50, stream(1, 3)).active
        b = realize_dilution(kind, 8, 50, stream(1, 3)).active
        np.testing.assert_array_equal(a, b)

    def test_dilution_bad_rate(self):
        with pytest.raises(ConfigError):
            DilutedFibonacci(1.2, 0.5)

    def test_full_mask(self):
        m = full_mask(fib_prefix(13), 4)
        assert m.active.all() and m.depth == 13 and m.L == 4

"""Per-trajectory outputs shared by all backends."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import fibonacci_times

X_KIND = 1
ZZ_KIND = 0
KIND_NAMES = {X_KIND: "X", ZZ_KIND: "ZZ"}


@dataclass(frozen=True)
class Op:
    """X on ``site`` (kind 1) or Z_site Z_{site+1 mod L} (kind 0)."""

    kind: int
    site: int

    @classmethod
    def x(cls, j: int) -> Op:
        return cls(X_KIND, j)

    @classmethod
    def zz(cls, j: int) -> Op:
        return cls(ZZ_KIND, j)

    def sites(self, L: int) -> tuple[int, ...]:
        return (self.site,) if self.kind == X_KIND else (self.site, (self.site + 1) % L)


@dataclass(frozen=True)
class MeasurementRecord:
    """Flat arrays, one entry per measurement, in application order.

    ``layer`` is 0-based; ``kind`` uses the word symbols (1 = X, 0 = ZZ);
    ``prob`` is the probability of the realised outcome.
    """

    layer: np.ndarray
    site: np.ndarray
    kind: np.ndarray
    tau: np.ndarray
    outcome: np.ndarray
    prob: np.ndarray

    def __len__(self) -> int:
        return int(self.layer.size)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("layer", "site", "kind", "tau", "outcome", "prob")}

    @classmethod
    def from_dict(cls, d: dict) -> MeasurementRecord:
        return cls(
            np.asarray(d["layer"], np.int64), np.asarray(d["site"], np.int64),
            np.asarray(d["kind"], np.int8), np.asarray(d["tau"], float),
            np.asarray(d["outcome"], np.int8), np.asarray(d["prob"], float),
        )


class RecordBuilder:
    def __init__(self):
        self._rows: list[tuple] = []

    def add(self, layer: int, site: int, kind: int, tau: float, outcome: int, prob: float) -> None:
        self._rows.append((layer, site, kind, tau, outcome, prob))

    def build(self) -> MeasurementRecord:
        if not self._rows:
            empty = np.zeros(0)
            return MeasurementRecord(empty.astype(np.int64), empty.astype(np.int64), empty.astype(np.int8),
                                     empty, empty.astype(np.int8), empty)
        cols = list(zip(*self._rows))
        return MeasurementRecord(
            np.asarray(cols[0], np.int64), np.asarray(cols[1], np.int64), np.asarray(cols[2], np.int8),
            np.asarray(cols[3], float), np.asarray(cols[4], np.int8), np.asarray(cols[5], float),
        )


@dataclass(frozen=True)
class EntropySeries:
    """Entropies (nats) after ``times[i]`` layers for each cut in ``cuts``."""

    times: np.ndarray
    cuts: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.times.size, len(self.cuts)):
            raise ValueError(f"values shape {self.values.shape} inconsistent with "
                             f"{self.times.size} times x {len(self.cuts)} cuts")

    @property
    def fibonacci_mask(self) -> np.ndarray:
        fib = set(fibonacci_times(int(self.times.max()) if self.times.size else 0))
        return np.array([int(t) in fib for t in self.times], dtype=bool)

    def cut(self, l: int) -> np.ndarray:
        return self.values[:, self.cuts.index(l)]

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "cuts": list(self.cuts), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> EntropySeries:
        vals = np.asarray(d["values"], float).reshape(len(d["times"]), len(d["cuts"]))
        return cls(np.asarray(d["times"], np.int64), tuple(d["cuts"]), vals)


def sample_times(depth: int, fibonacci_only: bool) -> np.ndarray:
    """Layer counts at which observables are recorded (always includes ``depth``)."""
    if not fibonacci_only:
        return np.arange(1, depth + 1)
    ts = set(fibonacci_times(depth))
    ts.add(depth)
    return np.array(sorted(ts), dtype=np.int64)

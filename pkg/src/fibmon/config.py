"""Run configuration, parameter conversions and per-trajectory random streams."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum

import numpy as np

from .errors import ConfigError


class Protocol(str, Enum):
    POSTSELECTED = "postselected"
    BORN = "born"
    CLIFFORD = "clifford"
    PERCOLATION = "percolation"


class KrausConvention(str, Enum):
    """How the strength tau enters the Kraus operator.

    ``exponent-tau``: M ~ exp(tau s O), Born probability (1 + s tanh(2 tau) <O>)/2.
    ``exponent-half-tau``: M ~ exp(tau s O / 2), probability (1 + s tanh(tau) <O>)/2.
    """

    EXPONENT_TAU = "exponent-tau"
    EXPONENT_HALF_TAU = "exponent-half-tau"


def kraus_exponent(tau: float, convention: KrausConvention | str = KrausConvention.EXPONENT_TAU) -> float:
    """Coefficient a in M ~ exp(a s O) for measurement strength tau."""
    if tau < 0 or math.isnan(tau):
        raise ConfigError(f"measurement strength must be >= 0, got {tau}")
    return tau if KrausConvention(convention) is KrausConvention.EXPONENT_TAU else tau / 2.0


def p_from_tau(tau):
    """Dilution probability p = 1 - exp(-tau)."""
    return -np.expm1(-np.asarray(tau, dtype=float)) if np.ndim(tau) else -math.expm1(-tau)


def tau_from_p(p):
    """Inverse of :func:`p_from_tau`; p = 1 maps to infinity."""
    with np.errstate(divide="ignore"):
        return -np.log1p(-np.asarray(p, dtype=float)) if np.ndim(p) else (
            math.inf if p == 1.0 else -math.log1p(-p))


def stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent reproducible generator for trajectory ``index``.

    Philox is counter-based; the key is derived from (master_seed, index) through
    SeedSequence so streams never share state.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class RunConfig:
    protocol: Protocol = Protocol.BORN
    L: int = 16
    depth: int = 610
    tau_x: float | None = None
    tau_zz: float | None = None
    p_x: float | None = None
    p_zz: float | None = None
    n_trajectories: int = 1
    master_seed: int = 0
    kraus_convention: KrausConvention = KrausConvention.EXPONENT_TAU
    cuts: tuple[int, ...] | None = None
    record_outcomes: bool = False
    fibonacci_only_sampling: bool = False
    final_only_sampling: bool = False
    with_reference: bool = False
    schedule: str = "fibonacci"
    backend: str = "auto"
    reorth_every: int = 50
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "kraus_convention", KrausConvention(self.kraus_convention))
        if self.cuts is not None:
            object.__setattr__(self, "cuts", tuple(int(c) for c in self.cuts))
        # fill whichever parametrisation is missing
        for t_name, p_name in (("tau_x", "p_x"), ("tau_zz", "p_zz")):
            t, p = getattr(self, t_name), getattr(self, p_name)
            if t is None and p is not None:
                object.__setattr__(self, t_name, float(tau_from_p(p)))
            elif p is None and t is not None:
                object.__setattr__(self, p_name, float(p_from_tau(t)))
        self.validate()

    def validate(self) -> None:
        if self.L < 1:
            raise ConfigError("L must be >= 1")
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if self.tau_x is None or self.tau_zz is None:
            raise ConfigError("set (tau_x, tau_zz) or (p_x, p_zz)")
        for name in ("tau_x", "tau_zz"):
            v = getattr(self, name)
            if math.isnan(v) or v < 0:
                raise ConfigError(f"{name} must be >= 0, got {v}")
        for name in ("p_x", "p_zz"):
            v = getattr(self, name)
            if math.isnan(v) or not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.cuts is not None and any(not 1 <= c < self.L for c in self.cuts):
            raise ConfigError(f"cuts must lie in [1, L-1], got {self.cuts}")
        if self.schedule not in ("fibonacci", "floquet"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.reorth_every < 1:
            raise ConfigError("reorth_every must be >= 1")

    def sample_times(self) -> np.ndarray:
        """Layer counts at which entropies are recorded."""
        from .records import sample_times

        if self.final_only_sampling:
            return np.array([self.depth], dtype=np.int64)
        return sample_times(self.depth, self.fibonacci_only_sampling)

    @property
    def resolved_cuts(self) -> tuple[int, ...]:
        return self.cuts if self.cuts is not None else (self.L // 2,)

    def with_(self, **changes) -> RunConfig:
        """Copy with changes; changing one parametrisation drops the stale other one."""
        if ("tau_x" in changes) and "p_x" not in changes:
            changes["p_x"] = None
        if ("p_x" in changes) and "tau_x" not in changes:
            changes["tau_x"] = None
        if ("tau_zz" in changes) and "p_zz" not in changes:
            changes["p_zz"] = None
        if ("p_zz" in changes) and "tau_zz" not in changes:
            changes["tau_zz"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protocol"] = self.protocol.value
        d["kraus_convention"] = self.kraus_convention.value
        d["cuts"] = list(self.cuts) if self.cuts is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if d.get("cuts") is not None:
            d["cuts"] = tuple(d["cuts"])
        # a dict echoed from to_dict carries both parametrisations; keep tau when both are set
        if d.get("tau_x") is not None:
            d["p_x"] = None
        if d.get("tau_zz") is not None:
            d["p_zz"] = None
        return cls(**d)

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("n_trajectories")
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

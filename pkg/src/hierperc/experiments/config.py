"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from ..errors import ParameterError
from ..geometry import LatticeSpec, TorusSpec
from ..kernel import KernelSpec, ModelParams, check_theta

SUITES = (
    "phase-sweep",
    "critical-window",
    "surplus-girth",
    "diagnostics",
    "two-point",
    "branching",
    "coalescent-reference",
    "torus",
)

# suites that read the barely-subcritical tables
NEEDS_THETA = {"diagnostics", "two-point", "branching"}

_SECTION = "config"


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str
    L: int = 2
    d: int = 1
    alpha: float = 0.5
    A: float = 1.0
    theta: Optional[float] = None
    lam: float = 0.0
    n: tuple = (9,)
    replicates: int = 100
    master_seed: int = 0
    output_dir: str = "results"
    size_cap: int = 10**7
    surplus_cap: int = 12
    pair_cap: int = 10_000
    eps: tuple = (-0.5, 0.5)
    lams: tuple = ()
    m: tuple = ()
    theta_prime: Optional[float] = None
    grid_dt: float = 1e-4
    limit_replicates: int = 2000
    largest: int = 4
    comment: str = field(default="", compare=False)

    _PARSERS = {
        "suite": str, "L": int, "d": int, "alpha": float, "A": float, "theta": _opt_float,
        "lam": float, "n": _ints, "replicates": int, "master_seed": int, "output_dir": str,
        "size_cap": int, "surplus_cap": int, "pair_cap": int, "eps": _floats, "lams": _floats,
        "m": _ints, "theta_prime": _opt_float, "grid_dt": float, "limit_replicates": int,
        "largest": int, "comment": str,
    }
    _ALIASES = {"lambda": "lam", "seed": "master_seed", "n_values": "n"}

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), delimiters=("=",))
        cp.optionxform = str
        try:
            cp.read_string(f"[{_SECTION}]\n" + text)
        except configparser.Error as exc:
            raise ParameterError(f"malformed config: {exc}") from exc
        values = {}
        for key, raw in cp[_SECTION].items():
            name = cls._ALIASES.get(key, key)
            if name not in cls._PARSERS:
                raise ParameterError(f"unknown config key {key!r}")
            try:
                values[name] = cls._PARSERS[name](raw.strip())
            except ValueError as exc:
                raise ParameterError(f"bad value for {key!r}: {raw!r}") from exc
        if "suite" not in values:
            raise ParameterError("config needs a 'suite' key")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        """Canonical serialization, one ``key=value`` per line in field order."""
        lines = []
        for f in fields(self):
            if f.name == "comment" and not self.comment:
                continue
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)
            elif isinstance(val, float):
                val = repr(val)
            elif val is None:
                val = "none"
            lines.append(f"{f.name}={val}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def header(self) -> dict:
        return dict(line.split("=", 1) for line in self.to_text().splitlines())

    def kernel(self, lam: Optional[float] = None) -> KernelSpec:
        return KernelSpec(alpha=self.alpha, A=self.A, theta=self.theta,
                          lam=self.lam if lam is None else lam)

    def params(self, n: int, lam: Optional[float] = None) -> ModelParams:
        return ModelParams.build(LatticeSpec(self.L, self.d, n), self.kernel(lam))

    def validate(self) -> None:
        """Check every derived object can be built before any sampling starts."""
        if self.suite not in SUITES:
            raise ParameterError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.replicates < 1 or self.limit_replicates < 1:
            raise ParameterError("replicate counts must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ParameterError("master_seed must fit in 64 bits")
        if min(self.size_cap, self.surplus_cap, self.pair_cap, self.largest) < 1:
            raise ParameterError("caps must be positive")
        if not self.grid_dt > 0:
            raise ParameterError("grid_dt must be positive")
        if self.suite in NEEDS_THETA and self.theta is None:
            raise ParameterError(f"suite {self.suite!r} needs theta")
        if self.suite == "torus":
            if not self.m:
                raise ParameterError("torus suite needs m")
            for m in self.m:
                TorusSpec(m, self.d)
            if self.theta_prime is not None and not self.alpha < self.theta_prime < self.d:
                raise ParameterError("theta_prime must lie in (alpha, d)")
            KernelSpec(alpha=self.alpha, A=self.A).validate_for(self.d, require_theta=False)
            return
        if self.suite == "coalescent-reference":
            return
        if not self.n:
            raise ParameterError("need at least one n")
        if self.theta is not None:
            check_theta(self.alpha, self.theta, self.d)
        if self.suite == "phase-sweep":
            if any(not e > -1 for e in self.eps):
                raise ParameterError("every eps must exceed -1")
        lams = self.lams or (self.lam,)
        for n in self.n:
            for lam in lams:
                self.params(n, lam)

"""Experiment configuration: JSON schema, validation, scheme descriptors.

The on-disk format is a JSON object (versioned by ``schema_version``)::

    {
      "schema_version": 1,
      "problem": {
        "kind": "bandwidth" | "cournot" | "quadratic",
        "settings": [ {"name": "S1", ...knobs...}, ... ]
      },
      "schemes": [ {"kind": "DASA"}, {"kind": "HSA", "theta": 1.0},
                   {"kind": "MSR-DASA"}, {"kind": "MCR-HSA", "theta": 10} ],
      "runs": 25,
      "iterations": 4000,
      "base_seed": 20240501,
      "ci_level": 0.9,
      "record_every": 10,
      "reference": {"samples": 10000, "z_samples": 10000,
                    "tol": 1e-8, "max_iters": 1000000},
      "output_dir": "results"
    }

Setting rows carry the per-problem knobs: bandwidth uses
m_b/m_c/m_xi/d_xi, cournot uses eps/eta_reg/x0/m_a/cap/cap_prime, the
quadratic uses n/seed/cond/noise_half.  Unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ParameterError

__all__ = ["SchemeSpec", "ReferenceSpec", "ExperimentConfig"]

SCHEMA_VERSION = 1

SCHEME_KINDS = ("DASA", "HSA", "MSR-DASA", "MCR-DASA", "MSR-HSA", "MCR-HSA")
PROBLEM_KINDS = ("bandwidth", "cournot", "quadratic")

_SETTING_KEYS = {
    "bandwidth": {"name", "m_b", "m_c", "m_xi", "d_xi"},
    "cournot": {"name", "eps", "eta_reg", "x0", "m_a", "cap", "cap_prime",
                "sigma", "c_cost"},
    "quadratic": {"name", "n", "seed", "cond", "noise_half"},
}


@dataclass(frozen=True)
class SchemeSpec:
    kind: str
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ParameterError(f"unknown scheme kind {self.kind!r}")
        if self.harmonic:
            if self.theta is None or self.theta <= 0:
                raise ParameterError(f"{self.kind} requires a positive theta")
        elif self.theta is not None:
            raise ParameterError(f"{self.kind} takes no theta")

    @property
    def harmonic(self) -> bool:
        return self.kind.endswith("HSA")

    @property
    def smoothing_kind(self) -> str | None:
        if self.kind.startswith("MSR"):
            return "msr"
        if self.kind.startswith("MCR"):
            return "mcr"
        return None

    @property
    def label(self) -> str:
        if self.harmonic:
            return f"{self.kind}({self.theta:g})"
        return self.kind


@dataclass(frozen=True)
class ReferenceSpec:
    samples: int = 10_000
    z_samples: int = 10_000
    tol: float = 1e-8
    max_iters: int = 1_000_000

    def __post_init__(self):
        if self.samples < 1000:
            raise ParameterError("reference needs at least 1000 samples")
        if self.z_samples < 1:
            raise ParameterError("z_samples must be positive")
        if self.tol <= 0:
            raise ParameterError("reference tol must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    problem_kind: str
    settings: tuple[dict, ...]
    schemes: tuple[SchemeSpec, ...]
    runs: int
    iterations: int
    base_seed: int
    output_dir: str
    ci_level: float = 0.9
    record_every: int = 10
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ParameterError(
                f"unsupported schema_version {self.schema_version}, expected {SCHEMA_VERSION}")
        if self.problem_kind not in PROBLEM_KINDS:
            raise ParameterError(f"unknown problem kind {self.problem_kind!r}")
        if self.runs < 2:
            raise ParameterError("need at least 2 runs for confidence intervals")
        if self.iterations < 1:
            raise ParameterError("iterations must be positive")
        if not 0.0 < self.ci_level < 1.0:
            raise ParameterError("ci_level must lie in (0, 1)")
        if self.record_every < 1:
            raise ParameterError("record_every must be positive")
        if not self.settings:
            raise ParameterError("at least one setting row is required")
        if not self.schemes:
            raise ParameterError("at least one scheme is required")
        allowed = _SETTING_KEYS[self.problem_kind]
        names = set()
        for row in self.settings:
            if "name" not in row:
                raise ParameterError("every setting row needs a name")
            unknown = set(row) - allowed
            if unknown:
                raise ParameterError(
                    f"setting {row['name']!r} has unknown keys {sorted(unknown)}")
            if row["name"] in names:
                raise ParameterError(f"duplicate setting name {row['name']!r}")
            names.add(row["name"])
        labels = [s.label for s in self.schemes]
        if len(labels) != len(set(labels)):
            raise ParameterError("duplicate scheme entries")

    # --- (de)serialization ---------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            problem = d["problem"]
            schemes = tuple(SchemeSpec(kind=s["kind"], theta=s.get("theta"))
                            for s in d["schemes"])
            ref = ReferenceSpec(**d.get("reference", {}))
            return cls(
                schema_version=d.get("schema_version", SCHEMA_VERSION),
                problem_kind=problem["kind"],
                settings=tuple(dict(r) for r in problem["settings"]),
                schemes=schemes,
                runs=int(d["runs"]),
                iterations=int(d["iterations"]),
                base_seed=int(d["base_seed"]),
                ci_level=float(d.get("ci_level", 0.9)),
                record_every=int(d.get("record_every", 10)),
                reference=ref,
                output_dir=str(d["output_dir"]),
            )
        except KeyError as exc:
            raise ParameterError(f"config is missing required field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"malformed config: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "problem": {"kind": self.problem_kind,
                        "settings": [dict(r) for r in self.settings]},
            "schemes": [
                {"kind": s.kind, **({"theta": s.theta} if s.theta is not None else {})}
                for s in self.schemes],
            "runs": self.runs,
            "iterations": self.iterations,
            "base_seed": self.base_seed,
            "ci_level": self.ci_level,
            "record_every": self.record_every,
            "reference": {
                "samples": self.reference.samples,
                "z_samples": self.reference.z_samples,
                "tol": self.reference.tol,
                "max_iters": self.reference.max_iters,
            },
            "output_dir": self.output_dir,
        }

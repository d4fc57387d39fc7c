"""Flat key = value experiment configuration.

One text file drives a whole run: lattice size, flow parameters, analysis
thresholds, and the seed.  Unknown keys are rejected in one shot (every
offending key listed), and outputs embed the resolved text so a run can be
reproduced from its artifacts alone.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

from .lattice import LatticeSpec
from .solve import FlowConfig

_DEFAULTS = (
    ("n_per_axis", 4),
    ("spacing", 1.0),
    ("step_size", 0.25),
    ("max_steps", 2000),
    ("grad_tol", 1e-8),
    ("residual_tol", 1e-4),
    ("backtracking", 0.5),
    ("seed", 0),
    ("amplitude", 1e-2),
    ("higgs_amplitude", 0.0),
    ("kmax", 1),
    ("kappa", 1.0),
    ("epsilon", 0.1),
    ("c_tol", 5.0),
    ("radius_count", 10),
)


@dataclass(frozen=True)
class ExperimentConfig:
    n_per_axis: int = 4
    spacing: float = 1.0
    step_size: float = 0.25
    max_steps: int = 2000
    grad_tol: float = 1e-8
    residual_tol: float = 1e-4
    backtracking: float = 0.5
    seed: int = 0
    amplitude: float = 1e-2
    higgs_amplitude: float = 0.0
    kmax: int = 1
    kappa: float = 1.0
    epsilon: float = 0.1
    c_tol: float = 5.0
    radius_count: int = 10

    def lattice(self) -> LatticeSpec:
        return LatticeSpec(self.n_per_axis, self.spacing)

    def flow(self) -> FlowConfig:
        return FlowConfig(
            step_size=self.step_size,
            max_steps=self.max_steps,
            grad_tol=self.grad_tol,
            residual_tol=self.residual_tol,
            backtracking=self.backtracking,
            seed=self.seed,
        )

    def to_text(self) -> str:
        values = asdict(self)
        lines = []
        for key, default in _DEFAULTS:
            v = values[key]
            lines.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    """Parse key = value lines; '#' starts a comment; unknown keys all reported."""
    known = dict(_DEFAULTS)
    seen: dict = {}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            unknown.append(key)
            continue
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        default = known[key]
        try:
            seen[key] = int(value) if isinstance(default, int) else float(value)
        except ValueError:
            raise ValueError(f"line {lineno}: cannot parse {key} = {value!r}") from None
    if unknown:
        raise ValueError("unknown config keys: " + ", ".join(sorted(unknown)))
    return ExperimentConfig(**seen)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="ascii") as f:
        return parse_config(f.read())


def worker_count() -> int:
    """Worker cap from DTIL_THREADS; default: all visible cores."""
    raw = os.environ.get("DTIL_THREADS", "")
    if raw:
        count = int(raw)
        if count < 1:
            raise ValueError("DTIL_THREADS must be a positive integer")
        return count
    return os.cpu_count() or 1

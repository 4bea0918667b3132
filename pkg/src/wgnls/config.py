"""
Run configuration: a nested YAML document validated before any compute.

Example::

    command: ground-state
    seed: 7
    model: {d: 1, alpha: 6.0}
    grid: {Lx: 20.0, Nx: 512, Ny: 64}
    sweep: {c: [14.0], lam: [1.0]}
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .functionals import ModelParams

__all__ = [
    "COMMANDS",
    "ConfigError",
    "ModelSection",
    "GridSection",
    "SolverSection",
    "EvolutionSection",
    "SweepSection",
    "OutputSection",
    "RunConfig",
    "load_config",
    "dump_config",
    "rng_for",
]

COMMANDS = ("ground-state", "curve", "bifurcation", "evolve", "verify", "exponents")
INIT_MODES = ("broken", "symmetric")
INITIAL_DATA = ("soliton", "gaussian", "file")


class ConfigError(ValueError):
    """Every violated precondition, each prefixed by the module that owns it."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class ModelSection:
    d: int = 1
    alpha: float = 6.0


@dataclass
class GridSection:
    Lx: float = 20.0
    Nx: int = 512
    Ny: int = 64


@dataclass
class SolverSection:
    tau0: float = 0.1
    max_iter: int = 4000
    grad_tol: float = 1e-12
    stall_tol: float = 1e-18
    pde_tol: float = 1e-4
    k_tol: float = 1e-8
    init: str = "broken"
    eps: float = 0.3
    perturb: float = 0.0
    both_branches: bool = True
    bracket_tol: float = 1e-2
    # grid.Lx is the box at the reference mass; a solve at mass c scales it
    # by (c / c_ref)^(alpha/(alpha d - 4)) as curve and bifurcation do.
    rescale_box: bool = True


@dataclass
class EvolutionSection:
    dt: float = 1e-3
    t_end: float = 1.0
    record_every: int = 10
    R: float = 5.0
    blowup_grad_factor: float = 1e3
    leak_tol: float = 1e-6
    scatter_pot_factor: float = 0.1
    energy_fail_tol: float = 1e-2
    checkpoint_every: int = 0
    initial: str = "soliton"
    mass: float = 17.0
    dilation: float = 1.0
    amplitude: float = 1.0
    width: float = 2.0
    y_perturb: float = 0.0
    field_path: str = ""


@dataclass
class SweepSection:
    c: list = field(default_factory=lambda: [1.0])
    lam: list = field(default_factory=lambda: [1.0])


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["json", "csv", "field"])


_SECTIONS = {
    "model": ModelSection,
    "grid": GridSection,
    "solver": SolverSection,
    "evolution": EvolutionSection,
    "sweep": SweepSection,
    "output": OutputSection,
}


@dataclass
class RunConfig:
    command: str = "ground-state"
    seed: int = 0
    workers: int = 1
    model: ModelSection = field(default_factory=ModelSection)
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        data = dict(data or {})
        problems = []
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                problems.append(f"cli_io: unknown top-level key {key!r}")
        for f in fields(cls):
            if f.name not in data:
                continue
            val = data[f.name]
            if f.name in _SECTIONS:
                sec = _SECTIONS[f.name]
                if not isinstance(val, dict):
                    problems.append(f"cli_io: section {f.name!r} must be a mapping")
                    continue
                names = {g.name: g for g in fields(sec)}
                bad = [k for k in val if k not in names]
                problems += [f"cli_io: unknown key {f.name}.{k}" for k in bad]
                kwargs[f.name] = sec(**{k: _coerce(names[k], v) for k, v in val.items() if k in names})
            else:
                kwargs[f.name] = val
        if problems:
            raise ConfigError(problems)
        return cls(**kwargs)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def content_hash(self) -> str:
        """Git blob hash of the canonical YAML form."""
        body = yaml.safe_dump(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()

    def model_params(self) -> ModelParams:
        return ModelParams(self.model.d, self.model.alpha)

    def validate(self) -> "RunConfig":
        """Raise :class:`ConfigError` listing every violated precondition."""
        problems = []
        if self.command not in COMMANDS:
            problems.append(f"cli_io: command must be one of {COMMANDS}, got {self.command!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            problems.append("cli_io: seed must be an unsigned 64-bit integer")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            problems.append("cli_io: workers must be a positive integer")
        if self.model.d not in (1, 2):
            problems.append(f"spectral_core: Grid requires d in (1, 2), got {self.model.d}")
        problems += ModelParams.violations(self.model)  # type: ignore[arg-type]
        g = self.grid
        if not (isinstance(g.Lx, (int, float)) and math.isfinite(g.Lx) and g.Lx > 0):
            problems.append("spectral_core: Grid.Lx must be positive and finite")
        for name in ("Nx", "Ny"):
            n = getattr(g, name)
            if not (isinstance(n, int) and n >= 8 and n % 2 == 0):
                problems.append(f"spectral_core: Grid.{name} must be an even integer >= 8")
        s = self.solver
        if s.init not in INIT_MODES:
            problems.append(f"ground_state: init must be one of {INIT_MODES}")
        for name in ("tau0", "pde_tol", "k_tol", "bracket_tol"):
            if not getattr(s, name) > 0:
                problems.append(f"ground_state: solver.{name} must be positive")
        if not (isinstance(s.max_iter, int) and s.max_iter >= 1):
            problems.append("ground_state: solver.max_iter must be a positive integer")
        if s.perturb < 0:
            problems.append("ground_state: solver.perturb must be non-negative")
        e = self.evolution
        if not e.dt > 0:
            problems.append("dynamics: evolution.dt must be positive")
        if not e.t_end >= 0:
            problems.append("dynamics: evolution.t_end must be non-negative")
        if not (isinstance(e.record_every, int) and e.record_every >= 1):
            problems.append("dynamics: evolution.record_every must be a positive integer")
        if not 0 < e.R < g.Lx:
            problems.append("dynamics: evolution.R must lie in (0, Lx)")
        if e.initial not in INITIAL_DATA:
            problems.append(f"dynamics: evolution.initial must be one of {INITIAL_DATA}")
        if e.initial == "file" and not e.field_path:
            problems.append("dynamics: evolution.field_path is required for initial: file")
        if self.command == "evolve" and e.initial == "soliton" and self.model.d != 1:
            problems.append("dynamics: soliton initial data needs the closed-form profile (d = 1)")
        for name in ("mass", "dilation", "amplitude", "width"):
            if not getattr(e, name) > 0:
                problems.append(f"dynamics: evolution.{name} must be positive")
        for axis in ("c", "lam"):
            vals = getattr(self.sweep, axis)
            if not isinstance(vals, list) or not vals:
                problems.append(f"bifurcation: sweep.{axis} must be a non-empty list")
            elif any(not (isinstance(v, (int, float)) and v > 0) for v in vals):
                problems.append(f"bifurcation: sweep.{axis} entries must be positive numbers")
        if self.command == "curve":
            cs = self.sweep.c
            if len(cs) < 2 or any(b <= a for a, b in zip(cs[:-1], cs[1:])):
                problems.append("bifurcation: curve needs a strictly increasing sweep.c with >= 2 knots")
        fmts = set(self.output.formats)
        if not fmts <= {"json", "csv", "field"}:
            problems.append("cli_io: output.formats may contain json, csv, field")
        if problems:
            raise ConfigError(problems)
        return self


def _coerce(f, v):
    # YAML reads 1e-8 as a string and 20 as an int.
    if f.type in ("float", float) and isinstance(v, (int, str)) and not isinstance(v, bool):
        try:
            return float(v)
        except ValueError:
            return v
    if f.type in ("list", list) and isinstance(v, list):
        return [_maybe_float(x) for x in v]
    return v


def _maybe_float(x):
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError:
            return x
    return x


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_dict(yaml.safe_load(fh))


def dump_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(cfg.to_yaml())


def rng_for(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream ``index`` of ``seed``; independent of worker layout."""
    return np.random.Generator(np.random.Philox(key=int(seed) | (int(index) << 64)))

"""YAML experiment configurations and the objects they build."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .domain import BUILTIN_POTENTIALS, DECAY_CLASSES, Annulus, Ball, Mesh, RadialMesh, RegionSpec, Superlevel, make_potential
from .errors import ConfigError, InvalidParameters

MODES = ("ground", "pinned", "symmetric")
SEED_MODES = ("warm", "cold")
FORMATS = ("csv", "json", "gnuplot", "npy", "fields_csv")

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


@dataclass
class ProblemBlock:
    dimension: int
    p: float
    potential: dict
    region: dict
    penalization: str | None = None


@dataclass
class MeshBlock:
    kind: str = "tensor"
    L: float = 10.0
    M: int = 401


@dataclass
class SweepBlock:
    eps: list
    mode: str = "ground"
    target: list | None = None
    seed: list | None = None
    seed_mode: str = "warm"


@dataclass
class ToleranceBlock:
    tol_grad: float = 1e-8
    max_iter: int = 5000
    kappas: list = field(default_factory=lambda: [10.0, 1.0, 0.1, 0.0])
    drift_radius: float | None = None


@dataclass
class OutputBlock:
    directory: str | None = None
    formats: list = field(default_factory=lambda: ["csv", "json", "gnuplot", "npy"])


@dataclass
class ExperimentConfig:
    name: str
    problem: ProblemBlock
    mesh: MeshBlock
    sweep: SweepBlock
    tolerances: ToleranceBlock = field(default_factory=ToleranceBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    source: str | None = None

    # builders -----------------------------------------------------------

    @property
    def N(self):
        return self.problem.dimension

    def potential(self):
        spec = dict(self.problem.potential)
        params = spec.pop("params", None) or {}
        try:
            return make_potential(
                self.N,
                name=spec.get("name"),
                expression=spec.get("expression"),
                decay_class=spec.get("decay_class"),
                **params,
            )
        except (InvalidParameters, TypeError) as exc:
            raise ConfigError(f"potential: {exc}") from exc

    def region(self, V=None):
        V = V or self.potential()
        r = self.problem.region
        N = self.N
        kind = r.get("kind", "superlevel")
        center = _point(r.get("center", [0.0] * N), N, "region.center")
        try:
            if kind == "superlevel":
                shape = Superlevel(V, float(r["level"]), center, float(r.get("search_radius", 50.0)))
            elif kind == "ball":
                shape = Ball(center, float(r["radius"]))
            elif kind == "annulus":
                shape = Annulus(center, float(r["inner"]), float(r["outer"]))
            else:
                raise ConfigError(f"unknown region kind {kind!r}")
            return RegionSpec(
                shape,
                _point(r.get("x0", center), N, "region.x0"),
                float(r["rho"]),
                None if r.get("rho0") is None else float(r["rho0"]),
                float(r.get("beta_pen", 1.0)),
                float(r.get("mu", 0.5)),
            )
        except KeyError as exc:
            raise ConfigError(f"region is missing {exc.args[0]!r}") from exc
        except InvalidParameters as exc:
            raise ConfigError(f"region: {exc}") from exc

    def build_mesh(self):
        m = self.mesh
        if m.kind == "tensor":
            return Mesh(self.N, float(m.L), int(m.M))
        return RadialMesh(self.N, float(m.L), int(m.M))

    def to_dict(self):
        return {
            "name": self.name,
            "problem": dict(vars(self.problem)),
            "mesh": dict(vars(self.mesh)),
            "sweep": dict(vars(self.sweep)),
            "tolerances": dict(vars(self.tolerances)),
            "output": dict(vars(self.output)),
        }

    def with_overrides(self, **changes):
        """Copy with sweep/tolerance fields replaced (e.g. mode, seed_mode, eps)."""
        new = copy.deepcopy(self)
        for key, value in changes.items():
            for block in (new.sweep, new.tolerances, new.mesh):
                if hasattr(block, key):
                    setattr(block, key, value)
                    break
            else:
                raise ConfigError(f"unknown override {key!r}")
        validate_config(new)
        return new


def _point(value, N, where):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size != N:
        raise ConfigError(f"{where} must have {N} coordinates, got {arr.size}")
    return arr


def _block(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = set(cls.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data, source=None):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    missing = {"name", "problem", "mesh", "sweep"} - set(data)
    if missing:
        raise ConfigError(f"missing top-level blocks: {sorted(missing)}")
    extra = set(data) - {"name", "problem", "mesh", "sweep", "tolerances", "output"}
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    cfg = ExperimentConfig(
        name=str(data["name"]),
        problem=_block(ProblemBlock, data["problem"], "problem"),
        mesh=_block(MeshBlock, data["mesh"], "mesh"),
        sweep=_block(SweepBlock, data["sweep"], "sweep"),
        tolerances=_block(ToleranceBlock, data.get("tolerances"), "tolerances"),
        output=_block(OutputBlock, data.get("output"), "output"),
        source=source,
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    """Schema-level checks; mathematical hypotheses are left to validate_hypotheses."""
    pb = cfg.problem
    if pb.dimension not in (1, 2, 3):
        raise ConfigError("problem.dimension must be 1, 2 or 3")
    if not float(pb.p) > 1:
        raise ConfigError("problem.p must exceed 1")
    pot = pb.potential
    if not isinstance(pot, dict):
        raise ConfigError("problem.potential must be a mapping")
    if ("name" in pot) == ("expression" in pot):
        raise ConfigError("problem.potential needs exactly one of name or expression")
    if "name" in pot and pot["name"] not in BUILTIN_POTENTIALS:
        raise ConfigError(f"unknown built-in potential {pot['name']!r}; known: {sorted(BUILTIN_POTENTIALS)}")
    if pot.get("decay_class") is not None and pot["decay_class"] not in DECAY_CLASSES:
        raise ConfigError(f"unknown decay class {pot['decay_class']!r}")
    if not isinstance(pb.region, dict) or "rho" not in pb.region:
        raise ConfigError("problem.region must be a mapping with rho")
    if pb.penalization not in (None, "high_dim", "low_dim"):
        raise ConfigError("problem.penalization must be high_dim or low_dim")

    if cfg.mesh.kind not in ("tensor", "radial"):
        raise ConfigError("mesh.kind must be tensor or radial")
    if not float(cfg.mesh.L) > 0 or int(cfg.mesh.M) < 16:
        raise ConfigError("mesh needs L > 0 and M >= 16")

    sw = cfg.sweep
    eps = sw.eps
    if not isinstance(eps, (list, tuple)) or len(eps) == 0:
        raise ConfigError("sweep.eps must be a nonempty list")
    eps = [float(e) for e in eps]
    if any(e <= 0 for e in eps):
        raise ConfigError("sweep.eps entries must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("sweep.eps must be strictly decreasing")
    sw.eps = eps
    if sw.mode not in MODES:
        raise ConfigError(f"sweep.mode must be one of {MODES}")
    if sw.mode in ("pinned", "symmetric") and sw.target is None:
        raise ConfigError(f"sweep.mode = {sw.mode} needs sweep.target")
    if sw.target is not None:
        _point(sw.target, cfg.N, "sweep.target")
    if sw.seed is not None:
        _point(sw.seed, cfg.N, "sweep.seed")
    if sw.seed_mode not in SEED_MODES:
        raise ConfigError(f"sweep.seed_mode must be one of {SEED_MODES}")

    tol = cfg.tolerances
    if not float(tol.tol_grad) > 0 or int(tol.max_iter) < 1:
        raise ConfigError("tolerances need tol_grad > 0 and max_iter >= 1")
    unknown = set(cfg.output.formats) - set(FORMATS)
    if unknown:
        raise ConfigError(f"unknown output formats {sorted(unknown)}; known: {FORMATS}")
    return cfg


def load_config(path):
    """Read a YAML file, or the bundled config of that name."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        p = CONFIG_DIR / f"{path}.yaml"
    if not p.exists():
        raise ConfigError(f"no configuration at {path}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return config_from_dict(data, source=str(p))


def bundled_configs():
    return sorted(q.stem for q in CONFIG_DIR.glob("*.yaml"))

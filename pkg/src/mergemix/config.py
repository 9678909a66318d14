"""Run configuration: JSON with a published schema, strictly validated.

Unknown keys are rejected by the schema; cross-field constraints (fixture
names, hierarchy leaves, mode-specific sections) are checked here. Nothing
touches the filesystem until the config is fully valid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, MergeMixError
from .gbt import BoostHyper
from .hierarchy import MixtureNode
from .models import ToyNet
from .stats import UtilitySpec
from .training import TrainConfig
from .worlds import (
    DomainSpec,
    FIXTURES,
    QuadraticWorld,
    RegressionWorld,
    World,
)
from .models import Quadratic

DEFAULT_DESIGN_SIZE = 40
DEFAULT_RESOLUTION = 0.05
DEFAULT_BUDGET = 2_000_000


def _load_schema(name: str) -> dict:
    text = resources.files("mergemix.schemas").joinpath(name).read_text("utf-8")
    return json.loads(text)


CONFIG_SCHEMA = _load_schema("config.schema.json")
THEORY_REPORT_SCHEMA = _load_schema("theory_report.schema.json")


@dataclass(frozen=True)
class RunConfig:
    name: str
    seed: int
    mode: str
    world_spec: dict
    train: dict
    design_size: int = DEFAULT_DESIGN_SIZE
    priors: tuple = ()
    hyper: BoostHyper = field(default_factory=BoostHyper)
    utility_spec: UtilitySpec = field(default_factory=UtilitySpec)
    resolution: float = DEFAULT_RESOLUTION
    budget: int = DEFAULT_BUDGET
    hierarchy: dict | None = None
    recalibrate_steps: int | None = None
    consistency_ratios: tuple = ()
    theory: dict = field(default_factory=dict)
    export_datasets: bool = False

    def build_world(self) -> World:
        return build_world(self.world_spec)

    def build_tree(self) -> MixtureNode:
        if self.hierarchy is None:
            raise ConfigError(f"mode {self.mode!r} requires a 'hierarchy' section")
        return MixtureNode.from_dict(self.hierarchy)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=float(self.train["learning_rate"]),
            steps=int(self.train["steps"]),
            batch_size=self.train.get("batch_size", "full"),
            checkpoint_interval=int(self.train.get("checkpoint_interval", 1)),
            seed=seed,
        )


def _build_domain(data: dict) -> DomainSpec:
    kind = data["kind"]
    if kind == "quadratic":
        if "minimizer" not in data or "curvature" not in data:
            raise ConfigError(
                f"quadratic domain {data['name']!r} needs minimizer and curvature"
            )
        return DomainSpec(
            name=data["name"],
            kind="quadratic",
            minimizer=np.asarray(data["minimizer"], dtype=np.float64),
            curvature=np.asarray(data["curvature"], dtype=np.float64),
        )
    required = ("target_weight", "input_dim", "train_size", "heldout_size")
    missing = [key for key in required if key not in data]
    if missing:
        raise ConfigError(
            f"regression domain {data['name']!r} is missing {missing}"
        )
    return DomainSpec(
        name=data["name"],
        kind="regression",
        target_weight=np.asarray(data["target_weight"], dtype=np.float64),
        noise=float(data.get("noise", 0.0)),
        input_dim=int(data["input_dim"]),
        train_size=int(data["train_size"]),
        heldout_size=int(data["heldout_size"]),
        seed=int(data.get("seed", 0)),
    )


def build_world(spec: dict) -> World:
    if "fixture" in spec:
        name = spec["fixture"]
        if name not in FIXTURES:
            raise ConfigError(
                f"unknown fixture {name!r}; available: {sorted(FIXTURES)}"
            )
        return FIXTURES[name]()
    try:
        domains = [_build_domain(d) for d in spec["domains"]]
        kinds = {d.kind for d in domains}
        if kinds == {"quadratic"}:
            quads = [Quadratic(d.minimizer, d.curvature) for d in domains]
            return QuadraticWorld([d.name for d in domains], quads)
        if kinds == {"regression"}:
            model = spec.get("model", {})
            input_dim = domains[0].input_dim
            out_dim = domains[0].target_weight.shape[0]
            net = ToyNet(input_dim, int(model.get("hidden_dim", 8)), out_dim)
            return RegressionWorld(net, domains,
                                   init_seed=int(model.get("init_seed", 0)))
        raise ConfigError("cannot mix quadratic and regression domains")
    except MergeMixError as exc:
        raise ConfigError(str(exc)) from exc


def _validate_cross_fields(data: dict, cfg: RunConfig) -> None:
    world = cfg.build_world()  # resolves fixture names and domain specs
    k = world.num_domains
    if cfg.design_size < k + 1:
        raise ConfigError(
            f"design size {cfg.design_size} too small for {k} domains"
        )
    for prior in cfg.priors:
        if len(prior) != k:
            raise ConfigError(f"prior {prior} does not have {k} entries")
    if cfg.utility_spec.kind == "weighted" and len(cfg.utility_spec.weights) != k:
        raise ConfigError("utility weights must have one entry per domain")
    if cfg.utility_spec.kind == "single" and cfg.utility_spec.index >= k:
        raise ConfigError("utility capability index out of range")
    if cfg.mode in ("hierarchical-top-down", "hierarchical-bottom-up"):
        tree = cfg.build_tree()
        leaves = [leaf.domain for leaf in tree.iter_leaves()]
        if sorted(leaves) != sorted(world.names):
            raise ConfigError(
                f"hierarchy leaves {sorted(leaves)} must cover exactly the "
                f"world domains {sorted(world.names)}"
            )
    if cfg.mode == "dynamic-recalibrate" and cfg.recalibrate_steps is None:
        raise ConfigError("dynamic-recalibrate mode requires a 'recalibrate' section")
    for lam in cfg.consistency_ratios:
        if len(lam) != k:
            raise ConfigError(f"consistency ratio {lam} does not have {k} entries")


def parse_config(data: dict) -> RunConfig:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from exc

    design = data.get("design", {})
    surface = data.get("surface", {})
    search = data.get("search", {})
    utility = data.get("utility", {})
    try:
        hyper = BoostHyper(
            n_trees=int(surface.get("n_trees", 200)),
            max_depth=int(surface.get("max_depth", 3)),
            learning_rate=float(surface.get("learning_rate", 0.05)),
            min_leaf=int(surface.get("min_leaf", 2)),
        )
        utility_spec = UtilitySpec(
            kind=utility.get("kind", "macro"),
            weights=tuple(utility["weights"]) if "weights" in utility else None,
            index=utility.get("index"),
        )
        cfg = RunConfig(
            name=data["name"],
            seed=int(data["seed"]),
            mode=data.get("mode", "flat"),
            world_spec=data["world"],
            train=data["train"],
            design_size=int(design.get("size", DEFAULT_DESIGN_SIZE)),
            priors=tuple(tuple(p) for p in design.get("priors", [])),
            hyper=hyper,
            utility_spec=utility_spec,
            resolution=float(search.get("resolution", DEFAULT_RESOLUTION)),
            budget=int(search.get("budget", DEFAULT_BUDGET)),
            hierarchy=data.get("hierarchy"),
            recalibrate_steps=(int(data["recalibrate"]["total_steps"])
                               if "recalibrate" in data else None),
            consistency_ratios=tuple(
                tuple(r) for r in data.get("consistency", {}).get("ratios", [])
            ),
            theory=data.get("theory", {}),
            export_datasets=bool(data.get("export_datasets", False)),
        )
        _validate_cross_fields(data, cfg)
    except ConfigError:
        raise
    except MergeMixError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)

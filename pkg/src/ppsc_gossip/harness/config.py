"""YAML experiment configuration.

Schema (nodes are 0-based)::

    seed: 7
    trials: 200
    public:  {n: 10, edges: cycle, a: 0.1}        # or edges: [[0, 1], ...]
    private: {paths: [[0, 1, 2], [3, 4, 5]]}       # or cycles: / edges:
    budget:  {mu: 1, epsilon: 0.01, delta: 1.0e-6, rho: 0.99, nu: 0.01, p: 0.9}
    overrides: {S: 30}                              # optional: S, T, L, sigma_gamma
    task:    {kind: average, data: [...]}           # average | nle | quadratic | logistic
    sweep:   {epsilon: [0.001, 0.01, 0.1]}          # optional grids
    experiment: {...}                               # optional experiment knobs

Relative file paths inside ``task`` are resolved against the config file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from ..errors import ConfigError, PpscError
from ..graph import PrivateGraph, PublicGraph, build_private, build_public, cycle_edges, path_edges
from ..planner import Budget

_TOP_KEYS = {"seed", "trials", "public", "private", "budget", "overrides", "task", "sweep", "experiment", "output"}
_OVERRIDE_KEYS = {"S", "T", "L", "sigma_gamma", "epsilon0"}
_TASK_KINDS = {"average", "nle", "quadratic", "logistic"}


def _edges_from(spec: dict, n: int, where: str):
    keys = [k for k in ("edges", "paths", "cycles") if k in spec]
    if len(keys) != 1:
        raise ConfigError(f"{where}: give exactly one of edges, paths, cycles")
    key = keys[0]
    val = spec[key]
    if key == "edges":
        if val == "cycle":
            return cycle_edges(n)
        if val == "complete":
            return [(i, j) for i in range(n) for j in range(i + 1, n)]
        try:
            return [tuple(int(v) for v in e) for e in val]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.edges: expected a list of node pairs") from exc
    out = []
    for nodes in val:
        nodes = [int(v) for v in nodes]
        if key == "paths":
            out += path_edges(nodes)
        elif len(nodes) == 2:
            out.append(tuple(nodes))
        else:
            out += [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    public: dict
    private: dict
    budget: Budget
    task: dict
    seed: int = 0
    trials: int = 1
    overrides: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    output: Optional[str] = None
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a mapping")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown config key")
        for key in ("public", "private", "task"):
            if not isinstance(raw.get(key), dict):
                raise ConfigError(f"{key}: missing or not a mapping")
        pub = raw["public"]
        for key in ("n", "a"):
            if key not in pub:
                raise ConfigError(f"public.{key}: required")
        try:
            budget = Budget(**{k: float(v) for k, v in (raw.get("budget") or {}).items()})
        except TypeError as exc:
            raise ConfigError(f"budget: {exc}") from exc
        except PpscError as exc:
            raise ConfigError(f"budget: {exc}") from exc
        overrides = dict(raw.get("overrides") or {})
        bad = set(overrides) - _OVERRIDE_KEYS
        if bad:
            raise ConfigError(f"overrides.{sorted(bad)[0]}: unknown override")
        task = dict(raw["task"])
        if task.get("kind") not in _TASK_KINDS:
            raise ConfigError(f"task.kind: must be one of {sorted(_TASK_KINDS)}")
        seed = int(raw.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        trials = int(raw.get("trials", 1))
        if trials < 1:
            raise ConfigError("trials: must be >= 1")
        return cls(
            public=dict(pub),
            private=dict(raw["private"]),
            budget=budget,
            task=task,
            seed=seed,
            trials=trials,
            overrides=overrides,
            sweep=dict(raw.get("sweep") or {}),
            experiment=dict(raw.get("experiment") or {}),
            output=raw.get("output"),
            base_dir=Path(base_dir),
        )

    def with_budget(self, **changes) -> "ExperimentConfig":
        return replace(self, budget=replace(self.budget, **changes))

    def with_run(self, seed=None, trials=None, output=None) -> "ExperimentConfig":
        return replace(
            self,
            seed=self.seed if seed is None else int(seed),
            trials=self.trials if trials is None else int(trials),
            output=self.output if output is None else output,
        )

    @property
    def n(self) -> int:
        return int(self.public["n"])

    def public_graph(self) -> PublicGraph:
        try:
            return build_public(self.n, _edges_from(self.public, self.n, "public"), float(self.public["a"]))
        except ConfigError:
            raise
        except PpscError as exc:
            raise ConfigError(f"public: {exc}") from exc

    def private_graph(self) -> PrivateGraph:
        try:
            return build_private(self.n, _edges_from(self.private, self.n, "private"))
        except ConfigError:
            raise
        except PpscError as exc:
            raise ConfigError(f"private: {exc}") from exc

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def plan_overrides(self) -> dict:
        return {k: v for k, v in self.overrides.items() if k != "epsilon0"}


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)

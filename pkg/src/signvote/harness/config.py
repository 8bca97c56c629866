"""Experiment configuration files.

A config is an INI-style key/value file read with :mod:`configparser`::

    [experiment]
    objective = quadratic        ; quadratic | logistic
    dim = 1000
    x0 = 1.0                     ; every coordinate starts here
    workers = 27
    adversaries = 13 invert      ; comma-separated "count kind[:arg]"
    rounds = 1000
    seed = 0
    transport = sim              ; sim | tcp
    aggregation = majority       ; majority | mean (mean: plain distributed SGD, sim only)

    [noise]
    kind = gaussian              ; none | gaussian | uniform | bimodal_counterexample
    sigma = 1.0

    [optimizer]
    eta = 0.01
    beta = 0.0
    weight_decay = 0.0
    batch_size = 1
    schedule = constant          ; constant | theorem1 | theorem2

    [logistic]
    examples = 2000
    flip_rate = 0.1
    data_seed = 0

Every key is optional.  ``section.key=value`` overrides are applied on top.
"""
from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..adversary import AdversarySpec
from ..oracles import NoiseModel
from ..optim import SCHEDULE_KINDS, OptimizerConfig

log = logging.getLogger(__name__)

DEFAULTS = {
    "experiment": {
        "objective": "quadratic", "dim": "1000", "x0": "1.0", "workers": "27", "adversaries": "",
        "rounds": "1000", "seed": "0", "transport": "sim", "aggregation": "majority",
    },
    "noise": {"kind": "gaussian", "sigma": "1.0"},
    "optimizer": {"eta": "0.01", "beta": "0.0", "weight_decay": "0.0", "batch_size": "1", "schedule": "constant"},
    "logistic": {"examples": "2000", "flip_rate": "0.1", "data_seed": "0"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str = "quadratic"
    dim: int = 1000
    x0: float = 1.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    workers: int = 27
    adversaries: tuple[tuple[int, AdversarySpec], ...] = ()
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: str = "constant"
    rounds: int = 1000
    seed: int = 0
    transport: str = "sim"
    aggregation: str = "majority"
    logistic_examples: int = 2000
    logistic_flip_rate: float = 0.1
    logistic_seed: int = 0

    def __post_init__(self):
        if self.objective not in ("quadratic", "logistic"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.workers < 1:
            raise ConfigError("need at least one worker")
        if self.rounds < 1:
            raise ConfigError("rounds must be at least 1")
        if self.n_adversaries > self.workers:
            raise ConfigError(f"{self.n_adversaries} adversaries but only {self.workers} workers")
        if self.schedule not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.transport not in ("sim", "tcp"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.aggregation not in ("majority", "mean"):
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if self.aggregation == "mean" and self.transport != "sim":
            raise ConfigError("mean aggregation only runs in the simulator")

    @property
    def n_adversaries(self) -> int:
        return sum(count for count, _ in self.adversaries)

    @property
    def alpha(self) -> float:
        return self.n_adversaries / self.workers

    def worker_adversaries(self) -> list[AdversarySpec]:
        """Adversary spec for each worker id; honest workers come first."""
        specs = [AdversarySpec()] * (self.workers - self.n_adversaries)
        for count, spec in self.adversaries:
            specs.extend([spec] * count)
        return specs


def parse_adversaries(text: str) -> tuple[tuple[int, AdversarySpec], ...]:
    out = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        count, _, kind = item.partition(" ")
        try:
            n = int(count)
        except ValueError:
            raise ConfigError(f"adversary entry {item!r} must look like 'count kind'") from None
        if n < 0:
            raise ConfigError(f"negative adversary count in {item!r}")
        out.append((n, AdversarySpec.parse(kind.strip() or "invert", seed=len(out))))
    return tuple(out)


def format_adversaries(advs) -> str:
    return ", ".join(f"{n} {spec}" for n, spec in advs)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_dict(DEFAULTS)
    return cp


def apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    for item in overrides or ():
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if section not in cp:
            raise ConfigError(f"unknown config section {section!r}")
        cp[section][name] = value.strip()


def from_parser(cp: configparser.ConfigParser) -> ExperimentConfig:
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(cp[section]) - set(DEFAULTS[section])
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    e, n, o, lg = cp["experiment"], cp["noise"], cp["optimizer"], cp["logistic"]
    try:
        cfg = ExperimentConfig(
            objective=e["objective"],
            dim=e.getint("dim"),
            x0=e.getfloat("x0"),
            noise=NoiseModel(n["kind"], n.getfloat("sigma")),
            workers=e.getint("workers"),
            adversaries=parse_adversaries(e["adversaries"]),
            optimizer=OptimizerConfig(o.getfloat("eta"), o.getfloat("beta"), o.getfloat("weight_decay"),
                                      o.getint("batch_size")),
            schedule=o["schedule"],
            rounds=e.getint("rounds"),
            seed=e.getint("seed"),
            transport=e["transport"],
            aggregation=e["aggregation"],
            logistic_examples=lg.getint("examples"),
            logistic_flip_rate=lg.getfloat("flip_rate"),
            logistic_seed=lg.getint("data_seed"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.workers % 2 == 0 and cfg.aggregation == "majority":
        log.warning("even worker count %d: tied votes resolve to +1", cfg.workers)
    return cfg


def load_config(path=None, overrides=()) -> ExperimentConfig:
    cp = _parser()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cp.read(path)
    apply_overrides(cp, overrides)
    return from_parser(cp)


def to_text(cfg: ExperimentConfig) -> str:
    """Serialize back to the file format (round-trips through :func:`load_config`)."""
    lines = [
        "[experiment]",
        f"objective = {cfg.objective}", f"dim = {cfg.dim}", f"x0 = {cfg.x0!r}", f"workers = {cfg.workers}",
        f"adversaries = {format_adversaries(cfg.adversaries)}", f"rounds = {cfg.rounds}", f"seed = {cfg.seed}",
        f"transport = {cfg.transport}", f"aggregation = {cfg.aggregation}",
        "", "[noise]", f"kind = {cfg.noise.kind}", f"sigma = {float(cfg.noise.sigma)!r}",
        "", "[optimizer]", f"eta = {cfg.optimizer.eta!r}", f"beta = {cfg.optimizer.beta!r}",
        f"weight_decay = {cfg.optimizer.weight_decay!r}", f"batch_size = {cfg.optimizer.batch_size}",
        f"schedule = {cfg.schedule}",
        "", "[logistic]", f"examples = {cfg.logistic_examples}", f"flip_rate = {cfg.logistic_flip_rate!r}",
        f"data_seed = {cfg.logistic_seed}", "",
    ]
    return "\n".join(lines)

"""Run configuration read from YAML, with command-line overrides"""
import hashlib
from dataclasses import asdict, dataclass, field, fields

import yaml

from abcengine import DEFAULT_WEIGHTS, HYBRID_MODES, NORMS, Scoring
from models import MODELS
from priors import ConfigError, PriorBounds, default_priors

VERSION = "0.1.0"

__all__ = ["VERSION", "ConfigError", "RunConfig", "SynthConfig", "load_config"]


@dataclass
class SynthConfig:
    """Synthetic data generation

    params: true parameter values, the prior midpoints when empty

    noise: standard deviations of (position m, speed m/s, accel m/s^2)
    """
    model: str = "IDM"
    params: dict = field(default_factory=dict)
    n_pairs: int = 30
    horizon: float = 60.0
    dt: float = 0.1
    noise: tuple = (0.0, 0.0, 0.0)
    leader_length: float = 5.0
    seed: int = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError("synth.model: unknown model %s" % self.model)
        self.noise = tuple(float(value) for value in self.noise)
        if len(self.noise) != 3 or min(self.noise) < 0:
            raise ConfigError("synth.noise: three non-negative standard deviations expected")
        if self.n_pairs < 1 or not self.horizon > 0 or not self.dt > 0:
            raise ConfigError("synth: n_pairs, horizon and dt must be positive")
        self.params = {name: float(value) for name, value in (self.params or {}).items()}


@dataclass
class RunConfig:
    dataset: str = "trajectories.csv"
    models: list = field(default_factory=lambda: list(MODELS))
    n_particles: int = 100000
    n_keep: int = 5
    # hybrid size N_A, max(N |pairs|, M N |pairs| / 2) when None
    n_hybrid: int = None
    weights: tuple = DEFAULT_WEIGHTS
    beta: float = 0.15
    folds: int = 3
    seed: int = 0
    out: str = "results"
    subtract_length: bool = True
    priors: str = None
    n_jobs: int = 1
    # particles per seeded batch; changing it changes the draws
    batch_size: int = 4096
    threshold: float = None
    hybrid_mode: str = "balanced"
    norm: str = "rms"
    substeps: int = 1
    default_dt: float = 0.1
    default_leader_length: float = 5.0
    sweep_n: list = field(default_factory=list)
    pairwise: bool = False
    top_fraction: float = 0.05
    evolution_pair: str = None
    # posterior archive read by the evolution command
    posterior: str = None
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        try:
            self.validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as error:
            raise ConfigError("invalid setting: %s" % error)

    def validate(self):
        if isinstance(self.models, str):
            self.models = [model.strip() for model in self.models.split(",") if model.strip()]
        unknown = [model for model in self.models if model not in MODELS]
        if unknown or not self.models:
            raise ConfigError("models: unknown %s, choose from %s"
                              % (", ".join(unknown) or "(none given)", ", ".join(MODELS)))
        if len(set(self.models)) != len(self.models):
            raise ConfigError("models: duplicates in %s" % ", ".join(self.models))
        if isinstance(self.synth, dict):
            try:
                self.synth = SynthConfig(**self.synth)
            except TypeError as error:
                raise ConfigError("synth: %s" % error)
        self.weights = tuple(float(weight) for weight in self.weights)
        self.sweep_n = [int(n) for n in self.sweep_n or []]
        for name in ("n_particles", "n_keep", "folds", "n_jobs", "batch_size", "substeps"):
            if int(getattr(self, name)) < 1 and not (name == "n_jobs" and self.n_jobs == -1):
                raise ConfigError("%s must be positive, got %s" % (name, getattr(self, name)))
        if self.n_hybrid is not None and self.n_hybrid < 1:
            raise ConfigError("n_hybrid must be positive, got %s" % self.n_hybrid)
        if any(n < 1 for n in self.sweep_n):
            raise ConfigError("sweep_n entries must be positive")
        if not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1], got %s" % self.beta)
        if not 0 < self.top_fraction <= 1:
            raise ConfigError("top_fraction must lie in (0, 1], got %s" % self.top_fraction)
        if self.hybrid_mode not in HYBRID_MODES:
            raise ConfigError("hybrid_mode must be one of %s" % ", ".join(HYBRID_MODES))
        if self.norm not in NORMS:
            raise ConfigError("norm must be one of %s" % ", ".join(NORMS))
        try:
            self.scoring()
        except ValueError as error:
            raise ConfigError(str(error))

    def scoring(self):
        return Scoring(self.weights, self.norm, self.substeps, self.subtract_length)

    def prior_bounds(self):
        return PriorBounds.from_file(self.priors) if self.priors else default_priors()

    @property
    def synth_seed(self):
        return self.seed if self.synth.seed is None else self.synth.seed

    def provenance(self):
        """Settings that determine the results; worker count and output path excluded"""
        settings = asdict(self)
        for name in ("n_jobs", "out"):
            settings.pop(name)
        settings["weights"] = list(self.weights)
        settings["synth"]["noise"] = list(self.synth.noise)
        return settings

    def config_hash(self):
        dump = yaml.safe_dump(self.provenance(), sort_keys=True)
        return hashlib.sha256(dump.encode("utf-8")).hexdigest()


def load_config(config_file=None, **overrides):
    """Read a YAML run config; keyword overrides that are not None take precedence"""
    settings = {}
    if config_file:
        with open(config_file) as raw_yaml:
            settings = yaml.safe_load(raw_yaml) or {}
        if not isinstance(settings, dict):
            raise ConfigError("%s: expected a mapping of settings" % config_file)
    known = {item.name for item in fields(RunConfig)}
    unknown = sorted(set(settings) - known)
    if unknown:
        raise ConfigError("%s: unknown settings %s" % (config_file, ", ".join(unknown)))
    settings.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig(**settings)

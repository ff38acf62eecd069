"""Uniform prior bounds for every model and controller"""
import os

import numpy as np
import yaml

DEFAULT_PRIORS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "priors.yaml")


class ConfigError(ValueError):
    """Raised for unusable configuration or prior files"""


class PriorBounds:
    """Independent uniform priors read from a YAML file, one table per model

    Bounds are kept in the units the acceleration laws use, i.e. after
    applying any per-parameter `scale` found in the file.
    """

    def __init__(self, tables):
        self.tables = {}
        for model_id, table in tables.items():
            names, lower, upper = [], [], []
            for name, entry in table.items():
                scale = 1.0
                if isinstance(entry, dict):
                    scale = float(entry.get("scale", 1.0))
                    entry = entry["bounds"]
                try:
                    low, high = (float(value) * scale for value in entry)
                except (TypeError, ValueError):
                    raise ConfigError("%s.%s: bounds must be [lower, upper]" % (model_id, name))
                if low > high:
                    raise ConfigError("%s.%s: lower bound above upper bound" % (model_id, name))
                names.append(name)
                lower.append(low)
                upper.append(high)
            self.tables[model_id] = (tuple(names), np.array(lower), np.array(upper))

    @classmethod
    def from_file(cls, prior_file=None):
        """Read a prior-bounds file, the shipped defaults when None"""
        with open(prior_file or DEFAULT_PRIORS) as raw_yaml:
            tables = yaml.safe_load(raw_yaml)
        if not isinstance(tables, dict):
            raise ConfigError("%s: expected one table per model" % prior_file)
        return cls(tables)

    def names(self, model_id):
        return self.table(model_id)[0]

    def bounds(self, model_id, names=None):
        """Return (lower, upper) arrays, in file order or in the order of names"""
        file_names, lower, upper = self.table(model_id)
        if names is None or tuple(names) == file_names:
            return lower, upper
        try:
            order = [file_names.index(name) for name in names]
        except ValueError:
            raise ConfigError("%s: prior file lacks one of %s" % (model_id, ", ".join(names)))
        return lower[order], upper[order]

    def table(self, model_id):
        try:
            return self.tables[model_id]
        except KeyError:
            raise ConfigError("No prior bounds for model %s" % model_id)

    def sample(self, model_id, rng, size=None, names=None):
        """Draw each parameter independently and uniformly

        size: None for one vector, otherwise the number of rows

        names: parameter order of the result, file order when None
        """
        lower, upper = self.bounds(model_id, names)
        shape = lower.shape if size is None else (size, len(lower))
        return rng.uniform(lower, upper, size=shape)

    def contains(self, model_id, values, names=None):
        lower, upper = self.bounds(model_id, names)
        values = np.asarray(values, dtype=float)
        return bool(np.all((values >= lower) & (values <= upper)))


_DEFAULT = None


def default_priors():
    """Return the shipped priors, read once"""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PriorBounds.from_file()
    return _DEFAULT

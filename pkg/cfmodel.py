"""Shared pieces of the human-driver car-following models"""
from dataclasses import dataclass

import numpy as np

from priors import default_priors


@dataclass(frozen=True)
class KinematicContext:
    """Inputs of an acceleration law at one instant

    Fields may be scalars or equally shaped arrays (one entry per particle).
    raw_spacing is leader position minus follower position.
    """
    follower_speed: object
    leader_speed: object
    raw_spacing: object
    leader_length: float = 5.0

    @property
    def front_to_rear_gap(self):
        return self.raw_spacing - self.leader_length


@dataclass(frozen=True)
class ModelParams:
    """Named parameter vector of one model"""
    model_id: str
    values: dict

    def __post_init__(self):
        from models import get_model
        expected = get_model(self.model_id).parameter_names
        if tuple(self.values) != expected:
            if set(self.values) != set(expected):
                raise ValueError("%s expects parameters %s, got %s"
                                 % (self.model_id, ", ".join(expected), ", ".join(self.values)))
            object.__setattr__(self, "values", {name: self.values[name] for name in expected})

    def __getitem__(self, name):
        return self.values[name]

    def vector(self):
        return np.array([self.values[name] for name in self.values], dtype=float)

    @classmethod
    def from_vector(cls, model_id, vector):
        from models import get_model
        names = get_model(model_id).parameter_names
        return cls(model_id, {name: float(value) for name, value in zip(names, vector)})

    def within_prior(self, priors=None):
        return (priors or default_priors()).contains(self.model_id, self.vector(), tuple(self.values))


class HdvParams(ModelParams):
    """Parameters of OVM, GFM, FVDM or IDM"""

    def __post_init__(self):
        super().__post_init__()
        from models import HDV_MODELS
        if self.model_id not in HDV_MODELS:
            raise ValueError("%s is not a human-driver model" % self.model_id)
        if self.model_id == "IDM" and not (self["a"] > 0 and self["b"] > 0 and self["v_max"] > 0):
            raise ValueError("IDM needs a, b and v_max positive")
        if self.model_id == "FVDM" and not (self["tau"] > 0 and self["l_int"] > 0):
            raise ValueError("FVDM needs tau and l_int positive")


def optimal_velocity(gap, v1, v2, c1, c2):
    """OVM/GFM desired speed for a front-to-rear gap"""
    return v1 + v2 * np.tanh(c1 * gap - c2)


class CarFollowingModel:
    """Generic human-driver model: an acceleration law integrated in time

    Subclasses set the parameter names and implement accel(ctx, p), where
    p is anything indexable by parameter name (HdvParams, or a dict of
    arrays for a batch of particles).
    """
    model_id = None
    family = "HDV"
    parameter_names = ()
    # front-to-rear gap (True) or raw position difference (False)
    subtract_length = True
    params_class = HdvParams

    @classmethod
    def accel(cls, ctx, p):
        raise NotImplementedError

    @classmethod
    def equilibrium_spacing(cls, speed, p, leader_length):
        """Raw spacing at which accel is zero behind a leader at the same speed

        Returns None when the model has no equilibrium at this speed.
        """
        return None

    @classmethod
    def unpack(cls, matrix):
        """Split a particles x parameters matrix into named columns"""
        matrix = np.atleast_2d(matrix)
        return {name: matrix[:, column] for column, name in enumerate(cls.parameter_names)}


def sample_hdv_prior(model_id, rng, priors=None):
    """Draw one HdvParams uniformly from the model's prior bounds"""
    from models import HDV_MODELS, get_model
    if model_id not in HDV_MODELS:
        raise ValueError("%s is not a human-driver model" % model_id)
    vector = (priors or default_priors()).sample(model_id, rng, names=get_model(model_id).parameter_names)
    return HdvParams.from_vector(model_id, vector)

"""Shared pieces of the discrete state-space AV controllers"""
from dataclasses import dataclass

import numpy as np

from cfmodel import ModelParams
from priors import default_priors


class AvParams(ModelParams):
    """Parameters of LLCTG, LLCS, HL or MPC"""

    def __post_init__(self):
        super().__post_init__()
        from models import AV_MODELS
        if self.model_id not in AV_MODELS:
            raise ValueError("%s is not an AV controller" % self.model_id)
        if self.model_id == "HL" and not self["TT"] > 0:
            raise ValueError("HL needs a positive actuation lag TT")
        if self.model_id == "MPC" and not (self["a_min"] < 0 < self["a_max"]
                                           and self["R"] > 0 and self["alpha"] > 0):
            raise ValueError("MPC needs a_min < 0 < a_max and positive R, alpha")


@dataclass(frozen=True)
class ControllerState:
    """Spacing deviation, relative speed and, for HL, realized acceleration"""
    delta_s: float
    delta_v: float
    accel: float = None

    @property
    def dimension(self):
        return 2 if self.accel is None else 3

    def vector(self):
        if self.accel is None:
            return np.array([self.delta_s, self.delta_v], dtype=float)
        return np.array([self.delta_s, self.delta_v, self.accel], dtype=float)


@dataclass(frozen=True)
class DiscreteSystem:
    """x[t+1] = A x[t] + B u[t] + D a_leader[t]

    Matrices may carry a leading particle axis: A (..., n, n), B and D (..., n).
    """
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    t_s: float

    @property
    def n(self):
        return self.A.shape[-1]

    def step(self, x, u, leader_accel):
        """Propagate one control interval; x is (..., n), u and leader_accel (...)"""
        drift = np.einsum("...ij,...j->...i", self.A, x)
        return drift + self.B * np.expand_dims(u, -1) + self.D * np.expand_dims(leader_accel, -1)


def assemble(rows):
    """Stack a nested list of scalar-or-array entries into (..., rows, cols)"""
    entries = np.broadcast_arrays(*[np.asarray(entry, dtype=float) for row in rows for entry in row])
    stacked = np.stack(entries, axis=-1)
    return stacked.reshape(stacked.shape[:-1] + (len(rows), len(rows[0])))


def column(entries):
    """Stack scalar-or-array entries into (..., n)"""
    return np.stack(np.broadcast_arrays(*[np.asarray(entry, dtype=float) for entry in entries]), axis=-1)


class Controller:
    """Generic AV controller with a desired spacing policy and a discrete plant

    Subclasses set parameter names and implement build_discrete_system and,
    when not a linear feedback, control.
    """
    model_id = None
    family = "AV"
    parameter_names = ()
    state_dimension = 2
    gain_names = ("k_s", "k_v")
    subtract_length = True
    params_class = AvParams

    @classmethod
    def desired_spacing(cls, follower_speed, p):
        """Constant time gap policy s* = v tau* + l"""
        return follower_speed * p["tau_star"] + p["l"]

    @classmethod
    def build_discrete_system(cls, p, t_s):
        raise NotImplementedError

    @classmethod
    def control(cls, x, leader_accel, system, p):
        return linear_control(x, p, cls.gain_names)

    @classmethod
    def equilibrium_spacing(cls, speed, p, leader_length, subtract_length=True):
        offset = leader_length if subtract_length else 0.0
        return offset + cls.desired_spacing(speed, p)

    @classmethod
    def unpack(cls, matrix):
        matrix = np.atleast_2d(matrix)
        return {name: matrix[:, index] for index, name in enumerate(cls.parameter_names)}


def linear_control(state, p, gain_names=None):
    """Feedback u = k . x

    state: ControllerState or an array (..., n)

    gain_names: defaults to (k_s, k_v) and adds k_a for a 3-dim state
    """
    x = state.vector() if isinstance(state, ControllerState) else np.asarray(state, dtype=float)
    n = x.shape[-1]
    if gain_names is None:
        gain_names = ("k_s", "k_v", "k_a")[:n]
    if len(gain_names) != n:
        raise ValueError("State dimension %d does not match %d gains" % (n, len(gain_names)))
    gains = column([p[name] for name in gain_names])
    u = np.sum(gains * x, axis=-1)
    return u if np.ndim(u) else float(u)


def controller_state_from_kinematics(ctx, observed_accel, p, subtract_length=True, controller=None):
    """Deviation state of a controller from the current kinematics

    The spacing is the front-to-rear gap unless subtract_length is cleared;
    the accel component is filled only for 3-dim states. p may be a batch of
    parameter columns, in which case controller must be given.
    """
    if controller is None:
        from models import get_model
        controller = get_model(p.model_id)
    spacing = ctx.raw_spacing - ctx.leader_length if subtract_length else ctx.raw_spacing
    delta_s = spacing - controller.desired_spacing(ctx.follower_speed, p)
    delta_v = ctx.leader_speed - ctx.follower_speed
    if controller.state_dimension == 3:
        return ControllerState(delta_s, delta_v, observed_accel)
    return ControllerState(delta_s, delta_v)


def sample_av_prior(model_id, rng, priors=None):
    """Draw one AvParams uniformly from the controller's prior bounds"""
    from models import AV_MODELS, get_model
    if model_id not in AV_MODELS:
        raise ValueError("%s is not an AV controller" % model_id)
    vector = (priors or default_priors()).sample(model_id, rng, names=get_model(model_id).parameter_names)
    return AvParams.from_vector(model_id, vector)

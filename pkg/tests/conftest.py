import numpy as np
import pytest

import models
from abcengine import Scoring
from cfmodel import CarFollowingModel, ModelParams
from models import make_params
from priors import default_priors
from reporting import prior_midpoints, synth_pair
from streams import substream
from trajectory import CFPair, Dataset, StatePortfolio


def uniform_motion(start, speed, steps, dt=0.1, accel=0.0):
    """Exact portfolio of a vehicle under constant acceleration"""
    t = dt * np.arange(steps)
    return StatePortfolio(start + speed * t + 0.5 * accel * t ** 2, speed + accel * t,
                          np.full(steps, accel), dt)


class NullModel(CarFollowingModel):
    """Never accelerates"""
    model_id = "NULL"
    parameter_names = ("c",)
    params_class = ModelParams

    @classmethod
    def accel(cls, ctx, p):
        return 0.0 * ctx.follower_speed


@pytest.fixture
def null_model(monkeypatch):
    monkeypatch.setitem(models.MODELS, "NULL", NullModel)
    return NullModel


@pytest.fixture
def make_pair():
    """Constant-speed leader and a follower spacing metres behind it"""
    def make(pair_id="p0", leader_speed=15.0, follower_speed=15.0, spacing=30.0, steps=300,
             dt=0.1, leader_length=5.0, follower_accel=0.0, leader_start=100.0):
        leader = uniform_motion(leader_start, leader_speed, steps, dt)
        follower = uniform_motion(leader_start - spacing, follower_speed, steps, dt, follower_accel)
        return CFPair(pair_id, leader, follower, leader_length)
    return make


@pytest.fixture
def midpoint_params():
    def make(model_id):
        return make_params(model_id, prior_midpoints(model_id, default_priors()))
    return make


@pytest.fixture
def synth_dataset(midpoint_params):
    """Noise-free pairs generated by a model at its prior midpoints"""
    def make(model_id="IDM", n_pairs=3, horizon=10.0, seed=1, noise=(0.0, 0.0, 0.0)):
        params = midpoint_params(model_id)
        steps = int(round(horizon / 0.1))
        pairs = [synth_pair("%s-%d" % (model_id, number), params, substream(seed, "synth", number),
                            steps, 0.1, noise, 5.0, Scoring())
                 for number in range(n_pairs)]
        return Dataset(tuple(pairs), name="synth-%s" % model_id)
    return make

"""Full Velocity Difference Model"""
import numpy as np

from cfmodel import CarFollowingModel


class FVDMModel(CarFollowingModel):
    """Relaxation with time constant tau plus a symmetric speed-difference term

    Spacing is the raw position difference; the leader length enters the
    tanh argument. Speed difference is leader minus follower.
    """
    model_id = "FVDM"
    parameter_names = ("tau", "lam", "V1", "V2", "l_int", "beta")
    subtract_length = False

    @classmethod
    def optimal_velocity(cls, ctx, p):
        return p["V1"] + p["V2"] * np.tanh(
            (ctx.raw_spacing - ctx.leader_length) / p["l_int"] - p["beta"])

    @classmethod
    def accel(cls, ctx, p):
        delta_v = ctx.leader_speed - ctx.follower_speed
        return (cls.optimal_velocity(ctx, p) - ctx.follower_speed) / p["tau"] + p["lam"] * delta_v

    @classmethod
    def equilibrium_spacing(cls, speed, p, leader_length):
        ratio = (speed - p["V1"]) / p["V2"] if p["V2"] else np.inf
        if abs(ratio) >= 1:
            return None
        return leader_length + p["l_int"] * (np.arctanh(ratio) + p["beta"])


fvdm_accel = FVDMModel.accel

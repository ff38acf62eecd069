"""Optimal Velocity Model"""
import numpy as np

from cfmodel import CarFollowingModel, optimal_velocity


class OVMModel(CarFollowingModel):
    """Relaxation towards a tanh optimal velocity of the front-to-rear gap"""
    model_id = "OVM"
    parameter_names = ("kappa", "v1", "v2", "c1", "c2")
    subtract_length = True

    @classmethod
    def accel(cls, ctx, p):
        desired = optimal_velocity(ctx.front_to_rear_gap, p["v1"], p["v2"], p["c1"], p["c2"])
        return p["kappa"] * (desired - ctx.follower_speed)

    @classmethod
    def equilibrium_spacing(cls, speed, p, leader_length):
        ratio = (speed - p["v1"]) / p["v2"]
        if abs(ratio) >= 1:
            return None
        return leader_length + (np.arctanh(ratio) + p["c2"]) / p["c1"]


ovm_accel = OVMModel.accel

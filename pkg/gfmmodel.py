"""Generalized Force Model"""
import numpy as np

from cfmodel import optimal_velocity
from ovmmodel import OVMModel


class GFMModel(OVMModel):
    """OVM relaxation plus a braking term active only when closing in"""
    model_id = "GFM"
    parameter_names = ("k", "lam", "v1", "v2", "c1", "c2")

    @classmethod
    def accel(cls, ctx, p):
        desired = optimal_velocity(ctx.front_to_rear_gap, p["v1"], p["v2"], p["c1"], p["c2"])
        delta_v = ctx.leader_speed - ctx.follower_speed
        # theta(-dv): open only when the follower is faster
        closing = np.where(delta_v < 0, delta_v, 0.0)
        return p["k"] * (desired - ctx.follower_speed) + p["lam"] * closing


gfm_accel = GFMModel.accel

"""Intelligent Driver Model"""
import numpy as np

from cfmodel import CarFollowingModel


class IDMModel(CarFollowingModel):
    """Free-road term plus interaction through the desired gap s*

    Spacing is the raw position difference; speed difference is follower
    minus leader, positive when approaching.
    """
    model_id = "IDM"
    parameter_names = ("v_max", "T", "s0", "a", "b", "delta")
    subtract_length = False
    # returned instead of a non-finite value when the spacing is not positive
    braking_floor = -10.0

    @classmethod
    def desired_gap(cls, ctx, p):
        delta_v = ctx.follower_speed - ctx.leader_speed
        return p["s0"] + ctx.follower_speed * p["T"] \
            + ctx.follower_speed * delta_v / (2 * np.sqrt(p["a"] * p["b"]))

    @classmethod
    def accel(cls, ctx, p):
        spacing = np.asarray(ctx.raw_spacing, dtype=float)
        positive = spacing > 0
        safe = np.where(positive, spacing, 1.0)
        free = np.power(np.abs(ctx.follower_speed / p["v_max"]), p["delta"])
        result = p["a"] * (1 - free - (cls.desired_gap(ctx, p) / safe) ** 2)
        result = np.where(positive, result, cls.braking_floor)
        return result if result.ndim else float(result)

    @classmethod
    def equilibrium_spacing(cls, speed, p, leader_length):
        free = (speed / p["v_max"]) ** p["delta"]
        if free >= 1:
            return None
        return (p["s0"] + speed * p["T"]) / np.sqrt(1 - free)


idm_accel = IDMModel.accel

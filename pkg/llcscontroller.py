"""Lower-order linear feedback controller, constant spacing policy"""
from controller import Controller, DiscreteSystem, assemble, column


class LLCSController(Controller):
    """Second-order plant, u = k_s ds + k_v dv, s* = s0"""
    model_id = "LLCS"
    parameter_names = ("s0", "k_s", "k_v")

    @classmethod
    def desired_spacing(cls, follower_speed, p):
        return p["s0"] + 0 * follower_speed

    @classmethod
    def build_discrete_system(cls, p, t_s):
        A = assemble([[1.0, t_s],
                      [0.0, 1.0]])
        B = column([-t_s ** 2 / 2, -t_s])
        D = column([t_s ** 2 / 2, t_s])
        return DiscreteSystem(A, B, D, t_s)

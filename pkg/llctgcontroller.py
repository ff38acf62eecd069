"""Lower-order linear feedback controller, constant time gap policy"""
from controller import Controller, DiscreteSystem, assemble, column


class LLCTGController(Controller):
    """Second-order plant, u = k_s ds + k_v dv, s* = v tau* + l"""
    model_id = "LLCTG"
    parameter_names = ("tau_star", "k_s", "k_v", "l")

    @classmethod
    def build_discrete_system(cls, p, t_s):
        A = assemble([[1.0, t_s],
                      [0.0, 1.0]])
        B = column([-t_s * p["tau_star"] - t_s ** 2 / 2, -t_s])
        D = column([t_s + t_s ** 2 / 2, t_s])
        return DiscreteSystem(A, B, D, t_s)

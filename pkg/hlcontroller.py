"""Higher-order linear feedback controller with first-order actuation lag"""
import numpy as np

from controller import Controller, DiscreteSystem, assemble, column


class HLController(Controller):
    """Third-order plant x = [ds, dv, a], realized acceleration lags u by TT

    The exact discretization of the lag model is used as printed for the
    controller family; u = k_s ds + k_v dv + k_a a.
    """
    model_id = "HL"
    parameter_names = ("tau_star", "TT", "k_s", "k_v", "k_a", "l")
    state_dimension = 3
    gain_names = ("k_s", "k_v", "k_a")

    @classmethod
    def build_discrete_system(cls, p, t_s):
        tau, lag = p["tau_star"], p["TT"]
        decay = np.exp(-t_s / lag)
        A = assemble([[1.0, t_s, lag * (tau - lag) * (decay - 1) - t_s * lag],
                      [0.0, 1.0, lag * (decay - 1)],
                      [0.0, 0.0, decay]])
        B = column([-lag * (tau - lag) * (decay + t_s / lag - 1) - t_s ** 2 / 2,
                    lag * (1 - decay) - t_s,
                    1 - decay])
        D = column([t_s ** 2 / 2, t_s, 0.0])
        return DiscreteSystem(A, B, D, t_s)

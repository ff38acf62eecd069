"""One-step model predictive controller with acceleration limits"""
import numpy as np

from controller import Controller, DiscreteSystem, assemble, column


class MPCController(Controller):
    """Receding one-step horizon on the 2-dim state [ds, dv]

    Minimizes x'Qx of the next state plus R u^2, Q = diag(1, alpha),
    subject to a_min <= u <= a_max.
    """
    model_id = "MPC"
    parameter_names = ("tau_star", "R", "alpha", "l", "a_min", "a_max")

    @classmethod
    def build_discrete_system(cls, p, t_s):
        A = assemble([[1.0, t_s],
                      [0.0, 1.0]])
        B = column([-p["tau_star"] * t_s - t_s - t_s ** 2 / 2, -t_s])
        D = column([t_s + t_s ** 2 / 2, t_s])
        return DiscreteSystem(A, B, D, t_s)

    @classmethod
    def control(cls, x, leader_accel, system, p):
        return mpc_control(x, leader_accel, system, p)


def mpc_control(state, leader_accel, system, p):
    """Closed-form minimizer of the one-step cost, clipped to the limits

    u = -B'Q(Ax + D a_l) / (B'QB + R)
    """
    x = state.vector() if hasattr(state, "vector") else np.asarray(state, dtype=float)
    weights = column([1.0 + 0 * np.asarray(p["alpha"]), p["alpha"]])
    free = np.einsum("...ij,...j->...i", system.A, x) \
        + system.D * np.expand_dims(leader_accel, -1)
    numerator = np.sum(system.B * weights * free, axis=-1)
    denominator = np.sum(system.B * weights * system.B, axis=-1) + p["R"]
    u = np.clip(-numerator / denominator, p["a_min"], p["a_max"])
    return u if np.ndim(u) else float(u)

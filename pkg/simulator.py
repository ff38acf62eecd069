"""Roll out follower trajectories behind an observed leader"""
from dataclasses import dataclass

import numpy as np

from cfmodel import KinematicContext
from controller import column, controller_state_from_kinematics
from models import get_model
from trajectory import StatePortfolio, gap

NEGATIVE_GAP = "negative_gap_encountered"
SPEED_CLAMPED = "speed_clamped"
ABORTED = "aborted"


@dataclass(frozen=True)
class SimulatedPortfolio:
    """Simulated follower; portfolio is None when the roll-out aborted"""
    portfolio: StatePortfolio
    flags: frozenset

    @property
    def aborted(self):
        return ABORTED in self.flags


@dataclass
class Rollout:
    """Follower profiles of a batch of particles on one pair, shape (particles, steps)"""
    positions: np.ndarray
    speeds: np.ndarray
    accelerations: np.ndarray
    negative_gap: np.ndarray
    speed_clamped: np.ndarray
    aborted: np.ndarray

    def __len__(self):
        return len(self.positions)

    def flags(self, row):
        names = []
        if self.negative_gap[row]:
            names.append(NEGATIVE_GAP)
        if self.speed_clamped[row]:
            names.append(SPEED_CLAMPED)
        if self.aborted[row]:
            names.append(ABORTED)
        return frozenset(names)


def simulate_batch(model_id, matrix, pair, substeps=1, subtract_length=True):
    """Simulate every row of a parameter matrix against one pair

    matrix: particles x parameters, columns in the model's parameter order

    substeps: integration sub-steps per sample for the human-driver models

    subtract_length: controllers measure the front-to-rear gap
    """
    model = get_model(model_id)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    params = model.unpack(matrix)
    if model.family == "HDV":
        rollout = rollout_hdv(model, params, pair, len(matrix), substeps)
    else:
        rollout = rollout_controller(model, params, pair, len(matrix), subtract_length)
    for profile in (rollout.positions, rollout.speeds, rollout.accelerations):
        profile[rollout.aborted] = np.nan
    return rollout


def simulate_follower(particle, pair, substeps=1, subtract_length=True):
    """Simulate one particle against one pair"""
    rollout = simulate_batch(particle.model_id, particle.params.vector(), pair,
                             substeps, subtract_length)
    flags = rollout.flags(0)
    if ABORTED in flags:
        return SimulatedPortfolio(None, flags)
    portfolio = StatePortfolio(rollout.positions[0], rollout.speeds[0],
                               rollout.accelerations[0], pair.dt, pair.leader.t0)
    return SimulatedPortfolio(portfolio, flags)


def empty_rollout(n, steps, follower):
    positions = np.empty((n, steps))
    speeds = np.empty((n, steps))
    accelerations = np.empty((n, steps))
    positions[:, 0] = follower.positions[0]
    speeds[:, 0] = follower.speeds[0]
    flags = [np.zeros(n, dtype=bool) for _ in range(3)]
    return Rollout(positions, speeds, accelerations, *flags)


def check_finite(rollout, k, *values):
    """Mark rows with a non-finite value at step k as aborted; return the mask"""
    bad = np.zeros(len(rollout), dtype=bool)
    for value in values:
        bad |= ~np.isfinite(value)
    rollout.aborted |= bad
    return bad


def rollout_hdv(model, p, pair, n, substeps):
    """Semi-implicit Euler: v += u h, clamped at 0, then p += v h"""
    leader, follower = pair.leader, pair.follower
    steps, h = len(pair), pair.dt / substeps
    rollout = empty_rollout(n, steps, follower)
    position = rollout.positions[:, 0].copy()
    speed = rollout.speeds[:, 0].copy()
    with np.errstate(all="ignore"):
        for k in range(steps):
            for sub in range(substeps):
                leader_position = leader.positions[k] + leader.speeds[k] * sub * h
                ctx = KinematicContext(speed, leader.speeds[k], leader_position - position,
                                       pair.leader_length)
                u = np.broadcast_to(model.accel(ctx, p), (n,))
                if sub == 0:
                    rollout.accelerations[:, k] = u
                if k == steps - 1:
                    break
                rollout.negative_gap |= ctx.front_to_rear_gap < 0
                speed = speed + u * h
                rollout.speed_clamped |= speed < 0
                speed = np.where(speed < 0, 0.0, speed)
                position = position + speed * h
            if k == steps - 1:
                break
            bad = check_finite(rollout, k, position, speed, rollout.accelerations[:, k])
            position[bad] = leader.positions[k + 1]
            speed[bad] = 0.0
            rollout.positions[:, k + 1] = position
            rollout.speeds[:, k + 1] = speed
    check_finite(rollout, steps - 1, rollout.accelerations[:, -1])
    return rollout


def rollout_controller(model, p, pair, n, subtract_length):
    """Propagate the deviation state and rebuild follower kinematics from it

    v_f = v_l - dv, p_f = p_l - offset - (s* + ds); the recorded
    acceleration is u, or the realized (lagged) acceleration for 3-dim states.
    """
    leader, follower = pair.leader, pair.follower
    steps = len(pair)
    offset = pair.leader_length if subtract_length else 0.0
    system = model.build_discrete_system(p, pair.dt)
    rollout = empty_rollout(n, steps, follower)
    ctx = KinematicContext(follower.speeds[0], leader.speeds[0], gap(pair, 0, False), pair.leader_length)
    initial = controller_state_from_kinematics(ctx, follower.accelerations[0], p, subtract_length, model)
    entries = [initial.delta_s, initial.delta_v]
    if initial.dimension == 3:
        entries.append(initial.accel)
    state = np.array(np.broadcast_to(column(entries), (n, model.state_dimension)))
    with np.errstate(all="ignore"):
        for k in range(steps - 1):
            u = np.broadcast_to(model.control(state, leader.accelerations[k], system, p), (n,))
            rollout.accelerations[:, k] = state[:, 2] if model.state_dimension == 3 else u
            state = system.step(state, u, leader.accelerations[k])
            speed = leader.speeds[k + 1] - state[:, 1]
            clamped = speed < 0
            rollout.speed_clamped |= clamped
            speed = np.where(clamped, 0.0, speed)
            state[:, 1] = np.where(clamped, leader.speeds[k + 1], state[:, 1])
            position = leader.positions[k + 1] - offset - model.desired_spacing(speed, p) - state[:, 0]
            rollout.negative_gap |= leader.positions[k + 1] - position - pair.leader_length < 0
            bad = check_finite(rollout, k, position, speed, u, state.sum(axis=1))
            state[bad] = 0.0
            rollout.positions[:, k + 1] = position
            rollout.speeds[:, k + 1] = speed
        u = np.broadcast_to(model.control(state, leader.accelerations[-1], system, p), (n,))
        rollout.accelerations[:, -1] = state[:, 2] if model.state_dimension == 3 else u
    check_finite(rollout, steps - 1, rollout.accelerations[:, -1])
    return rollout

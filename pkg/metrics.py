"""Error tables and transport distances between test pairs and particles"""
import logging
from dataclasses import dataclass

import numpy as np
import ot
from joblib import Parallel, delayed
from scipy import optimize, sparse

from abcengine import Scoring

# stands in for +inf inside the solvers; plans must never use it
SENTINEL = 1e12
PLAN_TOLERANCE = 1e-9
METRIC_COLUMNS = ["avg_position", "avg_speed", "avg_accel", "ws", "beta_ws", "minimum"]


class TransportError(ValueError):
    """Raised when a transport problem has no finite-cost plan"""


@dataclass(frozen=True)
class CostMatrix:
    """cost[i, j]: weighted deviation of particle j simulated on test pair i

    channels keeps the unweighted (position, speed, accel) norms per cell.
    """
    pair_ids: tuple
    particle_ids: tuple
    cost: np.ndarray
    channels: np.ndarray = None

    @property
    def shape(self):
        return self.cost.shape


@dataclass(frozen=True)
class TransportPlan:
    gamma: np.ndarray
    objective: float


def as_cost_matrix(cost):
    """Accept a CostMatrix or a plain 2-d array"""
    if isinstance(cost, CostMatrix):
        return cost
    cost = np.atleast_2d(np.asarray(cost, dtype=float))
    return CostMatrix(tuple("pair%d" % row for row in range(cost.shape[0])),
                      tuple("particle%d" % col for col in range(cost.shape[1])), cost)


def pair_channels(particles, pair, scoring):
    """(particles, 3) channel norms of every particle on one pair"""
    channels = np.empty((len(particles), 3))
    by_model = {}
    for position, particle in enumerate(particles):
        by_model.setdefault(particle.model_id, []).append(position)
    for model_id, positions in by_model.items():
        matrix = np.array([particles[position].params.vector() for position in positions])
        channels[positions] = scoring.channel_norms(scoring.simulate(model_id, matrix, pair), pair)
    return channels


def build_cost_matrix(posterior, test, weights=None, scoring=None, n_jobs=1):
    """Score every retained particle against every test pair

    posterior: a PosteriorSet or HybridPosterior
    """
    scoring = scoring or (Scoring(weights) if weights else Scoring())
    particles = posterior.all_particles()
    if not particles or not len(test):
        raise ValueError("A cost matrix needs particles and test pairs")
    rows = Parallel(n_jobs=n_jobs)(delayed(pair_channels)(particles, pair, scoring) for pair in test)
    channels = np.stack(rows)
    return CostMatrix(tuple(test.pair_ids), tuple(particle.particle_id for particle in particles),
                      scoring.combine(channels), channels)


def solver_costs(cost):
    """Replace +inf by the sentinel after checking every pair has a finite cell"""
    values = cost.cost
    if np.any(np.isnan(values)):
        raise TransportError("Cost matrix contains NaN")
    finite = np.isfinite(values)
    empty = np.flatnonzero(~finite.any(axis=1))
    if empty.size:
        raise TransportError("Pair %s: every particle aborted" % cost.pair_ids[empty[0]])
    return np.where(finite, values, SENTINEL), finite


def check_plan(cost, gamma, finite):
    """Reject plans that move mass through sentinel cells"""
    used = (gamma > PLAN_TOLERANCE) & ~finite
    if used.any():
        row, col = np.argwhere(used)[0]
        raise TransportError("Pair %s: no finite-cost plan, particle %s is needed despite aborting"
                             % (cost.pair_ids[row], cost.particle_ids[col]))


def wasserstein(cost):
    """Exact transport with uniform marginals on pairs and particles"""
    cost = as_cost_matrix(cost)
    values, finite = solver_costs(cost)
    rows, cols = values.shape
    row_mass = np.full(rows, 1.0 / rows)
    col_mass = np.full(cols, 1.0 / cols)
    gamma, log = ot.emd(row_mass, col_mass, values, numItermax=10_000_000, log=True)
    if log.get("warning"):
        logging.warning("transport solver: %s" % log["warning"])
    check_plan(cost, gamma, finite)
    objective = float(np.sum(gamma[finite] * values[finite]))
    return objective, TransportPlan(gamma, objective)


def beta_wasserstein(cost, beta=0.15):
    """Transport with rows fixed at 1/I and every column receiving at least beta/P

    beta = 1 is the plain Wasserstein distance.
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1], got %s" % beta)
    cost = as_cost_matrix(cost)
    values, finite = solver_costs(cost)
    rows, cols = values.shape
    # gamma is flattened row-major: variable i * cols + j
    row_sums = sparse.kron(sparse.eye(rows), np.ones((1, cols)), format="csr")
    col_sums = sparse.kron(np.ones((1, rows)), sparse.eye(cols), format="csr")
    result = optimize.linprog(values.ravel(),
                              A_ub=-col_sums, b_ub=np.full(cols, -beta / cols),
                              A_eq=row_sums, b_eq=np.full(rows, 1.0 / rows),
                              bounds=(0, None), method="highs")
    if result.status != 0:
        raise TransportError("beta-transport problem failed: %s" % result.message)
    gamma = np.clip(result.x.reshape(rows, cols), 0.0, None)
    check_plan(cost, gamma, finite)
    objective = float(np.sum(gamma[finite] * values[finite]))
    return objective, TransportPlan(gamma, objective)


def minimum_distance(cost):
    """Mean over pairs of the best particle cost"""
    cost = as_cost_matrix(cost)
    solver_costs(cost)
    return float(np.mean(np.min(cost.cost, axis=1)))


def average_errors(posterior=None, test=None, weights=None, scoring=None, cost=None):
    """Mean (position, speed, accel) deviation over all finite cells

    Reuses the channel norms of cost when given.
    """
    if cost is None:
        cost = build_cost_matrix(posterior, test, weights, scoring)
    channels = cost.channels.reshape(-1, 3)
    finite = np.all(np.isfinite(channels), axis=1)
    if not finite.all():
        logging.warning("average errors skip %d aborted simulations" % np.sum(~finite))
    if not finite.any():
        return np.inf, np.inf, np.inf
    position, speed, accel = channels[finite].mean(axis=0)
    return float(position), float(speed), float(accel)


def evaluate_metrics(posterior, test, beta=0.15, scoring=None, n_jobs=1):
    """The six test metrics of one posterior: average errors and the three distances"""
    cost = build_cost_matrix(posterior, test, scoring=scoring, n_jobs=n_jobs)
    position, speed, accel = average_errors(cost=cost)
    return {
        "avg_position": position,
        "avg_speed": speed,
        "avg_accel": accel,
        "ws": wasserstein(cost)[0],
        "beta_ws": beta_wasserstein(cost, beta)[0],
        "minimum": minimum_distance(cost),
    }


def normalize_metrics(table):
    """Linear rescaling per column, 1 for the smallest error and 0 for the largest

    table: DataFrame indexed by model, one column per metric
    """
    normalized = table.astype(float).copy()
    for column in normalized.columns:
        values = normalized[column].to_numpy()
        finite = np.isfinite(values)
        if not finite.any():
            normalized[column] = 1.0
            continue
        low, high = values[finite].min(), values[finite].max()
        scaled = np.ones(len(values)) if high == low else (high - values) / (high - low)
        # aborted (infinite) entries rank worst
        normalized[column] = np.where(finite, scaled, 0.0)
    return normalized

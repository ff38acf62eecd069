"""ABC rejection sampling, hybrid model merging and pairwise comparison"""
import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from models import MODELS, get_model, make_params, model_code
from priors import default_priors
from simulator import simulate_batch, simulate_follower
from streams import substream

DEFAULT_WEIGHTS = (0.5, 0.3, 0.2)
NORMS = ("rms", "mae")
HYBRID_MODES = ("balanced", "global")


@dataclass(frozen=True)
class Scoring:
    """How a simulated follower is compared against the observed one

    weights: (position, speed, acceleration), non-negative, summing to 1

    norm: rms or mae over time steps
    """
    weights: tuple = DEFAULT_WEIGHTS
    norm: str = "rms"
    substeps: int = 1
    subtract_length: bool = True

    def __post_init__(self):
        weights = tuple(float(weight) for weight in self.weights)
        if len(weights) != 3 or min(weights) < 0 or not np.isclose(sum(weights), 1.0):
            raise ValueError("Weights must be three non-negative numbers summing to 1, got %s"
                             % (self.weights,))
        if self.norm not in NORMS:
            raise ValueError("Unknown norm %s, one of: %s" % (self.norm, ", ".join(NORMS)))
        if self.substeps < 1:
            raise ValueError("substeps must be at least 1")
        object.__setattr__(self, "weights", weights)

    def channel_norms(self, rollout, pair):
        """Per-particle (position, speed, acceleration) deviations, inf when aborted"""
        observed = pair.follower
        norms = np.empty((len(rollout), 3))
        channels = ((rollout.positions, observed.positions),
                    (rollout.speeds, observed.speeds),
                    (rollout.accelerations, observed.accelerations))
        for column, (simulated, reference) in enumerate(channels):
            deviation = simulated - reference
            if self.norm == "rms":
                norms[:, column] = np.sqrt(np.mean(deviation ** 2, axis=1))
            else:
                norms[:, column] = np.mean(np.abs(deviation), axis=1)
        norms[rollout.aborted] = np.inf
        return norms

    def combine(self, norms):
        """Weighted sum of channel norms along the last axis"""
        norms = np.asarray(norms, dtype=float)
        with np.errstate(invalid="ignore"):
            score = np.sum(norms * np.asarray(self.weights), axis=-1)
        return np.where(np.any(np.isinf(norms), axis=-1), np.inf, score)

    def simulate(self, model_id, matrix, pair):
        return simulate_batch(model_id, matrix, pair, self.substeps, self.subtract_length)


@dataclass(frozen=True)
class Particle:
    """One parameter vector of one model, with the pair it was scored on"""
    model_id: str
    params: object
    assigned_pair: str = None
    score: float = None
    # draw index within the model's particle stream
    index: int = -1

    @property
    def evaluated(self):
        return self.score is not None

    @property
    def particle_id(self):
        return "%s#%d" % (self.model_id, self.index)


@dataclass
class PosteriorSet:
    """Accepted particles of one model, the n_keep best per pair

    buckets: pair_id -> particles sorted by (score, draw index)

    rejected_floor: pair_id -> lowest score among particles assigned to the
    pair but not kept (inf when none were rejected)
    """
    model_id: str
    n_keep: int
    buckets: dict
    evaluated: dict = field(default_factory=dict)
    rejected_floor: dict = field(default_factory=dict)
    n_particles: int = 0
    # (pair position, score) of every evaluated particle, in draw order
    score_trace: tuple = None

    def __len__(self):
        return sum(len(bucket) for bucket in self.buckets.values())

    def all_particles(self):
        return [particle for bucket in self.buckets.values() for particle in bucket]

    def truncate(self, n_keep):
        """Keep only the n_keep best particles per pair"""
        if n_keep > self.n_keep:
            raise ValueError("Cannot grow a posterior from %d to %d per pair" % (self.n_keep, n_keep))
        floor = {}
        for pair_id, bucket in self.buckets.items():
            dropped = [particle.score for particle in bucket[n_keep:]]
            floor[pair_id] = min(dropped + [self.rejected_floor.get(pair_id, np.inf)])
        buckets = {pair_id: list(bucket[:n_keep]) for pair_id, bucket in self.buckets.items()}
        return replace(self, n_keep=n_keep, buckets=buckets, rejected_floor=floor)


@dataclass
class HybridPosterior:
    """Best particles pooled across models and the share of each model

    shares are exact fractions of the pooled count and sum to 1.
    """
    particles: tuple
    shares: dict
    n_hybrid: int
    mode: str = "balanced"

    def __len__(self):
        return len(self.particles)

    def all_particles(self):
        return list(self.particles)

    def share_floats(self):
        return {model_id: float(share) for model_id, share in self.shares.items()}


@dataclass
class BatchResult:
    """Per-pair top-n of a batch of particles, mergeable in any grouping"""
    scores: list
    indices: list
    vectors: list
    evaluated: np.ndarray
    floor: np.ndarray
    trace_pairs: np.ndarray = None
    trace_scores: np.ndarray = None


def score_particle(particle, pair, weights=DEFAULT_WEIGHTS, scoring=None):
    """Weighted deviation of the particle's simulated follower on one pair"""
    scoring = scoring or Scoring(weights)
    rollout = scoring.simulate(particle.model_id, particle.params.vector(), pair)
    return float(scoring.combine(scoring.channel_norms(rollout, pair))[0])


def score_particle_all(particle, dataset, weights=DEFAULT_WEIGHTS, scoring=None):
    """Score of a particle against every pair: mean channel norms, then weighted"""
    scoring = scoring or Scoring(weights)
    norms = np.array([scoring.channel_norms(
        scoring.simulate(particle.model_id, particle.params.vector(), pair), pair)[0]
        for pair in dataset])
    return float(scoring.combine(norms.mean(axis=0)))


def assign_pair(rng, dataset):
    """Draw the evaluation pair of a particle uniformly"""
    if not len(dataset):
        raise ValueError("Cannot assign a pair from an empty dataset")
    return dataset.pair_ids[int(rng.integers(0, len(dataset)))]


def select_best(scores, indices, n_keep):
    """Positions of the n_keep lowest finite scores, ties by draw index"""
    order = np.lexsort((indices, scores))
    order = order[np.isfinite(scores[order])]
    return order[:n_keep], order[n_keep:]


def evaluate_batch(model_id, dataset, batch, count, batch_size, seed, priors, scoring,
                   n_keep, threshold=None, keep_trace=False):
    """Sample, assign and score one seeded batch of particles"""
    code = model_code(model_id)
    names = get_model(model_id).parameter_names
    matrix = priors.sample(model_id, substream(seed, "sampling", code, batch), size=count, names=names)
    assignment = substream(seed, "assignment", code, batch).integers(0, len(dataset), size=count)
    indices = batch * batch_size + np.arange(count)
    scores = np.full(count, np.inf)
    for position, pair in enumerate(dataset):
        rows = np.flatnonzero(assignment == position)
        if rows.size:
            scores[rows] = scoring.combine(scoring.channel_norms(
                scoring.simulate(model_id, matrix[rows], pair), pair))
    result = BatchResult([], [], [], np.bincount(assignment, minlength=len(dataset)),
                         np.full(len(dataset), np.inf))
    if keep_trace:
        result.trace_pairs, result.trace_scores = assignment, scores.copy()
    if threshold is not None:
        scores = np.where(scores <= threshold, scores, np.inf)
    for position in range(len(dataset)):
        rows = np.flatnonzero(assignment == position)
        kept, dropped = select_best(scores[rows], indices[rows], n_keep)
        result.scores.append(scores[rows][kept])
        result.indices.append(indices[rows][kept])
        result.vectors.append(matrix[rows][kept])
        if dropped.size:
            result.floor[position] = scores[rows][dropped].min()
    return result


def merge_batches(first, second, n_keep):
    """Combine two batch results into the per-pair top-n of both"""
    merged = BatchResult([], [], [], first.evaluated + second.evaluated,
                         np.minimum(first.floor, second.floor))
    if first.trace_pairs is not None and second.trace_pairs is not None:
        merged.trace_pairs = np.concatenate([first.trace_pairs, second.trace_pairs])
        merged.trace_scores = np.concatenate([first.trace_scores, second.trace_scores])
    for position in range(len(first.scores)):
        scores = np.concatenate([first.scores[position], second.scores[position]])
        indices = np.concatenate([first.indices[position], second.indices[position]])
        vectors = np.concatenate([first.vectors[position], second.vectors[position]])
        kept, dropped = select_best(scores, indices, n_keep)
        merged.scores.append(scores[kept])
        merged.indices.append(indices[kept])
        merged.vectors.append(vectors[kept])
        if dropped.size:
            merged.floor[position] = min(merged.floor[position], scores[dropped].min())
    return merged


def batch_plan(n_particles, batch_size):
    """(batch number, particle count) covering n_particles draws"""
    return [(batch, min(batch_size, n_particles - batch * batch_size))
            for batch in range(-(-n_particles // batch_size))]


def run_abc_rs(model_id, dataset, n_particles, n_keep, seed, scoring=None, priors=None,
               batch_size=4096, n_jobs=1, threshold=None, keep_trace=False):
    """Rejection sampling of one model, keeping the n_keep best particles per pair

    Particles are drawn in fixed batches with their own seeded sub-streams,
    so the result depends on (seed, batch_size) and never on n_jobs.

    threshold: optional absolute score above which particles are rejected
    """
    get_model(model_id)
    if n_particles < 1 or n_keep < 1:
        raise ValueError("n_particles and n_keep must be positive")
    scoring = scoring or Scoring()
    priors = priors or default_priors()
    if n_particles < n_keep * len(dataset):
        logging.warning("%s: %d particles for %d pairs x %d kept, some buckets stay under-full"
                        % (model_id, n_particles, len(dataset), n_keep))
    started = time.time()
    results = Parallel(n_jobs=n_jobs)(
        delayed(evaluate_batch)(model_id, dataset, batch, count, batch_size, seed, priors,
                                scoring, n_keep, threshold, keep_trace)
        for batch, count in batch_plan(n_particles, batch_size))
    total = results[0]
    for result in results[1:]:
        total = merge_batches(total, result, n_keep)

    buckets, evaluated, floor = {}, {}, {}
    for position, pair_id in enumerate(dataset.pair_ids):
        buckets[pair_id] = [
            Particle(model_id, make_params(model_id, vector), pair_id, float(score), int(index))
            for score, index, vector in zip(total.scores[position], total.indices[position],
                                            total.vectors[position])]
        evaluated[pair_id] = int(total.evaluated[position])
        floor[pair_id] = float(total.floor[position])
        if not buckets[pair_id]:
            logging.warning("%s: no finite-scored particle for pair %s" % (model_id, pair_id))
    trace = (total.trace_pairs, total.trace_scores) if keep_trace else None
    posterior = PosteriorSet(model_id, n_keep, buckets, evaluated, floor, n_particles, trace)
    logging.info("%s: accepted %d of %d particles in %.1f s"
                 % (model_id, len(posterior), n_particles, time.time() - started))
    return posterior


def default_hybrid_size(n_models, n_keep, n_pairs):
    """N_A = max(N |pairs|, M N |pairs| / 2)"""
    return max(n_keep * n_pairs, n_models * n_keep * n_pairs // 2)


def hybrid_quota(n_hybrid, n_pairs):
    """Particles the balanced hybrid keeps per pair"""
    return max(1, int(round(n_hybrid / n_pairs)))


def hybrid_depth(n_models, n_keep, n_pairs, n_hybrid=None):
    """Particles every model must hold per pair so that one model alone can fill the quota

    The per-model posterior keeps n_keep; the hybrid pool reaches deeper when
    the quota is larger.
    """
    if n_hybrid is None:
        n_hybrid = default_hybrid_size(n_models, n_keep, n_pairs)
    return max(n_keep, hybrid_quota(n_hybrid, n_pairs))


def particle_order(particle):
    return particle.score, list(MODELS).index(particle.model_id), particle.index


def merge_hybrid(posteriors, n_hybrid=None, mode="balanced"):
    """Pool several models' posteriors and keep the n_hybrid best particles

    balanced: the best n_hybrid/|pairs| particles of every pair

    global: the best n_hybrid particles overall

    The default n_hybrid follows from the posteriors' n_keep. Pass it
    explicitly when the posteriors are deeper pools for a hybrid sized on a
    smaller keep count (see hybrid_depth).
    """
    if not posteriors:
        raise ValueError("merge_hybrid needs at least one posterior")
    if mode not in HYBRID_MODES:
        raise ValueError("Unknown hybrid mode %s, one of: %s" % (mode, ", ".join(HYBRID_MODES)))
    model_ids = [posterior.model_id for posterior in posteriors]
    if len(set(model_ids)) != len(model_ids):
        raise ValueError("Each model may enter the hybrid once, got %s" % ", ".join(model_ids))
    pair_ids = list(posteriors[0].buckets)
    if n_hybrid is None:
        n_hybrid = default_hybrid_size(len(posteriors), posteriors[0].n_keep, len(pair_ids))

    if mode == "balanced":
        quota = hybrid_quota(n_hybrid, len(pair_ids))
        if quota * len(pair_ids) != n_hybrid:
            logging.info("hybrid size %d is not a multiple of %d pairs, keeping %d per pair (%d total)"
                         % (n_hybrid, len(pair_ids), quota, quota * len(pair_ids)))
            n_hybrid = quota * len(pair_ids)
        selected, short = [], []
        for pair_id in pair_ids:
            pool = [particle for posterior in posteriors
                    for particle in posterior.buckets.get(pair_id, [])]
            if len(pool) < quota:
                short.append(pair_id)
            selected.extend(sorted(pool, key=particle_order)[:quota])
        if short:
            logging.warning("hybrid quota of %d per pair exceeds the pooled particles of %d pairs "
                            "(first %s), keeping every particle there" % (quota, len(short), short[0]))
    else:
        pool = [particle for posterior in posteriors for particle in posterior.all_particles()]
        if len(pool) < n_hybrid:
            logging.warning("hybrid size %d exceeds the %d pooled particles, keeping all"
                            % (n_hybrid, len(pool)))
        selected = sorted(pool, key=particle_order)[:n_hybrid]
    if not selected:
        raise ValueError("No accepted particle to build a hybrid from")
    return HybridPosterior(tuple(selected), model_shares(selected, model_ids), len(selected), mode)


def model_shares(particles, model_ids):
    """Exact share of every model among the particles"""
    counts = {model_id: 0 for model_id in model_ids}
    for particle in particles:
        counts[particle.model_id] += 1
    return {model_id: Fraction(count, len(particles)) for model_id, count in counts.items()}


def hybrid_from_particles(particles, mode="balanced"):
    """Rebuild a HybridPosterior from archived particles"""
    model_ids = [model_id for model_id in MODELS if any(p.model_id == model_id for p in particles)]
    return HybridPosterior(tuple(particles), model_shares(particles, model_ids), len(particles), mode)


def pairwise_from_posteriors(first, second, n_hybrid=None, mode="balanced"):
    """Shares of two models in their two-model hybrid"""
    hybrid = merge_hybrid([first, second], n_hybrid, mode)
    return hybrid.shares[first.model_id], hybrid.shares[second.model_id]


def pairwise_comparison(model_a, model_b, dataset, n_particles, n_keep, seed, scoring=None,
                        priors=None, batch_size=4096, n_jobs=1, mode="balanced"):
    """Relative likelihood of two models: their shares in a two-model hybrid"""
    if model_a == model_b:
        raise ValueError("pairwise_comparison needs two distinct models")
    first, second = (run_abc_rs(model_id, dataset, n_particles, n_keep, seed, scoring, priors,
                                batch_size, n_jobs) for model_id in (model_a, model_b))
    return pairwise_from_posteriors(first, second, mode=mode)


def pairwise_matrix(posteriors, n_hybrid=None, mode="balanced"):
    """Shares for every unordered model pair, keyed (row model, column model)"""
    shares = {}
    for row, first in enumerate(posteriors):
        for second in posteriors[row + 1:]:
            share_a, share_b = pairwise_from_posteriors(first, second, n_hybrid, mode)
            shares[(first.model_id, second.model_id)] = share_a
            shares[(second.model_id, first.model_id)] = share_b
    return shares


def sample_posterior(posterior, rng):
    """Draw one retained particle uniformly"""
    particles = posterior.all_particles()
    if not particles:
        raise ValueError("Cannot sample from an empty posterior")
    return particles[int(rng.integers(0, len(particles)))]


def simulate_stochastic(posterior, pair, rng, scoring=None):
    """One stochastic reproduction of a pair: a random particle, then its roll-out"""
    scoring = scoring or Scoring()
    particle = sample_posterior(posterior, rng)
    return particle, simulate_follower(particle, pair, scoring.substeps, scoring.subtract_length)


def posterior_summary(posterior):
    """Per-model, per-parameter statistics of the retained particles"""
    rows = []
    particles = posterior.all_particles()
    for model_id in MODELS:
        vectors = np.array([particle.params.vector() for particle in particles
                            if particle.model_id == model_id])
        if not len(vectors):
            continue
        for column, name in enumerate(get_model(model_id).parameter_names):
            values = vectors[:, column]
            rows.append({"model_id": model_id, "parameter": name, "count": len(values),
                         "mean": values.mean(), "std": values.std(),
                         "q05": np.quantile(values, 0.05), "q50": np.quantile(values, 0.5),
                         "q95": np.quantile(values, 0.95)})
    return pd.DataFrame(rows, columns=["model_id", "parameter", "count", "mean", "std",
                                       "q05", "q50", "q95"])

"""Cross-validated calibration runs, synthetic data and report files"""
import logging
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pandas as pd
import yaml

from abcengine import Particle, Scoring, default_hybrid_size, hybrid_depth, hybrid_from_particles, \
    merge_hybrid, pairwise_matrix, posterior_summary, run_abc_rs, simulate_stochastic
from metrics import METRIC_COLUMNS, evaluate_metrics, normalize_metrics
from models import MODELS, get_model, make_params
from runconfig import VERSION
from streams import substream
from trajectory import CFPair, Dataset, StatePortfolio, split_folds
from trajectoryloader import load_dataset, write_dataset, write_truth

FLOAT_FORMAT = "%.17g"
HYBRID = "hybrid"


@dataclass
class RunReport:
    """Everything a calibrate run emits

    fold_metrics: one table per fold, rows are models plus the hybrid

    fold_shares: one {model_id: Fraction} per fold

    posteriors: per fold, every model truncated to n_keep

    pools: per fold, the deeper per-model pools the hybrid was drawn from
    """
    fold_metrics: list
    fold_shares: list
    posteriors: list
    hybrids: list
    provenance: dict
    pairwise: dict = None
    sensitivity: pd.DataFrame = None
    fold_sizes: list = field(default_factory=list)
    pools: list = None

    @property
    def models(self):
        return list(self.fold_shares[0])

    @property
    def metrics(self):
        """Arithmetic mean of the fold tables"""
        total = self.fold_metrics[0]
        for table in self.fold_metrics[1:]:
            total = total + table
        return total / len(self.fold_metrics)

    @property
    def normalized(self):
        return normalize_metrics(self.metrics)

    @property
    def mean_shares(self):
        return mean_fraction_shares(self.fold_shares)

    def shares_table(self):
        rows = [{model_id: float(share) for model_id, share in shares.items()}
                for shares in self.fold_shares]
        rows.append({model_id: float(share) for model_id, share in self.mean_shares.items()})
        index = ["fold%d" % number for number in range(len(self.fold_shares))] + ["mean"]
        return pd.DataFrame(rows, index=pd.Index(index, name="fold"), columns=self.models)

    def pairwise_table(self):
        return pairwise_table(self.pairwise, self.models)

    def summary_table(self):
        frames = []
        for number, posteriors in enumerate(self.posteriors):
            for posterior in posteriors:
                frame = posterior_summary(posterior)
                frame.insert(0, "fold", number)
                frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def write(self, out):
        """Write every report file into the directory out"""
        os.makedirs(out, exist_ok=True)
        for number, table in enumerate(self.fold_metrics):
            write_table(table, os.path.join(out, "metrics_fold%d.csv" % number))
            archived = self.pools[number] if self.pools else self.posteriors[number]
            write_posterior_csv(archived, self.hybrids[number],
                                os.path.join(out, "posterior_fold%d.csv" % number))
        write_table(self.metrics, os.path.join(out, "metrics.csv"))
        write_table(self.normalized, os.path.join(out, "metrics_normalized.csv"))
        write_table(self.shares_table(), os.path.join(out, "shares.csv"))
        self.summary_table().to_csv(os.path.join(out, "posterior_summary.csv"), index=False,
                                    float_format=FLOAT_FORMAT)
        if self.pairwise is not None:
            write_table(self.pairwise_table(), os.path.join(out, "pairwise.csv"))
        if self.sensitivity is not None:
            write_table(self.sensitivity, os.path.join(out, "sensitivity.csv"))
        with open(os.path.join(out, "summary.yaml"), "w") as summary:
            yaml.safe_dump(self.summary(), summary, sort_keys=True)
        logging.info("wrote report to %s" % out)

    def summary(self):
        shares = {model_id: float(share) for model_id, share in self.mean_shares.items()}
        return {
            "version": VERSION,
            "seed": self.provenance["seed"],
            "config_sha256": self.provenance["config_sha256"],
            "config": self.provenance["config"],
            "fold_sizes": [list(sizes) for sizes in self.fold_sizes],
            "shares": shares,
            "top_model": top_model(self.mean_shares),
        }


def write_table(table, table_file):
    table.to_csv(table_file, float_format=FLOAT_FORMAT)


def read_table(table_file):
    """Read back any indexed report table"""
    return pd.read_csv(table_file, index_col=0)


def top_model(shares):
    """Model with the largest share, earliest registered on ties"""
    return max(shares, key=lambda model_id: (shares[model_id], -list(MODELS).index(model_id)))


def pairwise_table(shares, models):
    """Square table, cell (row, col) = row model's share against col; NaN diagonal"""
    table = pd.DataFrame(np.nan, index=pd.Index(models, name="model"), columns=models)
    for (row, col), share in shares.items():
        table.loc[row, col] = float(share)
    return table


def parameter_columns():
    columns = []
    for model in MODELS.values():
        columns.extend(name for name in model.parameter_names if name not in columns)
    return columns


def write_posterior_csv(posteriors, hybrid, posterior_file):
    """One record per retained particle, flagged when it made the hybrid"""
    in_hybrid = {(particle.model_id, particle.index) for particle in hybrid.all_particles()} \
        if hybrid is not None else set()
    particles = [particle for posterior in posteriors for particle in posterior.all_particles()]
    if not posteriors and hybrid is not None:
        particles = hybrid.all_particles()
    records = []
    for particle in particles:
        record = {"model_id": particle.model_id, "pair_id": particle.assigned_pair,
                  "index": particle.index, "score": particle.score,
                  "in_hybrid": (particle.model_id, particle.index) in in_hybrid}
        record.update(particle.params.values)
        records.append(record)
    columns = ["model_id", "pair_id", "index", "score", "in_hybrid"] + parameter_columns()
    pd.DataFrame(records, columns=columns).to_csv(posterior_file, index=False,
                                                  float_format=FLOAT_FORMAT)


def read_posterior_csv(posterior_file, hybrid_only=False):
    """Read a posterior archive back into Particles"""
    frame = pd.read_csv(posterior_file, dtype={"pair_id": str, "model_id": str})
    if hybrid_only:
        frame = frame[frame["in_hybrid"].astype(bool)]
    particles = []
    for _, row in frame.iterrows():
        names = get_model(row["model_id"]).parameter_names
        params = make_params(row["model_id"], {name: row[name] for name in names})
        particles.append(Particle(row["model_id"], params, row["pair_id"], float(row["score"]),
                                  int(row["index"])))
    return particles


def prepare_dataset(config):
    return load_dataset(config.dataset, default_dt=config.default_dt,
                        default_leader_length=config.default_leader_length)


def fold_splits(dataset, config):
    """(train, test) per fold; a single fold trains and tests on everything"""
    if config.folds == 1:
        logging.warning("folds = 1: training and testing on the same %d pairs" % len(dataset))
        return [(dataset, dataset)]
    return split_folds(dataset, config.folds, config.seed)


def calibrate_models(train, config, n_keep=None):
    """One PosteriorSet per configured model"""
    scoring, priors = config.scoring(), config.prior_bounds()
    return [run_abc_rs(model_id, train, config.n_particles, n_keep or config.n_keep, config.seed,
                       scoring, priors, config.batch_size, config.n_jobs, config.threshold)
            for model_id in config.models]


def mean_fraction_shares(fold_shares):
    models = list(fold_shares[0])
    return {model_id: sum((shares[model_id] for shares in fold_shares), Fraction(0))
            / len(fold_shares) for model_id in models}


def pooled_hybrid(wide, n_keep, n_pairs, n_hybrid=None, mode="balanced"):
    """Hybrid sized on n_keep, drawn from pools deep enough for one model to fill it

    wide: posteriors holding at least hybrid_depth particles per pair
    """
    if n_hybrid is None:
        n_hybrid = default_hybrid_size(len(wide), n_keep, n_pairs)
    depth = hybrid_depth(len(wide), n_keep, n_pairs, n_hybrid)
    pools = [posterior.truncate(depth) for posterior in wide]
    return pools, merge_hybrid(pools, n_hybrid, mode)


def cmd_calibrate(config, dataset=None):
    """Train every model per fold, merge the hybrid and score all of them on the test pairs"""
    dataset = prepare_dataset(config) if dataset is None else dataset
    scoring = config.scoring()
    n_models = len(config.models)
    fold_metrics, fold_shares, all_posteriors, all_pools, hybrids, sizes = [], [], [], [], [], []
    fold_pairwise, sweep = [], {n: [] for n in config.sweep_n}
    for number, (train, test) in enumerate(fold_splits(dataset, config)):
        started = time.time()
        widest = max([hybrid_depth(n_models, config.n_keep, len(train), config.n_hybrid)]
                     + [hybrid_depth(n_models, n, len(train)) for n in config.sweep_n])
        wide = calibrate_models(train, config, widest)
        posteriors = [posterior.truncate(config.n_keep) for posterior in wide]
        pools, hybrid = pooled_hybrid(wide, config.n_keep, len(train), config.n_hybrid,
                                      config.hybrid_mode)
        rows = {}
        for posterior in posteriors + [hybrid]:
            label = getattr(posterior, "model_id", HYBRID)
            if not len(posterior):
                logging.warning("fold %d: %s accepted nothing, metrics left infinite" % (number, label))
                rows[label] = {column: np.inf for column in METRIC_COLUMNS}
                continue
            rows[label] = evaluate_metrics(posterior, test, config.beta, scoring, config.n_jobs)
        table = pd.DataFrame.from_dict(rows, orient="index", columns=METRIC_COLUMNS)
        table.index.name = "model"
        fold_metrics.append(table)
        fold_shares.append(hybrid.shares)
        all_posteriors.append(posteriors)
        all_pools.append(pools)
        hybrids.append(hybrid)
        sizes.append((len(train), len(test)))
        if config.pairwise and len(posteriors) > 1:
            fold_pairwise.append(pairwise_matrix(posteriors, mode=config.hybrid_mode))
        for n in config.sweep_n:
            sweep[n].append(pooled_hybrid(wide, n, len(train), mode=config.hybrid_mode)[1].shares)
        logging.info("fold %d: %d train / %d test pairs, hybrid of %d particles in %.1f s"
                     % (number, len(train), len(test), len(hybrid), time.time() - started))

    pairwise = None
    if fold_pairwise:
        pairwise = mean_fraction_shares(fold_pairwise)
    sensitivity = None
    if config.sweep_n:
        sensitivity = sensitivity_table(sweep, config.models)
    provenance = {"seed": config.seed, "config_sha256": config.config_hash(),
                  "config": config.provenance()}
    return RunReport(fold_metrics, fold_shares, all_posteriors, hybrids, provenance,
                     pairwise, sensitivity, sizes, all_pools)


def sensitivity_table(sweep, models):
    """Fold-mean shares for each per-pair keep count, with the winning model"""
    rows = {}
    for n, fold_shares in sweep.items():
        shares = mean_fraction_shares(fold_shares)
        rows[n] = {model_id: float(shares[model_id]) for model_id in models}
        rows[n]["top_model"] = top_model(shares)
    table = pd.DataFrame.from_dict(rows, orient="index", columns=list(models) + ["top_model"])
    table.index.name = "n_keep"
    return table


def cmd_pairwise(config, dataset=None):
    """Share matrix of every model pair, trained on the whole dataset"""
    dataset = prepare_dataset(config) if dataset is None else dataset
    if len(config.models) < 2:
        raise ValueError("Pairwise comparison needs at least two models")
    # every two-model hybrid takes its own default size
    shares = pairwise_matrix(calibrate_models(dataset, config), mode=config.hybrid_mode)
    return pairwise_table(shares, config.models), shares


def simulate_particles(particles, pair, scoring):
    """Simulated follower positions and scores of particles on one pair"""
    positions = np.empty((len(particles), len(pair)))
    scores = np.empty(len(particles))
    by_model = {}
    for position, particle in enumerate(particles):
        by_model.setdefault(particle.model_id, []).append(position)
    for model_id, rows in by_model.items():
        matrix = np.array([particles[row].params.vector() for row in rows])
        rollout = scoring.simulate(model_id, matrix, pair)
        positions[rows] = rollout.positions
        scores[rows] = scoring.combine(scoring.channel_norms(rollout, pair))
    return positions, scores


def cmd_error_evolution(hybrid, pair, top_fraction=0.05, scoring=None):
    """Position error over time of every retained particle on one pair

    Returns (all particles, best top_fraction); columns ranked by score on the pair.
    """
    scoring = scoring or Scoring()
    particles = hybrid.all_particles()
    if not particles:
        raise ValueError("No particles to trace")
    positions, scores = simulate_particles(particles, pair, scoring)
    order = np.lexsort((np.arange(len(particles)), scores))
    errors = positions[order] - pair.follower.positions
    full = pd.DataFrame(errors.T, index=pd.Index(pair.leader.times, name="t"),
                        columns=[particles[row].particle_id for row in order])
    count = max(1, math.ceil(top_fraction * len(particles) - 1e-9))
    return full, full.iloc[:, :count]


def run_evolution(config, dataset=None):
    """Error evolution and one stochastic reproduction of the configured pair"""
    dataset = prepare_dataset(config) if dataset is None else dataset
    scoring = config.scoring()
    if config.posterior:
        hybrid = hybrid_from_particles(read_posterior_csv(config.posterior, hybrid_only=True),
                                       config.hybrid_mode)
    else:
        depth = hybrid_depth(len(config.models), config.n_keep, len(dataset), config.n_hybrid)
        _, hybrid = pooled_hybrid(calibrate_models(dataset, config, depth), config.n_keep, len(dataset),
                                  config.n_hybrid, config.hybrid_mode)
    pair = dataset.get(config.evolution_pair) if config.evolution_pair else dataset.pairs[0]
    full, top = cmd_error_evolution(hybrid, pair, config.top_fraction, scoring)
    particle, simulated = simulate_stochastic(hybrid, pair, substream(config.seed, "posterior"), scoring)
    os.makedirs(config.out, exist_ok=True)
    write_table(full, os.path.join(config.out, "evolution.csv"))
    write_table(top, os.path.join(config.out, "evolution_top.csv"))
    if simulated.aborted:
        logging.warning("stochastic draw %s aborted on pair %s" % (particle.particle_id, pair.pair_id))
    else:
        stochastic = pd.DataFrame({"position": simulated.portfolio.positions,
                                   "speed": simulated.portfolio.speeds,
                                   "accel": simulated.portfolio.accelerations},
                                  index=pd.Index(simulated.portfolio.times, name="t"))
        stochastic["particle"] = particle.particle_id
        write_table(stochastic, os.path.join(config.out, "stochastic.csv"))
    logging.info("pair %s: traced %d particles, top %d" % (pair.pair_id, full.shape[1], top.shape[1]))
    return full, top


def prior_midpoints(model_id, priors):
    names = get_model(model_id).parameter_names
    lower, upper = priors.bounds(model_id, names)
    return {name: float(value) for name, value in zip(names, (lower + upper) / 2)}


def synth_leader(rng, steps, dt, max_speed=30.0):
    """Leader under piecewise-constant acceleration: accelerate, cruise or brake segments"""
    accelerations = np.empty(steps)
    k = 0
    while k < steps:
        length = max(1, int(round(rng.uniform(3.0, 8.0) / dt)))
        kind = rng.integers(0, 3)
        if kind == 0:
            level = rng.uniform(0.5, 1.5)
        elif kind == 1:
            level = 0.0
        else:
            level = rng.uniform(-2.0, -0.5)
        accelerations[k:k + length] = level
        k += length
    speeds = np.empty(steps)
    positions = np.zeros(steps)
    speeds[0] = rng.uniform(10.0, 20.0)
    for k in range(steps):
        # speed stays within [0, max_speed]
        accelerations[k] = min(max(accelerations[k], -speeds[k] / dt), (max_speed - speeds[k]) / dt)
        if k == steps - 1:
            break
        speeds[k + 1] = max(0.0, speeds[k] + accelerations[k] * dt)
        positions[k + 1] = positions[k] + speeds[k] * dt + 0.5 * accelerations[k] * dt ** 2
    return StatePortfolio(positions, speeds, accelerations, dt, 0.0)


def synth_pair(pair_id, params, rng, steps, dt, noise, leader_length, scoring):
    """Leader plus the follower the true particle produces behind it, with noise"""
    model = get_model(params.model_id)
    leader = synth_leader(rng, steps, dt)
    speed = leader.speeds[0]
    if model.family == "HDV":
        spacing = model.equilibrium_spacing(speed, params, leader_length)
    else:
        spacing = model.equilibrium_spacing(speed, params, leader_length, scoring.subtract_length)
    if spacing is None or not np.isfinite(spacing) or spacing <= leader_length:
        spacing = leader_length + 2.0 + 1.5 * speed
    start = StatePortfolio(leader.positions - spacing, leader.speeds, np.zeros(steps), dt, 0.0)
    pair = CFPair(pair_id, leader, start, leader_length)
    rollout = scoring.simulate(params.model_id, params.vector(), pair)
    if rollout.aborted[0]:
        raise ValueError("Pair %s: the true particle aborted" % pair_id)
    position_noise, speed_noise, accel_noise = noise
    follower = StatePortfolio(rollout.positions[0] + rng.normal(0.0, position_noise, steps),
                              rollout.speeds[0] + rng.normal(0.0, speed_noise, steps),
                              rollout.accelerations[0] + rng.normal(0.0, accel_noise, steps), dt, 0.0)
    return CFPair(pair_id, leader, follower, leader_length)


def cmd_synth(config):
    """Write a synthetic trajectory file and its ground-truth sidecar to config.dataset"""
    synth = config.synth
    values = synth.params or prior_midpoints(synth.model, config.prior_bounds())
    params = make_params(synth.model, values)
    steps = int(round(synth.horizon / synth.dt))
    scoring = config.scoring()
    pairs = [synth_pair("%s-%03d" % (synth.model, number), params,
                        substream(config.synth_seed, "synth", number), steps, synth.dt,
                        synth.noise, synth.leader_length, scoring)
             for number in range(synth.n_pairs)]
    dataset = Dataset(tuple(pairs), name="synth-%s" % synth.model)
    write_dataset(dataset, config.dataset)
    write_truth(config.dataset, {
        "model": synth.model,
        "params": dict(params.values),
        "n_pairs": synth.n_pairs,
        "horizon": float(synth.horizon),
        "dt": float(synth.dt),
        "noise": list(synth.noise),
        "leader_length": float(synth.leader_length),
        "seed": int(config.synth_seed),
    })
    logging.info("wrote %d synthetic %s pairs of %d samples to %s"
                 % (len(pairs), synth.model, steps, config.dataset))
    return dataset

"""Trajectory types for leader-follower pairs"""
import logging
from dataclasses import dataclass, field

import numpy as np

from streams import substream


class DatasetError(ValueError):
    """Raised when trajectory input cannot be used for calibration"""


@dataclass(frozen=True)
class StatePortfolio:
    """Position, speed and acceleration profiles of one vehicle

    positions: metres, speeds: m/s, accelerations: m/s^2, uniformly
    sampled every dt seconds starting at t0
    """
    positions: np.ndarray
    speeds: np.ndarray
    accelerations: np.ndarray
    dt: float = 0.1
    t0: float = 0.0

    def __post_init__(self):
        for name in ("positions", "speeds", "accelerations"):
            values = np.asarray(getattr(self, name), dtype=float)
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if not len(self.positions) == len(self.speeds) == len(self.accelerations):
            raise DatasetError("Profiles differ in length: %d/%d/%d" % (
                len(self.positions), len(self.speeds), len(self.accelerations)))
        if len(self.positions) < 2:
            raise DatasetError("A portfolio needs at least 2 samples")
        if not self.dt > 0:
            raise DatasetError("Sampling interval must be positive, got %s" % self.dt)
        if not np.all(np.isfinite(self.positions)):
            raise DatasetError("Positions must be finite")

    def __len__(self):
        return len(self.positions)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.speeds))
                    and np.all(np.isfinite(self.accelerations)))


@dataclass(frozen=True)
class CFPair:
    """A leader portfolio, the observed follower behind it and the leader length"""
    pair_id: str
    leader: StatePortfolio
    follower: StatePortfolio
    leader_length: float = 5.0

    def __post_init__(self):
        if len(self.leader) != len(self.follower):
            raise DatasetError("Pair %s: leader and follower differ in length" % self.pair_id)
        if not np.isclose(self.leader.dt, self.follower.dt) \
                or not np.isclose(self.leader.t0, self.follower.t0):
            raise DatasetError("Pair %s: leader and follower are not time aligned" % self.pair_id)
        if self.leader_length < 0:
            raise DatasetError("Pair %s: negative leader length" % self.pair_id)
        if self.leader.positions[0] < self.follower.positions[0]:
            raise DatasetError("Pair %s: leader starts behind follower" % self.pair_id)

    @property
    def dt(self):
        return self.leader.dt

    def __len__(self):
        return len(self.leader)


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of CF pairs"""
    pairs: tuple
    name: str = "dataset"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        index = {}
        for position, pair in enumerate(self.pairs):
            if pair.pair_id in index:
                raise DatasetError("Duplicate pair_id: %s" % pair.pair_id)
            index[pair.pair_id] = position
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair_id):
        return pair_id in self._index

    @property
    def pair_ids(self):
        return [pair.pair_id for pair in self.pairs]

    def get(self, pair_id):
        """Return the pair with the given id"""
        try:
            return self.pairs[self._index[pair_id]]
        except KeyError:
            raise DatasetError("Unknown pair_id: %s" % pair_id)

    def subset(self, pair_ids, name=None):
        return Dataset(tuple(self.get(pair_id) for pair_id in pair_ids),
                       name=name or self.name)


def derive_kinematics(positions, dt, t0=0.0):
    """Build a portfolio from positions alone using finite differences

    Central differences on interior samples, first-order one-sided
    differences at both ends; accelerations reuse the scheme on speeds.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 1 or len(positions) < 3:
        raise DatasetError("Finite differences need at least 3 samples")
    if not np.all(np.isfinite(positions)):
        raise DatasetError("Non-finite position sample")
    if not dt > 0:
        raise DatasetError("Sampling interval must be positive, got %s" % dt)
    speeds = np.gradient(positions, dt, edge_order=1)
    accelerations = np.gradient(speeds, dt, edge_order=1)
    return StatePortfolio(positions, speeds, accelerations, dt, t0)


def portfolio_from_speeds(positions, speeds, dt, t0=0.0):
    """Keep given speeds verbatim and derive accelerations from them"""
    speeds = np.asarray(speeds, dtype=float)
    if len(speeds) < 3:
        raise DatasetError("Finite differences need at least 3 samples")
    accelerations = np.gradient(speeds, dt, edge_order=1)
    return StatePortfolio(positions, speeds, accelerations, dt, t0)


def gap(pair, k, subtract_length):
    """Leader position minus follower position at index k

    subtract_length: also remove the leader length (front-to-rear gap)
    """
    spacing = pair.leader.positions[k] - pair.follower.positions[k]
    if subtract_length:
        spacing -= pair.leader_length
    return float(spacing)


def split_folds(dataset, k, seed):
    """Return k (train, test) splits with near-equal disjoint test folds"""
    if k < 2:
        raise DatasetError("Cross-validation needs at least 2 folds, got %d" % k)
    if k > len(dataset):
        raise DatasetError("Cannot split %d pairs into %d folds" % (len(dataset), k))
    rng = substream(seed, "folds")
    order = rng.permutation(len(dataset))
    ids = dataset.pair_ids
    folds = []
    for number, test_positions in enumerate(np.array_split(order, k)):
        test_ids = set(ids[position] for position in test_positions)
        test = [pair_id for pair_id in ids if pair_id in test_ids]
        train = [pair_id for pair_id in ids if pair_id not in test_ids]
        logging.debug("fold %d: %d train / %d test" % (number, len(train), len(test)))
        folds.append((dataset.subset(train, "%s-train%d" % (dataset.name, number)),
                      dataset.subset(test, "%s-test%d" % (dataset.name, number))))
    return folds

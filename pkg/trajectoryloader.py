"""Load leader-follower trajectories from CSV"""
import logging

import numpy as np
import pandas as pd
import yaml

from trajectory import CFPair, Dataset, DatasetError, StatePortfolio, \
    derive_kinematics, portfolio_from_speeds


class TrajectoryLoader:
    """Generic logic to read the pair trajectory CSV schema into a Dataset

    Schema: pair_id,t,leader_pos,follower_pos[,leader_speed,follower_speed]
    [,leader_accel,follower_accel][,leader_length]. A `frame` column of
    sample indices may replace `t`, in which case default_dt applies.
    """
    encoding = "utf-8"
    header = 0
    separation = ","
    default_dt = 0.1
    default_leader_length = 5.0
    # relative tolerance on the sampling interval
    time_tolerance = 1e-6
    required_columns = ["pair_id", "leader_pos", "follower_pos"]

    def __init__(self, trajectory_file, name=None, default_dt=None, default_leader_length=None):
        self.trajectory_file = trajectory_file
        if default_dt is not None:
            self.default_dt = default_dt
        if default_leader_length is not None:
            self.default_leader_length = default_leader_length
        self.name = name or str(trajectory_file)
        self.data = self.prepare_csv_file()
        self.rejected = {}

    def prepare_csv_file(self):
        """Read CSV and check the mandatory columns"""
        frame = pd.read_csv(self.trajectory_file, encoding=self.encoding,
                            header=self.header, sep=self.separation,
                            dtype={"pair_id": str})
        frame.columns = [column.strip() for column in frame.columns]
        missing = [column for column in self.required_columns if column not in frame.columns]
        if "t" not in frame.columns and "frame" not in frame.columns:
            missing.append("t")
        if missing:
            raise DatasetError("%s: missing columns %s" % (self.trajectory_file, ", ".join(missing)))
        return frame

    def run(self):
        """Build one CFPair per pair_id, skipping pairs that fail validation"""
        pairs = []
        for pair_id, rows in self.data.groupby("pair_id", sort=False):
            try:
                pairs.append(self.get_pair(str(pair_id), rows))
            except DatasetError as error:
                self.rejected[str(pair_id)] = str(error)
                logging.warning("rejected pair %s: %s" % (pair_id, error))
        if not pairs:
            raise DatasetError("%s: no usable pairs" % self.trajectory_file)
        logging.info("loaded %d pairs from %s (%d rejected)"
                     % (len(pairs), self.trajectory_file, len(self.rejected)))
        return Dataset(tuple(pairs), name=self.name)

    def get_pair(self, pair_id, rows):
        """Returns a CFPair for the rows of one pair

        pair_id: identifier shared by the rows

        rows: the pair's slice of the CSV
        """
        dt, t0 = self.sampling(rows)
        leader_pos = self.column(rows, "leader_pos")
        follower_pos = self.column(rows, "follower_pos")
        if leader_pos is None or follower_pos is None:
            raise DatasetError("missing leader or follower positions")
        leader = self.get_portfolio(rows, "leader", leader_pos, dt, t0)
        follower = self.get_portfolio(rows, "follower", follower_pos, dt, t0)
        if not (leader.is_finite() and follower.is_finite()):
            raise DatasetError("non-finite speed or acceleration")
        return CFPair(pair_id, leader, follower, self.leader_length(pair_id, rows))

    def get_portfolio(self, rows, vehicle, positions, dt, t0):
        speeds = self.column(rows, "%s_speed" % vehicle)
        accelerations = self.column(rows, "%s_accel" % vehicle)
        if (speeds is None or accelerations is None) and len(positions) < 3:
            raise DatasetError("fewer than 3 samples to derive %s kinematics" % vehicle)
        if speeds is None:
            return derive_kinematics(positions, dt, t0)
        if accelerations is None:
            return portfolio_from_speeds(positions, speeds, dt, t0)
        return StatePortfolio(positions, speeds, accelerations, dt, t0)

    def sampling(self, rows):
        """Return (dt, t0) after checking uniform spacing"""
        if "t" in rows.columns:
            times = rows["t"].to_numpy(dtype=float)
            scale = 1.0
        else:
            times = rows["frame"].to_numpy(dtype=float)
            scale = self.default_dt
        if len(times) < 2:
            raise DatasetError("fewer than 2 samples")
        steps = np.diff(times)
        if not np.all(np.isfinite(steps)) or steps[0] <= 0 \
                or not np.allclose(steps, steps[0], rtol=self.time_tolerance, atol=0):
            raise DatasetError("non-uniform timestamps")
        return float(steps[0] * scale), float(times[0] * scale)

    def leader_length(self, pair_id, rows):
        if "leader_length" in rows.columns and rows["leader_length"].notna().any():
            return float(rows["leader_length"].dropna().iloc[0])
        logging.warning("pair %s has no leader_length, using %.1f m"
                        % (pair_id, self.default_leader_length))
        return self.default_leader_length

    @staticmethod
    def column(rows, name):
        """Return a column as floats, None when absent or entirely empty

        Partially empty columns raise, since gaps cannot be repaired.
        """
        if name not in rows.columns or rows[name].isna().all():
            return None
        values = rows[name].to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise DatasetError("non-finite values in %s" % name)
        return values


def load_dataset(trajectory_file, name=None, default_dt=None, default_leader_length=None):
    """Read a trajectory CSV into a Dataset"""
    return TrajectoryLoader(trajectory_file, name, default_dt, default_leader_length).run()


def write_dataset(dataset, trajectory_file):
    """Write a Dataset using the full schema, speeds and accelerations included"""
    frames = []
    for pair in dataset:
        frames.append(pd.DataFrame({
            "pair_id": pair.pair_id,
            "t": pair.leader.times,
            "leader_pos": pair.leader.positions,
            "follower_pos": pair.follower.positions,
            "leader_speed": pair.leader.speeds,
            "follower_speed": pair.follower.speeds,
            "leader_accel": pair.leader.accelerations,
            "follower_accel": pair.follower.accelerations,
            "leader_length": pair.leader_length,
        }))
    pd.concat(frames, ignore_index=True).to_csv(trajectory_file, index=False, float_format="%.17g")


def truth_file(trajectory_file):
    return "%s.truth.yaml" % trajectory_file


def write_truth(trajectory_file, truth):
    """Write the ground-truth sidecar of a synthetic trajectory file"""
    with open(truth_file(trajectory_file), "w") as sidecar:
        yaml.safe_dump(truth, sidecar, sort_keys=True)


def load_truth(trajectory_file):
    """Read the ground-truth sidecar of a synthetic trajectory file"""
    with open(truth_file(trajectory_file)) as sidecar:
        return yaml.safe_load(sidecar)

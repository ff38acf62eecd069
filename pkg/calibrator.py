#!/usr/bin/env python
"""Car-following calibrator

Calibrate car-following models and AV controllers on leader-follower
trajectories with ABC rejection sampling, and rank them as a hybrid.
"""

import argparse
import logging
import os
import sys

from metrics import TransportError
from models import MODELS
from reporting import cmd_calibrate, cmd_pairwise, cmd_synth, run_evolution, write_table
from runconfig import ConfigError, load_config
from trajectory import DatasetError


def run_synth(config):
    cmd_synth(config)


def run_calibrate(config):
    cmd_calibrate(config).write(config.out)


def run_pairwise(config):
    table, _ = cmd_pairwise(config)
    os.makedirs(config.out, exist_ok=True)
    write_table(table, os.path.join(config.out, "pairwise.csv"))


COMMANDS = {
    "synth": run_synth,
    "calibrate": run_calibrate,
    "pairwise": run_pairwise,
    "evolution": run_evolution,
}

ARGS = [
    {
        "val": "--config",
        "dest": "config",
        "action": "store",
        "default": None,
        "help": "Path to a YAML run configuration"
    }, {
        "val": "--seed",
        "dest": "seed",
        "action": "store",
        "type": int,
        "default": None,
        "help": "Root random seed"
    }, {
        "val": "--models",
        "dest": "models",
        "action": "store",
        "default": None,
        "help": "Comma-separated model ids, any of: {}".format(
            ', '.join("%s" % (key) for (key, val) in MODELS.items()))
    }, {
        "val": "--particles",
        "dest": "n_particles",
        "action": "store",
        "type": int,
        "default": None,
        "help": "Prior particles sampled per model"
    }, {
        "val": "--n-keep",
        "dest": "n_keep",
        "action": "store",
        "type": int,
        "default": None,
        "help": "Particles kept per trajectory pair"
    }, {
        "val": "--beta",
        "dest": "beta",
        "action": "store",
        "type": float,
        "default": None,
        "help": "Particle mass fraction of the beta-Wasserstein distance"
    }, {
        "val": "--folds",
        "dest": "folds",
        "action": "store",
        "type": int,
        "default": None,
        "help": "Cross-validation folds, 1 to train and test on everything"
    }, {
        "val": "--out",
        "dest": "out",
        "action": "store",
        "default": None,
        "help": "Output directory for report files"
    }, {
        "val": "--jobs",
        "dest": "n_jobs",
        "action": "store",
        "type": int,
        "default": None,
        "help": "Parallel workers, -1 for all cores"
    }, {
        "val": "--verbose",
        "dest": "verbose",
        "action": "store_true",
        "default": False,
        "help": "Log debug messages"
    }
]


def run(command, config_file, **overrides):
    """Execute a command based on input parameters"""
    config = load_config(config_file, **overrides)
    COMMANDS[command](config)


def get_arguments(argv=None):
    """Parse input arguments using ARGS"""
    parser = argparse.ArgumentParser()
    parser.add_argument("command", choices=list(COMMANDS),
                        help="One of: {}".format(', '.join(COMMANDS)))
    for arg in ARGS:
        options = {key: arg[key] for key in ("dest", "action", "default", "type", "help") if key in arg}
        parser.add_argument(arg["val"], **options)
    return parser.parse_args(argv)


def main(argv=None):
    """Run the CLI; returns the exit status"""
    arguments = get_arguments(argv)
    logging.basicConfig(level=logging.DEBUG if arguments.verbose else logging.INFO,
                        format='%(levelname)s:%(asctime)s: %(message)s')
    overrides = {arg["dest"]: getattr(arguments, arg["dest"]) for arg in ARGS
                 if arg["dest"] not in ("config", "verbose")}
    try:
        run(arguments.command, arguments.config, **overrides)
    except (DatasetError, ConfigError, TransportError, KeyError, ValueError, OSError) as error:
        message = error.args[0] if error.args else str(error)
        logging.error(message)
        sys.stderr.write('error=%s message="%s"\n' % (type(error).__name__, message))
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())

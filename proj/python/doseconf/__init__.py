"""Conformal prediction intervals for dose-response models under continuous treatments."""

import json

from ._core import *  # noqa: F401,F403
from ._core import run_experiment_json


def run_experiment(**config):
    """Run a coverage experiment; keyword names follow the bench JSON config."""
    return json.loads(run_experiment_json(json.dumps(config)))

# Copyright 2026 The wdwada Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python interface to the wdwada C++ core."""

import json

from . import _core
from ._core import (
    CapabilityError,
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    Error,
    MetricError,
    Model,
    NumericalError,
    SchemaError,
    auc,
    cross_entropy,
    shape_chain,
    wasserstein_objective,
    weighted_focal_loss,
)

__all__ = [
    "CapabilityError",
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "Error",
    "MetricError",
    "Model",
    "NumericalError",
    "SchemaError",
    "auc",
    "cross_entropy",
    "evaluate",
    "generate_shifted_domains",
    "report",
    "robustness_summary",
    "run_experiment",
    "shape_chain",
    "wasserstein_objective",
    "weighted_focal_loss",
]


def generate_shifted_domains(**spec):
    """Returns (source_x, source_y, target_x, target_y) for the given ShiftSpec fields."""
    merged = json.loads(_core.default_shift_spec())
    merged.update(spec)
    return _core.generate_shifted_domains(json.dumps(merged))


def evaluate(scores, labels, threshold=0.5):
    return json.loads(_core.evaluate(scores, labels, threshold))


def robustness_summary(values, confidence=0.95):
    return json.loads(_core.robustness_summary(list(values), confidence))


def run_experiment(spec):
    """Runs an experiment described by the same JSON layout as `wdwada train --config`."""
    return json.loads(_core.run_experiment(json.dumps(spec)))


def report(dirs):
    """Returns (table_text, report_dict) for finished experiment directories."""
    text, payload = _core.report([str(d) for d in dirs])
    return text, json.loads(payload)

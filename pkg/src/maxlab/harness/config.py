"""Experiment configuration.

A configuration is a TOML file.  Top-level keys apply to every experiment;
a table named after an experiment (``[main-theorem]``, ``[cube-blowup]`` ...)
overrides them for that experiment.  Missing keys fall back to the
defaults below, so an empty file runs the default suite.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from ..errors import ConfigurationError

GAUSS_SUITE = [
    {"kind": "GaussianBumpSum", "seed": 1, "count": 3},
    {"kind": "GaussianBumpSum", "seed": 2, "count": 3},
    {"kind": "GaussianBumpSum", "seed": 3, "count": 3},
]

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "main-theorem": {
        "domains": [
            {"type": "Disk", "center": [0.0, 0.0], "radius": 1.0},
            {"type": "ConvexPolygon",
             "vertices": [[-1.0, -0.8], [0.9, -1.0], [1.0, 0.7], [-0.2, 1.0], [-1.0, 0.4]]},
        ],
        "functions": GAUSS_SUITE,
        "extra_functions": [{"kind": "RadialSingular", "exponent": 0.5, "cutoff": 0.8,
                             "center": [0.1, 0.05]}],
        "extra_p": 1.05,
        "alphas": [1.0],
        "ps": [1.5],
        "cells": [128, 256],
        "collar_cells": 3,
        "stability": 0.2,
    },
    "endpoint": {
        "domains": [
            {"type": "ConvexPolygon",
             "vertices": [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]},
            {"type": "Disk", "center": [0.0, 0.0], "radius": 1.0},
        ],
        "functions": [
            {"kind": "GaussianBumpSum", "seed": 1, "count": 3, "lo": [0.2, 0.2], "hi": [0.8, 0.8]},
            {"kind": "GaussianBumpSum", "seed": 2, "count": 3, "lo": [0.2, 0.2], "hi": [0.8, 0.8]},
            {"kind": "GaussianBumpSum", "seed": 3, "count": 3, "lo": [0.2, 0.2], "hi": [0.8, 0.8]},
            {"kind": "Constant", "c": 1.0},
        ],
        "box_family": [0.25, 0.125, 0.0625],
        "cells": [128, 256],
        "collar_cells": 3,
        "stability": 0.2,
    },
    "operator-norm-sweep": {
        "alphas": [1.5, 1.0],
        "ps": [1.25, 2.0],
        "lambdas": [0.5, 1.0, 2.0, 4.0],
        "cells": 64,
        "n_theta": 256,
        "ascent_steps": 6,
        "annulus_inner": [0.5, 0.75, 0.875, 0.9375],
        "annulus_cells": 128,
        "slope_target": 0.5,
        "slope_tol": 0.15,
        "invariance_tol": 0.10,
        "log_law_factor": 1.5,
    },
    "cube-blowup": {
        "deltas": [0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
        "exponents": [1.0, 2.0, 3.0],
        "ps": [1.5, 2.0, 4.0],
        "window_factor": 1024.0,
        "order": 8,
        "per_octave": 2,
        "growth_min": 1.1,
        "control_band": 1.25,
        "probe_cells": [256, 512],
        "spot_cells": 1024,
    },
    "geometry-gallery": {
        "cells": 512,
        "ellipse_y": [0.3, 0.0],
        "parabola_c": 0.5,
        "hyperbola_y": [1.5, 0.2],
        "support_stride": 5,
        "tol_deg": 1.0,
    },
    "invariant-suite": {
        "domains": [
            {"type": "HalfPlane", "inward_normal": [0.0, 1.0], "offset": 0.0,
             "window": [[-4.0, 0.0], [4.0, 8.0]], "sample_box": [[-0.5, 0.0], [0.5, 1.5]],
             "map_box": [[-1.0, 0.0], [1.0, 2.0]], "bump_box": [[-0.5, 0.3], [0.5, 1.0]],
             "delta_cap": 1.0},
            {"type": "Disk", "center": [0.0, 0.0], "radius": 1.0,
             "map_box": [[-1.0, -1.0], [1.0, 1.0]], "bump_box": [[-0.6, -0.6], [0.6, 0.6]],
             "delta_cap": 1.0, "curvature_R": 1.0},
            {"type": "BallComplement", "center": [0.0, 0.0], "radius": 1.0,
             "window": [[-4.0, -4.0], [4.0, 4.0]], "sample_box": [[1.05, -1.5], [2.5, 1.5]],
             "map_box": [[1.0, -1.0], [3.0, 1.0]], "bump_box": [[1.3, -0.5], [2.2, 0.5]],
             "delta_cap": 1.0},
        ],
        "functions": [
            {"kind": "GaussianBumpSum", "seed": 1, "count": 3, "width_range": [0.04, 0.1]},
            {"kind": "GaussianBumpSum", "seed": 2, "count": 3, "width_range": [0.04, 0.1]},
            {"kind": "GaussianBumpSum", "seed": 3, "count": 3, "width_range": [0.04, 0.1]},
        ],
        "cells": [256, 512],
        "map_cells": [128, 256],
        "y_samples": 50,
        "x_samples": 50,
        "convex_y": 4,
        "j_max": 12,
        "resolved_factor": 8.0,
        "midpoint_pairs": 10000,
        "annulus_samples": 1000,
        "openness_samples": 100,
        "stability": 0.2,
        "corrupt_distance": False,
    },
}

COMMON = {"seed": 0}


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    params: Dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    @property
    def seed(self) -> int:
        return int(self.params.get("seed", 0))

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "params": self.params}


def load_config(experiment: str, path: Optional[str] = None,
                overrides: Optional[dict] = None) -> ExperimentConfig:
    """Defaults for ``experiment`` overlaid with the file and then ``overrides``."""
    if experiment not in DEFAULTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}")
    params = deep_merge(COMMON, DEFAULTS[experiment])
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        top = {k: v for k, v in raw.items() if not (isinstance(v, dict) and k in DEFAULTS)}
        params = deep_merge(params, top)
        if isinstance(raw.get(experiment), dict):
            params = deep_merge(params, raw[experiment])
    if overrides:
        params = deep_merge(params, overrides)
    cfg = ExperimentConfig(experiment, params, path)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    ps = cfg.get("ps")
    if ps is not None and cfg.experiment in ("main-theorem", "operator-norm-sweep"):
        for p in ps:
            if not p > 1:
                raise ConfigurationError("norm-ratio experiments need p > 1")
    for a in cfg.get("alphas") or []:
        if not 0 <= a < 2:
            raise ConfigurationError("alpha must lie in [0, 2)")
    for key in ("cells", "map_cells", "probe_cells"):
        v = cfg.get(key)
        vals = v if isinstance(v, list) else ([v] if v is not None else [])
        for n in vals:
            if int(n) < 8:
                raise ConfigurationError(f"{key} must be at least 8")
    if not isinstance(cfg.get("seed", 0), int):
        raise ConfigurationError("seed must be an integer")

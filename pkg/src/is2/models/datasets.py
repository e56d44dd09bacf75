"""Datasets on disk (CSV plus a JSON sidecar) and model construction from config dictionaries."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .lgss import LgssModel, simulate_lgss
from .panel_logit import PanelLogitModel, panel_design, simulate_panel
from .sv import SvModel, simulate_sv


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_series(path, y, meta: dict) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y"])
        for t, value in enumerate(np.asarray(y, dtype=float)):
            writer.writerow([t, format(value, ".17g")])
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_series(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["y"]) for r in rows])


def write_panel(path, y, x, meta: dict) -> None:
    path = Path(path)
    n_ind, n_times, k = x.shape
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "t", "y"] + [f"x{j}" for j in range(k)])
        for i in range(n_ind):
            for t in range(n_times):
                writer.writerow([i, t, int(y[i, t])] + [format(v, ".17g") for v in x[i, t]])
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_panel(path):
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        xcols = [c for c in reader.fieldnames if c.startswith("x")]
        rows = list(reader)
    n_ind = max(int(r["i"]) for r in rows) + 1
    n_times = max(int(r["t"]) for r in rows) + 1
    y = np.zeros((n_ind, n_times))
    x = np.zeros((n_ind, n_times, len(xcols)))
    for r in rows:
        i, t = int(r["i"]), int(r["t"])
        y[i, t] = float(r["y"])
        x[i, t] = [float(r[c]) for c in xcols]
    return y, x


def read_meta(path) -> dict:
    side = sidecar_path(path)
    return json.loads(side.read_text()) if side.exists() else {}


def _series(spec: dict, simulate):
    if "observations" in spec:
        return np.asarray(spec["observations"], dtype=float)
    if "dataset" in spec:
        return read_series(spec["dataset"])
    if "simulate" in spec:
        return simulate(spec["simulate"])
    raise ConfigError("model spec needs one of observations, dataset or simulate")


def build_model(spec: dict):
    """Instantiate a built-in model from its config subtree."""
    try:
        kind = spec["kind"]
        if kind == "lgss":
            r = float(spec.get("r", 1.0))
            y = _series(spec, lambda s: simulate_lgss(s["phi"], s["q"], r, int(s["T"]), int(s["seed"])))
            return LgssModel(y, r=r)
        if kind == "sv":
            y = _series(spec, lambda s: simulate_sv(s["c"], s["phi"], s["sigma_eta2"], int(s["T"]), int(s["seed"])))
            return SvModel(y)
        if kind == "panel_logit":
            extra = {k: spec[k] for k in ("pi", "pilot_n") if k in spec}
            if "dataset" in spec:
                y, x = read_panel(spec["dataset"])
            elif "simulate" in spec:
                s = spec["simulate"]
                beta = np.asarray(s["beta"], dtype=float)
                x = panel_design(int(s["I"]), int(s["T"]), beta.size - 1, int(s["seed"]))
                y = simulate_panel(x, beta, float(s["sigma_alpha"]), int(s["seed"]))
            else:
                y, x = np.asarray(spec["y"], dtype=float), np.asarray(spec["x"], dtype=float)
            return PanelLogitModel(y, x, **extra)
    except KeyError as exc:
        raise ConfigError(f"model spec is missing {exc}") from exc
    raise ConfigError(f"unknown model kind {spec.get('kind')!r}")

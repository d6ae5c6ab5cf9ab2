"""End-to-end forecasting experiment: data -> graphs -> grid search -> test scores.

Config (JSON)::

    {
      "seed": 0,
      "output_dir": "runs/mesh",
      "data": {"kind": "synthetic_mesh", "n_nodes": 100, "n_steps": 200,
               "params": {"coupling": 0.3}},
      # or    {"kind": "files", "sequence": "seq.csv", "points": "points.csv",
      #        "n_features": 3}
      "graph": {"knn": 10, "weighting": "gaussian", "normalize": true,
                "feature_graph": "complete"},        # or {"path": "...csv"}
      "product": "cartesian",
      "in_fractions": [0.5, 0.6, 0.7, 0.8, 0.9],
      "train_fraction": 0.7,
      "ridge_lambda": null,
      "original_units": false,
      "n_jobs": 1,
      "families": {"GVAR":  {"P_grid": [1, 2, 3], "K_grid": [0, 1, 2, 3]},
                   "PGVAR": {"P_grid": [1, 2, 3], "K_grid": [0, 1, 2, 3]}}
    }

Relative paths in ``data`` / ``graph`` resolve against the config file.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimation, graph, models, synth
from .errors import InvalidInputError, PGVARError
from .metrics import evaluate
from .signal import load_sequence, preprocess, save_sequence

DEFAULTS = {
    "seed": 0,
    "output_dir": None,
    "graph": {"knn": 10, "weighting": "gaussian", "normalize": True, "feature_graph": "complete"},
    "product": "cartesian",
    "in_fractions": [0.5, 0.6, 0.7, 0.8, 0.9],
    "train_fraction": 0.7,
    "ridge_lambda": None,
    "original_units": False,
    "n_jobs": 1,
    "families": {
        "GVAR": {"P_grid": [1, 2, 3], "K_grid": [0, 1, 2, 3]},
        "PGVAR": {"P_grid": [1, 2, 3], "K_grid": [0, 1, 2, 3]},
    },
}


class ExperimentError(PGVARError):
    def __init__(self, stage, exc):
        super().__init__(f"experiment failed during {stage}: {exc}")
        self.stage = stage
        self.__cause__ = exc


@dataclass
class Cell:
    in_fraction: float
    family: str
    fit: estimation.FitReport
    evaluation: object  # metrics.EvalReport

    def to_dict(self):
        return {
            "in_fraction": self.in_fraction,
            "family": self.family,
            "fit": self.fit.to_dict(),
            "evaluation": self.evaluation.to_dict(),
        }


@dataclass
class ExperimentResult:
    config: dict
    cells: list = field(default_factory=list)

    def test_rnmse(self, family):
        return [c.evaluation.rnmse for c in self.cells if c.family == family]

    def comparison_rows(self):
        return [(c.in_fraction, c.family, c.evaluation.rnmse) for c in self.cells]


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "families":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(source):
    """Config dict from a path or dict, with defaults filled in."""
    base_dir = Path(".")
    if isinstance(source, (str, os.PathLike)):
        base_dir = Path(source).parent
        source = json.loads(Path(source).read_text())
    cfg = _merge(DEFAULTS, source)
    cfg.setdefault("_base_dir", str(base_dir))
    if "data" not in cfg:
        raise InvalidInputError("config needs a 'data' section")
    return cfg


def _resolve(cfg, p):
    p = Path(p)
    return p if p.is_absolute() else Path(cfg["_base_dir"]) / p


def load_data(cfg):
    """``(points_0, sequence)`` for the configured data source."""
    d = cfg["data"]
    kind = d.get("kind", "files")
    if kind == "synthetic_mesh":
        return synth.gen_moving_mesh(
            int(d.get("n_nodes", 100)), int(d.get("n_steps", 200)), int(cfg["seed"]),
            **d.get("params", {}),
        )
    if kind == "files":
        seq = load_sequence(_resolve(cfg, d["sequence"]), n_features=int(d.get("n_features", 1)))
        pts = graph.read_points(_resolve(cfg, d["points"])) if "points" in d else None
        return pts, seq
    raise InvalidInputError(f"unknown data kind {kind!r}")


def build_graphs(cfg, points, n_nodes, n_features):
    gcfg = cfg["graph"]
    if "path" in gcfg:
        g = graph.read_edge_list(_resolve(cfg, gcfg["path"]), n_nodes)
    else:
        if points is None:
            raise InvalidInputError("kNN graph needs point coordinates")
        g = graph.build_knn_graph(points, int(gcfg["knn"]), gcfg.get("weighting", "gaussian"))
    fg_spec = gcfg.get("feature_graph", "complete")
    if isinstance(fg_spec, dict):
        gf = graph.read_edge_list(_resolve(cfg, fg_spec["path"]), n_features)
    elif fg_spec == "complete":
        gf = graph.complete_graph(n_features) if n_features > 1 else graph.edgeless_graph(1)
    elif fg_spec == "edgeless":
        gf = graph.edgeless_graph(n_features)
    elif fg_spec == "path":
        gf = graph.path_graph(n_features)
    else:
        raise InvalidInputError(f"unknown feature graph {fg_spec!r}")
    if gcfg.get("normalize", True):
        g = graph.normalize_shift(g)
        if gf.n_edges:
            gf = graph.normalize_shift(gf)
    return g, gf


def _fit_config(cfg, family, in_fraction):
    spec = cfg["families"][family] or {}
    return estimation.FitConfig(
        family=family,
        P_grid=tuple(spec.get("P_grid", (1, 2))),
        K_grid=tuple(spec.get("K_grid", (0, 1, 2))),
        L_grid=tuple(spec.get("L_grid", (0,))),
        ridge_lambda=spec.get("ridge_lambda", cfg["ridge_lambda"]),
        in_fraction=float(in_fraction),
        train_fraction=float(cfg["train_fraction"]),
        product=spec.get("product", cfg["product"]),
        separate_channels=bool(spec.get("separate_channels", True)),
    )


def run_experiment(config, write=True):
    """Run every ``(in_fraction, family)`` cell; optionally write reports.

    Returns an :class:`ExperimentResult`. Output files (when
    ``output_dir`` is set and ``write``) are ``comparison.csv``,
    ``per_feature.csv``, ``grid.jsonl`` and ``reports/<family>_in<frac>.json``.
    """
    cfg = load_config(config)
    stage = "data loading"
    try:
        points, raw = load_data(cfg)
        stage = "preprocessing"
        seq, transform = preprocess(raw)
        stage = "graph construction"
        g, gf = build_graphs(cfg, points, seq.n_nodes, seq.n_features)
    except PGVARError as exc:
        raise ExperimentError(stage, exc) from exc

    result = ExperimentResult(cfg)
    progress = io.StringIO()
    for frac in cfg["in_fractions"]:
        for family in cfg["families"]:
            stage = f"{family} @ in_fraction={frac}"
            try:
                fc = _fit_config(cfg, family, frac)

                def log(rec, _fam=family, _frac=frac):
                    progress.write(json.dumps({"in_fraction": _frac, "family": _fam, **rec}) + "\n")

                rep = estimation.grid_search(fc, seq, g, gf, progress=log, n_jobs=int(cfg["n_jobs"]))
                test = np.arange(seq.n_steps - rep.split["test"], seq.n_steps)
                pred = models.predict_teacher_forced(rep.model, seq.data, test)
                truth = seq.data[test]
                if cfg["original_units"]:
                    pred, truth = transform.invert(pred), transform.invert(truth)
                ev = evaluate(pred, truth, seq.n_nodes, seq.n_features)
            except PGVARError as exc:
                raise ExperimentError(stage, exc) from exc
            result.cells.append(Cell(float(frac), family, rep, ev))

    if write and cfg.get("output_dir"):
        write_outputs(result, _resolve(cfg, cfg["output_dir"]), progress.getvalue())
    return result


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_outputs(result, out_dir, progress_text=""):
    out_dir = Path(out_dir)
    _atomic_write(
        out_dir / "comparison.csv",
        _csv([(f, fam, repr(v)) for f, fam, v in result.comparison_rows()],
             ["in_fraction", "family", "test_rnmse"]),
    )
    rows = []
    for c in result.cells:
        for k, v in enumerate(c.evaluation.per_feature_rnmse):
            rows.append((c.in_fraction, c.family, k, repr(float(v))))
    _atomic_write(out_dir / "per_feature.csv", _csv(rows, ["in_fraction", "family", "feature", "test_rnmse"]))
    for c in result.cells:
        name = f"{c.family}_in{int(round(c.in_fraction * 100)):02d}.json"
        _atomic_write(out_dir / "reports" / name, json.dumps(c.to_dict(), indent=1) + "\n")
    _atomic_write(out_dir / "grid.jsonl", progress_text)
    # output_dir excluded so identical runs into different directories match byte for byte
    cfg = {k: v for k, v in result.config.items() if not k.startswith("_") and k != "output_dir"}
    _atomic_write(out_dir / "config.json", json.dumps(cfg, indent=1) + "\n")


def save_synthetic_mesh(out_dir, n_nodes, n_steps, seed, **params):
    """Write ``points.csv`` and ``sequence.csv`` for a synthetic moving mesh."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pts, seq = synth.gen_moving_mesh(n_nodes, n_steps, seed, **params)
    graph.write_points(pts, out_dir / "points.csv")
    save_sequence(seq, out_dir / "sequence.csv")
    return pts, seq

"""Command-line interface: ``pgvar synth | fit | predict | evaluate | experiment``."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import estimation, experiment, graph, models, synth
from .errors import PGVARError
from .metrics import evaluate as evaluate_metrics
from .signal import PreprocessTransform, SignalSequence, load_sequence, preprocess, save_sequence


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _fail(exc):
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Product-graph VAR forecasting of multi-dimensional graph processes."""


@main.command()
@click.option("--kind", type=click.Choice(["mesh", "process"]), default="mesh", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-nodes", type=int, default=100, show_default=True)
@click.option("--n-steps", type=int, default=200, show_default=True)
@click.option("--coupling", type=float, default=None, help="Mesh cross-coordinate coupling.")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              help="SynthSpec JSON (process kind).")
@click.option("--knn", type=int, default=10, show_default=True, help="Also write a kNN edge list (mesh).")
def synth_cmd(kind, out_dir, seed, n_nodes, n_steps, coupling, spec_path, knn):
    """Generate synthetic data."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if kind == "mesh":
            params = {} if coupling is None else {"coupling": coupling}
            pts, _ = experiment.save_synthetic_mesh(out, n_nodes, n_steps, seed, **params)
            graph.write_edge_list(graph.build_knn_graph(pts, knn), out / "graph.csv")
        else:
            spec = synth.SynthSpec.from_dict(json.loads(Path(spec_path).read_text())) if spec_path else synth.SynthSpec(
                graph=synth.GraphSpec(n_nodes=n_nodes, seed=seed), n_steps=n_steps, seed=seed
            )
            m = synth.gen_stable_coeffs(spec)
            seq = synth.simulate(m, spec.n_steps, spec.noise_sigma, spec.burn_in, spec.seed)
            save_sequence(seq, out / "sequence.csv")
            models.save_model(m, out / "true_model.json")
            (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=1) + "\n")
    except PGVARError as exc:
        _fail(exc)
    click.echo(f"wrote {out}")


main.add_command(synth_cmd, name="synth")


def _graphs(points, graph_path, feature_graph_path, knn, n_nodes, n_features, normalize):
    if graph_path:
        g = graph.read_edge_list(graph_path, n_nodes)
    elif points:
        g = graph.build_knn_graph(graph.read_points(points), knn)
    else:
        raise click.UsageError("give --graph or --points")
    if feature_graph_path:
        gf = graph.read_edge_list(feature_graph_path, n_features)
    else:
        gf = graph.complete_graph(n_features) if n_features > 1 else graph.edgeless_graph(1)
    if normalize == "on":
        g = graph.normalize_shift(g)
        if gf.n_edges:
            gf = graph.normalize_shift(gf)
    return g, gf


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n-features", type=int, default=1, show_default=True)
@click.option("--points", type=click.Path(exists=True, dir_okay=False))
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--feature-graph", "feature_graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--family", type=click.Choice(["VAR", "GVAR", "PGVAR", "GPGVAR"]), default="PGVAR", show_default=True)
@click.option("--product", type=click.Choice(["cartesian", "kronecker", "strong"]), default="cartesian", show_default=True)
@click.option("--knn", type=int, default=10, show_default=True)
@click.option("--normalize", type=click.Choice(["on", "off"]), default="on", show_default=True)
@click.option("--P", "p_grid", default="1,2,3", show_default=True)
@click.option("--K", "k_grid", default="0,1,2,3", show_default=True)
@click.option("--L", "l_grid", default="0", show_default=True)
@click.option("--ridge", type=float, default=None, help="Ridge lambda (default: 1e-8 tr(G)/Q).")
@click.option("--in-fraction", type=float, default=0.9, show_default=True)
@click.option("--train-fraction", type=float, default=0.7, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Unused by fitting; recorded.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Model JSON.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="FitReport JSON.")
@click.option("--progress/--no-progress", default=False, help="Stream grid records to stderr.")
def fit(data_path, n_features, points, graph_path, feature_graph_path, family, product, knn, normalize,
        p_grid, k_grid, l_grid, ridge, in_fraction, train_fraction, seed, jobs, out_path, report_path, progress):
    """Grid-search (P, K, L), refit in-sample and write the model."""
    try:
        raw = load_sequence(data_path, n_features=n_features)
        seq, transform = preprocess(raw)
        g, gf = _graphs(points, graph_path, feature_graph_path, knn, raw.n_nodes, n_features, normalize)
        cfg = estimation.FitConfig(family, _ints(p_grid), _ints(k_grid), _ints(l_grid), ridge,
                                   in_fraction, train_fraction, product)
        cb = estimation.progress_writer(sys.stderr) if progress else None
        rep = estimation.grid_search(cfg, seq, g, gf, progress=cb, n_jobs=jobs)
    except PGVARError as exc:
        _fail(exc)
    models.save_model(rep.model, out_path, transform)
    if report_path:
        Path(report_path).write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
    click.echo(
        f"{family} selected P={rep.selected[0]} K={rep.selected[1]} L={rep.selected[2]} "
        f"val_rnmse={rep.validation_rnmse:.6g} test_rnmse={rep.test_rnmse:.6g}"
    )


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--start", type=int, default=None, help="First predicted step (default: P).")
@click.option("--end", type=int, default=None, help="One past the last predicted step (default: T).")
@click.option("--mode", type=click.Choice(["teacher_forced", "recursive"]), default="teacher_forced", show_default=True)
@click.option("--space", type=click.Choice(["original", "preprocessed"]), default="original", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def predict(model_path, data_path, start, end, mode, space, out_path):
    """One-step (or recursive) predictions as a sequence CSV."""
    try:
        m, tdict = models.load_model(model_path)
        raw = load_sequence(data_path, n_nodes=m.n_nodes, n_features=m.n_features)
        transform = PreprocessTransform.from_dict(tdict) if tdict else None
        data = transform.apply(raw.data) if transform else raw.data
        start = m.P if start is None else start
        end = raw.n_steps if end is None else end
        pred = models.rollout(m, data, start, end, mode)
        if transform and space == "original":
            pred = transform.invert(pred)
        save_sequence(SignalSequence(pred, m.n_nodes, m.n_features), out_path, times=range(start, end))
    except PGVARError as exc:
        _fail(exc)
    click.echo(f"wrote {end - start} predictions to {out_path}")


@main.command()
@click.option("--pred", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n-features", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def evaluate(pred_path, truth_path, n_features, out_path):
    """Score predictions against ground truth rows with the same ``t``."""
    try:
        pred, tp = load_sequence(pred_path, n_features=n_features, return_times=True)
        truth, tt = load_sequence(truth_path, n_features=n_features, return_times=True)
        pos = {t: i for i, t in enumerate(tt.tolist())}
        missing = [t for t in tp.tolist() if t not in pos]
        if missing:
            raise click.ClickException(f"truth has no rows for t={missing[:5]}")
        rows = np.array([pos[t] for t in tp.tolist()])
        rep = evaluate_metrics(pred.data, truth.data[rows], truth.n_nodes, n_features)
    except PGVARError as exc:
        _fail(exc)
    Path(out_path).write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
    click.echo(f"rnmse={rep.rnmse:.6g} over {rep.n_steps} steps")


@main.command(name="experiment")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--in-fraction", type=float, multiple=True, help="Override the in-sample sweep.")
@click.option("--train-fraction", type=float, default=None)
@click.option("--family", multiple=True, help="Restrict to these families.")
@click.option("--product", type=click.Choice(["cartesian", "kronecker", "strong"]), default=None)
@click.option("--knn", type=int, default=None)
@click.option("--normalize", type=click.Choice(["on", "off"]), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Override output_dir.")
def experiment_cmd(config, seed, in_fraction, train_fraction, family, product, knn, normalize, out_dir):
    """Run the full protocol from a JSON config."""
    cfg = experiment.load_config(config)
    if seed is not None:
        cfg["seed"] = seed
    if in_fraction:
        cfg["in_fractions"] = list(in_fraction)
    if train_fraction is not None:
        cfg["train_fraction"] = train_fraction
    if family:
        cfg["families"] = {f: cfg["families"].get(f, {}) for f in family}
    if product:
        cfg["product"] = product
    if knn is not None:
        cfg["graph"]["knn"] = knn
    if normalize:
        cfg["graph"]["normalize"] = normalize == "on"
    if out_dir:
        cfg["output_dir"] = str(Path(out_dir).resolve())
    if not cfg.get("output_dir"):
        raise click.UsageError("config has no output_dir; pass --out")
    try:
        res = experiment.run_experiment(cfg)
    except PGVARError as exc:
        _fail(exc)
    for frac, fam, v in res.comparison_rows():
        click.echo(f"in={frac:.2f} {fam:7s} test_rnmse={v:.6g}")


if __name__ == "__main__":
    main()

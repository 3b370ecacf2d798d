"""End-to-end toy studies: generate, train, compile, prune, report.

Each run writes a fixed-layout bundle: weights.json, tree.json,
tree_pruned.json, tree.dot, prune_report.csv, cost_report.csv, a task CSV
(curve.csv for the regression, regions.csv for the classifier) and a manifest
with every seed and convention id. Fixed seeds reproduce every byte.

Pilot-run calibration (recorded here so the thresholds in the test suite are
not magic): parabola init seed 2, batch 256, lr 0.05, 1200 epochs reaches
training MSE ~0.0075 (threshold 0.05); halfmoon init seed 1, batch 64, lr 0.1,
1500 epochs reaches training accuracy 1.000 (threshold 0.95).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import activations as act_lib
from .costs import CONVENTION, cost_report
from .datasets import Dataset, gen_halfmoons, gen_parabola
from .dot_export import export_dot
from .network import NetworkSpec, forward
from .prune import mark_realized, prune_infeasible, simplify_rules_1d
from .training import TrainConfig, accuracy, init_dense_network, mse_loss, train
from .tree import build_tree, export_json, tree_eval, tree_eval_batch
from .weights_io import save_network

PARABOLA = {
    "dims": [1, 2, 2, 1],
    "negative_slope": 0.3,
    "init_seed": 2,
    "train": dict(epochs=1200, batch_size=256, learning_rate=0.05, seed=2, loss="mse"),
    "domain": [(-2.5, 2.5)],
    "data": dict(n=5000, lo=-2.5, hi=2.5),
    "mse_threshold": 0.05,
}

HALFMOON = {
    "dims": [2, 2, 2, 1],
    "negative_slope": 0.3,
    "init_seed": 1,
    "train": dict(epochs=1500, batch_size=64, learning_rate=0.1, seed=1, loss="bce"),
    "domain": [(-2.0, 3.0), (-1.5, 2.0)],
    "data": dict(n=1000, noise=0.1, seed=0),
    "accuracy_threshold": 0.95,
}


def make_task_dataset(name: str) -> Dataset:
    if name == "parabola":
        return gen_parabola(**PARABOLA["data"])
    if name == "halfmoon":
        return gen_halfmoons(**HALFMOON["data"])
    raise ValueError(f"unknown task {name!r}")


def train_task(name: str) -> tuple[NetworkSpec, Dataset, list[float]]:
    config = PARABOLA if name == "parabola" else HALFMOON
    data = make_task_dataset(name)
    net = init_dense_network(config["dims"],
                             act_lib.leaky_relu(config["negative_slope"]),
                             seed=config["init_seed"], name=name)
    trained, curve = train(net, data, TrainConfig(**config["train"]))
    return trained, data, curve


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def run_experiment(name: str, out_dir) -> dict:
    """Run one toy study end to end; returns the manifest dict."""
    if name not in ("parabola", "halfmoon"):
        raise ValueError(f"unknown experiment {name!r}")
    config = PARABOLA if name == "parabola" else HALFMOON
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    trained, data, curve = train_task(name)
    save_network(trained, out / "weights.json")

    tree = build_tree(trained)
    pruned, prune_report = prune_infeasible(tree, domain_box=config["domain"])
    mark_realized(pruned, data.inputs)
    export_json(tree, out / "tree.json")
    export_json(pruned, out / "tree_pruned.json")
    (out / "prune_report.csv").write_text(prune_report.to_csv())

    if name == "parabola":
        display, _ = simplify_rules_1d(pruned)
        export_dot(display, show_rules_1d=True, path=out / "tree.dot")
        xs = data.inputs
        nn_out = np.array([forward(trained, x)[0][0] for x in xs[::10]])
        tree_out, _ = tree_eval_batch(pruned, xs[::10])
        _write_csv(out / "curve.csv", ["x", "network", "tree"],
                   zip(xs[::10, 0].tolist(), nn_out.tolist(), tree_out[:, 0].tolist()))
        metrics = {"train_mse": curve[-1], "threshold": config["mse_threshold"]}
    else:
        export_dot(pruned, show_rules_1d=False, leaf_labels="class",
                   path=out / "tree.dot")
        (lo_x, hi_x), (lo_y, hi_y) = config["domain"]
        gx, gy = np.meshgrid(np.linspace(lo_x, hi_x, 201), np.linspace(lo_y, hi_y, 201))
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        outputs, leaf_ids = tree_eval_batch(pruned, grid)
        classes = (outputs[:, 0] >= 0.0).astype(int)
        _write_csv(out / "regions.csv", ["x", "y", "leaf_id", "class"],
                   zip(grid[:, 0].tolist(), grid[:, 1].tolist(),
                       leaf_ids.tolist(), classes.tolist()))
        metrics = {"train_accuracy": accuracy(trained, data),
                   "threshold": config["accuracy_threshold"]}

    report = cost_report(trained, pruned, data,
                         classify=(name == "halfmoon"), task=name)
    (out / "cost_report.csv").write_text(report.to_csv())

    manifest = {
        "task": name,
        "network": {"dims": config["dims"], "activation":
                    f"leaky_relu({config['negative_slope']})",
                    "init_seed": config["init_seed"]},
        "train_config": config["train"],
        "data": config["data"],
        "domain": config["domain"],
        "metrics": metrics,
        "tree": {"leaves": tree.leaf_count, "pruned_leaves": pruned.leaf_count,
                 "nodes": tree.node_count, "pruned_nodes": pruned.node_count,
                 "unrealized_leaves": sum(1 for l in pruned.leaves()
                                          if l.realized_count == 0)},
        "cost_convention": CONVENTION,
        "files": ["weights.json", "tree.json", "tree_pruned.json", "tree.dot",
                  "prune_report.csv", "cost_report.csv",
                  "curve.csv" if name == "parabola" else "regions.csv"],
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def bundle_digest(out_dir) -> dict:
    """SHA-256 of every bundle file, for byte-reproducibility checks."""
    out = Path(out_dir)
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(out.iterdir()) if p.is_file()
    }

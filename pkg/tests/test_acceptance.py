"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines live.
The bridge criterion for exported checkpoints lives with the bridge package
(bridge/tests); everything here runs without it.
"""

import time

import numpy as np
import pytest

from nn2tree import activations as act_lib
from nn2tree.costs import cost_report, network_costs
from nn2tree.effective import lazy_eval
from nn2tree.convnet import conv_lazy_eval
from nn2tree.datasets import gen_halfmoons, gen_parabola
from nn2tree.experiments import (
    HALFMOON,
    PARABOLA,
    bundle_digest,
    make_task_dataset,
    run_experiment,
)
from nn2tree.layers import ConvLayer, DenseLayer, ResidualBlock, RnnCell
from nn2tree.network import NetworkSpec, forward
from nn2tree.prune import is_feasible, prune_infeasible
from nn2tree.rnn import rnn_effective_output, rnn_forward
from nn2tree.tree import build_tree, tree_eval, tree_eval_batch, import_json
from nn2tree.training import batch_predict, init_dense_network
from nn2tree.weights_io import load_network

from conftest import QTANH4, random_dense_net
from oracles import (
    batch_forward_dense,
    categorization_census,
    category_bytes,
    conv_reference,
    residual_recursion,
    rnn_recurrence,
    step_counting_interpreter,
)
from test_prune import polytope_grid_hits, random_path_polytope


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE [{name}]: {status} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


def rel_dev(a, b):
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


def test_equivalence_suite_dense():
    """forward / lazy / tree agree to 1e-9 with identical categorizations."""
    rng = np.random.default_rng(2024)
    started = time.monotonic()
    worst = 0.0
    for _ in range(200):
        net = random_dense_net(rng, max_hidden=3, max_width=5)
        eager = build_tree(net, lazy=False) if \
            build_tree(net, lazy=True).leaf_count <= 512 else None
        tree = eager if eager is not None else build_tree(net, lazy=True)
        for _ in range(100):
            x = rng.normal(size=net.input_dim)
            ref, trace = forward(net, x)
            lazy = lazy_eval(net, x)
            tout, leaf_id, _ = tree_eval(tree, x)
            worst = max(worst, rel_dev(lazy.output, ref), rel_dev(tout, ref))
            if lazy.categorization != trace.categorization():
                report("equivalence-suite", False, f"lazy trace mismatch at {x}")
            leaf = next(l for l in tree.leaves() if l.id == leaf_id) if eager \
                else None
            if eager and leaf.category != trace.categorization():
                report("equivalence-suite", False, f"tree routing mismatch at {x}")
    elapsed = time.monotonic() - started
    report("equivalence-suite", worst <= 1e-9 and elapsed <= 60.0,
           f"(max deviation {worst:.2e}, {elapsed:.1f}s, 200 nets x 100 inputs)")


def test_structure_counts():
    """Eager builds produce exactly prod k^width leaves."""
    rng = np.random.default_rng(7)
    parabola_arch = NetworkSpec(layers=[
        DenseLayer(rng.normal(size=(2, 1)), rng.normal(size=2), act_lib.leaky_relu(0.3)),
        DenseLayer(rng.normal(size=(2, 2)), rng.normal(size=2), act_lib.leaky_relu(0.3)),
        DenseLayer(rng.normal(size=(1, 2)), rng.normal(size=1), None),
    ], input_dim=1)
    tree = build_tree(parabola_arch)
    ok = tree.depth == 4 and tree.leaf_count == 16
    detail = [f"toy arch d={tree.depth} leaves={tree.leaf_count}"]
    for act, k in ((act_lib.relu(), 2), (act_lib.hard_tanh(), 3), (QTANH4, 4)):
        for _ in range(5):
            net = random_dense_net(rng, activation=act, max_hidden=2,
                                   max_width=4 if k == 2 else 2)
            widths = net.decision_widths()
            tree = build_tree(net, max_leaves=2 ** 21)
            expected = int(np.prod([k ** w for w in widths])) if widths else 1
            ok = ok and tree.leaf_count == expected and tree.depth == sum(widths)
    detail.append("k in {2,3,4} checked")
    report("structure", ok, " ".join(detail))


def _census_points(domain, step=1e-3):
    axes = [np.arange(lo, hi + step / 2, step) for lo, hi in domain]
    if len(axes) == 1:
        return axes[0][:, None]
    gx, gy = np.meshgrid(axes[0], axes[1])
    return np.column_stack([gx.ravel(), gy.ravel()])


def _lossless_check(net, data_inputs, domain, rng):
    tree = build_tree(net)
    pruned, _ = prune_infeasible(tree, domain_box=domain)
    lo = np.array([d[0] for d in domain])
    hi = np.array([d[1] for d in domain])
    xs = np.vstack([rng.uniform(lo, hi, size=(10_000, len(domain))), data_inputs])
    a, ids_a = tree_eval_batch(tree, xs)
    b, ids_b = tree_eval_batch(pruned, xs)
    if np.max(np.abs(a - b)) > 1e-12:
        return False, "outputs diverged", tree, pruned
    cat_a = {l.id: l.category for l in tree.leaves()}
    cat_b = {l.id: l.category for l in pruned.leaves()}
    if any(cat_a[i] != cat_b[j] for i, j in zip(ids_a.tolist(), ids_b.tolist())):
        return False, "leaf routing changed", tree, pruned
    census = categorization_census(net, _census_points(domain))
    surviving = {category_bytes(l.category) for l in pruned.leaves()}
    if not census <= surviving:
        return False, "a realized pattern lost its leaf", tree, pruned
    if len(census) != pruned.leaf_count:
        return False, (f"census {len(census)} != pruned leaves {pruned.leaf_count}"), \
            tree, pruned
    return True, "", tree, pruned


def test_lossless_pruning_with_census():
    """Pruning never changes routing; surviving leaves equal the grid census."""
    rng = np.random.default_rng(77)
    # both toy tasks, trained fresh from their pinned configs
    from nn2tree.experiments import train_task

    details = []
    ok = True
    for task in ("parabola", "halfmoon"):
        net, data, _ = train_task(task)
        domain = (PARABOLA if task == "parabola" else HALFMOON)["domain"]
        good, why, tree, pruned = _lossless_check(net, data.inputs, domain, rng)
        ok = ok and good
        details.append(f"{task}: {tree.leaf_count}->{pruned.leaf_count}"
                       + (f" [{why}]" if why else ""))
        if task == "parabola":
            details.append("(16-leaf toy prunes to the census count; "
                           "the published instance reported 5)")
    for i in range(50):
        d0 = 1 if i < 35 else 2
        net = random_dense_net(rng, d0=d0, activation=act_lib.relu(),
                               max_hidden=2, max_width=3)
        domain = [(-2.0, 2.0)] * d0 if d0 == 1 else [(-1.5, 1.5)] * d0
        good, why, _, _ = _lossless_check(net, np.zeros((0, d0)), domain, rng)
        if not good:
            ok = False
            details.append(f"net[{i}] d0={d0}: {why}")
    report("lossless-pruning", ok, "; ".join(details[:4]))


def test_residual_conv_rnn_equivalence():
    rng = np.random.default_rng(55)
    started = time.monotonic()
    worst_res = worst_conv = worst_rnn = 0.0
    for _ in range(50):
        width = int(rng.integers(2, 5))
        d0 = int(rng.integers(1, 4))
        layers = [DenseLayer(rng.normal(size=(width, d0)), rng.normal(size=width), None)]
        layers += [ResidualBlock(rng.normal(size=(width, width)) * 0.6, act_lib.relu())
                   for _ in range(int(rng.integers(1, 4)))]
        net = NetworkSpec(layers=layers, input_dim=d0)
        for _ in range(100):
            x = rng.normal(size=d0)
            ref = residual_recursion(net, x)
            worst_res = max(worst_res, rel_dev(lazy_eval(net, x).output, ref))
    for _ in range(20):
        c_mid = int(rng.integers(1, 3))
        net = NetworkSpec(layers=[
            ConvLayer(rng.normal(size=(c_mid, 1, 3, 3)), rng.normal(size=c_mid),
                      activation=act_lib.relu()),
            ConvLayer(rng.normal(size=(1, c_mid, 3, 3)), rng.normal(size=1),
                      activation=None),
        ], input_shape=(1, 6, 6))
        for _ in range(100):
            f0 = rng.normal(size=(1, 6, 6))
            ref = conv_reference(net, f0)
            worst_conv = max(worst_conv, rel_dev(conv_lazy_eval(net, f0).output, ref))
    for _ in range(20):
        h = int(rng.integers(2, 4))
        cell = RnnCell(rng.normal(size=(h, h)) * 0.5, rng.normal(size=(h, 2)),
                       rng.normal(size=(2, h)), rng.normal(size=h) * 0.1,
                       act_lib.relu())
        h0 = rng.normal(size=h)
        for _ in range(100):
            xs = rng.normal(size=(6, 2))
            ref = rnn_recurrence(cell, h0, xs)
            _, _, trace = rnn_forward(cell, h0, xs)
            out = rnn_effective_output(cell, h0, xs, trace.patterns)
            worst_rnn = max(worst_rnn, rel_dev(out, ref[-1]))
    elapsed = time.monotonic() - started
    ok = max(worst_res, worst_conv, worst_rnn) <= 1e-8 and elapsed <= 120.0
    report("residual-conv-rnn", ok,
           f"(residual {worst_res:.2e}, conv {worst_conv:.2e}, "
           f"rnn {worst_rnn:.2e}, {elapsed:.1f}s)")


def test_experiment_bundles(tmp_path, parabola_bundle, halfmoon_bundle):
    p_dir, p_manifest = parabola_bundle
    h_dir, h_manifest = halfmoon_bundle
    ok = p_manifest["metrics"]["train_mse"] <= 0.05
    ok = ok and h_manifest["metrics"]["train_accuracy"] >= 0.95

    # tree class equals network class on every grid point of the bundle domain
    net = load_network(h_dir / "weights.json")
    pruned = import_json(h_dir / "tree_pruned.json")
    (lo_x, hi_x), (lo_y, hi_y) = HALFMOON["domain"]
    gx, gy = np.meshgrid(np.linspace(lo_x, hi_x, 201), np.linspace(lo_y, hi_y, 201))
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    net_class = batch_forward_dense(net, grid)[:, 0] >= 0.0
    tree_out, _ = tree_eval_batch(pruned, grid)
    agree = np.array_equal(net_class, tree_out[:, 0] >= 0.0)
    ok = ok and agree

    # byte reproducibility under the same seeds
    run_experiment("parabola", tmp_path / "p2")
    run_experiment("halfmoon", tmp_path / "h2")
    repro = bundle_digest(p_dir) == bundle_digest(tmp_path / "p2") and \
        bundle_digest(h_dir) == bundle_digest(tmp_path / "h2")
    ok = ok and repro
    report("experiment-bundles", ok,
           f"(mse {p_manifest['metrics']['train_mse']:.4f}, "
           f"acc {h_manifest['metrics']['train_accuracy']:.3f}, "
           f"grid agreement {agree}, reproducible {repro})")


def test_cost_report(parabola_bundle, halfmoon_bundle):
    parabola_net = init_dense_network(PARABOLA["dims"], act_lib.leaky_relu(0.3), 0)
    halfmoon_net = init_dense_network(HALFMOON["dims"], act_lib.leaky_relu(0.3), 0)
    nn_p = network_costs(parabola_net)
    nn_h = network_costs(halfmoon_net, classify=True)
    ok = nn_p["params"] == 13 and nn_h["params"] == 15
    ok = ok and nn_p["comparisons"] == 4 and nn_h["comparisons"] == 5

    out, _ = parabola_bundle
    net = load_network(out / "weights.json")
    pruned = import_json(out / "tree_pruned.json")
    data = make_task_dataset("parabola")
    rep = cost_report(net, pruned, data, task="parabola")
    totals = np.zeros(3)
    for x in data.inputs:
        totals += step_counting_interpreter(pruned, x)
    exact = (rep.tree["comparisons"] == totals[0] / len(data)
             and rep.tree["multiplies"] == totals[1] / len(data)
             and rep.tree["additions"] == totals[2] / len(data))
    ok = ok and exact
    csv_text = rep.to_csv()
    ok = ok and "tree_reference,14,2.6,2" in csv_text \
        and "network_reference,13,4,16" in csv_text
    report("cost-report", ok,
           f"(params 13/15, comparisons 4/5, interpreter match {exact}; "
           f"reference columns printed, not asserted)")


def test_pruner_soundness():
    rng = np.random.default_rng(99)
    infeasible = feasible = 0
    ok = True
    for _ in range(500):
        polytope = random_path_polytope(rng)
        result = is_feasible(polytope)
        if result.status == "infeasible":
            infeasible += 1
            if polytope_grid_hits(polytope).size != 0:
                ok = False
                break
        elif result.status == "feasible":
            feasible += 1
            if not all(rule.holds(result.witness) for rule in polytope.rules):
                ok = False
                break
    report("pruner-soundness", ok,
           f"({infeasible} infeasible grid-confirmed, {feasible} witnesses verified)")

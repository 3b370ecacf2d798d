"""Command-line interface.

Exit codes: 0 success, 2 usage, 3 training failure, 4 resource limit,
5 verification failure, 6 file/schema error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import activations as act_lib
from .costs import cost_report
from .datasets import Dataset
from .dot_export import export_dot
from .experiments import HALFMOON, PARABOLA, make_task_dataset, run_experiment
from .layers import DimensionError
from .network import forward
from .prune import path_constraints, prune_infeasible, simplify_rules_1d
from .training import TrainConfig, TrainingDiverged, init_dense_network, train
from .tree import LeafBudgetError, build_tree, export_json, import_json, tree_eval
from .weights_io import SchemaError, load_network, save_network

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TRAINING = 3
EXIT_LIMIT = 4
EXIT_VERIFY = 5
EXIT_IO = 6


def parse_architecture(text: str):
    """Parse '1-2-2-1:lrelu0.3' into (dims, activation)."""
    try:
        dims_part, _, act_part = text.partition(":")
        dims = [int(d) for d in dims_part.split("-")]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError("need at least two positive layer widths")
        act_part = act_part or "relu"
        if act_part == "relu":
            act = act_lib.relu()
        elif act_part.startswith("lrelu"):
            act = act_lib.leaky_relu(float(act_part[5:] or 0.3))
        elif act_part == "hardtanh":
            act = act_lib.hard_tanh()
        elif act_part.startswith("qtanh"):
            regions = int(act_part[5:] or 8)
            act, _ = act_lib.quantize_activation(np.tanh, regions, (-4.0, 4.0),
                                                 name=f"qtanh{regions}")
        elif act_part in ("identity", "linear"):
            act = act_lib.identity()
        else:
            raise ValueError(f"unknown activation {act_part!r}")
        return dims, act
    except (ValueError, IndexError) as e:
        raise argparse.ArgumentTypeError(f"bad architecture {text!r}: {e}") from None


def _parse_domain(text: str | None, dim: int):
    if text is None:
        return [(-3.0, 3.0)] * dim
    pairs = []
    for chunk in text.split(";"):
        lo, hi = (float(v) for v in chunk.split(","))
        pairs.append((lo, hi))
    if len(pairs) == 1:
        pairs = pairs * dim
    if len(pairs) != dim:
        raise argparse.ArgumentTypeError(
            f"domain lists {len(pairs)} axes for a {dim}-dimensional input"
        )
    return pairs


def cmd_train(args) -> int:
    config = PARABOLA if args.task == "parabola" else HALFMOON
    data = make_task_dataset(args.task)
    dims, act = (config["dims"], act_lib.leaky_relu(config["negative_slope"]))
    if args.arch:
        dims, act = args.arch
        if dims[0] != data.inputs.shape[1]:
            print(f"architecture expects {dims[0]} inputs, task provides "
                  f"{data.inputs.shape[1]}", file=sys.stderr)
            return EXIT_USAGE
    seed = args.seed if args.seed is not None else config["init_seed"]
    train_kwargs = dict(config["train"])
    train_kwargs["seed"] = seed
    if args.epochs:
        train_kwargs["epochs"] = args.epochs
    if args.learning_rate:
        train_kwargs["learning_rate"] = args.learning_rate
    net = init_dense_network(dims, act, seed=seed, name=args.task)
    try:
        trained, curve = train(net, data, TrainConfig(**train_kwargs))
    except TrainingDiverged as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return EXIT_TRAINING
    save_network(trained, args.output)
    print(f"trained {args.task} ({'-'.join(str(d) for d in dims)}), "
          f"final loss {curve[-1]:.6f}, wrote {args.output}")
    return EXIT_OK


def cmd_compile(args) -> int:
    net = load_network(args.weights)
    try:
        tree = build_tree(net, max_leaves=args.max_leaves)
    except LeafBudgetError as e:
        print(str(e), file=sys.stderr)
        return EXIT_LIMIT
    export_json(tree, args.output)
    print(f"d={tree.depth} k={tree.k} leaves={tree.leaf_count}")
    return EXIT_OK


def _verification_inputs(dim: int, samples: int, domain, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = np.array([d[0] for d in domain])
    hi = np.array([d[1] for d in domain])
    random_part = rng.uniform(lo, hi, size=(samples, dim))
    if dim == 1:
        grid = np.linspace(lo[0], hi[0], 201)[:, None]
    elif dim == 2:
        gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], 31), np.linspace(lo[1], hi[1], 31))
        grid = np.column_stack([gx.ravel(), gy.ravel()])
    else:
        grid = rng.uniform(lo, hi, size=(64, dim))
    return np.vstack([grid, random_part])


def cmd_verify(args) -> int:
    net = load_network(args.weights)
    tree = import_json(args.tree)
    if tree.input_dim != net.input_dim:
        print(f"tree expects {tree.input_dim} inputs, network {net.input_dim}",
              file=sys.stderr)
        return EXIT_IO
    domain = _parse_domain(args.domain, net.input_dim)
    xs = _verification_inputs(net.input_dim, args.samples, domain, args.seed)
    worst = 0.0
    worst_x = None
    for x in xs:
        ref, trace = forward(net, x)
        try:
            out, leaf_id, _ = tree_eval(tree, x)
        except Exception as e:
            print(f"routing failed at {x.tolist()}: {e}", file=sys.stderr)
            return EXIT_VERIFY
        dev = float(np.max(np.abs(out - ref) / (1.0 + np.abs(ref))))
        if dev > worst:
            worst, worst_x = dev, x
        if not tree.pruned:
            leaf = next(l for l in tree.leaves() if l.id == leaf_id)
            if leaf.category != trace.categorization():
                print(f"leaf routing mismatch at {x.tolist()}", file=sys.stderr)
                return EXIT_VERIFY
    if worst > args.tolerance:
        print(f"deviation {worst:.3e} above tolerance {args.tolerance:.1e} "
              f"at input {worst_x.tolist()}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"verified {len(xs)} inputs, max relative deviation {worst:.3e}")
    return EXIT_OK


def cmd_prune(args) -> int:
    tree = import_json(args.tree)
    domain = _parse_domain(args.domain, tree.input_dim)
    pruned, report = prune_infeasible(tree, domain_box=domain)
    if args.simplify and tree.input_dim == 1:
        pruned, _ = simplify_rules_1d(pruned)
    export_json(pruned, args.output)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report.to_csv())
    print(f"leaves {report.leaves_before} -> {report.leaves_after}, "
          f"nodes {report.nodes_before} -> {report.nodes_after}, "
          f"warnings {report.warnings}")
    return EXIT_OK


def cmd_cost(args) -> int:
    net = load_network(args.weights)
    tree = import_json(args.tree)
    data = make_task_dataset(args.task)
    report = cost_report(net, tree, data, classify=(args.task == "halfmoon"),
                         task=args.task)
    text = report.to_csv()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_export(args) -> int:
    tree = import_json(args.tree)
    if args.format == "dot":
        text = export_dot(tree, show_rules_1d=not args.raw_rules,
                          max_nodes=args.max_nodes, leaf_labels=args.leaf_labels)
    else:
        text = export_json(tree)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    x = np.array([float(v) for v in args.input.split(",")])
    if args.tree:
        tree = import_json(args.tree)
        out, leaf_id, cost = tree_eval(tree, x)
        print(f"output: {out.tolist()}  leaf: {leaf_id}")
        print(f"cost: {cost.comparisons} comparisons, {cost.multiplies} multiplies, "
              f"{cost.additions} additions")
        if args.explain:
            leaf = next(l for l in tree.leaves() if l.id == leaf_id)
            poly = path_constraints(tree, leaf)
            print("rules satisfied along the path:")
            for rule in poly.rules:
                if tree.input_dim == 1:
                    w0, w1 = rule.normal
                    if abs(w0) > 1e-12:
                        c = (rule.rhs - w1) / w0
                        sense = rule.sense if w0 > 0 else \
                            {">=": "<=", "<": ">"}[rule.sense]
                        print(f"  x {sense} {c:.6g}")
                        continue
                print(f"  {rule.text()}")
            body = leaf.final_map[:-1]
            rows = ["[" + " ".join(f"{v:.6g}" for v in row[:-1]) + f"] . x + {row[-1]:.6g}"
                    for row in body]
            print("leaf affine form: " + "; ".join(rows))
        return EXIT_OK
    net = load_network(args.weights)
    out, trace = forward(net, x)
    print(f"output: {out.tolist()}")
    if args.explain:
        print(f"categorization: {trace.categorization()}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    manifest = run_experiment(args.name, args.out)
    print(f"wrote {args.name} bundle to {args.out}: "
          f"{manifest['tree']['leaves']} leaves -> "
          f"{manifest['tree']['pruned_leaves']} after pruning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nn2tree",
        description="Compile piecewise-linear networks into equivalent decision trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a toy-task network")
    p.add_argument("--task", choices=("parabola", "halfmoon"), required=True)
    p.add_argument("--arch", type=parse_architecture, default=None,
                   help="architecture string, e.g. 1-2-2-1:lrelu0.3")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compile", help="build the equivalent decision tree")
    p.add_argument("--weights", required=True)
    p.add_argument("--max-leaves", type=int, default=2 ** 20)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("verify", help="check tree/network equivalence")
    p.add_argument("--weights", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--domain", default=None, help="lo,hi per axis, ';'-separated")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("prune", help="remove infeasible branches (lossless)")
    p.add_argument("--tree", required=True)
    p.add_argument("--domain", default=None)
    p.add_argument("--simplify", action="store_true",
                   help="also rewrite 1-D rules and drop implied nodes")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-r", "--report", default=None)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("cost", help="emit the cost report CSV")
    p.add_argument("--weights", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--task", choices=("parabola", "halfmoon"), required=True)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("export", help="serialize a tree as DOT or JSON")
    p.add_argument("--tree", required=True)
    p.add_argument("--format", choices=("dot", "json"), default="dot")
    p.add_argument("--max-nodes", type=int, default=None)
    p.add_argument("--leaf-labels", choices=("affine", "class"), default="affine")
    p.add_argument("--raw-rules", action="store_true",
                   help="keep rules in filter-row form even for 1-D inputs")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="evaluate one input")
    p.add_argument("--weights", default=None)
    p.add_argument("--tree", default=None)
    p.add_argument("--input", required=True, help="comma-separated coordinates")
    p.add_argument("--explain", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a full toy-study bundle")
    p.add_argument("--name", choices=("parabola", "halfmoon"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except argparse.ArgumentTypeError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "command", None) == "eval" and not (args.weights or args.tree):
        parser.error("eval needs --weights or --tree")
    try:
        return args.func(args)
    except (SchemaError, OSError, DimensionError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_IO
    except TrainingDiverged as e:
        print(str(e), file=sys.stderr)
        return EXIT_TRAINING
    except LeafBudgetError as e:
        print(str(e), file=sys.stderr)
        return EXIT_LIMIT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

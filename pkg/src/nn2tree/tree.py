"""Oblique decision trees equivalent to compiled networks.

Each internal node tests one effective-filter row against the activation's
breakpoints and fans out into one child per region; each leaf stores the final
effective matrix for its categorization. Building replays the same
StageProgram used by lazy evaluation, so a tree walk performs bitwise the same
arithmetic as the lazy path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .activations import breakpoint_comparisons, region_of
from .effective import (
    Counters,
    StageProgram,
    apply_affine,
    apply_filter_row,
    compile_network,
)
from .layers import DimensionError
from .weights_io import SchemaError

DEFAULT_MAX_LEAVES = 2 ** 20

FEASIBLE_STATES = ("unknown", "feasible", "infeasible")


class LeafBudgetError(RuntimeError):
    """Eager build would exceed the leaf budget."""

    def __init__(self, required: int, budget: int, shape: str):
        self.required = required
        self.budget = budget
        super().__init__(
            f"eager build needs {shape} = {required} leaves, over the budget of {budget}; "
            f"raise max_leaves or evaluate lazily"
        )


class RoutingError(RuntimeError):
    """An input reached a branch removed by pruning."""


@dataclass(eq=False)
class DecisionNode:
    filter_row: np.ndarray     # length d0+1, acts on the augmented input
    breakpoints: np.ndarray
    children: list             # one slot per region; None marks a pruned branch
    layer_index: int
    unit_index: int
    stage_index: int = 0       # ordinal among deciding stages; category slot
    id: int = -1
    rule_1d: tuple | None = None  # ("<" | "<=" | ">=" | ">", threshold) display form

    @property
    def fanout(self) -> int:
        return len(self.children)


@dataclass(eq=False)
class LeafNode:
    final_map: np.ndarray      # (d_out+1) x (d0+1), homogeneous last row
    category: tuple[tuple[int, ...], ...]
    feasible: str = "unknown"
    realized_count: int = 0
    id: int = -1


@dataclass(eq=False)
class DecisionTree:
    root: object
    k: int
    depth: int
    widths: list[int]
    input_dim: int
    output_dim: int
    node_count: int = 0
    leaf_count: int = 0
    pruned: bool = False
    lossy: bool = False
    name: str = ""

    def nodes(self):
        """Preorder iteration over (internal nodes, leaves); lazy trees only
        yield what has been materialized."""
        internals, leaves = [], []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node is None or isinstance(node, _LazyChild):
                continue
            if isinstance(node, LeafNode):
                leaves.append(node)
            else:
                internals.append(node)
                stack.extend(reversed(node.children))
        return internals, leaves

    def leaves(self) -> list[LeafNode]:
        return self.nodes()[1]

    def reindex(self) -> None:
        """Assign preorder ids and refresh the node/leaf counts."""
        internals, leaves = self.nodes()
        counter = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node is None or isinstance(node, _LazyChild):
                continue
            node.id = counter
            counter += 1
            if isinstance(node, DecisionNode):
                stack.extend(reversed(node.children))
        self.node_count = len(internals)
        self.leaf_count = len(leaves)


class _LazyChild:
    """Placeholder expanded on first visit; stores everything needed to resume
    the stage walk. The region taken is implied by the child slot."""

    __slots__ = ("matrix", "stage_idx", "unit_idx", "pattern", "categorization")

    def __init__(self, matrix, stage_idx, unit_idx, pattern, categorization):
        self.matrix = matrix
        self.stage_idx = stage_idx
        self.unit_idx = unit_idx
        self.pattern = pattern
        self.categorization = categorization


class LazyDecisionTree(DecisionTree):
    """Tree whose branches materialize on first traversal.

    Shares node/leaf types and evaluation arithmetic with eager trees; only
    construction is deferred, so arbitrarily wide networks can be walked
    without exhausting memory.
    """

    def __init__(self, program: StageProgram, **kwargs):
        super().__init__(**kwargs)
        self._program = program

    def child(self, node: DecisionNode, region: int):
        child = node.children[region]
        if isinstance(child, _LazyChild):
            child = _expand_child(self._program, child, region)
            node.children[region] = child
        return child


def _advance_idle(program: StageProgram, matrix: np.ndarray, stage_idx: int):
    """Run single-region stages (whose pattern is forced) until the next
    decision; returns (matrix, deciding stage index or None)."""
    while stage_idx < len(program.stages):
        stage = program.stages[stage_idx]
        if stage.decides:
            return matrix, stage_idx
        matrix = program.advance(stage_idx, matrix, np.zeros(stage.width, dtype=np.int64))
        stage_idx += 1
    return matrix, None


def _make_node(program: StageProgram, matrix, stage_idx, unit_idx,
               pattern, categorization) -> DecisionNode:
    stage = program.stages[stage_idx]
    return DecisionNode(
        filter_row=matrix[unit_idx].copy(),
        breakpoints=stage.activation.breakpoints,
        children=[
            _LazyChild(matrix, stage_idx, unit_idx, pattern, categorization)
            for _ in range(stage.activation.num_regions)
        ],
        layer_index=stage.layer_index,
        unit_index=unit_idx,
        stage_index=sum(1 for s in program.stages[:stage_idx] if s.decides),
    )


def _expand_child(program: StageProgram, pending: _LazyChild, region: int):
    """Build the node reached by taking `region` at the pending position."""
    pattern = pending.pattern + (region,)
    stage = program.stages[pending.stage_idx]
    if pending.unit_idx + 1 < stage.width:
        return _make_node(program, pending.matrix, pending.stage_idx,
                          pending.unit_idx + 1, pattern, pending.categorization)
    matrix = program.advance(pending.stage_idx, pending.matrix,
                             np.asarray(pattern, dtype=np.int64))
    categorization = pending.categorization + (pattern,)
    matrix, nxt = _advance_idle(program, matrix, pending.stage_idx + 1)
    if nxt is None:
        return LeafNode(final_map=matrix, category=categorization)
    return _make_node(program, matrix, nxt, 0, (), categorization)


def _build_root(program: StageProgram):
    matrix, first = _advance_idle(program, program.initial(), 0)
    if first is None:
        return LeafNode(final_map=matrix, category=())
    return _make_node(program, matrix, first, 0, (), ())


def _expand_all(program: StageProgram, node):
    if isinstance(node, LeafNode):
        return node
    for r in range(node.fanout):
        node.children[r] = _expand_all(program, _expand_child(program, node.children[r], r))
    return node


def build_tree(net_or_program, max_leaves: int = DEFAULT_MAX_LEAVES,
               max_depth: int | None = None, lazy: bool = False) -> DecisionTree:
    """Materialize the equivalent decision tree.

    Eager builds honor max_leaves/max_depth and fail with the required leaf
    count when exceeded; lazy builds defer construction to first traversal and
    ignore the limits.
    """
    program = net_or_program if isinstance(net_or_program, StageProgram) \
        else compile_network(net_or_program)
    widths = program.decision_widths()
    depth = sum(widths)
    ks = program.region_counts()
    k = max(ks, default=2)
    required = program.leaf_count()
    shape = " * ".join(f"{kk}^{w}" for kk, w in zip(ks, widths)) or "1"
    meta = dict(k=k, depth=depth, widths=widths, input_dim=program.input_dim,
                output_dim=program.output_dim)
    if lazy:
        tree = LazyDecisionTree(program, root=None, **meta)
        tree.root = _build_root(program)
        tree.leaf_count = required
        return tree
    if (max_depth is not None and depth > max_depth) or required > max_leaves:
        raise LeafBudgetError(required, max_leaves, shape)
    root = _expand_all(program, _build_root(program))
    tree = DecisionTree(root=root, **meta)
    tree.reindex()
    return tree


def tree_eval(tree: DecisionTree, x0) -> tuple[np.ndarray, int, Counters]:
    """Route an input to its leaf; returns (output, leaf id, path cost)."""
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    if x0.size != tree.input_dim:
        raise DimensionError(f"input length {x0.size} != expected {tree.input_dim}")
    x_aug = np.append(x0, 1.0)
    cost = Counters()
    node = tree.root
    while isinstance(node, DecisionNode):
        z = apply_filter_row(node.filter_row, x_aug, cost)
        r = int(region_of(z, node.breakpoints))
        cost.comparisons += breakpoint_comparisons(node.fanout, r)
        child = tree.child(node, r) if isinstance(tree, LazyDecisionTree) \
            else node.children[r]
        if child is None:
            raise RoutingError(
                f"input routed into a pruned branch at node {node.id} (region {r})"
            )
        node = child
    output = apply_affine(node.final_map, x_aug, cost)
    return output, node.id, cost


def route_leaf(tree: DecisionTree, x0) -> LeafNode:
    """The leaf an input lands in (no cost accounting)."""
    x_aug = np.append(np.asarray(x0, dtype=np.float64).ravel(), 1.0)
    node = tree.root
    while isinstance(node, DecisionNode):
        r = int(region_of(float(node.filter_row @ x_aug), node.breakpoints))
        child = tree.child(node, r) if isinstance(tree, LazyDecisionTree) \
            else node.children[r]
        if child is None:
            raise RoutingError(f"input routed into a pruned branch at node {node.id}")
        node = child
    return node


def tree_eval_batch(tree: DecisionTree, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized routing of many inputs: returns (outputs, leaf ids)."""
    xs = np.asarray(xs, dtype=np.float64)
    x_aug = np.hstack([xs, np.ones((xs.shape[0], 1))])
    outputs = np.empty((xs.shape[0], tree.output_dim))
    leaf_ids = np.empty(xs.shape[0], dtype=np.int64)

    def descend(node, idx):
        if not idx.size:
            return
        if isinstance(node, LeafNode):
            outputs[idx] = x_aug[idx] @ node.final_map[:-1].T
            leaf_ids[idx] = node.id
            return
        z = x_aug[idx] @ node.filter_row
        regions = region_of(z, node.breakpoints)
        for r in range(node.fanout):
            sub = idx[regions == r]
            if not sub.size:
                continue
            child = tree.child(node, r) if isinstance(tree, LazyDecisionTree) \
                else node.children[r]
            if child is None:
                raise RoutingError(f"{sub.size} inputs routed into a pruned branch")
            descend(child, sub)

    descend(tree.root, np.arange(xs.shape[0]))
    return outputs, leaf_ids


def export_json(tree: DecisionTree, path=None) -> str:
    """Serialize a tree (eager only) to its JSON document."""
    if isinstance(tree, LazyDecisionTree):
        raise ValueError("lazy trees are not serializable; build eagerly first")
    tree.reindex()
    nodes, leaves = [], []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node is None:
            continue
        if isinstance(node, LeafNode):
            leaves.append({
                "id": node.id,
                "final_map": [float(v) for v in node.final_map.ravel()],
                "shape": list(node.final_map.shape),
                "category": [list(p) for p in node.category],
                "feasible": node.feasible,
                "realized_count": node.realized_count,
            })
        else:
            nodes.append({
                "id": node.id,
                "filter_row": [float(v) for v in node.filter_row],
                "breakpoints": [float(v) for v in node.breakpoints],
                "children": [c.id if c is not None else None for c in node.children],
                "layer_index": node.layer_index,
                "unit_index": node.unit_index,
                "stage_index": node.stage_index,
            })
            stack.extend(reversed(node.children))
    doc = {
        "version": 1,
        "k": tree.k,
        "depth": tree.depth,
        "widths": list(tree.widths),
        "input_dim": tree.input_dim,
        "output_dim": tree.output_dim,
        "pruned": tree.pruned,
        "lossy": tree.lossy,
        "name": tree.name,
        "root": tree.root.id,
        "nodes": sorted(nodes, key=lambda n: n["id"]),
        "leaves": sorted(leaves, key=lambda n: n["id"]),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def import_json(path_or_text) -> DecisionTree:
    """Load a tree document, validating ids, arity and shapes."""
    if isinstance(path_or_text, str) and path_or_text.lstrip().startswith("{"):
        doc = json.loads(path_or_text)
    else:
        with open(path_or_text) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise SchemaError(f"line {e.lineno}, column {e.colno}", e.msg) from None
    for key in ("version", "k", "depth", "widths", "input_dim", "output_dim",
                "root", "nodes", "leaves"):
        if key not in doc:
            raise SchemaError(f"$.{key}", "missing required field")
    d0 = int(doc["input_dim"])
    built: dict[int, object] = {}
    pending_children: dict[int, list] = {}
    for ldoc in doc["leaves"]:
        lid = int(ldoc["id"])
        shape = ldoc.get("shape", [int(doc["output_dim"]) + 1, d0 + 1])
        fmap = np.asarray(ldoc["final_map"], dtype=np.float64).reshape(shape)
        if fmap.shape[1] != d0 + 1:
            raise SchemaError(f"$.leaves[id={lid}].final_map",
                              f"expected {d0 + 1} columns, got {fmap.shape[1]}")
        feas = ldoc.get("feasible", "unknown")
        if feas not in FEASIBLE_STATES:
            raise SchemaError(f"$.leaves[id={lid}].feasible", f"unknown state {feas!r}")
        built[lid] = LeafNode(
            final_map=fmap,
            category=tuple(tuple(int(v) for v in p) for p in ldoc.get("category", [])),
            feasible=feas,
            realized_count=int(ldoc.get("realized_count", 0)),
            id=lid,
        )
    for ndoc in doc["nodes"]:
        nid = int(ndoc["id"])
        row = np.asarray(ndoc["filter_row"], dtype=np.float64)
        if row.size != d0 + 1:
            raise SchemaError(f"$.nodes[id={nid}].filter_row",
                              f"expected {d0 + 1} entries, got {row.size}")
        bp = np.asarray(ndoc["breakpoints"], dtype=np.float64)
        children = ndoc["children"]
        if len(children) != bp.size + 1:
            raise SchemaError(f"$.nodes[id={nid}].children",
                              f"{bp.size} breakpoints need {bp.size + 1} children, "
                              f"got {len(children)}")
        built[nid] = DecisionNode(
            filter_row=row, breakpoints=bp, children=[None] * len(children),
            layer_index=int(ndoc.get("layer_index", -1)),
            unit_index=int(ndoc.get("unit_index", -1)),
            stage_index=int(ndoc.get("stage_index", 0)), id=nid,
        )
        pending_children[nid] = children
    for nid, children in pending_children.items():
        node = built[nid]
        for slot, cid in enumerate(children):
            if cid is None:
                continue
            if int(cid) not in built:
                raise SchemaError(f"$.nodes[id={nid}].children[{slot}]",
                                  f"child id {cid} does not exist")
            node.children[slot] = built[int(cid)]
    root_id = int(doc["root"])
    if root_id not in built:
        raise SchemaError("$.root", f"root id {root_id} does not exist")
    tree = DecisionTree(
        root=built[root_id],
        k=int(doc["k"]),
        depth=int(doc["depth"]),
        widths=[int(w) for w in doc["widths"]],
        input_dim=d0,
        output_dim=int(doc["output_dim"]),
        pruned=bool(doc.get("pruned", False)),
        lossy=bool(doc.get("lossy", False)),
        name=doc.get("name", ""),
    )
    tree.reindex()
    return tree

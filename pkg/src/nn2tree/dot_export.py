"""Graphviz DOT rendering of decision trees.

Internal nodes are boxes carrying their rule text, leaves are ellipses with
either the affine output form or a thresholded class label. Node ordering is
preorder by id, so output is deterministic.
"""

from __future__ import annotations

from .prune import rule_1d_of
from .tree import DecisionNode, DecisionTree, LeafNode


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def node_rule_text(node: DecisionNode, show_rules_1d: bool) -> str:
    if show_rules_1d and node.filter_row.size == 2 and node.breakpoints.size == 1:
        rule = node.rule_1d or rule_1d_of(node.filter_row, float(node.breakpoints[0]))
        if rule is not None:
            sense, c = rule
            return f"x {sense} {_fmt(c)}"
    coeffs = " ".join(_fmt(v) for v in node.filter_row[:-1])
    base = f"[{coeffs}]·x {node.filter_row[-1]:+.4g}"
    if node.breakpoints.size == 1:
        return f"{base} ≥ {_fmt(float(node.breakpoints[0]))}"
    return f"{base} vs ({', '.join(_fmt(float(t)) for t in node.breakpoints)})"


def leaf_text(leaf: LeafNode, label: str = "affine") -> str:
    body = leaf.final_map[:-1]
    if body.shape == (1, 2):
        affine = f"{_fmt(body[0, 0])}·x {body[0, 1]:+.4g}"
    else:
        affine = "\\n".join(
            "[" + " ".join(_fmt(v) for v in row[:-1]) + f"]·x {row[-1]:+.4g}"
            for row in body
        )
    if label == "class" and body.shape[0] == 1:
        # binary class from the sign of the (pre-squash) output
        return f"{affine} ≥ 0 → 1 else 0"
    return affine


def export_dot(tree: DecisionTree, show_rules_1d: bool = True,
               max_nodes: int | None = None, leaf_labels: str = "affine",
               path=None) -> str:
    """Serialize a tree to DOT text; caps output at max_nodes with a comment
    flagging the truncation."""
    tree.reindex()
    lines = [
        "digraph decision_tree {",
        '  graph [ordering=out];',
        '  node [shape=box, fontname="Helvetica"];',
    ]
    emitted = 0
    truncated = False
    stack = [tree.root]
    order: list = []
    while stack:
        node = stack.pop()
        if node is None:
            continue
        if max_nodes is not None and emitted >= max_nodes:
            truncated = True
            break
        order.append(node)
        emitted += 1
        if isinstance(node, DecisionNode):
            stack.extend(reversed(node.children))
    emitted_ids = {n.id for n in order}
    for node in order:
        if isinstance(node, LeafNode):
            label = leaf_text(node, leaf_labels)
            extra = ", style=dashed" if node.feasible == "infeasible" else ""
            lines.append(
                f'  n{node.id} [label="{label}", shape=ellipse, color=red{extra}];'
            )
        else:
            lines.append(f'  n{node.id} [label="{node_rule_text(node, show_rules_1d)}"];')
            for region, child in enumerate(node.children):
                if child is None or child.id not in emitted_ids:
                    continue
                if node.fanout == 2:
                    edge = "no" if region == 0 else "yes"
                else:
                    edge = f"r{region}"
                lines.append(f'  n{node.id} -> n{child.id} [label="{edge}"];')
    if truncated:
        lines.append(f"  // truncated: node budget {max_nodes} reached")
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text

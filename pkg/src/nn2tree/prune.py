"""Lossless tree shrinking: infeasible-path removal and implied-rule merging.

Every root-to-leaf path is a conjunction of halfspace rules over the augmented
input. A leaf whose polytope is provably empty inside the declared domain can
never be reached, so removing it (and collapsing the one-child chains that
removal leaves behind) cannot change the computed function. Emptiness proofs
come from the in-repo phase-1 routine; anything numerically marginal is kept
and flagged, never silently dropped.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .feasibility import phase1_feasibility
from .tree import DecisionNode, DecisionTree, LazyDecisionTree, LeafNode, route_leaf

EPS_STRICT = 1e-7
DEGENERACY_BAND = 10.0 * EPS_STRICT
ZERO_NORMAL_TOL = 1e-12
DEFAULT_DOMAIN_HALF_WIDTH = 1e6


@dataclass(frozen=True)
class HalfspaceRule:
    """One region constraint: normal . [x; 1] (>= | <) rhs."""

    normal: tuple[float, ...]  # length d0+1, augmented
    sense: str                 # ">=" or "<"
    rhs: float

    def margin(self, x: np.ndarray) -> float:
        """Signed satisfaction margin at x (positive = satisfied)."""
        value = float(np.dot(self.normal[:-1], x) + self.normal[-1])
        return value - self.rhs if self.sense == ">=" else self.rhs - value

    def holds(self, x: np.ndarray) -> bool:
        value = float(np.dot(self.normal[:-1], x) + self.normal[-1])
        return value >= self.rhs if self.sense == ">=" else value < self.rhs

    def text(self) -> str:
        coeffs = " ".join(f"{v:+.6g}" for v in self.normal[:-1])
        return f"[{coeffs}].x {self.normal[-1]:+.6g} {self.sense} {self.rhs:.6g}"


@dataclass
class PathPolytope:
    rules: list[HalfspaceRule]
    domain_box: np.ndarray | None = None  # (d0, 2) lo/hi per coordinate

    @property
    def dim(self) -> int:
        return len(self.rules[0].normal) - 1 if self.rules else \
            (self.domain_box.shape[0] if self.domain_box is not None else 0)


def region_rules(filter_row: np.ndarray, breakpoints: np.ndarray, region: int
                 ) -> list[HalfspaceRule]:
    """Rules pinning `region` for one decision: a lower bound unless this is
    the leftmost region, an upper bound unless it is the rightmost."""
    normal = tuple(float(v) for v in filter_row)
    rules = []
    if region > 0:
        rules.append(HalfspaceRule(normal, ">=", float(breakpoints[region - 1])))
    if region < len(breakpoints):
        rules.append(HalfspaceRule(normal, "<", float(breakpoints[region])))
    return rules


def path_constraints(tree: DecisionTree, leaf: LeafNode,
                     domain_box=None) -> PathPolytope:
    """Conjunction of the region rules along the root-to-leaf path.

    Collapsed decisions of a pruned tree contribute no rules: each surviving
    node looks up its region in the leaf's categorization by stage and unit.
    """
    rules: list[HalfspaceRule] = []
    node = tree.root
    while isinstance(node, DecisionNode):
        region = int(leaf.category[node.stage_index][node.unit_index])
        rules.extend(region_rules(node.filter_row, node.breakpoints, region))
        child = tree.child(node, region) if isinstance(tree, LazyDecisionTree) \
            else node.children[region]
        if child is None:
            raise ValueError("leaf category routes into a pruned branch")
        node = child
    if node is not leaf and node.category != leaf.category:
        raise ValueError("leaf does not belong to this tree")
    box = np.asarray(domain_box, dtype=np.float64) if domain_box is not None else None
    return PathPolytope(rules=rules, domain_box=box)


@dataclass
class FeasibilityResult:
    status: str                      # "feasible" | "infeasible" | "degenerate"
    witness: np.ndarray | None = None
    violation: float = 0.0
    warning: str | None = None

    @property
    def is_feasible(self) -> bool:
        return self.status != "infeasible"


def _assemble(polytope: PathPolytope, dim: int, tighten_closed: float,
              tighten_strict: float):
    """Rows (a, b) for a.x <= b form; constant rules resolved immediately.

    Returns (A, b, verdict) where verdict is "infeasible" if a constant rule
    already fails, else None.
    """
    rows_a, rows_b = [], []
    for rule in polytope.rules:
        a = np.asarray(rule.normal[:-1], dtype=np.float64)
        c = rule.normal[-1]
        shrink = tighten_closed if rule.sense == ">=" else tighten_strict
        if np.max(np.abs(a), initial=0.0) <= ZERO_NORMAL_TOL:
            # constant decision: holds or fails everywhere
            ok = (c >= rule.rhs + shrink) if rule.sense == ">=" else (c <= rule.rhs - shrink)
            if not ok:
                return None, None, "infeasible"
            continue
        if rule.sense == ">=":
            rows_a.append(-a)
            rows_b.append(-(rule.rhs - c) - shrink)
        else:
            rows_a.append(a)
            rows_b.append((rule.rhs - c) - shrink)
    return np.asarray(rows_a), np.asarray(rows_b), None


def _exact_contradiction(rules: list[HalfspaceRule]) -> bool:
    """Detect rules on the same hyperplane whose regions cannot intersect.

    Rules whose normals are bitwise equal (or bitwise negated) constrain the
    same scalar z; intersecting their z-intervals in exact arithmetic catches
    the violating-rule case (e.g. two identical units forced into different
    regions) without any tolerance.
    """
    groups: dict[tuple, list[tuple[float, str]]] = {}
    for rule in rules:
        key = rule.normal
        neg = tuple(-v for v in rule.normal)
        if neg in groups and key not in groups:
            # rewrite over the negated direction: -z >= t <=> z <= -t
            flipped = {">=": "<=", "<": ">"}[rule.sense]
            groups[neg].append((-rule.rhs, flipped))
        else:
            groups.setdefault(key, []).append((rule.rhs, rule.sense))
    for bounds in groups.values():
        lo, lo_strict = -np.inf, False
        hi, hi_strict = np.inf, False
        for rhs, sense in bounds:
            if sense in (">=", ">"):
                if rhs > lo or (rhs == lo and sense == ">"):
                    lo, lo_strict = rhs, sense == ">"
            else:
                if rhs < hi or (rhs == hi and sense == "<"):
                    hi, hi_strict = rhs, sense == "<"
        if lo > hi or (lo == hi and (lo_strict or hi_strict)):
            return True
    return False


def is_feasible(polytope: PathPolytope, eps_strict: float = EPS_STRICT
                ) -> FeasibilityResult:
    """Decide emptiness of a path polytope inside its domain box.

    Exactly contradictory rules (same hyperplane, disjoint regions) are
    rejected outright. Otherwise strict rules are closed with an eps_strict
    margin for the solver: a clean feasible verdict carries a witness
    satisfying every rule with margin at least eps_strict/2, emptiness beyond
    the degeneracy band is "infeasible", and anything in between comes back
    "degenerate" (feasible-with-warning) and is never pruned.
    """
    if _exact_contradiction(polytope.rules):
        return FeasibilityResult(status="infeasible", violation=float("inf"))
    dim = polytope.dim
    if polytope.domain_box is not None:
        lo = polytope.domain_box[:, 0].astype(np.float64)
        hi = polytope.domain_box[:, 1].astype(np.float64)
    else:
        lo = np.full(dim, -DEFAULT_DOMAIN_HALF_WIDTH)
        hi = np.full(dim, DEFAULT_DOMAIN_HALF_WIDTH)

    # pass 1: every rule tightened by the full margin, so the witness clears
    # the eps/2 guarantee with room to spare
    a, b, verdict = _assemble(polytope, dim, eps_strict, eps_strict)
    if verdict is None:
        violation, x, stalled = phase1_feasibility(a, b, lo, hi)
        if violation <= 0.0 and not stalled:
            return FeasibilityResult(status="feasible", witness=x, violation=0.0)

    # pass 2: closed rules exact, strict rules shrunk by the margin
    a, b, verdict = _assemble(polytope, dim, 0.0, eps_strict)
    if verdict == "infeasible":
        return FeasibilityResult(status="infeasible", violation=float("inf"))
    violation, x, stalled = phase1_feasibility(a, b, lo, hi)
    if stalled:
        return FeasibilityResult(
            status="degenerate", witness=x, violation=violation,
            warning="feasibility solver stalled; kept conservatively",
        )
    if violation > DEGENERACY_BAND:
        return FeasibilityResult(status="infeasible", violation=violation)
    return FeasibilityResult(
        status="degenerate", witness=x, violation=violation,
        warning=f"feasibility objective {violation:.3e} within the degeneracy band"
        if violation > 0.0 else "region thinner than the strictness margin",
    )


@dataclass
class PruneRecord:
    leaf_id: int
    category: tuple
    status: str
    witness: tuple | None
    warning: str | None


@dataclass
class PruneReport:
    records: list[PruneRecord] = field(default_factory=list)
    implied_rules: list[str] = field(default_factory=list)
    nodes_before: int = 0
    nodes_after: int = 0
    leaves_before: int = 0
    leaves_after: int = 0
    warnings: int = 0

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["kind", "leaf_id", "category", "status", "witness", "warning"])
        for r in self.records:
            writer.writerow([
                "leaf", r.leaf_id,
                "|".join("".join(str(v) for v in p) for p in r.category),
                r.status,
                " ".join(f"{v:.12g}" for v in r.witness) if r.witness else "",
                r.warning or "",
            ])
        for rule in self.implied_rules:
            writer.writerow(["implied_rule", "", "", "", "", rule])
        writer.writerow(["summary", "", "", "", "",
                         f"nodes {self.nodes_before}->{self.nodes_after} "
                         f"leaves {self.leaves_before}->{self.leaves_after} "
                         f"warnings {self.warnings}"])
        return out.getvalue()


def prune_infeasible(tree: DecisionTree, domain_box=None,
                     eps_strict: float = EPS_STRICT) -> tuple[DecisionTree, PruneReport]:
    """Remove leaves with provably empty path polytopes, collapsing one-child
    chains; evaluation on any reachable input is unchanged."""
    if isinstance(tree, LazyDecisionTree):
        raise ValueError("prune operates on eagerly built trees")
    report = PruneReport()
    report.nodes_before, leaves = tree.node_count, tree.leaves()
    report.leaves_before = len(leaves)

    verdicts: dict[int, FeasibilityResult] = {}
    for leaf in leaves:
        polytope = path_constraints(tree, leaf, domain_box=domain_box)
        result = is_feasible(polytope, eps_strict=eps_strict)
        verdicts[leaf.id] = result
        leaf.feasible = "infeasible" if result.status == "infeasible" else "feasible"
        if result.warning:
            report.warnings += 1
        report.records.append(PruneRecord(
            leaf_id=leaf.id,
            category=leaf.category,
            status=result.status,
            witness=tuple(float(v) for v in result.witness)
            if result.witness is not None else None,
            warning=result.warning,
        ))

    def rebuild(node):
        if isinstance(node, LeafNode):
            return None if verdicts[node.id].status == "infeasible" else node
        survivors = [rebuild(child) for child in node.children]
        alive = [i for i, c in enumerate(survivors) if c is not None]
        if not alive:
            return None
        if len(alive) == 1:
            region = alive[0]
            for rule in region_rules(node.filter_row, node.breakpoints, region):
                report.implied_rules.append(
                    f"node(layer={node.layer_index},unit={node.unit_index}): {rule.text()}"
                )
            return survivors[region]
        return DecisionNode(
            filter_row=node.filter_row,
            breakpoints=node.breakpoints,
            children=survivors,
            layer_index=node.layer_index,
            unit_index=node.unit_index,
            rule_1d=node.rule_1d,
        )

    new_root = rebuild(tree.root)
    if new_root is None:
        raise RuntimeError("every leaf was pruned; the domain box is empty")
    pruned = DecisionTree(
        root=new_root, k=tree.k, depth=tree.depth, widths=tree.widths,
        input_dim=tree.input_dim, output_dim=tree.output_dim,
        pruned=True, lossy=tree.lossy, name=tree.name,
    )
    pruned.reindex()
    report.nodes_after = pruned.node_count
    report.leaves_after = pruned.leaf_count
    return pruned, report


def rule_1d_of(filter_row: np.ndarray, threshold: float) -> tuple[str, float] | None:
    """Rewrite w0*x + w1 >= t as a direct inequality on x; None when w0 ~ 0."""
    w0, w1 = float(filter_row[0]), float(filter_row[1])
    if abs(w0) <= ZERO_NORMAL_TOL:
        return None
    c = (threshold - w1) / w0
    return (">=", c) if w0 > 0 else ("<=", c)


def simplify_rules_1d(tree: DecisionTree) -> tuple[DecisionTree, PruneReport]:
    """Rewrite 1-D node rules as direct threshold tests and drop nodes whose
    outcome is implied by their ancestors.

    Evaluation still uses the original filter rows, so outputs are unchanged;
    the rewritten rules are for display and redundancy reasoning only.
    """
    if tree.input_dim != 1:
        raise ValueError("rule simplification applies to one-dimensional inputs")
    report = PruneReport()
    report.nodes_before = tree.node_count
    report.leaves_before = tree.leaf_count

    def visible_regions(node, lo, hi):
        """Regions of this node's decision that intersect the open-ish x
        interval [lo, hi); each returns its narrowed interval."""
        w0, w1 = float(node.filter_row[0]), float(node.filter_row[1])
        spans = []
        if abs(w0) <= ZERO_NORMAL_TOL:
            from .activations import region_of

            fixed = int(region_of(w1, node.breakpoints))
            return [(fixed, lo, hi)]
        for region in range(node.fanout):
            r_lo, r_hi = lo, hi
            for rule in region_rules(node.filter_row, node.breakpoints, region):
                c = (rule.rhs - w1) / w0
                lower = (rule.sense == ">=") == (w0 > 0)
                if lower:
                    r_lo = max(r_lo, c)
                else:
                    r_hi = min(r_hi, c)
            if r_lo < r_hi:
                spans.append((region, r_lo, r_hi))
        return spans

    def rewrite(node, lo, hi):
        if isinstance(node, LeafNode) or node is None:
            return node
        spans = visible_regions(node, lo, hi)
        if len(spans) == 1:
            region, s_lo, s_hi = spans[0]
            child = node.children[region]
            report.implied_rules.append(
                f"node(layer={node.layer_index},unit={node.unit_index}): "
                f"region {region} implied on [{lo:.6g}, {hi:.6g})"
            )
            return rewrite(child, s_lo, s_hi)
        children = [None] * node.fanout
        for region, s_lo, s_hi in spans:
            children[region] = rewrite(node.children[region], s_lo, s_hi)
        rule = None
        if len(node.breakpoints) == 1:
            rule = rule_1d_of(node.filter_row, float(node.breakpoints[0]))
        return DecisionNode(
            filter_row=node.filter_row, breakpoints=node.breakpoints,
            children=children, layer_index=node.layer_index,
            unit_index=node.unit_index, rule_1d=rule,
        )

    new_root = rewrite(tree.root, -np.inf, np.inf)
    simplified = DecisionTree(
        root=new_root, k=tree.k, depth=tree.depth, widths=tree.widths,
        input_dim=tree.input_dim, output_dim=tree.output_dim,
        pruned=tree.pruned, lossy=tree.lossy, name=tree.name,
    )
    simplified.reindex()
    report.nodes_after = simplified.node_count
    report.leaves_after = simplified.leaf_count
    return simplified, report


def mark_realized(tree: DecisionTree, inputs, drop_unrealized: bool = False) -> DecisionTree:
    """Count how many inputs route into each leaf (stored on the leaves).

    With drop_unrealized=True, zero-count leaves are removed and the result is
    flagged lossy: it no longer matches the network away from the data.
    """
    for leaf in tree.leaves():
        leaf.realized_count = 0
    for x in np.asarray(inputs, dtype=np.float64):
        route_leaf(tree, x).realized_count += 1
    if not drop_unrealized:
        return tree

    def rebuild(node):
        if isinstance(node, LeafNode):
            return node if node.realized_count > 0 else None
        survivors = [rebuild(c) if c is not None else None for c in node.children]
        alive = [i for i, c in enumerate(survivors) if c is not None]
        if not alive:
            return None
        if len(alive) == 1:
            return survivors[alive[0]]
        return DecisionNode(
            filter_row=node.filter_row, breakpoints=node.breakpoints,
            children=survivors, layer_index=node.layer_index,
            unit_index=node.unit_index, rule_1d=node.rule_1d,
        )

    new_root = rebuild(tree.root)
    if new_root is None:
        raise RuntimeError("no leaf realized by the dataset")
    lossy = DecisionTree(
        root=new_root, k=tree.k, depth=tree.depth, widths=tree.widths,
        input_dim=tree.input_dim, output_dim=tree.output_dim,
        pruned=tree.pruned, lossy=True, name=tree.name,
    )
    lossy.reindex()
    return lossy

"""Inference-cost accounting for a network and its compiled tree.

Counting convention "opcount-v1":
  network params        sum of weight and bias entries
  network comparisons   one per breakpoint per activated unit, plus one for a
                        final classification threshold when present
  network mult/adds     weight multiplies + accumulation adds + bias adds,
                        plus one multiply (and one add, if any intercept is
                        non-zero) per activated unit for the slope application
  tree params           filter-row and leaf-map entries stored (homogeneous
                        rows excluded)
  tree comparisons /    dataset averages of the instrumented path counters
  tree mult/adds        (one multiply per row entry, row-length-minus-one adds)

Tree-side numbers are expectations because path length varies by category.
Previously published counts for the two bundled toy tasks are carried as a
reference column; they follow a different (unstated) convention and are not
comparable entry for entry.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .network import NetworkSpec
from .tree import DecisionTree, tree_eval

CONVENTION = "opcount-v1"

# reference counts for the bundled toys: (params, comparisons, mult/adds)
REFERENCE_COUNTS = {
    "parabola": {"tree": (14, 2.6, 2), "network": (13, 4, 16)},
    "halfmoon": {"tree": (39, 4.1, 8.2), "network": (15, 5, 25)},
}


@dataclass
class CostReport:
    task: str
    convention: str
    network: dict
    tree: dict
    reference: dict | None = None
    samples: int = 0

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["model", "params", "comparisons", "mult_adds",
                         "multiplies", "additions", "convention"])
        for name, row in (("network", self.network), ("tree", self.tree)):
            writer.writerow([
                name, row["params"], row["comparisons"], row["mult_adds"],
                row.get("multiplies", ""), row.get("additions", ""), self.convention,
            ])
        if self.reference:
            for name in ("network", "tree"):
                p, c, m = self.reference[name]
                writer.writerow([f"{name}_reference", p, c, m, "", "",
                                 "published reference, different convention"])
        return out.getvalue()


def network_costs(net: NetworkSpec, classify: bool = False) -> dict:
    params = 0
    comparisons = 0
    multiplies = 0
    additions = 0
    for layer in net.layers:
        d_out, d_in = layer.weights.shape
        params += d_out * d_in + d_out
        multiplies += d_out * d_in
        additions += d_out * (d_in - 1) + d_out  # accumulate + bias
        act = layer.activation
        if act is not None and act.num_regions > 1:
            comparisons += d_out * (act.num_regions - 1)
            multiplies += d_out  # slope application
            if np.any(act.intercepts != 0.0):
                additions += d_out
    if classify:
        comparisons += 1
    return {
        "params": params,
        "comparisons": comparisons,
        "multiplies": multiplies,
        "additions": additions,
        "mult_adds": multiplies + additions,
    }


def tree_storage_params(tree: DecisionTree) -> int:
    internals, leaves = tree.nodes()
    total = sum(n.filter_row.size for n in internals)
    total += sum(l.final_map[:-1].size for l in leaves)
    return total


def tree_expected_costs(tree: DecisionTree, data: Dataset) -> dict:
    comparisons = multiplies = additions = 0
    for x in data.inputs:
        _, _, cost = tree_eval(tree, x)
        comparisons += cost.comparisons
        multiplies += cost.multiplies
        additions += cost.additions
    n = len(data)
    return {
        "params": tree_storage_params(tree),
        "comparisons": comparisons / n,
        "multiplies": multiplies / n,
        "additions": additions / n,
        "mult_adds": (multiplies + additions) / n,
    }


def cost_report(net: NetworkSpec, tree: DecisionTree, data: Dataset,
                classify: bool = False, task: str | None = None) -> CostReport:
    task = task or data.name or net.name
    return CostReport(
        task=task,
        convention=CONVENTION,
        network=network_costs(net, classify=classify),
        tree=tree_expected_costs(tree, data),
        reference=REFERENCE_COUNTS.get(task),
        samples=len(data),
    )

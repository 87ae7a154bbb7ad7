"""Over-specialization diagnostics.

``contribution_report`` measures how much each member moves predictions
on average over a dataset: ``|E[w * T(x)]|`` and ``E[|w * T(x)|]``.
``export_dot`` renders one tree for GraphViz with node area proportional
to training coverage and leaves shaded red (negative) through yellow (0)
to green (positive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .data import Dataset
from .ensemble import Ensemble
from .errors import CoverageError, FeatureMismatchError

GREEN = (0, 255, 0)
YELLOW = (255, 255, 0)
RED = (255, 0, 0)

CSV_HEADER = "member,abs_mean,mean_abs"


@dataclass(frozen=True)
class MemberContribution:
    member: int
    abs_mean: float
    mean_abs: float
    signed_mean: float
    weight: float


@dataclass(frozen=True)
class ContributionReport:
    rows: List[MemberContribution]
    weighted: bool = True

    def abs_means(self) -> np.ndarray:
        return np.array([r.abs_mean for r in self.rows])


def contribution_report(ensemble: Ensemble, dataset: Dataset, weighted: bool = True) -> ContributionReport:
    if dataset.n_rows == 0:
        raise ValueError("empty dataset")
    if dataset.n_features != ensemble.n_features:
        raise FeatureMismatchError(ensemble.n_features, dataset.n_features)
    rows = []
    for i, m in enumerate(ensemble.members):
        c = m.tree.predict(dataset.features)
        if weighted:
            c = m.weight * c
        signed = float(np.mean(c))
        rows.append(MemberContribution(i, abs(signed), float(np.mean(np.abs(c))), signed, m.weight))
    return ContributionReport(rows, weighted)


def contribution_curve_csv(report: ContributionReport) -> str:
    lines = [CSV_HEADER]
    lines.extend(f"{r.member},{r.abs_mean!r},{r.mean_abs!r}" for r in report.rows)
    return "\n".join(lines) + "\n"


def leaf_color(value: float, scale: float) -> str:
    """Hex fill for a leaf; ``scale`` is the tree's largest |leaf value|."""
    u = 0.0 if scale == 0 else max(-1.0, min(1.0, value / scale))
    end = GREEN if u >= 0 else RED
    a = abs(u)
    rgb = [round(y + (e - y) * a) for y, e in zip(YELLOW, end)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _num(x: float) -> str:
    return repr(float(x))


def export_dot(ensemble: Ensemble, member: int, precision: int = 4) -> str:
    if not 0 <= member < len(ensemble):
        raise IndexError(f"member {member} out of range for an ensemble of {len(ensemble)}")
    tree = ensemble.members[member].tree
    leaves = np.flatnonzero(tree.feature < 0)
    if np.any(np.isnan(tree.coverage[leaves])):
        raise CoverageError(
            f"member {member} has no training-coverage annotations; "
            "re-annotate by retraining or re-deriving coverage from the training data"
        )
    cov = tree.node_coverage()
    scale = float(np.max(np.abs(tree.value[leaves])))
    out = [
        f"digraph tree_{member} {{",
        '  node [style=filled, fixedsize=true, fontsize=10, fontname="Helvetica"];',
    ]
    for i in range(tree.n_nodes):
        side = _num(math.sqrt(max(cov[i], 0.0)))
        if tree.feature[i] >= 0:
            label = f"f{int(tree.feature[i])} ≤ {float(tree.threshold[i]):.{precision}g}"
            out.append(f'  n{i} [shape=box, label="{label}", width={side}, height={side}, fillcolor="#ffffff"];')
        else:
            v = float(tree.value[i])
            out.append(
                f'  n{i} [shape=ellipse, label="{v:.{precision}g}", width={side}, height={side}, '
                f'fillcolor="{leaf_color(v, scale)}"];'
            )
    for i in range(tree.n_nodes):
        if tree.feature[i] >= 0:
            out.append(f'  n{i} -> n{int(tree.left[i])} [label="yes"];')
            out.append(f'  n{i} -> n{int(tree.right[i])} [label="no"];')
    out.append("}")
    return "\n".join(out) + "\n"

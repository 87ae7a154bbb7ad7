"""Task metrics for a set of scores."""

from __future__ import annotations

from ..data import Dataset
from ..errors import LabelDomainError
from ..metrics import accuracy_and_recall, mean_ndcg, mse, rmse

METRICS = ("mse", "rmse", "accuracy", "recall", "ndcg")
DEFAULT_METRICS = {"squared": ("mse", "rmse"), "logistic": ("accuracy", "recall"), "lambdarank": ("ndcg",)}


def evaluate_scores(loss_name: str, dataset: Dataset, scores, ndcg_at: int = 3, metrics=None) -> dict:
    """Metric name -> value. ``ndcg`` expands to ``ndcg@1`` .. ``ndcg@<ndcg_at>``."""
    wanted = metrics or DEFAULT_METRICS[loss_name]
    out = {}
    for name in wanted:
        if name in ("mse", "rmse"):
            out["mse"] = mse(dataset.labels, scores)
            out["rmse"] = rmse(dataset.labels, scores)
        elif name in ("accuracy", "recall"):
            try:
                out.update(accuracy_and_recall(dataset.labels, scores))
            except ValueError as e:
                raise LabelDomainError(str(e)) from e
        elif name == "ndcg":
            if dataset.query_groups is None:
                raise LabelDomainError("ndcg needs query-grouped data (qid)")
            dataset.check_relevance_grades()
            for k in range(1, ndcg_at + 1):
                out[f"ndcg@{k}"] = mean_ndcg(dataset.labels, scores, dataset.query_groups, k)
        else:
            raise ValueError(f"unknown metric {name!r}")
    return {k: out[k] for k in sorted(out, key=_metric_order)}


def _metric_order(name: str):
    base, _, at = name.partition("@")
    return (METRICS.index(base), int(at) if at else 0)


def format_table(metrics: dict) -> str:
    width = max([len("metric"), *(len(k) for k in metrics)])
    lines = [f"{'metric':<{width}}  value", f"{'-' * width}  -----"]
    for k, v in metrics.items():
        lines.append(f"{k:<{width}}  {'undefined' if v is None else format(v, '.6f')}")
    return "\n".join(lines)

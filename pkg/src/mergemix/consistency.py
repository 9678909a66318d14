"""Rank-consistency experiment: does merging rank mixtures like training does?

For each candidate ratio, one model is built by merging the experts at
those weights and another by actually training on the mixed data; both are
scored in shared normalized units. The deliverable is the Spearman rank
correlation between the two score lists (plus the raw table), because
ranking, not absolute score, is what the merging proxy promises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MergeMixError
from .merging import merge
from .simplex import normalize_simplex
from .stats import CorrelationReport, NormContext, UtilitySpec, spearman, utility
from .training import TrainConfig, train_on_mixture
from .worlds import World, raw_capability


@dataclass(frozen=True)
class RankConsistencyResult:
    report: CorrelationReport
    rows: list[dict]
    mean_gap: float  # constant offset between the two score curves

    def to_dict(self) -> dict:
        return {
            "spearman": self.report.to_dict(),
            "rows": self.rows,
            "mean_gap": self.mean_gap,
        }


def rank_consistency(world: World, base: np.ndarray, experts,
                     ratios, train_config: TrainConfig,
                     utility_spec: UtilitySpec | None = None,
                     threads: int = 1) -> RankConsistencyResult:
    ratios = [normalize_simplex(r) for r in ratios]
    if len(ratios) < 3:
        raise MergeMixError(f"need at least 3 ratios, got {len(ratios)}")
    spec = utility_spec or UtilitySpec()
    expert_params = [e.final if hasattr(e, "final") else e for e in experts]

    def raws(theta):
        return [raw_capability(world, m, theta) for m in range(world.num_domains)]

    merged_raw = [raws(merge(base, expert_params, lam)) for lam in ratios]
    trained_raw = [raws(train_on_mixture(world, lam, base, train_config).final)
                   for lam in ratios]

    # One normalization context per capability over both arms, so the two
    # score lists live in the same units and the offset is meaningful.
    contexts = []
    for m in range(world.num_domains):
        pool = [row[m] for row in merged_raw] + [row[m] for row in trained_raw]
        contexts.append(NormContext.from_samples(pool))

    def utilities(raw_rows):
        out = []
        for row in raw_rows:
            out.append(utility([contexts[m].apply(v) for m, v in enumerate(row)],
                               spec))
        return out

    merged_scores = utilities(merged_raw)
    trained_scores = utilities(trained_raw)
    report = spearman(merged_scores, trained_scores)

    rows = []
    for i, lam in enumerate(ratios):
        row = {f"lambda_{k + 1}": float(lam[k]) for k in range(lam.shape[0])}
        row["merged_score"] = merged_scores[i]
        row["trained_score"] = trained_scores[i]
        row["merged_rank"] = report.x_ranks[i]
        row["trained_rank"] = report.y_ranks[i]
        rows.append(row)
    gap = float(np.mean(np.asarray(merged_scores) - np.asarray(trained_scores)))
    return RankConsistencyResult(report, rows, gap)

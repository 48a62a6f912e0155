"""Query strategies: RANDOM, CONF, CORESET, and the two-stage purity+conf
selection.

All tie-breaks resolve to the lowest sample index so selections are
reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embstore import OpenSetPool
from .errors import DataError
from .probe import LinearSoftmaxProbe
from .purity import DEFAULT_TAU_GRID, PromptEmbeddings, assess_purity
from .validation import as_float_matrix

STRATEGY_NAMES = ("random", "conf", "coreset", "clipnal")


@dataclass(frozen=True)
class QueryResult:
    selected: tuple[int, ...]
    scores: dict[int, float] | None = None
    fallback_used: int = 0


def random_select(pool: OpenSetPool, budget: int, seed: int) -> QueryResult:
    """Uniform sample without replacement from the unlabeled pool."""
    if budget < 1:
        raise DataError(f"budget must be >= 1, got {budget}")
    rng = np.random.default_rng(seed)
    n = min(budget, len(pool.unlabeled))
    picks = rng.choice(len(pool.unlabeled), size=n, replace=False)
    return QueryResult(selected=tuple(pool.unlabeled[i] for i in picks))


def conf_scores(
    model: LinearSoftmaxProbe, images: np.ndarray, candidates: list[int]
) -> np.ndarray:
    """Least-confidence informativeness: 1 - max class probability."""
    if len(candidates) == 0:
        raise DataError("no candidates to score")
    probs = model.predict_proba(np.asarray(images)[list(candidates)])
    return 1.0 - probs.max(axis=1)


def _top_by_score(candidates: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k highest-scoring candidates, ties to lowest index."""
    order = np.lexsort((candidates, -scores))
    return candidates[order[:k]]


def coreset_select(
    images: np.ndarray,
    labeled_indices: list[int],
    candidates: list[int],
    budget: int,
) -> QueryResult:
    """k-center greedy: pick the candidate farthest (Euclidean) from the
    labeled set and everything selected so far, repeatedly."""
    if len(candidates) == 0:
        raise DataError("no candidates to select from")
    images = as_float_matrix(images, "images")
    cand = np.asarray(candidates)
    cand_emb = images[cand]

    if labeled_indices:
        diffs = cand_emb[:, None, :] - images[np.asarray(labeled_indices)][None, :, :]
        min_dist = np.sqrt((diffs**2).sum(axis=2)).min(axis=1)
    else:
        centroid = cand_emb.mean(axis=0)
        min_dist = np.linalg.norm(cand_emb - centroid, axis=1)

    n = min(budget, len(candidates))
    selected: list[int] = []
    taken = np.zeros(len(cand), dtype=bool)
    for _ in range(n):
        masked = np.where(taken, -np.inf, min_dist)
        # argmax returns the first maximum; cand is in caller order, which the
        # simulator keeps ascending, giving lowest-index tie-breaks
        pick = int(np.argmax(masked))
        taken[pick] = True
        selected.append(int(cand[pick]))
        dist_to_pick = np.linalg.norm(cand_emb - cand_emb[pick], axis=1)
        min_dist = np.minimum(min_dist, dist_to_pick)
    return QueryResult(selected=tuple(selected))


def clipnal_select(
    pool: OpenSetPool,
    images: np.ndarray,
    prompts: PromptEmbeddings,
    model: LinearSoftmaxProbe,
    budget: int,
    grid: tuple[float, float, int] = DEFAULT_TAU_GRID,
) -> tuple[QueryResult, float]:
    """Two-stage selection: purity filter, then least-confidence ranking.

    Candidates flagged OOD are excluded; the survivors are ranked by
    conf score. If fewer survivors than budget, the remaining slots are
    filled with the most-ID-looking rejected candidates (ascending p_ood)
    so the full budget is always spent.
    """
    scores, tau = assess_purity(images, prompts, pool, grid)
    unlabeled = np.asarray(pool.unlabeled)
    predicted_id = unlabeled[scores.indicator == 0]
    predicted_ood = unlabeled[scores.indicator == 1]

    n = min(budget, len(unlabeled))
    selected: list[int] = []
    score_map: dict[int, float] = {}
    if len(predicted_id):
        informativeness = conf_scores(model, images, predicted_id.tolist())
        score_map = {int(i): float(s) for i, s in zip(predicted_id, informativeness)}
        take = min(n, len(predicted_id))
        selected = [int(i) for i in _top_by_score(predicted_id, informativeness, take)]

    fallback_used = 0
    if len(selected) < n:
        fallback_used = n - len(selected)
        p_ood = scores.p_ood[scores.indicator == 1]
        order = np.lexsort((predicted_ood, p_ood))
        selected += [int(i) for i in predicted_ood[order[:fallback_used]]]

    result = QueryResult(
        selected=tuple(selected), scores=score_map or None, fallback_used=fallback_used
    )
    return result, tau

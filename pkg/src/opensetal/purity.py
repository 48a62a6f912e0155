"""Zero-shot ID/OOD purity scoring with visual-prototype weighting.

Scoring pipeline, all on L2-normalized embeddings:

1. p_yes[i,j]: softmax over classes of cos(image_i, yes_prompt_j) / tau.
2. p_no[i,j]: two-way softmax between the class's yes and no prompt
   similarities, i.e. sigmoid((no_sim - yes_sim) / tau).
3. p_id = p_yes * (1 - p_no); p_ood = 1 - sum_j p_id. A sample is flagged
   OOD when p_ood strictly exceeds the best class' p_id (threshold-free
   "agreeing to differ" rule).
4. Optional weighting: s[i,j] = softmax of cos(image_i, prototype_j) / tau,
   p*_id = p_id * s, p*_ood = p_ood / K, OOD when p*_ood >= max_j p*_id.
   Note the weighted rule uses >= where the unweighted rule uses >.
5. tau is grid-searched to maximize binary ID/OOD accuracy of the flag on
   the already-labeled samples (1 = OOD), smallest tau winning ties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from .embstore import OpenSetPool
from .errors import ConfigError, DataError, DegeneratePromptError
from .validation import as_float_matrix, check_dims, l2_normalize, softmax

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.1
DEFAULT_TAU_GRID = (0.001, 1.0, 1000)


@dataclass(frozen=True)
class PromptEmbeddings:
    """Per-class averaged "yes" and "no" text embeddings, unit-norm rows."""

    yes_text: np.ndarray  # (K, D)
    no_text: np.ndarray  # (K, D)
    templates_used: int = 1

    @property
    def k(self) -> int:
        return self.yes_text.shape[0]

    @property
    def dim(self) -> int:
        return self.yes_text.shape[1]


@dataclass(frozen=True)
class Prototypes:
    """Mean embedding per ID class over its labeled samples."""

    phi: np.ndarray  # (K, D)
    present: np.ndarray  # (K,) bool

    @property
    def all_present(self) -> bool:
        return bool(np.all(self.present))


@dataclass(frozen=True)
class PurityScores:
    p_yes: np.ndarray  # (N, K)
    p_no: np.ndarray  # (N, K)
    p_id: np.ndarray  # (N, K)
    p_ood: np.ndarray  # (N,)
    indicator: np.ndarray  # (N,) int, 1 = OOD
    weighted: bool = False
    s: np.ndarray | None = None  # (N, K) similarity weights when weighted


def average_prompt_embeddings(
    yes_stack: np.ndarray, no_stack: np.ndarray, *, normalize_templates: bool = True
) -> PromptEmbeddings:
    """Average T per-template embedding stacks of shape (T, K, D) per class.

    Each template row is L2-normalized, the mean over templates is taken, and
    the mean is renormalized.
    """
    yes_stack = np.asarray(yes_stack, dtype=np.float64)
    no_stack = np.asarray(no_stack, dtype=np.float64)
    if yes_stack.ndim != 3 or no_stack.shape != yes_stack.shape:
        raise DataError(
            f"expected matching (T, K, D) stacks, got {yes_stack.shape} and {no_stack.shape}"
        )
    t = yes_stack.shape[0]
    if t < 1:
        raise DataError("need at least one template")

    def _avg(stack: np.ndarray, which: str) -> np.ndarray:
        rows = l2_normalize(stack, axis=-1) if normalize_templates else stack
        mean = rows.mean(axis=0)
        norms = np.linalg.norm(mean, axis=-1)
        bad = np.flatnonzero(norms < 1e-12)
        if bad.size:
            raise DegeneratePromptError(
                f"zero-norm averaged {which} prompt for class {int(bad[0])}"
            )
        return mean / norms[:, None]

    return PromptEmbeddings(
        yes_text=_avg(yes_stack, "yes"),
        no_text=_avg(no_stack, "no"),
        templates_used=t,
    )


def _cosine(images: np.ndarray, other: np.ndarray) -> np.ndarray:
    return l2_normalize(images) @ l2_normalize(other).T


def clipn_scores(
    images: np.ndarray, prompts: PromptEmbeddings, tau: float
) -> PurityScores:
    """Unweighted yes/no purity scores and the OOD indicator."""
    if tau <= 0:
        raise DataError(f"temperature must be positive, got {tau}")
    images = as_float_matrix(images, "images")
    check_dims(images, prompts.yes_text, "yes prompts")
    yes_sim = _cosine(images, prompts.yes_text)
    no_sim = _cosine(images, prompts.no_text)

    p_yes = softmax(yes_sim / tau, axis=1)
    # Two-way softmax between the class's own yes/no logits. Both sides are
    # computed as stable sigmoids so tiny probabilities keep full relative
    # precision, and p_ood is accumulated as sum p_yes*p_no, which equals
    # 1 - sum p_id algebraically but avoids catastrophic cancellation.
    d = (no_sim - yes_sim) / tau
    e = np.exp(-np.abs(d))
    p_no = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    one_minus_p_no = np.where(d >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    p_id = p_yes * one_minus_p_no
    p_ood = (p_yes * p_no).sum(axis=1)
    indicator = (p_ood > p_id.max(axis=1)).astype(np.int64)
    return PurityScores(
        p_yes=p_yes, p_no=p_no, p_id=p_id, p_ood=p_ood, indicator=indicator
    )


def class_prototypes(
    images: np.ndarray, labeled_id: list[tuple[int, int]], k: int
) -> Prototypes:
    """Per-class normalized mean of the labeled ID embeddings.

    Classes without labeled samples get present=False. A degenerate zero mean
    (antipodal members) falls back to the first member's embedding.
    """
    images = as_float_matrix(images, "images")
    normed = l2_normalize(images)
    phi = np.zeros((k, images.shape[1]))
    present = np.zeros(k, dtype=bool)
    for j in range(k):
        members = [i for i, c in labeled_id if c == j]
        if not members:
            continue
        present[j] = True
        mean = normed[members].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            logger.warning(
                "degenerate zero-mean prototype for class %d; using first member", j
            )
            phi[j] = normed[members[0]]
        else:
            phi[j] = mean / norm
    return Prototypes(phi=phi, present=present)


def weighted_scores(
    scores: PurityScores,
    protos: Prototypes,
    images: np.ndarray,
    tau: float,
) -> PurityScores:
    """Apply visual similarity weights to unweighted scores."""
    if scores.weighted:
        raise DataError("scores are already weighted")
    if not protos.all_present:
        missing = np.flatnonzero(~protos.present).tolist()
        raise DataError(f"missing prototypes for classes {missing}")
    images = as_float_matrix(images, "images")
    k = scores.p_id.shape[1]
    s = softmax(_cosine(images, protos.phi) / tau, axis=1)
    p_id = scores.p_id * s
    p_ood = scores.p_ood / k
    indicator = (p_ood >= p_id.max(axis=1)).astype(np.int64)
    return replace(
        scores, p_id=p_id, p_ood=p_ood, indicator=indicator, weighted=True, s=s
    )


def _indicator_on(
    images: np.ndarray,
    prompts: PromptEmbeddings,
    protos: Prototypes | None,
    tau: float,
) -> np.ndarray:
    scores = clipn_scores(images, prompts, tau)
    if protos is not None:
        scores = weighted_scores(scores, protos, images, tau)
    return scores.indicator


def tau_grid_points(grid: tuple[float, float, int]) -> np.ndarray:
    lo, hi, steps = grid
    if steps < 1:
        raise ConfigError(f"temperature grid needs at least one point, got {steps}")
    if lo <= 0:
        raise ConfigError(f"temperature grid minimum must be positive, got {lo}")
    if hi < lo:
        raise ConfigError(f"temperature grid maximum {hi} below minimum {lo}")
    return np.linspace(lo, hi, int(steps))


def tune_temperature(
    images: np.ndarray,
    prompts: PromptEmbeddings,
    protos: Prototypes | None,
    pool: OpenSetPool,
    grid: tuple[float, float, int] = DEFAULT_TAU_GRID,
) -> tuple[float, float]:
    """Grid-search the temperature maximizing ID/OOD accuracy on labeled data.

    The indicator evaluated is the weighted one when `protos` covers every
    class, otherwise the unweighted one. Ties break toward the smallest tau.
    Falls back to DEFAULT_TAU when either labeled side is empty.
    """
    taus = tau_grid_points(grid)
    if not pool.labeled_id or not pool.labeled_ood:
        logger.info("labeled ID or OOD set empty; using default tau %.3f", DEFAULT_TAU)
        return DEFAULT_TAU, float("nan")

    idx = pool.labeled_indices
    y_ood = np.array(
        [0] * len(pool.labeled_id) + [1] * len(pool.labeled_ood), dtype=np.int64
    )
    use_protos = protos if (protos is not None and protos.all_present) else None
    labeled_images = np.asarray(images)[idx]

    best_tau, best_acc = None, -1.0
    for tau in taus:
        pred = _indicator_on(labeled_images, prompts, use_protos, float(tau))
        acc = float(np.mean(pred == y_ood))
        if acc > best_acc:
            best_tau, best_acc = float(tau), acc
    return best_tau, best_acc


def assess_purity(
    images: np.ndarray,
    prompts: PromptEmbeddings,
    pool: OpenSetPool,
    grid: tuple[float, float, int] = DEFAULT_TAU_GRID,
) -> tuple[PurityScores, float]:
    """Full purity assessment of the unlabeled pool for one round.

    Tunes tau on the labeled sets, builds class prototypes, then scores
    `pool.unlabeled`. Visual weighting is skipped (with a log line) whenever
    some ID class has no labeled sample yet.
    """
    protos = class_prototypes(images, list(pool.labeled_id), pool.k)
    tau, _ = tune_temperature(images, prompts, protos, pool, grid)
    unlabeled_images = np.asarray(images)[list(pool.unlabeled)]
    scores = clipn_scores(unlabeled_images, prompts, tau)
    if protos.all_present:
        scores = weighted_scores(scores, protos, unlabeled_images, tau)
    else:
        logger.info(
            "visual weighting skipped: classes %s have no labeled samples",
            np.flatnonzero(~protos.present).tolist(),
        )
    return scores, tau


class OpenSetPurityDetector(BaseEstimator):
    """Estimator-style wrapper around the purity pipeline.

    fit(X, y) takes labeled embeddings with y giving the ID class in [0, K)
    for ID samples and -1 for OOD samples; it tunes the temperature and
    builds prototypes. predict(X) returns the OOD indicator (1 = OOD) and
    predict_proba(X) the [p_id_max, p_ood] columns.
    """

    def __init__(
        self,
        prompts: PromptEmbeddings | None = None,
        tau_grid: tuple[float, float, int] = DEFAULT_TAU_GRID,
    ):
        self.prompts = prompts
        self.tau_grid = tau_grid

    def fit(self, X, y):
        if self.prompts is None:
            raise ConfigError("prompts must be provided before fitting")
        X = as_float_matrix(X, "X")
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise DataError("X and y length mismatch")
        labeled_id = [(i, int(c)) for i, c in enumerate(y) if c >= 0]
        labeled_ood = [i for i, c in enumerate(y) if c < 0]
        pool = OpenSetPool(
            unlabeled=(),
            labeled_id=tuple(labeled_id),
            labeled_ood=tuple(labeled_ood),
            k=self.prompts.k,
        )
        self.prototypes_ = class_prototypes(X, labeled_id, self.prompts.k)
        self.tau_, self.tuning_accuracy_ = tune_temperature(
            X, self.prompts, self.prototypes_, pool, self.tau_grid
        )
        return self

    def _scores(self, X) -> PurityScores:
        if not hasattr(self, "tau_"):
            raise ConfigError("detector is not fitted")
        X = as_float_matrix(X, "X")
        scores = clipn_scores(X, self.prompts, self.tau_)
        if self.prototypes_.all_present:
            scores = weighted_scores(scores, self.prototypes_, X, self.tau_)
        return scores

    def predict(self, X) -> np.ndarray:
        return self._scores(X).indicator

    def predict_proba(self, X) -> np.ndarray:
        scores = self._scores(X)
        return np.column_stack([scores.p_id.max(axis=1), scores.p_ood])

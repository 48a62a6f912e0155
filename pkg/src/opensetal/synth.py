"""Synthetic Gaussian-cluster embeddings with matching prompt embeddings.

Gives the whole pipeline a desk-scale, fully deterministic stand-in for real
encoder outputs: unit-norm class centers with controlled angular spacing,
noisy samples around them, and per-class yes/no prompt vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .embstore import DatasetManifest
from .errors import DataError, GenerationError
from .purity import PromptEmbeddings
from .validation import l2_normalize

_MAX_CENTER_ATTEMPTS = 20000


@dataclass(frozen=True)
class SynthSpec:
    k_id: int
    k_ood: int
    dim: int
    per_class: int
    separation: float  # center spacing in units of noise_sigma
    noise_sigma: float
    seed: int

    def validate(self) -> None:
        if self.k_id < 2:
            raise GenerationError("need at least 2 ID classes")
        if self.dim < 2:
            raise GenerationError("need dim >= 2")
        if self.per_class < 1:
            raise GenerationError("need per_class >= 1")
        if self.separation <= 0 or self.noise_sigma <= 0:
            raise GenerationError("separation and noise_sigma must be positive")


def _sample_centers(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample unit centers whose pairwise chord distance is at least
    separation * noise_sigma."""
    k = spec.k_id + spec.k_ood
    # After normalization a sample's angular deviation from its center is on
    # the order of noise_sigma * sqrt(dim), so center spacing is required in
    # those units to keep clusters separated on the sphere.
    min_angle = min(spec.separation * spec.noise_sigma * np.sqrt(spec.dim), np.pi)
    max_dot = float(np.cos(min_angle))
    centers: list[np.ndarray] = []
    attempts = 0
    while len(centers) < k:
        if attempts >= _MAX_CENTER_ATTEMPTS:
            raise GenerationError(
                f"could not place {k} centers with angular spacing {min_angle:.3g} "
                f"in dimension {spec.dim} after {attempts} attempts"
            )
        attempts += 1
        cand = rng.standard_normal(spec.dim)
        cand /= np.linalg.norm(cand)
        if all(float(cand @ c) <= max_dot for c in centers):
            centers.append(cand)
    return np.stack(centers)


def generate_synthetic(
    spec: SynthSpec,
) -> tuple[np.ndarray, DatasetManifest, PromptEmbeddings]:
    """Generate embeddings, a manifest, and prompt embeddings from `spec`.

    Samples are center + isotropic Gaussian noise, L2-normalized. The "yes"
    prompt of ID class j is its center; the "no" prompt is the normalized
    mean of every other class center, a generic "away from j" direction.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k = spec.k_id + spec.k_ood
    centers = _sample_centers(spec, rng)

    labels = np.repeat(np.arange(k), spec.per_class)
    noise = rng.normal(0.0, spec.noise_sigma, size=(k * spec.per_class, spec.dim))
    embeddings = l2_normalize(centers[labels] + noise).astype(np.float32)

    yes = centers[: spec.k_id]
    no = np.empty_like(yes)
    for j in range(spec.k_id):
        others = np.delete(centers, j, axis=0).mean(axis=0)
        no[j] = others / np.linalg.norm(others)
    prompts = PromptEmbeddings(yes_text=yes, no_text=no, templates_used=1)

    manifest = DatasetManifest(
        dataset=f"synthetic-{spec.seed}",
        class_names=tuple(
            [f"id_{j}" for j in range(spec.k_id)]
            + [f"ood_{j}" for j in range(spec.k_ood)]
        ),
        labels=tuple(int(x) for x in labels),
        id_class_indices=tuple(range(spec.k_id)),
    )
    return embeddings, manifest, prompts


def generate_synthetic_split(
    spec: SynthSpec, per_class_test: int
) -> tuple[np.ndarray, DatasetManifest, PromptEmbeddings, np.ndarray, DatasetManifest]:
    """Train/test split drawn around the same class centers.

    Generates per_class + per_class_test samples per class in one pass, then
    carves off the trailing per_class_test of each class as the held-out
    split, so both splits share geometry and prompt embeddings.
    """
    if per_class_test < 1:
        raise GenerationError("need per_class_test >= 1")
    total = replace(spec, per_class=spec.per_class + per_class_test)
    emb, manifest, prompts = generate_synthetic(total)

    labels = np.asarray(manifest.labels)
    train_mask = np.zeros(len(labels), dtype=bool)
    for j in range(manifest.n_classes):
        members = np.flatnonzero(labels == j)
        train_mask[members[: spec.per_class]] = True

    train_manifest = replace(
        manifest, labels=tuple(int(x) for x in labels[train_mask])
    )
    test_manifest = replace(
        manifest, labels=tuple(int(x) for x in labels[~train_mask])
    )
    return emb[train_mask], train_manifest, prompts, emb[~train_mask], test_manifest


def prompts_to_matrix(prompts: PromptEmbeddings) -> np.ndarray:
    """Stack prompts as a 2K-row matrix: K yes rows then K no rows."""
    return np.vstack([prompts.yes_text, prompts.no_text]).astype(np.float32)


def prompts_from_matrix(matrix: np.ndarray, templates_used: int = 1) -> PromptEmbeddings:
    """Inverse of prompts_to_matrix; row count must be even."""
    if matrix.shape[0] % 2 != 0:
        raise DataError(f"prompt matrix must have 2K rows, got {matrix.shape[0]}")
    k = matrix.shape[0] // 2
    return PromptEmbeddings(
        yes_text=np.asarray(matrix[:k], dtype=np.float64),
        no_text=np.asarray(matrix[k:], dtype=np.float64),
        templates_used=templates_used,
    )

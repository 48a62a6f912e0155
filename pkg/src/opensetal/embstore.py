"""Embedding storage, dataset manifests, and open-set pool construction.

The on-disk embedding format (EMB1) is a fixed 20-byte header followed by a
row-major float32 little-endian payload:

    bytes 0-3    magic b"EMB1"
    bytes 4-7    version, u32 LE, = 1
    bytes 8-11   row count N, u32 LE
    bytes 12-15  dimension D, u32 LE
    byte  16     dtype flag, u8, 0 = float32 LE
    bytes 17-19  zero padding
    bytes 20..   N*D float32 LE values, row-major
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    AnnotationError,
    DataError,
    EmbeddingFormatError,
    InsufficientDataError,
    ManifestError,
)
from .validation import round_half_up

MAGIC = b"EMB1"
VERSION = 1
HEADER_SIZE = 20
DTYPE_FLOAT32 = 0


def write_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    """Write a finite N x D float32 matrix to `path` in EMB1 format."""
    arr = np.ascontiguousarray(matrix, dtype=np.float32)
    if arr.ndim != 2:
        raise DataError(f"embedding matrix must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("embedding matrix contains non-finite values")
    n, d = arr.shape
    header = MAGIC + struct.pack("<IIIB3x", VERSION, n, d, DTYPE_FLOAT32)
    payload = arr.astype("<f4").tobytes()
    tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
    tmp.write_bytes(header + payload)
    tmp.replace(path)


def read_embeddings(path: str | Path) -> np.ndarray:
    """Read an EMB1 file back into a float32 matrix, validating the layout."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise EmbeddingFormatError(
            f"truncated header: {len(raw)} bytes, need {HEADER_SIZE}", offset=len(raw)
        )
    if raw[:4] != MAGIC:
        raise EmbeddingFormatError(f"bad magic {raw[:4]!r}", offset=0)
    version, n, d, dtype_flag = struct.unpack("<IIIB", raw[4:17])
    if version != VERSION:
        raise EmbeddingFormatError(f"unsupported version {version}", offset=4)
    if dtype_flag != DTYPE_FLOAT32:
        raise EmbeddingFormatError(f"unsupported dtype flag {dtype_flag}", offset=16)
    expected = HEADER_SIZE + 4 * n * d
    if len(raw) != expected:
        raise EmbeddingFormatError(
            f"payload size mismatch: file has {len(raw)} bytes, expected {expected}",
            offset=min(len(raw), expected),
        )
    arr = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).reshape(n, d).copy()
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr.ravel()))[0])
        raise EmbeddingFormatError("non-finite value in payload", offset=HEADER_SIZE + 4 * bad)
    return arr


@dataclass(frozen=True)
class DatasetManifest:
    """Per-sample labels plus the designation of which classes are ID.

    `labels` keeps original class indices for every sample, OOD included; ID
    membership is always derived from `id_class_indices`, never stored per
    sample.
    """

    dataset: str
    class_names: tuple[str, ...]
    labels: tuple[int, ...]
    id_class_indices: tuple[int, ...] | None = None

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    def validate(self, n_rows: int | None = None) -> None:
        k_total = self.n_classes
        if any(not (0 <= lbl < k_total) for lbl in self.labels):
            raise ManifestError("label out of range of class_names")
        if n_rows is not None and n_rows != self.n_samples:
            raise ManifestError(
                f"labels length {self.n_samples} != embedding rows {n_rows}"
            )
        if self.id_class_indices is not None:
            ids = self.id_class_indices
            if len(ids) == 0:
                raise ManifestError("id_class_indices must be non-empty")
            if list(ids) != sorted(set(ids)):
                raise ManifestError("id_class_indices must be strictly increasing")
            if any(not (0 <= c < k_total) for c in ids):
                raise ManifestError("id_class_indices out of range")

    def is_id(self, sample_index: int) -> bool:
        if self.id_class_indices is None:
            raise ManifestError("manifest has no id_class_indices set")
        return self.labels[sample_index] in set(self.id_class_indices)

    def id_class_of(self, sample_index: int) -> int:
        """Remap a sample's original label to its ID-class index in [0, K)."""
        return self.id_class_indices.index(self.labels[sample_index])

    def to_json(self) -> str:
        doc = {
            "dataset": self.dataset,
            "class_names": list(self.class_names),
            "labels": list(self.labels),
        }
        if self.id_class_indices is not None:
            doc["id_class_indices"] = list(self.id_class_indices)
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ManifestError(f"manifest is not valid JSON: {e}") from e
        for key in ("dataset", "class_names", "labels"):
            if key not in doc:
                raise ManifestError(f"manifest missing key: {key}")
        ids = doc.get("id_class_indices")
        m = cls(
            dataset=doc["dataset"],
            class_names=tuple(doc["class_names"]),
            labels=tuple(int(x) for x in doc["labels"]),
            id_class_indices=tuple(int(x) for x in ids) if ids is not None else None,
        )
        m.validate()
        return m

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class PoolSpec:
    """How to carve an open-set pool out of a labeled dataset."""

    mismatch_ratio: float
    ood_ratio: float
    seed: int
    use_manifest_id_classes: bool = False

    def validate(self) -> None:
        if not (0.0 < self.mismatch_ratio <= 1.0):
            raise DataError(f"mismatch_ratio must be in (0,1], got {self.mismatch_ratio}")
        if not (0.0 <= self.ood_ratio < 1.0):
            raise DataError(f"ood_ratio must be in [0,1), got {self.ood_ratio}")


@dataclass(frozen=True)
class OpenSetPool:
    """Unlabeled pool plus the ID/OOD samples collected so far.

    `labeled_id` entries carry the class already remapped to [0, K).
    The three index sets are pairwise disjoint by construction.
    """

    unlabeled: tuple[int, ...]
    labeled_id: tuple[tuple[int, int], ...]
    labeled_ood: tuple[int, ...]
    k: int

    @property
    def labeled_indices(self) -> list[int]:
        return [i for i, _ in self.labeled_id] + list(self.labeled_ood)


def build_open_set_pool(
    manifest: DatasetManifest, spec: PoolSpec
) -> tuple[OpenSetPool, DatasetManifest]:
    """Construct an unlabeled open-set pool with the requested OOD fraction.

    ID classes are the first round(mismatch_ratio * K_total) classes of a
    seed-shuffled class permutation, unless `spec.use_manifest_id_classes` is
    set, in which case the manifest's own `id_class_indices` is honored (this
    is the path for synthetic data whose prompts are tied to fixed classes).

    All ID-class samples enter the pool; N_ood = round(r/(1-r) * N_id) OOD
    samples are drawn without replacement so the pool's OOD fraction is r.

    Returns the pool plus a manifest copy whose `id_class_indices` records
    the chosen ID classes.
    """
    spec.validate()
    manifest.validate()
    k_total = manifest.n_classes
    rng = np.random.default_rng(spec.seed)

    if spec.use_manifest_id_classes:
        if manifest.id_class_indices is None:
            raise ManifestError(
                "use_manifest_id_classes requires id_class_indices in the manifest"
            )
        id_classes = tuple(manifest.id_class_indices)
        rng.permutation(k_total)  # keep the stream aligned with the other path
    else:
        k_id = max(1, round_half_up(spec.mismatch_ratio * k_total))
        perm = rng.permutation(k_total)
        id_classes = tuple(sorted(int(c) for c in perm[:k_id]))

    id_set = set(id_classes)
    labels = np.asarray(manifest.labels)
    id_samples = np.flatnonzero(np.isin(labels, list(id_set)))
    ood_samples = np.flatnonzero(~np.isin(labels, list(id_set)))

    n_id = len(id_samples)
    n_ood = round_half_up(spec.ood_ratio / (1.0 - spec.ood_ratio) * n_id)
    if n_ood > len(ood_samples):
        raise InsufficientDataError(
            f"pool needs {n_ood} OOD samples but only {len(ood_samples)} available"
        )
    chosen_ood = rng.choice(ood_samples, size=n_ood, replace=False) if n_ood else []
    unlabeled = tuple(sorted(int(i) for i in (*id_samples, *chosen_ood)))

    pool = OpenSetPool(unlabeled=unlabeled, labeled_id=(), labeled_ood=(), k=len(id_classes))
    out_manifest = replace(manifest, id_class_indices=id_classes)
    out_manifest.validate()
    return pool, out_manifest


def oracle_annotate(
    pool: OpenSetPool, manifest: DatasetManifest, queries: list[int]
) -> OpenSetPool:
    """Simulate expert annotation: route queries into the ID or OOD labeled set.

    Each queried ID-class sample lands in `labeled_id` with its class remapped
    to [0, K); every other query lands in `labeled_ood`. Relative order of the
    surviving unlabeled samples is preserved.
    """
    unlabeled_set = set(pool.unlabeled)
    missing = [q for q in queries if q not in unlabeled_set]
    if missing:
        raise AnnotationError("queries not in unlabeled pool", missing)
    seen: set[int] = set()
    dupes = [q for q in queries if q in seen or seen.add(q)]
    if dupes:
        raise AnnotationError("duplicate queries", dupes)

    query_set = set(queries)
    new_id = list(pool.labeled_id)
    new_ood = list(pool.labeled_ood)
    for q in queries:
        if manifest.is_id(q):
            new_id.append((q, manifest.id_class_of(q)))
        else:
            new_ood.append(q)
    remaining = tuple(i for i in pool.unlabeled if i not in query_set)
    return OpenSetPool(
        unlabeled=remaining,
        labeled_id=tuple(new_id),
        labeled_ood=tuple(new_ood),
        k=pool.k,
    )

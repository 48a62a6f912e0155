"""Annotation-loop simulator: initial random round, then R query rounds of
select / annotate / retrain, with per-round precision and test accuracy and
an area-under-budget-curve summary.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import strategies
from .embstore import (
    DatasetManifest,
    OpenSetPool,
    PoolSpec,
    build_open_set_pool,
    oracle_annotate,
    read_embeddings,
)
from .errors import ConfigError, DataError
from .probe import LinearSoftmaxProbe, ProbeConfig, uniform_probe
from .purity import DEFAULT_TAU_GRID, PromptEmbeddings
from .synth import prompts_from_matrix


@dataclass(frozen=True)
class ExperimentPaths:
    embeddings: str
    manifest: str
    prompts: str
    test_embeddings: str
    test_manifest: str


@dataclass(frozen=True)
class ExperimentConfig:
    pool_spec: PoolSpec
    budget: int
    rounds: int
    strategy: str
    probe: ProbeConfig = ProbeConfig()
    tau_grid: tuple[float, float, int] = DEFAULT_TAU_GRID
    seed: int = 0
    paths: ExperimentPaths | None = None

    def validate(self) -> None:
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.strategy not in strategies.STRATEGY_NAMES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; "
                f"expected one of {', '.join(strategies.STRATEGY_NAMES)}"
            )
        self.pool_spec.validate()
        self.probe.validate()


@dataclass(frozen=True)
class DataBundle:
    """In-memory experiment inputs; the file paths in the config load into one
    of these."""

    images: np.ndarray
    manifest: DatasetManifest
    prompts: PromptEmbeddings
    test_images: np.ndarray
    test_manifest: DatasetManifest


@dataclass(frozen=True)
class RoundLog:
    round: int
    selected: tuple[int, ...]
    id_selected: int
    precision: float  # percent
    test_accuracy: float
    tau: float | None = None
    fallback_used: int = 0


@dataclass(frozen=True)
class ExperimentResult:
    logs: tuple[RoundLog, ...]
    aubc: float
    final_accuracy: float
    early_exhaustion: bool = False
    config: ExperimentConfig | None = None


def precision_metric(selected: list[int], manifest: DatasetManifest) -> float:
    """Percent of selected queries whose ground-truth class is ID."""
    if len(selected) == 0:
        raise DataError("precision undefined for an empty selection")
    n_id = sum(1 for i in selected if manifest.is_id(i))
    return 100.0 * n_id / len(selected)


def aubc_metric(accuracies: list[float]) -> float:
    """Normalized trapezoidal area under the accuracy-vs-round curve."""
    if len(accuracies) < 2:
        raise DataError("AUBC needs at least 2 points")
    a = np.asarray(accuracies, dtype=np.float64)
    return float(0.5 * (a[:-1] + a[1:]).sum() / (len(a) - 1))


def load_bundle(config: ExperimentConfig, base_dir: str | Path = ".") -> DataBundle:
    if config.paths is None:
        raise ConfigError("experiment config has no data paths")
    base = Path(base_dir)
    p = config.paths
    images = read_embeddings(base / p.embeddings)
    manifest = DatasetManifest.load(base / p.manifest)
    manifest.validate(images.shape[0])
    prompts = prompts_from_matrix(read_embeddings(base / p.prompts))
    test_images = read_embeddings(base / p.test_embeddings)
    test_manifest = DatasetManifest.load(base / p.test_manifest)
    test_manifest.validate(test_images.shape[0])
    return DataBundle(
        images=images,
        manifest=manifest,
        prompts=prompts,
        test_images=test_images,
        test_manifest=test_manifest,
    )


def _train_round_probe(
    bundle: DataBundle, pool: OpenSetPool, config: ExperimentConfig, round_seed: int
) -> LinearSoftmaxProbe:
    """Reinitialize and train the probe on the current labeled ID set."""
    if not pool.labeled_id:
        return uniform_probe(pool.k, bundle.images.shape[1])
    idx = [i for i, _ in pool.labeled_id]
    y = np.array([c for _, c in pool.labeled_id])
    probe = LinearSoftmaxProbe.from_config(pool.k, config.probe)
    probe.seed = round_seed
    return probe.fit(bundle.images[idx], y)


def _test_split(
    bundle: DataBundle, manifest: DatasetManifest
) -> tuple[np.ndarray, np.ndarray]:
    """ID-only test samples with labels remapped to [0, K); OOD classes never
    appear in the test set."""
    id_classes = list(manifest.id_class_indices)
    test_labels = np.asarray(bundle.test_manifest.labels)
    mask = np.isin(test_labels, id_classes)
    remap = {c: j for j, c in enumerate(id_classes)}
    y = np.array([remap[int(c)] for c in test_labels[mask]])
    return bundle.test_images[mask], y


def _select(
    config: ExperimentConfig,
    pool: OpenSetPool,
    bundle: DataBundle,
    model: LinearSoftmaxProbe,
    round_seed: int,
) -> tuple[strategies.QueryResult, float | None]:
    budget = config.budget
    if config.strategy == "random":
        return strategies.random_select(pool, budget, round_seed), None
    if config.strategy == "conf":
        cand = list(pool.unlabeled)
        scores = strategies.conf_scores(model, bundle.images, cand)
        order = np.lexsort((cand, -scores))
        n = min(budget, len(cand))
        picked = tuple(int(cand[i]) for i in order[:n])
        return strategies.QueryResult(selected=picked), None
    if config.strategy == "coreset":
        return (
            strategies.coreset_select(
                bundle.images, pool.labeled_indices, list(pool.unlabeled), budget
            ),
            None,
        )
    if config.strategy == "clipnal":
        result, tau = strategies.clipnal_select(
            pool, bundle.images, bundle.prompts, model, budget, config.tau_grid
        )
        return result, tau
    raise ConfigError(f"unknown strategy {config.strategy!r}")


def run_experiment(
    config: ExperimentConfig,
    bundle: DataBundle | None = None,
    base_dir: str | Path = ".",
) -> ExperimentResult:
    """Run the full loop: random initialization round, then `rounds` query
    rounds with reinitialize-and-retrain between them.

    Deterministic in `config.seed`. If the pool runs dry mid-run the result is
    truncated and flagged rather than an error.
    """
    config.validate()
    if bundle is None:
        bundle = load_bundle(config, base_dir)

    pool, manifest = build_open_set_pool(bundle.manifest, config.pool_spec)
    seeds = np.random.SeedSequence(config.seed)
    round_seeds = [int(s.generate_state(1)[0]) for s in seeds.spawn(config.rounds + 1)]
    test_x, test_y = _test_split(bundle, manifest)

    logs: list[RoundLog] = []
    early_exhaustion = False
    model: LinearSoftmaxProbe | None = None
    for rnd in range(config.rounds + 1):
        if not pool.unlabeled:
            early_exhaustion = True
            break
        tau: float | None = None
        fallback = 0
        if rnd == 0:
            result = strategies.random_select(pool, config.budget, round_seeds[0])
        else:
            result, tau = _select(config, pool, bundle, model, round_seeds[rnd])
            fallback = result.fallback_used
        pool = oracle_annotate(pool, manifest, list(result.selected))
        model = _train_round_probe(bundle, pool, config, round_seeds[rnd])
        accuracy = model.score(test_x, test_y) if len(test_y) else float("nan")
        logs.append(
            RoundLog(
                round=rnd,
                selected=result.selected,
                id_selected=sum(1 for i in result.selected if manifest.is_id(i)),
                precision=precision_metric(list(result.selected), manifest),
                test_accuracy=accuracy,
                tau=tau,
                fallback_used=fallback,
            )
        )

    accuracies = [log.test_accuracy for log in logs]
    aubc = aubc_metric(accuracies) if len(accuracies) >= 2 else float("nan")
    return ExperimentResult(
        logs=tuple(logs),
        aubc=aubc,
        final_accuracy=accuracies[-1] if accuracies else float("nan"),
        early_exhaustion=early_exhaustion,
        config=config,
    )


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return format(float(x), ".9g")


def write_rounds_csv(result: ExperimentResult, path: str | Path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            [
                "round",
                "selected_count",
                "id_selected",
                "precision",
                "test_accuracy",
                "tau",
                "fallback_used",
            ]
        )
        for log in result.logs:
            writer.writerow(
                [
                    log.round,
                    len(log.selected),
                    log.id_selected,
                    _fmt(log.precision),
                    _fmt(log.test_accuracy),
                    _fmt(log.tau),
                    log.fallback_used,
                ]
            )


def write_summary_json(result: ExperimentResult, path: str | Path) -> None:
    config = result.config
    doc = {
        "aubc": result.aubc,
        "final_accuracy": result.final_accuracy,
        "early_exhaustion": result.early_exhaustion,
        "rounds_completed": len(result.logs),
        "config": None,
    }
    if config is not None:
        doc["config"] = {
            "pool_spec": {
                "mismatch_ratio": config.pool_spec.mismatch_ratio,
                "ood_ratio": config.pool_spec.ood_ratio,
                "seed": config.pool_spec.seed,
                "use_manifest_id_classes": config.pool_spec.use_manifest_id_classes,
            },
            "budget": config.budget,
            "rounds": config.rounds,
            "strategy": config.strategy,
            "seed": config.seed,
            "tau_grid": list(config.tau_grid),
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

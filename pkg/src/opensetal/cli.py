"""Command-line front end.

Subcommands: synth, pool, tune-temp, score, run, sweep, report. Experiment
configuration is a strict JSON document (unknown keys rejected) with all
paths resolved relative to the config file.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import simulator
from .embstore import (
    DatasetManifest,
    PoolSpec,
    build_open_set_pool,
    oracle_annotate,
    write_embeddings,
)
from .errors import ConfigError, DataError, OpenSetALError
from .probe import ProbeConfig
from .purity import DEFAULT_TAU_GRID, assess_purity, class_prototypes, tune_temperature
from .simulator import ExperimentConfig, ExperimentPaths
from .strategies import STRATEGY_NAMES, random_select
from .synth import SynthSpec, generate_synthetic_split, prompts_to_matrix

logger = logging.getLogger(__name__)

_POOL_KEYS = {
    "mismatch_ratio": True,
    "ood_ratio": True,
    "seed": True,
    "use_manifest_id_classes": False,
}
_PROBE_KEYS = {
    "steps": False,
    "batch_size": False,
    "learning_rate": False,
    "weight_decay": False,
    "momentum": False,
    "seed": False,
}
_GRID_KEYS = {"min": True, "max": True, "steps": True}
_PATH_KEYS = {
    "embeddings": True,
    "manifest": True,
    "prompts": True,
    "test_embeddings": True,
    "test_manifest": True,
}
_TOP_KEYS = {
    "pool_spec": True,
    "budget": True,
    "rounds": True,
    "strategy": True,
    "probe": False,
    "tau_grid": False,
    "seed": True,
    "paths": True,
}


def _check_keys(doc: dict, schema: dict[str, bool], prefix: str = "") -> None:
    for key in doc:
        if key not in schema:
            raise ConfigError(f"unknown config key: {prefix}{key}")
    for key, required in schema.items():
        if required and key not in doc:
            raise ConfigError(f"missing config key: {prefix}{key}")


def load_config(config_path: str | Path) -> tuple[ExperimentConfig, Path]:
    """Parse and validate a config file; returns the config and its base dir."""
    path = Path(config_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    _check_keys(doc, _TOP_KEYS)
    _check_keys(doc["pool_spec"], _POOL_KEYS, "pool_spec.")
    _check_keys(doc.get("probe", {}), _PROBE_KEYS, "probe.")
    if "tau_grid" in doc:
        _check_keys(doc["tau_grid"], _GRID_KEYS, "tau_grid.")
    _check_keys(doc["paths"], _PATH_KEYS, "paths.")

    grid_doc = doc.get("tau_grid")
    tau_grid = (
        (grid_doc["min"], grid_doc["max"], int(grid_doc["steps"]))
        if grid_doc
        else DEFAULT_TAU_GRID
    )
    config = ExperimentConfig(
        pool_spec=PoolSpec(**doc["pool_spec"]),
        budget=int(doc["budget"]),
        rounds=int(doc["rounds"]),
        strategy=doc["strategy"],
        probe=ProbeConfig(**doc.get("probe", {})),
        tau_grid=tau_grid,
        seed=int(doc["seed"]),
        paths=ExperimentPaths(**doc["paths"]),
    )
    config.validate()
    return config, path.parent


def _apply_overrides(
    config: ExperimentConfig, seed: int | None, strategy: str | None
) -> ExperimentConfig:
    from dataclasses import replace

    if seed is not None:
        config = replace(config, seed=seed)
    if strategy is not None:
        config = replace(config, strategy=strategy)
        config.validate()
    return config


def _run_to_exit_code(func) -> int:
    try:
        func()
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        return 1
    except DataError as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    except OpenSetALError as e:
        click.echo(f"error: {e}", err=True)
        return 3
    except OSError as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    return 0


@click.group()
@click.option("--quiet", is_flag=True, help="Suppress progress logging.")
def main(quiet: bool):
    """Open-set active learning on precomputed embeddings."""
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--k-id", default=4, show_default=True)
@click.option("--k-ood", default=4, show_default=True)
@click.option("--dim", default=16, show_default=True)
@click.option("--per-class", default=250, show_default=True)
@click.option("--per-class-test", default=50, show_default=True)
@click.option("--separation", default=6.0, show_default=True)
@click.option("--noise-sigma", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out_dir, k_id, k_ood, dim, per_class, per_class_test, separation, noise_sigma, seed):
    """Generate a synthetic embedding dataset with train/test splits."""

    def _go():
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        spec = SynthSpec(k_id, k_ood, dim, per_class, separation, noise_sigma, seed)
        emb, manifest, prompts, test_emb, test_manifest = generate_synthetic_split(
            spec, per_class_test
        )
        write_embeddings(emb, out / "train.emb1")
        manifest.save(out / "train_manifest.json")
        write_embeddings(prompts_to_matrix(prompts), out / "prompts.emb1")
        write_embeddings(test_emb, out / "test.emb1")
        test_manifest.save(out / "test_manifest.json")
        click.echo(f"wrote {emb.shape[0]} train / {test_emb.shape[0]} test rows to {out}")

    sys.exit(_run_to_exit_code(_go))


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def pool(config_path, out_dir):
    """Build the open-set pool for a config and report its composition."""

    def _go():
        config, base = load_config(config_path)
        bundle = simulator.load_bundle(config, base)
        built, manifest = build_open_set_pool(bundle.manifest, config.pool_spec)
        n_ood = sum(1 for i in built.unlabeled if not manifest.is_id(i))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = {
            "id_class_indices": list(manifest.id_class_indices),
            "pool_size": len(built.unlabeled),
            "n_id": len(built.unlabeled) - n_ood,
            "n_ood": n_ood,
            "ood_fraction": n_ood / len(built.unlabeled) if built.unlabeled else 0.0,
        }
        (out / "pool.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        click.echo(json.dumps(doc))

    sys.exit(_run_to_exit_code(_go))


def _initial_labeled_pool(config: ExperimentConfig, bundle) -> tuple:
    """Round-0 random labeling, shared by tune-temp and score."""
    built, manifest = build_open_set_pool(bundle.manifest, config.pool_spec)
    seed0 = int(np.random.SeedSequence(config.seed).spawn(1)[0].generate_state(1)[0])
    result = random_select(built, config.budget, seed0)
    return oracle_annotate(built, manifest, list(result.selected)), manifest


@main.command("tune-temp")
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def tune_temp(config_path, out_dir):
    """Label an initial random batch, then grid-search the temperature."""

    def _go():
        config, base = load_config(config_path)
        bundle = simulator.load_bundle(config, base)
        labeled_pool, _ = _initial_labeled_pool(config, bundle)
        protos = class_prototypes(bundle.images, list(labeled_pool.labeled_id), labeled_pool.k)
        tau, acc = tune_temperature(
            bundle.images, bundle.prompts, protos, labeled_pool, config.tau_grid
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"tau": tau, "labeled_accuracy": acc}
        (out / "tau.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        click.echo(json.dumps(doc))

    sys.exit(_run_to_exit_code(_go))


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def score(config_path, out_dir):
    """Dump purity scores of the unlabeled pool after initial labeling."""

    def _go():
        config, base = load_config(config_path)
        bundle = simulator.load_bundle(config, base)
        labeled_pool, _ = _initial_labeled_pool(config, bundle)
        scores, tau = assess_purity(
            bundle.images, bundle.prompts, labeled_pool, config.tau_grid
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scores.csv", "w", newline="\n", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["index", "p_ood", "max_p_id", "indicator"])
            for pos, idx in enumerate(labeled_pool.unlabeled):
                writer.writerow(
                    [
                        idx,
                        format(scores.p_ood[pos], ".9g"),
                        format(scores.p_id[pos].max(), ".9g"),
                        int(scores.indicator[pos]),
                    ]
                )
        click.echo(f"tau={tau:.6g}, scored {len(labeled_pool.unlabeled)} samples")

    sys.exit(_run_to_exit_code(_go))


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option(
    "--strategy",
    type=click.Choice(STRATEGY_NAMES),
    default=None,
    help="Override the config strategy.",
)
def run(config_path, out_dir, seed, strategy):
    """Run one experiment and write rounds.csv + summary.json."""

    def _go():
        config, base = load_config(config_path)
        config = _apply_overrides(config, seed, strategy)
        result = simulator.run_experiment(config, base_dir=base)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        simulator.write_rounds_csv(result, out / "rounds.csv")
        simulator.write_summary_json(result, out / "summary.json")
        click.echo(
            f"aubc={result.aubc:.6g} final_accuracy={result.final_accuracy:.6g}"
        )

    sys.exit(_run_to_exit_code(_go))


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seeds", required=True, help="Comma-separated seed list, e.g. 0,1,2.")
@click.option(
    "--strategy",
    type=click.Choice(STRATEGY_NAMES),
    default=None,
    help="Override the config strategy.",
)
def sweep(config_path, out_dir, seeds, strategy):
    """Run one experiment per seed and aggregate per-round mean/std."""

    def _go():
        try:
            seed_list = [int(s) for s in seeds.split(",") if s.strip() != ""]
        except ValueError as e:
            raise ConfigError(f"bad --seeds value {seeds!r}") from e
        if not seed_list:
            raise ConfigError("need at least one seed")
        config, base = load_config(config_path)
        config = _apply_overrides(config, None, strategy)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        per_seed: list[simulator.ExperimentResult] = []
        for s in seed_list:
            seed_config = _apply_overrides(config, s, None)
            result = simulator.run_experiment(seed_config, base_dir=base)
            seed_dir = out / f"seed_{s}"
            seed_dir.mkdir(exist_ok=True)
            simulator.write_rounds_csv(result, seed_dir / "rounds.csv")
            simulator.write_summary_json(result, seed_dir / "summary.json")
            per_seed.append(result)

        n_rounds = min(len(r.logs) for r in per_seed)
        with open(out / "aggregate.csv", "w", newline="\n", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(
                [
                    "round",
                    "precision_mean",
                    "precision_std",
                    "accuracy_mean",
                    "accuracy_std",
                ]
            )
            for rnd in range(n_rounds):
                prec = np.array([r.logs[rnd].precision for r in per_seed])
                acc = np.array([r.logs[rnd].test_accuracy for r in per_seed])
                writer.writerow(
                    [
                        rnd,
                        format(prec.mean(), ".9g"),
                        format(prec.std(), ".9g"),
                        format(acc.mean(), ".9g"),
                        format(acc.std(), ".9g"),
                    ]
                )
        aubcs = np.array([r.aubc for r in per_seed])
        click.echo(f"seeds={len(seed_list)} mean_aubc={aubcs.mean():.6g}")

    sys.exit(_run_to_exit_code(_go))


@main.command()
@click.option("--out", "out_dir", type=click.Path(), required=True)
def report(out_dir):
    """Print a summary table for a run or sweep output directory."""

    def _go():
        out = Path(out_dir)
        summary = out / "summary.json"
        aggregate = out / "aggregate.csv"
        if summary.exists():
            doc = json.loads(summary.read_text(encoding="utf-8"))
            click.echo(
                f"aubc={doc['aubc']:.6g} final_accuracy={doc['final_accuracy']:.6g} "
                f"rounds={doc['rounds_completed']}"
            )
            rounds = out / "rounds.csv"
            if rounds.exists():
                click.echo(rounds.read_text(encoding="utf-8").rstrip())
        elif aggregate.exists():
            click.echo(aggregate.read_text(encoding="utf-8").rstrip())
        else:
            raise DataError(f"no summary.json or aggregate.csv under {out}")

    sys.exit(_run_to_exit_code(_go))


if __name__ == "__main__":
    main()

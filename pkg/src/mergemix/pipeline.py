"""End-to-end runs: train experts, map the surface, search, verify, persist.

Every artifact except the manifest is reproducible byte-for-byte from
(config, seed); timestamps live only in the manifest, which is written
last so a failed run never looks complete.
"""

from __future__ import annotations

import hashlib
import json
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .config import RunConfig, THEORY_REPORT_SCHEMA
from .consistency import rank_consistency
from .errors import ConfigError, MergeMixError
from .hierarchy import HierarchyContext, MixtureNode, flatten_ratios, \
    optimize_bottom_up, optimize_top_down
from .merging import merge
from .persist import (
    CHECKPOINT_FORMAT,
    dumps_json,
    file_digest,
    read_json,
    save_checkpoint,
    write_csv,
    write_json,
)
from .seeding import stable_seed
from .simplex import lattice_steps, simplex_lattice, uniform_weights
from .stats import (
    NormContext,
    cost_accounting,
    cost_entries_from_dicts,
    utility,
)
from .surface import (
    StageResult,
    SurfaceModel,
    run_search_stage,
    verify_optimum,
)
from .theory import (
    TaylorContext,
    discrepancy,
    horizon_scaling_check,
    relative_curvature,
    task_vector_cosines,
)
from .training import ExpertArtifact, TrainConfig, train_expert, train_on_mixture
from .worlds import World, raw_capability

REPORT_FORMAT = "mm-report-v1"
MANIFEST_FORMAT = "mm-manifest-v1"
THEORY_FORMAT = "mm-theory-v1"
SURFACE_FILE = "surface.model.json"
SAMPLES_FILE = "samples.csv"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"


def _world_block(cfg: RunConfig, world: World) -> dict:
    block = {"domains": list(world.names)}
    if "fixture" in cfg.world_spec:
        block["fixture"] = cfg.world_spec["fixture"]
    return block


def _write_expert_artifacts(run_dir: Path, world: World,
                            experts: list[ExpertArtifact]) -> dict[str, str]:
    digests = {}
    for artifact in experts:
        ckpt = run_dir / "experts" / f"{artifact.name}.ckpt"
        save_checkpoint(ckpt, artifact.final, world.model_descriptor())
        digests[artifact.name] = file_digest(ckpt)
        header = (["step"]
                  + [f"raw_{n}" for n in world.names]
                  + [f"norm_{n}" for n in world.names])
        columns = list(zip(*[p.raw_scores for p in artifact.trajectory]))
        contexts = [NormContext.from_samples(col) for col in columns]
        rows = []
        for point in artifact.trajectory:
            normed = [contexts[m].apply(s) for m, s in enumerate(point.raw_scores)]
            rows.append([point.step, *point.raw_scores, *normed])
        write_csv(run_dir / "experts" / f"{artifact.name}.trajectory.csv",
                  header, rows)
    return digests


def _write_samples(run_dir: Path, stage: StageResult, world: World) -> None:
    k = stage.design.configs.shape[1]
    header = ([f"alpha_{i + 1}" for i in range(k)]
              + [f"y_{i + 1}" for i in range(world.num_domains)]
              + ["digest"])
    rows = []
    for sample in stage.samples:
        rows.append([*sample.weights.tolist(), *sample.scores, sample.digest])
    write_csv(run_dir / SAMPLES_FILE, header, rows)


def _export_datasets(run_dir: Path, world: World) -> None:
    if not hasattr(world, "train"):
        return
    for k, name in enumerate(world.names):
        for split, data in (("train", world.train[k]), ("heldout", world.heldout[k])):
            header = ([f"x_{i + 1}" for i in range(data.inputs.shape[1])]
                      + [f"y_{i + 1}" for i in range(data.targets.shape[1])])
            rows = [list(x) + list(y) for x, y in zip(data.inputs, data.targets)]
            write_csv(run_dir / "datasets" / f"{name}.{split}.csv", header, rows)


def _scores_with_contexts(world: World, theta: np.ndarray,
                          contexts) -> list[float]:
    return [contexts[m].apply(raw_capability(world, m, theta))
            for m in range(world.num_domains)]


def _hierarchy_report(cfg: RunConfig, world: World, base: np.ndarray,
                      experts: list[ExpertArtifact],
                      tree: MixtureNode, stage: StageResult) -> dict:
    leaf_names, shares = flatten_ratios(tree)
    by_name = dict(zip(leaf_names, shares.tolist()))
    aligned = np.asarray([by_name[name] for name in world.names])
    expert_params = [e.final for e in experts]
    contexts = stage.contexts
    spec = cfg.utility_spec

    def actual_utility(weights):
        merged = merge(base, expert_params, weights)
        return utility(_scores_with_contexts(world, merged, contexts), spec)

    baselines = {"uniform": actual_utility(uniform_weights(world.num_domains))}
    for i, name in enumerate(world.names):
        corner = np.zeros(world.num_domains)
        corner[i] = 1.0
        baselines[f"corner_{name}"] = actual_utility(corner)

    return {
        "tree": tree.to_dict(),
        "leaf_order": leaf_names,
        "leaf_ratios": shares.tolist(),
        "ratios_by_domain": {n: by_name[n] for n in world.names},
        "actual_utility": actual_utility(aligned),
        "baseline_utilities": baselines,
    }


def recalibrate(cfg: RunConfig, world: World, midpoint: np.ndarray,
                alpha_old: np.ndarray, threads: int = 1) -> dict:
    """Re-run the whole expert/surface/search pipeline from a mid-training
    checkpoint and compare the fresh optimum with the original one.

    Uses the same derived seeds as the first pass, so recalibrating from
    the untouched base reproduces the original optimum exactly.
    """
    train_cfg = cfg.train_config(stable_seed(cfg.seed, "train"))
    experts = [train_expert(world, k, midpoint, train_cfg)
               for k in range(world.num_domains)]
    stage = run_search_stage(
        world, midpoint, experts,
        design_size=cfg.design_size, priors=cfg.priors,
        seed=stable_seed(cfg.seed, "design"),
        hyper=cfg.hyper, utility_spec=cfg.utility_spec,
        resolution=cfg.resolution, budget=cfg.budget, threads=threads,
    )
    alpha_new = stage.search.weights
    return {
        "alpha_old": alpha_old.tolist(),
        "alpha_new": alpha_new.tolist(),
        "max_weight_shift": float(np.max(np.abs(alpha_new - alpha_old))),
        "predicted_utility_new": stage.search.predicted_utility,
    }


def _continuation_curves(cfg: RunConfig, world: World, midpoint: np.ndarray,
                         alpha_old: np.ndarray, alpha_new: np.ndarray,
                         remaining_steps: int, contexts) -> list[dict]:
    spec = cfg.utility_spec
    curves = {}
    for label, weights, seed_label in (
        ("static", alpha_old, "continue-static"),
        ("dynamic", alpha_new, "continue-dynamic"),
    ):
        run_cfg = TrainConfig(
            learning_rate=float(cfg.train["learning_rate"]),
            steps=remaining_steps,
            batch_size=cfg.train.get("batch_size", "full"),
            checkpoint_interval=int(cfg.train.get("checkpoint_interval", 1)),
            seed=stable_seed(cfg.seed, seed_label),
        )
        artifact = train_on_mixture(world, weights, midpoint, run_cfg)
        curves[label] = {
            point.step: utility(
                [contexts[m].apply(s) for m, s in enumerate(point.raw_scores)],
                spec,
            )
            for point in artifact.trajectory
        }
    steps = sorted(curves["static"])
    return [
        {"step": step,
         "static_utility": curves["static"][step],
         "dynamic_utility": curves["dynamic"][step]}
        for step in steps
    ]


def run_pipeline(cfg: RunConfig, out_dir: str | Path, threads: int = 1) -> Path:
    """Execute the configured pipeline and return the run directory."""
    world = cfg.build_world()
    run_dir = Path(out_dir) / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    base = world.base_params()

    train_cfg = cfg.train_config(stable_seed(cfg.seed, "train"))
    experts = [train_expert(world, k, base, train_cfg)
               for k in range(world.num_domains)]
    expert_digests = _write_expert_artifacts(run_dir, world, experts)
    if cfg.export_datasets:
        _export_datasets(run_dir, world)

    report: dict = {
        "format": REPORT_FORMAT,
        "run": cfg.name,
        "mode": cfg.mode,
        "world": _world_block(cfg, world),
        "experts": expert_digests,
    }

    if cfg.mode in ("hierarchical-top-down", "hierarchical-bottom-up"):
        ctx = HierarchyContext(
            world=world, base=base, experts=experts,
            design_size=cfg.design_size, hyper=cfg.hyper,
            utility_spec=cfg.utility_spec, resolution=cfg.resolution,
            budget=cfg.budget, seed=cfg.seed, threads=threads,
        )
        optimize = (optimize_top_down if cfg.mode == "hierarchical-top-down"
                    else optimize_bottom_up)
        tree = optimize(cfg.build_tree(), ctx)
        logged = ctx.stage_log.get("root")
        if logged is None:
            raise MergeMixError("hierarchy optimization never ran a root search")
        root_stage = logged["stage"]
        _write_samples(run_dir, root_stage, world)
        write_json(run_dir / SURFACE_FILE, root_stage.model.to_dict())
        report["optimum"] = verify_optimum(world, base, logged["experts"],
                                           root_stage.model, root_stage.search)
        report["hierarchy"] = _hierarchy_report(cfg, world, base, experts,
                                                tree, root_stage)
        write_json(run_dir / "hierarchy.tree.json", tree.to_dict())
        leaf_names, shares = flatten_ratios(tree)
        write_csv(run_dir / "hierarchy.ratios.csv",
                  ["domain", "ratio"],
                  [[n, s] for n, s in zip(leaf_names, shares.tolist())])
        by_name = dict(zip(leaf_names, shares.tolist()))
        aligned = np.asarray([by_name[name] for name in world.names])
        save_checkpoint(
            run_dir / "merged.optimum.ckpt",
            merge(base, [e.final for e in experts], aligned),
            world.model_descriptor(),
            provenance={"weights": aligned.tolist(), "experts": expert_digests},
        )
    else:
        stage = run_search_stage(
            world, base, experts,
            design_size=cfg.design_size, priors=cfg.priors,
            seed=stable_seed(cfg.seed, "design"),
            hyper=cfg.hyper, utility_spec=cfg.utility_spec,
            resolution=cfg.resolution, budget=cfg.budget, threads=threads,
        )
        _write_samples(run_dir, stage, world)
        write_json(run_dir / SURFACE_FILE, stage.model.to_dict())
        report["optimum"] = verify_optimum(world, base, experts,
                                           stage.model, stage.search)
        alpha_star = stage.search.weights
        save_checkpoint(
            run_dir / "merged.optimum.ckpt",
            merge(base, [e.final for e in experts], alpha_star),
            world.model_descriptor(),
            provenance={
                "weights": alpha_star.tolist(),
                "experts": expert_digests,
            },
        )

        if cfg.mode == "dynamic-recalibrate":
            total = cfg.recalibrate_steps
            half = total // 2
            mid_cfg = TrainConfig(
                learning_rate=float(cfg.train["learning_rate"]),
                steps=half,
                batch_size=cfg.train.get("batch_size", "full"),
                checkpoint_interval=int(cfg.train.get("checkpoint_interval", 1)),
                seed=stable_seed(cfg.seed, "mixture-train"),
            )
            midpoint = train_on_mixture(world, alpha_star, base, mid_cfg).final
            recal = recalibrate(cfg, world, midpoint, alpha_star, threads)
            curve = _continuation_curves(
                cfg, world, midpoint, alpha_star,
                np.asarray(recal["alpha_new"]), total - half, stage.contexts)
            recal["total_steps"] = total
            recal["midpoint_step"] = half
            recal["continuation"] = curve
            report["recalibration"] = recal
            write_csv(run_dir / "recalibration.curve.csv",
                      ["step", "static_utility", "dynamic_utility"],
                      [[r["step"], r["static_utility"], r["dynamic_utility"]]
                       for r in curve])

    write_json(run_dir / REPORT_FILE, report)
    _write_manifest(cfg, run_dir)
    return run_dir


def _write_manifest(cfg: RunConfig, run_dir: Path) -> None:
    artifacts = {}
    for path in sorted(run_dir.rglob("*")):
        if path.is_file() and path.name != MANIFEST_FILE:
            artifacts[str(path.relative_to(run_dir))] = file_digest(path)
    manifest = {
        "format": MANIFEST_FORMAT,
        "run": cfg.name,
        "created_unix": time.time(),
        "config_digest": _config_digest(cfg),
        "artifacts": artifacts,
        "format_versions": {
            "checkpoint": CHECKPOINT_FORMAT,
            "surface": "mm-surface-v1",
            "report": REPORT_FORMAT,
            "manifest": MANIFEST_FORMAT,
        },
    }
    write_json(run_dir / MANIFEST_FILE, manifest)


def _config_digest(cfg: RunConfig) -> str:
    payload = dumps_json({
        "name": cfg.name, "seed": cfg.seed, "mode": cfg.mode,
        "world": cfg.world_spec, "train": cfg.train,
        "design_size": cfg.design_size, "priors": [list(p) for p in cfg.priors],
        "surface": cfg.hyper.to_dict(), "utility": cfg.utility_spec.to_dict(),
        "resolution": cfg.resolution, "budget": cfg.budget,
        "hierarchy": cfg.hierarchy,
        "recalibrate_steps": cfg.recalibrate_steps,
    })
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Theory runner
# ---------------------------------------------------------------------------

def run_theory(cfg: RunConfig, out_dir: str | Path, threads: int = 1) -> Path:
    """Scaling check, discrepancy sweep, curvature and cosine matrices."""
    world = cfg.build_world()
    run_dir = Path(out_dir) / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    base = world.base_params()
    names = world.names
    k = world.num_domains

    lr = float(cfg.theory.get("learning_rate", cfg.train["learning_rate"]))
    steps = int(cfg.theory.get("steps", max(1, int(cfg.train["steps"]))))
    weights = np.asarray(cfg.theory.get("weights", uniform_weights(k)))
    sweep_res = float(cfg.theory.get("sweep_resolution", 0.1))

    scaling = horizon_scaling_check(world, weights, lr, steps, base)

    train_cfg = cfg.train_config(stable_seed(cfg.seed, "train"))
    experts = [train_expert(world, i, base, train_cfg) for i in range(k)]
    expert_params = [e.final for e in experts]

    curvature = relative_curvature(world, base)
    cosines = task_vector_cosines(experts, base)

    horizon = lr * steps
    ctx = TaylorContext.from_world(world, base, horizon)
    grid = simplex_lattice(k, lattice_steps(sweep_res))
    sweep_rows = []
    max_delta = 0.0
    max_residual = 0.0
    for lam in grid:
        rep = discrepancy(ctx, lam)
        mixed = train_on_mixture(world, lam, base, train_cfg).final
        merged = merge(base, expert_params, lam)
        rep = rep.with_observation(mixed - merged)
        delta_norm = float(np.linalg.norm(rep.delta))
        max_delta = max(max_delta, delta_norm)
        max_residual = max(max_residual, rep.residual_norm)
        sweep_rows.append([
            *lam.tolist(),
            delta_norm,
            float(np.linalg.norm(rep.cross_interference)),
            float(np.linalg.norm(rep.self_scaling)),
            float(np.linalg.norm(rep.observed)),
            rep.residual_norm,
        ])

    write_csv(run_dir / "delta_sweep.csv",
              [f"lambda_{i + 1}" for i in range(k)]
              + ["delta_norm", "cross_norm", "self_norm",
                 "observed_norm", "residual_norm"],
              sweep_rows)
    write_csv(run_dir / "curvature_matrix.csv",
              ["domain", *names, "diagonally_dominant"],
              [[names[i], *curvature.values[i].tolist(),
                curvature.row_dominant[i]] for i in range(k)])
    write_csv(run_dir / "task_vector_cosine.csv",
              ["domain", *names],
              [[names[i], *cosines[i].tolist()] for i in range(k)])

    report = {
        "format": THEORY_FORMAT,
        "world": _world_block(cfg, world),
        "scaling": scaling,
        "curvature": {
            "values": curvature.values.tolist(),
            "row_dominant": list(curvature.row_dominant),
        },
        "task_vector_cosine": cosines.tolist(),
        "sweep": {
            "resolution": sweep_res,
            "rows": len(sweep_rows),
            "max_delta_norm": max_delta,
            "max_residual_norm": max_residual,
        },
    }
    jsonschema.validate(report, THEORY_REPORT_SCHEMA)
    write_json(run_dir / "theory_report.json", report)
    return run_dir


# ---------------------------------------------------------------------------
# Consistency and cost runners
# ---------------------------------------------------------------------------

def run_consistency(cfg: RunConfig, out_dir: str | Path,
                    threads: int = 1) -> tuple[Path, float]:
    if not cfg.consistency_ratios:
        raise ConfigError("consistency requires a non-empty 'consistency.ratios' list")
    world = cfg.build_world()
    run_dir = Path(out_dir) / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    base = world.base_params()
    train_cfg = cfg.train_config(stable_seed(cfg.seed, "train"))
    experts = [train_expert(world, k, base, train_cfg)
               for k in range(world.num_domains)]
    result = rank_consistency(world, base, experts,
                              [np.asarray(r) for r in cfg.consistency_ratios],
                              train_cfg, cfg.utility_spec, threads)
    k = world.num_domains
    header = ([f"lambda_{i + 1}" for i in range(k)]
              + ["merged_score", "trained_score", "merged_rank", "trained_rank"])
    rows = [[row[f"lambda_{i + 1}"] for i in range(k)]
            + [row["merged_score"], row["trained_score"],
               row["merged_rank"], row["trained_rank"]]
            for row in result.rows]
    write_csv(run_dir / "rank_table.csv", header, rows)
    write_json(run_dir / "consistency_report.json", {
        "format": "mm-consistency-v1",
        "world": _world_block(cfg, world),
        **result.to_dict(),
    })
    return run_dir, result.report.rho


def run_cost(entries_path: str | Path | None, out_dir: str | Path) -> tuple[Path, dict]:
    if entries_path is None:
        data = json.loads(
            resources.files("mergemix.data")
            .joinpath("reference_costs.json").read_text("utf-8")
        )
    else:
        data = read_json(entries_path)
    entries = cost_entries_from_dicts(data["rows"])
    model = cost_accounting(entries)
    report = model.to_dict()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "cost_report.json"
    write_json(path, report)
    return path, report


# ---------------------------------------------------------------------------
# Heatmap export
# ---------------------------------------------------------------------------

def export_heatmap(surface_path: str | Path, capability: str,
                   resolution: float, out_path: str | Path,
                   top_percent: float | None = None) -> Path:
    """Dump (weights, predicted value) over the simplex lattice as CSV."""
    model = SurfaceModel.from_dict(read_json(surface_path))
    k = model.input_dim
    grid = simplex_lattice(k, lattice_steps(resolution))
    predictions = model.predict_batch(grid)

    if capability == "utility":
        values = np.asarray([utility(row, model.utility_spec)
                             for row in predictions])
    else:
        if capability.isdigit():
            index = int(capability)
        elif capability in model.capabilities:
            index = model.capabilities.index(capability)
        else:
            raise MergeMixError(
                f"unknown capability {capability!r}; "
                f"use an index, a name from {model.capabilities}, or 'utility'"
            )
        if not 0 <= index < model.num_capabilities:
            raise MergeMixError(f"capability index {index} out of range")
        values = predictions[:, index]

    keep = np.arange(grid.shape[0])
    if top_percent is not None:
        if not 0 < top_percent <= 100:
            raise MergeMixError("top percentile must be in (0, 100]")
        n_keep = int(np.floor(grid.shape[0] * top_percent / 100.0))
        n_keep = max(1, n_keep)
        order = np.argsort(-values, kind="stable")
        keep = np.sort(order[:n_keep])

    header = [f"alpha_{i + 1}" for i in range(k)] + ["predicted"]
    rows = [[*grid[i].tolist(), float(values[i])] for i in keep]
    return write_csv(out_path, header, rows)

"""End-to-end desk-scale runs: train, checkpoint, attribute, analyze, dump."""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..drift import DriftCurve, RspResult, run_pipeline
from ..errors import ConfigInvalid, WindowTooLarge
from ..metrics import DEFAULT_EPSILON, NormalizedAttribution, SimilarityKind, normalize
from ..shortcut import SpurConfig, SpurMassCurve, spur_mass_curve
from .. import store
from .config import POSITIVE_LABEL, SPUR_NEG_TOKEN, SPUR_POS_TOKEN, SyntheticTaskConfig
from .corpus import Example, generate_corpus
from .model import Checkpoint, SgdMomentum, TinyClassifier, grad_x_input_attribution, train_epoch


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 5
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    embedding_dim: int = 16
    init_scale: float = 0.3
    pooling: str = "mean"


def clean_task_config(seed: int = 0, **overrides) -> SyntheticTaskConfig:
    """Separable synthetic task with no injected shortcut."""
    return SyntheticTaskConfig(seed=seed, **overrides)


def shortcut_task_config(
    seed: int = 0, injection_prob: float = 0.8, **overrides
) -> SyntheticTaskConfig:
    """Same task with a label-correlated token prepended to training examples."""
    spur = SpurConfig(
        pos_token=SPUR_POS_TOKEN, neg_token=SPUR_NEG_TOKEN, injection_prob=injection_prob
    )
    return SyntheticTaskConfig(seed=seed, spur=spur, **overrides)


@dataclass
class SeedRun:
    """Everything produced by one seeded run."""

    seed: int
    run_id: str
    drift: DriftCurve
    rsp: RspResult
    spur: SpurMassCurve | None
    accuracy: tuple[float, ...]
    train_loss: tuple[float, ...]
    bundle: store.ReportBundle


@dataclass
class ExperimentResult:
    runs: list[SeedRun]

    def seeds(self) -> list[int]:
        return [r.seed for r in self.runs]

    def summary_stats(self) -> dict:
        """Across-seed mean and std of RSP epoch, accuracy at RSP, peak accuracy."""

        def agg(values: list[float]) -> dict:
            if not values:
                return {"mean": None, "std": None, "n": 0}
            arr = np.asarray(values, dtype=np.float64)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            return {"mean": float(arr.mean()), "std": std, "n": int(arr.size)}

        stabilized = [r for r in self.runs if r.rsp.stabilized]
        return {
            "seeds": self.seeds(),
            "not_stabilized": [r.seed for r in self.runs if not r.rsp.stabilized],
            "rsp_epoch": agg([float(r.rsp.rsp_epoch) for r in stabilized]),
            "acc_at_rsp": agg(
                [r.bundle.summary.acc_at_rsp for r in stabilized if r.bundle.summary.acc_at_rsp is not None]
            ),
            "peak_accuracy": agg(
                [r.bundle.summary.peak_accuracy for r in self.runs if r.bundle.summary.peak_accuracy is not None]
            ),
        }

    def format_summary(self) -> str:
        def cell(value, digits=4):
            return "-" if value is None else f"{value:.{digits}g}"

        lines = ["run            RSP  acc@RSP  peak_acc"]
        for r in self.runs:
            s = r.bundle.summary
            rsp = str(s.rsp_epoch) if s.rsp_epoch is not None else "n/a"
            lines.append(f"{r.run_id:<14s} {rsp:>3s}  {cell(s.acc_at_rsp):>7s}  {cell(s.peak_accuracy):>8s}")
        stats = self.summary_stats()
        mean_std = []
        for key in ("rsp_epoch", "acc_at_rsp", "peak_accuracy"):
            entry = stats[key]
            if entry["mean"] is None:
                mean_std.append("-")
            else:
                mean_std.append(f"{entry['mean']:.4g}+/-{entry['std']:.2g}")
        lines.append(f"{'mean+/-std':<14s} {mean_std[0]:>3s}  {mean_std[1]:>7s}  {mean_std[2]:>8s}")
        if stats["not_stabilized"]:
            lines.append(f"not stabilized: seeds {stats['not_stabilized']}")
        return "\n".join(lines) + "\n"


def _attribute_set(
    model: TinyClassifier, examples: tuple[Example, ...], epsilon: float
) -> tuple[dict[str, NormalizedAttribution], list[tuple[str, tuple]]]:
    normalized = {}
    raw_rows = []
    for example in examples:
        raw = grad_x_input_attribution(model, example)
        normalized[example.example_id] = normalize(raw, epsilon)
        raw_rows.append((example.example_id, raw.values))
    return normalized, raw_rows


def run_seed(
    task: SyntheticTaskConfig,
    seed: int,
    *,
    epochs: int = 5,
    window: int = 2,
    kind: SimilarityKind = SimilarityKind.SPEARMAN,
    train: TrainSettings = TrainSettings(),
    epsilon: float = DEFAULT_EPSILON,
    median_variant: str = "interpolated",
    run_prefix: str = "run",
    out_dir: Path | str | None = None,
) -> SeedRun:
    """Train one seeded run and analyze it; optionally dump records/manifest/report."""
    if epochs < window + 1:
        raise WindowTooLarge(f"need at least window+1={window + 1} epochs, got {epochs}")
    config = dataclasses.replace(task, seed=seed)
    run_id = f"{run_prefix}-s{seed}"
    corpus = generate_corpus(config)

    model = TinyClassifier.initialize(
        config.vocab_size,
        dim=train.embedding_dim,
        pooling=train.pooling,
        scale=train.init_scale,
        rng=np.random.default_rng([seed, 1]),
    )
    optimizer = SgdMomentum(learning_rate=train.learning_rate, momentum=train.momentum)
    shuffle_rng = np.random.default_rng([seed, 2])

    probe_attr: dict[int, dict[str, NormalizedAttribution]] = {}
    spur_attr: dict[int, dict[str, NormalizedAttribution]] = {}
    checkpoints: list[Checkpoint] = []
    records: list[store.AttributionRecord] = []
    for t in range(1, epochs + 1):
        checkpoint = train_epoch(
            model,
            corpus.train,
            optimizer,
            epoch=t,
            rng=shuffle_rng,
            batch_size=train.batch_size,
            val=corpus.val,
        )
        checkpoints.append(checkpoint)
        probe_attr[t], probe_raw = _attribute_set(model, corpus.probe, epsilon)
        rows = [("probe", corpus.probe, probe_raw)]
        if corpus.spur_probe:
            spur_attr[t], spur_raw = _attribute_set(model, corpus.spur_probe, epsilon)
            rows.append(("spur_probe", corpus.spur_probe, spur_raw))
        if out_dir is not None:
            label_of = {e.example_id: e.label for split in rows for e in split[1]}
            tokens_of = {e.example_id: e.tokens for split in rows for e in split[1]}
            for split, _, raw_rows in rows:
                for example_id, values in raw_rows:
                    records.append(
                        store.AttributionRecord(
                            run_id=run_id,
                            epoch=t,
                            example_id=example_id,
                            split=split,
                            label=label_of[example_id],
                            tokens=tokens_of[example_id],
                            attributions=values,
                        )
                    )

    curve, rsp = run_pipeline(
        probe_attr,
        kind,
        window,
        labels=corpus.labels_of(corpus.probe),
        run_id=run_id,
        median_variant=median_variant,
    )
    spur_curve = None
    if corpus.spur_probe:
        spur_curve = spur_mass_curve(
            spur_attr, config.spur, corpus.labels_of(corpus.spur_probe), POSITIVE_LABEL
        )
    accuracy = tuple(c.val_accuracy for c in checkpoints)
    bundle = store.build_bundle(run_id, curve, rsp, spur_curve, accuracy)

    if out_dir is not None:
        run_dir = Path(out_dir) / run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        store.write_records(records, run_dir / "records.ndjson")
        spur_snapshot = None
        if config.spur is not None:
            spur_snapshot = {
                "pos_token": config.spur.pos_token,
                "neg_token": config.spur.neg_token,
                "injection_prob": config.spur.injection_prob,
                "position": config.spur.position,
                "positive_label": POSITIVE_LABEL,
            }
        manifest = store.RunManifest(
            run_id=run_id,
            epochs=epochs,
            seed=seed,
            probe_ids=tuple(e.example_id for e in corpus.probe),
            spur_probe_ids=tuple(e.example_id for e in corpus.spur_probe),
            similarity=SimilarityKind(kind).value,
            window=window,
            epsilon=epsilon,
            median_variant=median_variant,
            task_config=config.snapshot(),
            spur_config=spur_snapshot,
            val_accuracy=accuracy,
        )
        store.write_manifest(manifest, run_dir / "manifest.json")
        store.write_report_bundle(bundle, run_dir)
        ckpt_dir = run_dir / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        for checkpoint in checkpoints:
            checkpoint.save(ckpt_dir / f"epoch_{checkpoint.epoch}.npz")

    return SeedRun(
        seed=seed,
        run_id=run_id,
        drift=curve,
        rsp=rsp,
        spur=spur_curve,
        accuracy=accuracy,
        train_loss=tuple(c.train_loss for c in checkpoints),
        bundle=bundle,
    )


def _run_seed_job(kwargs: dict) -> SeedRun:
    return run_seed(**kwargs)


def run_experiment(
    task: SyntheticTaskConfig,
    epochs: int,
    seeds: list[int],
    window: int = 2,
    kind: SimilarityKind = SimilarityKind.SPEARMAN,
    *,
    train: TrainSettings = TrainSettings(),
    epsilon: float = DEFAULT_EPSILON,
    median_variant: str = "interpolated",
    run_prefix: str = "run",
    out_dir: Path | str | None = None,
    max_workers: int = 1,
) -> ExperimentResult:
    """Run every seed (optionally as parallel worker jobs) and collect summaries."""
    if not seeds:
        raise ConfigInvalid("seeds must not be empty")
    jobs = [
        dict(
            task=task,
            seed=seed,
            epochs=epochs,
            window=window,
            kind=kind,
            train=train,
            epsilon=epsilon,
            median_variant=median_variant,
            run_prefix=run_prefix,
            out_dir=out_dir,
        )
        for seed in seeds
    ]
    if max_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(max_workers, len(jobs))) as pool:
            runs = list(pool.map(_run_seed_job, jobs))
    else:
        runs = [_run_seed_job(job) for job in jobs]
    result = ExperimentResult(runs=runs)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(result.format_summary(), encoding="utf-8")
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(result.summary_stats(), fh, indent=2)
            fh.write("\n")
    return result

"""Supervised translation finetuning over an offline feature store.

Each training epoch reads one stored feature variant per clip (cycling
through augmented epochs when the store holds several), trains with
label-smoothed cross-entropy, and beam-decodes the validation split. The
checkpoint with the highest validation BLEU-4 is kept and finally scored
on the test split.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..data.manifest import DatasetManifest
from ..features.store import FeatureStore
from ..mae.schedule import PretrainSchedule, lr_at
from ..metrics import EvalReport, corpus_bleu, evaluate_corpus
from ..state import load_checkpoint, save_checkpoint
from .decoding import beam_search
from .model import TranslationConfig, TranslationModel, label_smoothed_ce
from .tokenizer import BOS_ID, EOS_ID, PAD_ID, TokenizerModel


@dataclass(frozen=True)
class FinetuneSchedule:
    epochs: int = 200
    warmup_epochs: float = 10
    peak_lr: float = 1e-2
    min_lr: float = 1e-4
    weight_decay: float = 0.1
    betas: tuple[float, float] = (0.9, 0.95)
    batch_size: int = 32
    grad_clip: float = 1.0
    eval_every_steps: Optional[int] = None  # None: evaluate once per epoch
    patience: int = 10  # evaluations without improvement before stopping
    beams: int = 5
    max_decode_len: int = 128


def small_schedule(**overrides) -> FinetuneSchedule:
    """From-scratch recipe for small curated datasets."""
    return FinetuneSchedule(**overrides)


def large_schedule(**overrides) -> FinetuneSchedule:
    """Higher-capacity recipe: shorter warmup, lower peak, large batches."""
    params = dict(
        epochs=100,
        warmup_epochs=2,
        peak_lr=5e-4,
        min_lr=1e-7,
        batch_size=256,
        eval_every_steps=500,
    )
    params.update(overrides)
    return FinetuneSchedule(**params)


def select_best(scores: list[float]) -> int:
    """Index of the highest score; earliest wins ties."""
    if not scores:
        raise ValueError("no scores to select from")
    best = max(scores)
    return scores.index(best)


@dataclass
class FinetuneResult:
    best_checkpoint: Path
    best_val_bleu: float
    best_eval_index: int
    val_history: list[float]
    test_report: EvalReport
    metrics_path: Path


def _encode_target(tokenizer: TokenizerModel, caption: str, max_len: int) -> list[int]:
    ids = tokenizer.encode(caption)[: max_len - 1]
    return ids


def _batch_tensors(examples: list[dict]) -> dict:
    max_s = max(e["features"].shape[0] for e in examples)
    max_t = max(len(e["target"]) for e in examples) + 1  # bos shift
    d = examples[0]["features"].shape[1]
    feats = torch.zeros(len(examples), max_s, d)
    src_valid = torch.zeros(len(examples), max_s, dtype=torch.bool)
    target_in = torch.full((len(examples), max_t), PAD_ID, dtype=torch.long)
    target_out = torch.full((len(examples), max_t), PAD_ID, dtype=torch.long)
    for i, e in enumerate(examples):
        s = e["features"].shape[0]
        feats[i, :s] = torch.from_numpy(e["features"])
        src_valid[i, :s] = True
        ids = e["target"]
        target_in[i, 0] = BOS_ID
        target_in[i, 1 : 1 + len(ids)] = torch.tensor(ids, dtype=torch.long)
        target_out[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        target_out[i, len(ids)] = EOS_ID
    return {
        "features": feats,
        "src_valid": src_valid,
        "target_in": target_in,
        "target_out": target_out,
    }


def decode_split(
    model: TranslationModel,
    store: FeatureStore,
    records,
    schedule: FinetuneSchedule,
) -> tuple[list[str], list[str]]:
    """Beam-decode a split's epoch-0 features; returns (hypotheses, references)."""
    tokenizer = model._tokenizer  # attached by finetune_slt / load path
    hyps, refs = [], []
    for record in records:
        seq = store.read(record.clip_id, epoch=0)
        features = torch.from_numpy(seq.features)
        hyp = beam_search(
            model, features, beams=schedule.beams, max_len=schedule.max_decode_len
        )
        hyps.append(tokenizer.decode(hyp.tokens))
        refs.append(record.caption)
    return hyps, refs


def finetune_slt(
    store_path: Path,
    manifest: DatasetManifest,
    tokenizer: TokenizerModel,
    model_cfg: TranslationConfig,
    schedule: FinetuneSchedule,
    out_dir: Path,
    seed: int = 0,
) -> FinetuneResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = FeatureStore(store_path)

    missing = [r.clip_id for r in manifest.records if r.clip_id not in store]
    if missing:
        raise ValueError(f"feature store is missing {len(missing)} clips: {missing[:10]}")

    train_records = manifest.subset("train")
    val_records = manifest.subset("validation")
    test_records = manifest.subset("test")
    if not train_records or not val_records or not test_records:
        raise ValueError("manifest must provide non-empty train/validation/test splits")

    torch.manual_seed(seed)
    model = TranslationModel(model_cfg)
    model._tokenizer = tokenizer
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=schedule.peak_lr,
        betas=schedule.betas,
        weight_decay=schedule.weight_decay,
    )
    lr_shape = PretrainSchedule(
        effective_epochs=schedule.epochs,
        warmup_epochs=schedule.warmup_epochs,
        peak_lr=schedule.peak_lr,
        min_lr=schedule.min_lr,
        weight_decay=schedule.weight_decay,
        betas=schedule.betas,
        effective_batch=schedule.batch_size,
        repeated_sampling=1,
    )

    targets = {
        r.clip_id: _encode_target(tokenizer, r.caption, model_cfg.max_target_len)
        for r in manifest.records
    }
    epochs_available = {r.clip_id: store.epochs(r.clip_id) for r in train_records}

    steps_per_epoch = max(1, math.ceil(len(train_records) / schedule.batch_size))
    total_steps = schedule.epochs * steps_per_epoch
    metrics_path = out_dir / "metrics.jsonl"
    metrics_fh = open(metrics_path, "w")
    best_path = out_dir / "checkpoint_best.pt"

    val_history: list[float] = []
    best_bleu = -1.0
    evals_since_best = 0
    step = 0
    stop = False

    def evaluate() -> float:
        hyps, refs = decode_split(model, store, val_records, schedule)
        return corpus_bleu(hyps, refs, max_n=4)

    def run_eval() -> None:
        nonlocal best_bleu, evals_since_best, stop
        bleu = evaluate()
        val_history.append(bleu)
        metrics_fh.write(
            json.dumps(
                {"eval": len(val_history) - 1, "step": step, "val_bleu": bleu}, sort_keys=True
            )
            + "\n"
        )
        metrics_fh.flush()
        if bleu > best_bleu:
            best_bleu = bleu
            evals_since_best = 0
            save_checkpoint(
                best_path,
                step=step,
                models={"translator": model.state_dict()},
                optimizers={},
                config_echo={"model": asdict(model_cfg), "schedule": asdict(schedule)},
                extra={"val_bleu": bleu, "eval_index": len(val_history) - 1},
            )
        else:
            evals_since_best += 1
            if evals_since_best >= schedule.patience:
                stop = True

    for epoch in range(schedule.epochs):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 21, epoch]))
        order = rng.permutation(len(train_records))
        model.train()
        for start in range(0, len(order), schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            examples = []
            for i in idx:
                record = train_records[i]
                variants = epochs_available[record.clip_id]
                variant = variants[epoch % len(variants)]
                seq = store.read(record.clip_id, epoch=variant)
                examples.append(
                    {"features": seq.features, "target": targets[record.clip_id]}
                )
            batch = _batch_tensors(examples)
            lr = lr_at(min(step, total_steps), lr_shape, steps_per_epoch=steps_per_epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad(set_to_none=True)
            logits = model(batch["features"], batch["target_in"], batch["src_valid"])
            loss = label_smoothed_ce(
                logits, batch["target_out"], smoothing=model_cfg.label_smoothing
            )
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite loss at step {step}")
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), schedule.grad_clip)
            optimizer.step()
            step += 1
            metrics_fh.write(
                json.dumps(
                    {
                        "step": step,
                        "loss": float(loss.detach()),
                        "lr": lr,
                        "epoch": round(step / steps_per_epoch, 6),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            if schedule.eval_every_steps and step % schedule.eval_every_steps == 0:
                run_eval()
                model.train()
                if stop:
                    break
        if not schedule.eval_every_steps and not stop:
            run_eval()
        if stop:
            break
    metrics_fh.flush()

    # final report on the test split with the selected checkpoint
    payload = load_checkpoint(best_path)
    model.load_state_dict(payload["models"]["translator"])
    hyps, refs = decode_split(model, store, test_records, schedule)
    report = evaluate_corpus(hyps, refs)
    report.save(out_dir / "test_report.json")
    (out_dir / "test_hypotheses.jsonl").write_text(
        "\n".join(
            json.dumps({"clip_id": r.clip_id, "hypothesis": h, "reference": ref}, sort_keys=True)
            for r, h, ref in zip(test_records, hyps, refs)
        )
        + "\n"
    )
    metrics_fh.write(json.dumps({"test_bleu": report.bleu}, sort_keys=True) + "\n")
    metrics_fh.close()
    store.close()

    return FinetuneResult(
        best_checkpoint=best_path,
        best_val_bleu=best_bleu,
        best_eval_index=select_best(val_history),
        val_history=val_history,
        test_report=report,
        metrics_path=metrics_path,
    )


def load_translator(path: Path, tokenizer: TokenizerModel) -> TranslationModel:
    payload = load_checkpoint(path)
    cfg = TranslationConfig(**payload["config"]["model"])
    model = TranslationModel(cfg)
    model.load_state_dict(payload["models"]["translator"])
    model.eval()
    model._tokenizer = tokenizer
    return model


def translate_ids(
    model: TranslationModel,
    tokenizer: TokenizerModel,
    store: FeatureStore,
    clip_ids: list[str],
    beams: int = 5,
    max_len: int = 128,
) -> list[tuple[str, str]]:
    """Beam-decode the given clips; returns (clip_id, hypothesis) pairs."""
    out = []
    for clip_id in clip_ids:
        seq = store.read(clip_id, epoch=0)
        hyp = beam_search(model, torch.from_numpy(seq.features), beams=beams, max_len=max_len)
        out.append((clip_id, tokenizer.decode(hyp.tokens)))
    return out

"""Teacher-forced training: losses, Adam, clipping, schedule, early stop."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, NumericError
from .exclusion import ExclusionWindow, exclusive_loss, window_push
from .model import KeyphraseModel
from .nn import ParamSet
from .text import Document, TargetProgram

Sample = tuple[Document, TargetProgram]

RELATIVE_IMPROVEMENT = 1e-4  # "stops decreasing" threshold


@dataclass
class TrainConfig:
    batch_size: int = 10
    max_grad_norm: float = 1.0
    lr: float = 0.001
    lr_decay_factor: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seeds: tuple[int, ...] = (1, 2, 3)
    epochs_cap: int = 100
    patience: int = 3
    exclusion_mode: str = "none"      # none | soft (training-side)
    exclusion_window: int | None = 4  # K for the soft loss; None = all
    embed_dim: int = 100
    hidden_dim: int = 300

    def __post_init__(self):
        for name in ("batch_size", "epochs_cap", "patience"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_grad_norm", "lr", "lr_decay_factor"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.exclusion_mode not in ("none", "soft"):
            raise ConfigError(
                f"training exclusion mode must be none or soft, "
                f"got {self.exclusion_mode!r}"
            )


def _sample_losses(
    model: KeyphraseModel, doc: Document, program: TargetProgram,
    soft_window: int | None, use_soft: bool,
) -> tuple[Tensor, Tensor | None]:
    """Generation NLL (summed over all target tokens) and, in soft mode,
    the exclusive penalty for one teacher-forced sample."""
    records = model.teacher_forced(doc, program)
    nll_terms = [ad.nll(r.dist.merged, r.target_merged_id) for r in records]
    generation = ad.add_n(nll_terms) if len(nll_terms) > 1 else nll_terms[0]
    if not use_soft:
        return generation, None
    first_ids = [p.copy_word_ids[0] for p in program.phrases]
    window = ExclusionWindow(capacity=soft_window)
    windows = []
    for fid in first_ids:
        windows.append(window)
        window = window_push(window, fid)
    terms = []
    for rec in records:
        if rec.word_index != 1 or rec.phrase_index > len(first_ids):
            continue
        i = rec.phrase_index
        term = exclusive_loss(rec.dist, first_ids[i - 1], windows[i - 1], 1)
        if term.requires_grad or float(term.data) != 0.0:
            terms.append(term)
    if not terms:
        return generation, None
    exclusive = ad.add_n(terms) if len(terms) > 1 else terms[0]
    return generation, exclusive


def generation_loss(model: KeyphraseModel, batch: list[Sample]) -> Tensor:
    """Batch-mean of per-sample summed NLL under teacher forcing."""
    totals = []
    for doc, program in batch:
        gen, _ = _sample_losses(model, doc, program, None, use_soft=False)
        totals.append(gen)
    summed = ad.add_n(totals) if len(totals) > 1 else totals[0]
    return ad.scale(summed, 1.0 / len(batch))


def joint_loss(
    model: KeyphraseModel, batch: list[Sample], window_capacity: int | None,
) -> Tensor:
    """Generation plus exclusive loss (unweighted sum), batch-mean.

    A window capacity of 0 keeps the graph identical to generation_loss.
    """
    if window_capacity == 0:
        return generation_loss(model, batch)
    totals = []
    for doc, program in batch:
        gen, excl = _sample_losses(
            model, doc, program, window_capacity, use_soft=True
        )
        totals.append(ad.add(gen, excl) if excl is not None else gen)
    summed = ad.add_n(totals) if len(totals) > 1 else totals[0]
    return ad.scale(summed, 1.0 / len(batch))


def batch_loss_parts(
    model: KeyphraseModel, batch: list[Sample], config: TrainConfig,
) -> tuple[Tensor, float, float]:
    """(total loss tensor, generation value, exclusive value) for logging."""
    use_soft = config.exclusion_mode == "soft"
    gens, excls = [], []
    for doc, program in batch:
        gen, excl = _sample_losses(
            model, doc, program, config.exclusion_window, use_soft
        )
        gens.append(gen)
        if excl is not None:
            excls.append(excl)
    gen_sum = ad.add_n(gens) if len(gens) > 1 else gens[0]
    parts = [gen_sum] + excls
    total = ad.add_n(parts) if len(parts) > 1 else parts[0]
    scale = 1.0 / len(batch)
    gen_value = float(gen_sum.data) * scale
    excl_value = sum(float(e.data) for e in excls) * scale
    return ad.scale(total, scale), gen_value, excl_value


def perplexity(model: KeyphraseModel, dataset: list[Sample]) -> float:
    """exp(total NLL / total target-token count), teacher-forced; the count
    includes control tokens, words, separators, and the terminator."""
    total_nll = 0.0
    total_tokens = 0
    with ad.no_grad():
        for doc, program in dataset:
            records = model.teacher_forced(doc, program)
            total_nll += sum(
                float(ad.nll(r.dist.merged, r.target_merged_id).data) for r in records
            )
            total_tokens += len(records)
    if total_tokens == 0:
        raise ConfigError("perplexity over an empty dataset")
    return float(np.exp(total_nll / total_tokens))


class Adam:
    def __init__(self, params: ParamSet, lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {p.name: np.zeros_like(p.data) for p in params}
        self._v = {p.name: np.zeros_like(p.data) for p in params}

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.step_count
        bias2 = 1.0 - b2 ** self.step_count
        for p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            m = self._m[p.name] = b1 * self._m[p.name] + (1.0 - b1) * g
            v = self._v[p.name] = b2 * self._v[p.name] + (1.0 - b2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data = p.data - self.lr * update

    def zero_grad(self) -> None:
        self.params.zero_grad()


def clip_gradients(params: ParamSet, max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most max_norm.
    Returns the pre-clip norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.asarray(p.grad, dtype=np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


@dataclass
class EarlyStopSchedule:
    """Halve the lr on every non-improving validation; stop after
    `patience` consecutive non-improvements. Improvement = relative drop
    greater than RELATIVE_IMPROVEMENT versus the best so far."""

    patience: int
    best: float | None = None
    best_epoch: int = 0
    bad_count: int = 0

    def update(self, value: float, epoch: int) -> tuple[bool, bool]:
        """Returns (improved, should_stop)."""
        improved = (
            self.best is None
            or value < self.best * (1.0 - RELATIVE_IMPROVEMENT)
        )
        if improved:
            self.best = value
            self.best_epoch = epoch
            self.bad_count = 0
            return True, False
        self.bad_count += 1
        return False, self.bad_count >= self.patience


@dataclass
class FitResult:
    best_epoch: int
    best_perplexity: float
    epochs_run: int
    stopped_early: bool
    history: list[dict] = field(default_factory=list)


def fit(
    model: KeyphraseModel,
    train: list[Sample],
    valid: list[Sample],
    config: TrainConfig,
    seed: int | None = None,
    log_path: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
    epoch_hook=None,
) -> FitResult:
    """Epoch loop with seeded shuffling, per-epoch validation perplexity,
    lr halving and early stopping; the best parameters are restored into
    the model (and written to checkpoint_path when given).

    epoch_hook(model, epoch, stats) may return True to stop early (used by
    callers that track a downstream metric); in that case the parameters
    that satisfied the hook are kept instead of the best-perplexity ones."""
    if not train:
        raise ConfigError("fit: empty training set")
    if not valid:
        raise ConfigError("fit: empty validation set")
    seed = config.seeds[0] if seed is None else seed
    rng = np.random.default_rng(seed)
    optimizer = Adam(
        model.params, lr=config.lr, beta1=config.adam_beta1,
        beta2=config.adam_beta2, eps=config.adam_eps,
    )
    schedule = EarlyStopSchedule(patience=config.patience)
    best_state: dict[str, np.ndarray] | None = None
    best_meta = (0, float("inf"))
    history: list[dict] = []
    log_file = None
    writer = None
    if log_path is not None:
        log_file = open(log_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(log_file)
        writer.writerow(
            ["epoch", "train_loss", "generation_loss", "exclusive_loss",
             "perplexity", "lr"]
        )
    epochs_run = 0
    stopped_early = False
    hook_stopped = False
    try:
        for epoch in range(1, config.epochs_cap + 1):
            epochs_run = epoch
            order = rng.permutation(len(train))
            epoch_total = epoch_gen = epoch_excl = 0.0
            n_batches = 0
            for start in range(0, len(order), config.batch_size):
                batch_idx = start // config.batch_size
                batch = [train[k] for k in order[start:start + config.batch_size]]
                try:
                    total, gen_value, excl_value = batch_loss_parts(
                        model, batch, config
                    )
                    optimizer.zero_grad()
                    total.backward()
                    clip_gradients(model.params, config.max_grad_norm)
                    optimizer.step()
                except NumericError as exc:
                    raise NumericError(
                        f"training diverged at epoch {epoch}, "
                        f"batch {batch_idx}: {exc}"
                    ) from exc
                epoch_total += float(total.data)
                epoch_gen += gen_value
                epoch_excl += excl_value
                n_batches += 1
            ppl = perplexity(model, valid)
            stats = {
                "epoch": epoch,
                "train_loss": epoch_total / n_batches,
                "generation_loss": epoch_gen / n_batches,
                "exclusive_loss": epoch_excl / n_batches,
                "perplexity": ppl,
                "lr": optimizer.lr,
            }
            history.append(stats)
            if writer is not None:
                writer.writerow(
                    [stats["epoch"], repr(stats["train_loss"]),
                     repr(stats["generation_loss"]),
                     repr(stats["exclusive_loss"]),
                     repr(stats["perplexity"]), repr(stats["lr"])]
                )
                log_file.flush()
            improved, should_stop = schedule.update(ppl, epoch)
            if improved:
                best_state = {
                    name: arr.copy()
                    for name, arr in model.params.state_arrays().items()
                }
                best_meta = (epoch, ppl)
            else:
                optimizer.lr *= config.lr_decay_factor
            if epoch_hook is not None and epoch_hook(model, epoch, stats):
                stopped_early = True
                hook_stopped = True
                break
            if should_stop:
                stopped_early = True
                break
    finally:
        if log_file is not None:
            log_file.close()
    if best_state is not None and not hook_stopped:
        model.params.load_arrays(best_state)
    best_epoch, best_ppl = best_meta
    if hook_stopped:
        best_epoch = epochs_run
    if checkpoint_path is not None:
        model.save_checkpoint(
            checkpoint_path, epoch=best_epoch, best_perplexity=best_ppl,
        )
    return FitResult(
        best_epoch=best_epoch,
        best_perplexity=best_ppl,
        epochs_run=epochs_run,
        stopped_early=stopped_early,
        history=history,
    )

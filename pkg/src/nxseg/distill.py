"""Loss functions and training loops.

The teacher is trained supervised with a masked binary cross-entropy:
classes whose annotations are missing contribute nothing to the loss.
The student is trained against the frozen teacher with a three-term
objective,

    total = alpha * KD + beta * reconstruction + gamma * sparsity

where KD is the mean binary KL divergence between teacher and student
output distributions (teacher as the reference), reconstruction is the
squared L2 norm ||X - W H||^2 averaged over spectrogram entries, and
sparsity is the mean absolute value of the embedding.  Both non-KD terms
use mean reductions so the weight triplet is independent of crop size;
with the raw sum the reconstruction gradient outweighs distillation by
three to four orders of magnitude and the student never learns to follow
the teacher (nmf_loss keeps the plain summed form for direct use).
Default weights are (10, 5, 0.1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import Spectrogram
from .errors import ConfigError, ShapeError, TrainingError
from .nmf import Dictionary
from .segnet import (NUM_CLASSES, ProxyModel, TcnConfig, TeacherModel,
                     check_capacity, default_proxy_config)
from .tensor import Adam, Tensor, clamp, log, sigmoid

PROB_FLOOR = 1e-7
CROP_FRAMES = 100            # fixed 2.0 s training crops at 20 ms hop


@dataclass
class LossWeights:
    alpha: float = 10.0      # distillation
    beta: float = 5.0        # reconstruction
    gamma: float = 0.1       # sparsity

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass
class LabeledSegments:
    labels: np.ndarray                 # (C, T) binary
    available: np.ndarray = None       # (C,) bool, default all available

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.available is None:
            self.available = np.ones(self.labels.shape[0], dtype=bool)
        else:
            self.available = np.asarray(self.available, dtype=bool)
        if self.available.shape != (self.labels.shape[0],):
            raise ShapeError(
                f"availability mask {self.available.shape} does not match "
                f"{self.labels.shape[0]} classes")


@dataclass
class SegmentExample:
    """One training segment: spectrogram bins plus frame labels."""
    bins: np.ndarray                   # (F, T)
    labels: LabeledSegments


def masked_bce(logits: Tensor, target: LabeledSegments) -> Tensor:
    """Mean binary cross-entropy over available-class frames."""
    y = target.labels
    if logits.shape != y.shape:
        raise ShapeError(f"logits {logits.shape} vs labels {y.shape}")
    avail = target.available
    n_avail = int(avail.sum())
    if n_avail == 0:
        raise TrainingError("degenerate batch: no class has annotations")
    p = clamp(sigmoid(logits), PROB_FLOOR, 1.0 - PROB_FLOOR)
    mask = np.repeat(avail[:, None], y.shape[1], axis=1).astype(np.float64)
    ll = Tensor(y * mask) * log(p) + Tensor((1.0 - y) * mask) * log(1.0 - p)
    return ll.sum() * (-1.0 / (n_avail * y.shape[1]))


def kd_divergence(teacher_p, proxy_p: Tensor) -> Tensor:
    """Mean binary KL divergence, teacher as the reference distribution."""
    tp = teacher_p.data if isinstance(teacher_p, Tensor) else np.asarray(teacher_p)
    if tp.shape != proxy_p.shape:
        raise ShapeError(f"teacher {tp.shape} vs proxy {proxy_p.shape}")
    tp = np.clip(tp, PROB_FLOOR, 1.0 - PROB_FLOOR)
    q = clamp(proxy_p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    pos = Tensor(tp) * (Tensor(np.log(tp)) - log(q))
    neg = Tensor(1.0 - tp) * (Tensor(np.log(1.0 - tp)) - log(1.0 - q))
    return (pos + neg).mean()


def nmf_loss(x, w, h: Tensor) -> Tensor:
    """Squared L2 norm of the reconstruction residual, summed over entries."""
    xb = x.bins if isinstance(x, Spectrogram) else np.asarray(x, dtype=np.float64)
    watoms = w if isinstance(w, Tensor) else Tensor(
        w.atoms if isinstance(w, Dictionary) else np.asarray(w))
    if watoms.shape[1] != h.shape[0] or watoms.shape[0] != xb.shape[0] \
            or h.shape[1] != xb.shape[1]:
        raise ShapeError(f"inconsistent shapes: X {xb.shape}, W {watoms.shape}, "
                         f"H {h.shape}")
    diff = Tensor(xb) - watoms @ h
    return (diff * diff).sum()


def composite_loss(x, teacher_p, h: Tensor, logits: Tensor, x_rec,
                   weights: LossWeights):
    """Weighted three-term objective.

    The reconstruction component is the squared residual per spectrogram
    entry.  Returns (total, components) where components holds the
    unweighted kd / nmf / l1 values for logging.
    """
    xb = x.bins if isinstance(x, Spectrogram) else np.asarray(x, dtype=np.float64)
    kd = kd_divergence(teacher_p, sigmoid(logits))
    diff = Tensor(xb) - x_rec
    rec = (diff * diff).mean()
    l1 = abs(h).mean()
    total = weights.alpha * kd + weights.beta * rec + weights.gamma * l1
    return total, {"kd": kd.item(), "nmf": rec.item(), "l1": l1.item()}


# ------------------------------------------------------------- training ----

def _crop(example: SegmentExample, crop_len: int, rng) -> SegmentExample:
    t = example.bins.shape[1]
    if t <= crop_len:
        return example
    start = int(rng.integers(0, t - crop_len + 1))
    return SegmentExample(
        example.bins[:, start:start + crop_len],
        LabeledSegments(example.labels.labels[:, start:start + crop_len],
                        example.labels.available))


class _MetricsLog:
    COLUMNS = ("step", "kd", "nmf", "l1", "total", "lr")

    def __init__(self, path):
        self.rows = []
        self.path = Path(path) if path else None

    def add(self, step, total, lr, kd="", nmf="", l1=""):
        self.rows.append({"step": step, "kd": kd, "nmf": nmf, "l1": l1,
                          "total": total, "lr": lr})

    def write(self):
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=self.COLUMNS)
            writer.writeheader()
            writer.writerows(self.rows)


def _check_finite(value: float, what: str, epoch: int, step: int) -> float:
    if not np.isfinite(value):
        raise TrainingError(f"non-finite {what} at epoch {epoch} step {step}")
    return value


def train_teacher(corpus: list, epochs: int = 30, lr: float = 1e-3,
                  batch: int = 64, seed: int = 0, val: list = None,
                  patience: int = 5, crop_len: int = CROP_FRAMES,
                  cfg: TcnConfig = None, log_path=None,
                  checkpoint_dir=None):
    """Supervised teacher training on masked BCE; returns the frozen model
    and a history dict with per-epoch losses."""
    if not corpus:
        raise ConfigError("empty training corpus")
    model = TeacherModel(cfg, seed=seed)
    opt = Adam(model.params, lr=lr)
    rng = np.random.default_rng(seed + 1)
    logbook = _MetricsLog(log_path)
    history = {"train_loss": [], "val_loss": []}
    best_val, best_state, since_best = np.inf, None, 0
    step = 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(corpus))
        epoch_losses = []
        for lo in range(0, len(order), batch):
            chunk = order[lo:lo + batch]
            opt.zero_grad()
            batch_loss = 0.0
            for idx in chunk:
                ex = _crop(corpus[idx], crop_len, rng)
                loss = masked_bce(model.forward(Tensor(ex.bins)), ex.labels)
                scaled = loss * (1.0 / len(chunk))
                scaled.backward()
                batch_loss += scaled.item()
            _check_finite(batch_loss, "loss", epoch, step)
            opt.step()
            step += 1
            epoch_losses.append(batch_loss)
            logbook.add(step, batch_loss, lr)
        history["train_loss"].append(float(np.mean(epoch_losses)))
        if checkpoint_dir is not None:
            from .segnet import save_teacher
            save_teacher(Path(checkpoint_dir) / f"teacher_epoch{epoch:03d}.nxsg",
                         model)
        if val:
            v = float(np.mean([
                masked_bce(model.forward(Tensor(ex.bins)), ex.labels).item()
                for ex in val]))
            history["val_loss"].append(v)
            if v < best_val - 1e-12:
                best_val, since_best = v, 0
                best_state = {k: p.data.copy() for k, p in model.params.items()}
            else:
                since_best += 1
                if patience and since_best >= patience:
                    break
    if best_state is not None:
        for k, p in model.params.items():
            p.data = best_state[k]
    logbook.write()
    model.freeze()
    return model, history


def distill_proxy(teacher: TeacherModel, corpus: list, w: Dictionary,
                  weights: LossWeights = None, epochs: int = 30,
                  lr: float = 1e-3, batch: int = 64,
                  w_trainable: bool = False, seed: int = 0, val: list = None,
                  patience: int = 5, crop_len: int = CROP_FRAMES,
                  cfg: TcnConfig = None, proxy: ProxyModel = None,
                  log_path=None, checkpoint_dir=None,
                  enforce_capacity: bool = True):
    """Knowledge distillation of the student against a frozen teacher.

    Returns (proxy, history); history carries per-epoch mean losses and
    the per-step component breakdown.
    """
    if any(p.requires_grad for p in teacher.params.values()):
        raise ConfigError("teacher must be frozen before distillation")
    if not corpus:
        raise ConfigError("empty distillation corpus")
    weights = weights or LossWeights()
    if proxy is None:
        proxy = ProxyModel(cfg or default_proxy_config(), dictionary=w,
                           w_trainable=w_trainable, seed=seed)
    elif proxy.rank != w.rank:
        raise ConfigError(f"dictionary rank {w.rank} does not match the "
                          f"student embedding size {proxy.rank}")
    if enforce_capacity:
        check_capacity(teacher, proxy)
    opt = Adam(proxy.params, lr=lr)
    rng = np.random.default_rng(seed + 2)
    logbook = _MetricsLog(log_path)
    history = {"train_loss": [], "val_loss": [], "steps": []}
    best_val, best_state, since_best = np.inf, None, 0
    step = 0

    def item_loss(ex: SegmentExample):
        teacher_p = 1.0 / (1.0 + np.exp(-teacher.forward(Tensor(ex.bins)).data))
        h, logits, x_rec = proxy.forward(Tensor(ex.bins))
        return composite_loss(ex.bins, teacher_p, h, logits, x_rec, weights)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(corpus))
        epoch_losses = []
        for lo in range(0, len(order), batch):
            chunk = order[lo:lo + batch]
            opt.zero_grad()
            batch_total = 0.0
            comp_sums = {"kd": 0.0, "nmf": 0.0, "l1": 0.0}
            for idx in chunk:
                ex = _crop(corpus[idx], crop_len, rng)
                total, comps = item_loss(ex)
                (total * (1.0 / len(chunk))).backward()
                batch_total += total.item() / len(chunk)
                for key in comp_sums:
                    comp_sums[key] += comps[key] / len(chunk)
            _check_finite(batch_total, "loss", epoch, step)
            opt.step()
            step += 1
            epoch_losses.append(batch_total)
            row = {"step": step, "total": batch_total, "lr": lr, **comp_sums}
            history["steps"].append(row)
            logbook.add(step, batch_total, lr, kd=comp_sums["kd"],
                        nmf=comp_sums["nmf"], l1=comp_sums["l1"])
        history["train_loss"].append(float(np.mean(epoch_losses)))
        if checkpoint_dir is not None:
            from .segnet import save_proxy
            save_proxy(Path(checkpoint_dir) / f"proxy_epoch{epoch:03d}.nxsg",
                       proxy)
        if val:
            v = float(np.mean([item_loss(ex)[0].item() for ex in val]))
            history["val_loss"].append(v)
            if v < best_val - 1e-12:
                best_val, since_best = v, 0
                best_state = {k: p.data.copy() for k, p in proxy.params.items()}
            else:
                since_best += 1
                if patience and since_best >= patience:
                    break
    if best_state is not None:
        for k, p in proxy.params.items():
            p.data = best_state[k]
    logbook.write()
    return proxy, history

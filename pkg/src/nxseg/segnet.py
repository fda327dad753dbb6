"""TCN teacher and the factorization-constrained student pair.

Both networks share the same trunk: a 1x1 bottleneck projection followed
by residual blocks of dilated 1-D convolutions (dilation of layer i
within a block is 2**i), all with "same" padding so the frame count is
preserved end to end.  Kernel length defaults to 3; activations are plain
ReLU.

The teacher maps a log-spectrogram to per-class logits through a 1x1
head.  The student splits into an encoder producing a non-negative
embedding H (ReLU output) and a bias-free linear head mapping H to the
logits; the same H is multiplied by the (frozen or trainable) dictionary
to reconstruct the input spectrogram.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, ShapeError
from .nmf import Dictionary
from .tensor import Tensor, conv1d, relu, sigmoid

CLASSES = ("SAD", "MD", "ND", "OSD")
NUM_CLASSES = len(CLASSES)

SPEC_BINS = 513     # fft 1024 at 16 kHz


@dataclass(frozen=True)
class TcnConfig:
    input_dim: int = SPEC_BINS
    bottleneck: int = 64
    hidden: int = 128
    blocks: int = 3
    layers_per_block: int = 5
    kernel_len: int = 3


def default_teacher_config() -> TcnConfig:
    # hidden width is free (the reference teacher rides on a large
    # pretrained feature extractor); it is sized so the teacher strictly
    # out-parameterizes the default student
    return TcnConfig(bottleneck=64, hidden=384, blocks=3, layers_per_block=5)


def default_proxy_config() -> TcnConfig:
    return TcnConfig(bottleneck=128, hidden=256, blocks=4, layers_per_block=4)


def desk_teacher_config() -> TcnConfig:
    return TcnConfig(bottleneck=32, hidden=64, blocks=2, layers_per_block=3)


def desk_proxy_config() -> TcnConfig:
    return TcnConfig(bottleneck=24, hidden=48, blocks=2, layers_per_block=3)


def receptive_field(cfg: TcnConfig) -> int:
    """Closed-form temporal context of the trunk, in frames."""
    per_block = sum((cfg.kernel_len - 1) * 2 ** i
                    for i in range(cfg.layers_per_block))
    return 1 + cfg.blocks * per_block


def _layer_channels(cfg: TcnConfig) -> list:
    if cfg.layers_per_block == 1:
        return [(cfg.bottleneck, cfg.bottleneck)]
    chans = [(cfg.bottleneck, cfg.hidden)]
    chans += [(cfg.hidden, cfg.hidden)] * (cfg.layers_per_block - 2)
    chans.append((cfg.hidden, cfg.bottleneck))
    return chans


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    a = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-a, a, shape)


def _init_trunk(cfg: TcnConfig, rng, prefix: str = "") -> dict:
    params = {
        f"{prefix}proj.w": Tensor(_uniform(rng, cfg.input_dim,
                                           (cfg.bottleneck, cfg.input_dim)),
                                  requires_grad=True),
        f"{prefix}proj.b": Tensor(np.zeros((cfg.bottleneck, 1)),
                                  requires_grad=True),
    }
    L = cfg.kernel_len
    for b in range(cfg.blocks):
        for i, (cin, cout) in enumerate(_layer_channels(cfg)):
            params[f"{prefix}block{b}.conv{i}.w"] = Tensor(
                _uniform(rng, cin * L, (cout, cin, L)), requires_grad=True)
            params[f"{prefix}block{b}.conv{i}.b"] = Tensor(
                np.zeros((cout, 1)), requires_grad=True)
    return params


def with_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias column (C,1) to a (C,T) map.

    Broadcast is expressed as b @ ones(1,T) so it stays inside the
    engine's scalar/equal-shape rules and the bias gradient is the row
    sum it should be.
    """
    ones = Tensor(np.ones((1, x.shape[1])))
    return x + (b @ ones)


def _trunk_forward(params: dict, cfg: TcnConfig, x: Tensor,
                   prefix: str = "") -> Tensor:
    if x.shape[0] != cfg.input_dim:
        raise ShapeError(f"input has {x.shape[0]} bins, "
                         f"model expects {cfg.input_dim}")
    h = relu(with_bias(params[f"{prefix}proj.w"] @ x,
                       params[f"{prefix}proj.b"]))
    for b in range(cfg.blocks):
        block_in = h
        z = h
        for i in range(cfg.layers_per_block):
            z = relu(with_bias(
                conv1d(z, params[f"{prefix}block{b}.conv{i}.w"],
                       dilation=2 ** i),
                params[f"{prefix}block{b}.conv{i}.b"]))
        h = z + block_in
    return h


def _param_count(params: dict) -> int:
    return sum(p.data.size for p in params.values())


class TeacherModel:
    def __init__(self, cfg: TcnConfig = None, seed: int = 0):
        self.cfg = cfg or default_teacher_config()
        rng = np.random.default_rng(seed)
        self.params = _init_trunk(self.cfg, rng)
        self.params["head.w"] = Tensor(
            _uniform(rng, self.cfg.bottleneck,
                     (NUM_CLASSES, self.cfg.bottleneck)), requires_grad=True)
        self.params["head.b"] = Tensor(np.zeros((NUM_CLASSES, 1)),
                                       requires_grad=True)
        self.classes = CLASSES

    def forward(self, x: Tensor) -> Tensor:
        """Logits (C, T) for a (F, T) input."""
        h = _trunk_forward(self.params, self.cfg, x)
        return with_bias(self.params["head.w"] @ h, self.params["head.b"])

    def predict(self, bins: np.ndarray):
        """Inference on a raw spectrogram matrix: (logits, probabilities)."""
        logits = self.forward(Tensor(bins))
        return logits.data, sigmoid(logits).data

    def param_count(self) -> int:
        return _param_count(self.params)

    def freeze(self):
        for p in self.params.values():
            p.requires_grad = False
            p.grad = None
        return self


class ProxyModel:
    """Encoder + bias-free linear head + dictionary reconstruction."""

    def __init__(self, cfg: TcnConfig = None, dictionary: Dictionary = None,
                 w_trainable: bool = False, seed: int = 0):
        self.cfg = cfg or default_proxy_config()
        if dictionary is None:
            raise ConfigError("ProxyModel requires a dictionary")
        if dictionary.num_bins != self.cfg.input_dim:
            raise ShapeError(
                f"dictionary has {dictionary.num_bins} bins, encoder input is "
                f"{self.cfg.input_dim}")
        self.rank = dictionary.rank
        self.w_trainable = bool(w_trainable)
        rng = np.random.default_rng(seed)
        self.params = _init_trunk(self.cfg, rng, prefix="psi.")
        self.params["psi.head.w"] = Tensor(
            _uniform(rng, self.cfg.bottleneck,
                     (self.rank, self.cfg.bottleneck)), requires_grad=True)
        self.params["psi.head.b"] = Tensor(np.zeros((self.rank, 1)),
                                           requires_grad=True)
        self.params["theta"] = Tensor(
            _uniform(rng, self.rank, (self.rank, NUM_CLASSES)),
            requires_grad=True)
        if self.w_trainable:
            self.params["nmf.W"] = Tensor(dictionary.atoms.copy(),
                                          requires_grad=True)
            self._w_frozen = None
        else:
            self._w_frozen = Tensor(dictionary.atoms.copy())
        self.classes = CLASSES

    def dictionary_tensor(self) -> Tensor:
        # trainable dictionaries pass through a ReLU so the reconstruction
        # stays a non-negative combination
        if self.w_trainable:
            return relu(self.params["nmf.W"])
        return self._w_frozen

    def embed(self, x: Tensor) -> Tensor:
        """Non-negative embedding H (K, T)."""
        h = _trunk_forward(self.params, self.cfg, x, prefix="psi.")
        return relu(with_bias(self.params["psi.head.w"] @ h,
                              self.params["psi.head.b"]))

    def head_logits(self, h: Tensor) -> Tensor:
        return self.params["theta"].T @ h

    def forward(self, x: Tensor):
        """(H, logits, reconstruction) for a (F, T) input."""
        h = self.embed(x)
        logits = self.head_logits(h)
        x_rec = self.dictionary_tensor() @ h
        return h, logits, x_rec

    def predict(self, bins: np.ndarray):
        h, logits, x_rec = self.forward(Tensor(bins))
        return h.data, logits.data, sigmoid(logits).data, x_rec.data

    def theta_matrix(self) -> np.ndarray:
        """Head weights (K, C) as plain numpy, for relevance extraction."""
        return self.params["theta"].data

    def dictionary_matrix(self) -> np.ndarray:
        return self.dictionary_tensor().data

    def param_count(self) -> int:
        return _param_count(self.params)

    def freeze(self):
        for p in self.params.values():
            p.requires_grad = False
            p.grad = None
        return self


def check_capacity(teacher: TeacherModel, proxy: ProxyModel) -> None:
    """The student must be strictly smaller than its teacher."""
    tp, pp = teacher.param_count(), proxy.param_count()
    if pp >= tp:
        raise ConfigError(f"student has {pp} parameters, teacher only {tp}; "
                          "the student must be strictly smaller")


# -------------------------------------------------------------- storage ----

def _cfg_to_dict(cfg: TcnConfig) -> dict:
    return asdict(cfg)


def save_teacher(path, model: TeacherModel) -> None:
    save_checkpoint(path, {k: p.data for k, p in model.params.items()})
    meta = {"type": "teacher", "classes": list(model.classes),
            "tcn": _cfg_to_dict(model.cfg)}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))


def load_teacher(path) -> TeacherModel:
    meta = json.loads(Path(str(path) + ".json").read_text())
    if meta.get("type") != "teacher":
        raise ConfigError(f"{path} is not a teacher checkpoint")
    model = TeacherModel(TcnConfig(**meta["tcn"]))
    _restore(model.params, load_checkpoint(path), path)
    return model


def save_proxy(path, model: ProxyModel) -> None:
    data = {k: p.data for k, p in model.params.items()}
    if not model.w_trainable:
        data["nmf.W"] = model._w_frozen.data
    save_checkpoint(path, data)
    meta = {"type": "proxy", "classes": list(model.classes),
            "tcn": _cfg_to_dict(model.cfg), "rank": model.rank,
            "w_trainable": model.w_trainable}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))


def load_proxy(path) -> ProxyModel:
    meta = json.loads(Path(str(path) + ".json").read_text())
    if meta.get("type") != "proxy":
        raise ConfigError(f"{path} is not a proxy checkpoint")
    stored = load_checkpoint(path)
    model = ProxyModel(TcnConfig(**meta["tcn"]),
                       dictionary=Dictionary(stored["nmf.W"]),
                       w_trainable=meta["w_trainable"])
    _restore(model.params, stored, path)
    return model


def _restore(params: dict, stored: dict, path) -> None:
    for name, p in params.items():
        if name not in stored:
            raise ShapeError(f"checkpoint {path} is missing tensor {name!r}")
        if stored[name].shape != p.data.shape:
            raise ShapeError(
                f"checkpoint tensor {name!r} has shape {stored[name].shape}, "
                f"model expects {p.data.shape}")
        p.data = stored[name]

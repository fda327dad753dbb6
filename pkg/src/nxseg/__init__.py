"""Explainable multilabel audio segmentation.

A compact TCN teacher is trained on synthetic scenes labeled for speech,
music, noise, and overlapped speech; a factorization-constrained student
is distilled from it whose non-negative embedding doubles as the code of
an NMF spectrogram model, so per-class decisions can be projected back
onto frequency bins.
"""

__version__ = "0.1.0"

from .dsp import AudioClip, Spectrogram, log_spectrogram, read_wav
from .errors import NxsegError
from .nmf import Dictionary, NmfFit, infer_activations, sparse_nmf
from .segnet import CLASSES, ProxyModel, TcnConfig, TeacherModel
from .tensor import Tensor

__all__ = [
    "AudioClip", "CLASSES", "Dictionary", "NmfFit", "NxsegError",
    "ProxyModel", "Spectrogram", "TcnConfig", "TeacherModel", "Tensor",
    "__version__", "infer_activations", "log_spectrogram", "read_wav",
    "sparse_nmf",
]

"""Generate single heartbeats with fully connected GANs and score them.

The package covers beat ingestion and preprocessing (:mod:`.dataset`),
elastic distances (:mod:`.metrics`), class templates (:mod:`.templates`),
the quantitative scores (:mod:`.evaluation`), a small numpy network engine
(:mod:`.nn`), the generative models (:mod:`.models`), checkpoints
(:mod:`.checkpoint`), the augmentation experiment (:mod:`.augmentation`)
and the command line (:mod:`.cli`).
"""

__version__ = "0.1.0"

from .dataset import BeatSet, load_beats, normalize_set, resample_set, save_beats
from .errors import EcgSynthError
from .metrics import DistanceKind, DtwOptions, dtw, euclidean, frechet

__all__ = [
    "BeatSet",
    "DistanceKind",
    "DtwOptions",
    "EcgSynthError",
    "dtw",
    "euclidean",
    "frechet",
    "load_beats",
    "normalize_set",
    "resample_set",
    "save_beats",
]

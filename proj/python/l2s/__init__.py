"""Speaker-specific lip-to-speech synthesis.

Thin Python layer over the C++ core. Configs travel as JSON strings; use
:func:`config` to get a dict with defaults filled in and :func:`dumps_config`
to pass a (partial) dict back.
"""

import json

from ._l2s import (
    DomainError,
    Model,
    default_config,
    estoi,
    features_to_waveform,
    generate_dataset,
    griffin_lim,
    kl_divergence,
    mfcc,
    normalize_config,
    read_frames,
    read_wav,
    stft_magnitude,
    stoi,
    sync_loss,
    train,
    video_rate_mfcc,
    write_wav,
)


def config(overrides=None):
    """Full configuration dict; `overrides` is a partial dict of sections."""
    text = default_config() if overrides is None else normalize_config(json.dumps(overrides))
    return json.loads(text)


def dumps_config(cfg):
    return json.dumps(cfg)


__all__ = [
    "DomainError",
    "Model",
    "config",
    "default_config",
    "dumps_config",
    "estoi",
    "features_to_waveform",
    "generate_dataset",
    "griffin_lim",
    "kl_divergence",
    "mfcc",
    "normalize_config",
    "read_frames",
    "read_wav",
    "stft_magnitude",
    "stoi",
    "sync_loss",
    "train",
    "video_rate_mfcc",
    "write_wav",
]

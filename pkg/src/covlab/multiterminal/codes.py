"""Operational two-terminal codes built from the two-sided covering maps."""
from __future__ import annotations

import numpy as np

from ..covering.two_sided import TwoSidedTrial
from ..errors import ValidationError
from .region import as_table4
from .system import Decoder, Encoder


def compose_reconstruction(distortion, h1, h2) -> np.ndarray:
    """``d(x1, x2, h1(z1, z2), h2(z1, z2))`` as a table over ``(x1, x2, z1, z2)``."""
    t = as_table4(distortion)
    h1, h2 = np.asarray(h1), np.asarray(h2)
    if h1.shape != h2.shape:
        raise ValidationError("h1 and h2 must share the (|Z1|, |Z2|) shape")
    z1, z2 = np.meshgrid(np.arange(h1.shape[0]), np.arange(h1.shape[1]), indexing="ij")
    return t[:, :, h1[z1, z2], h2[z1, z2]]


def covering_code(trial: TwoSidedTrial, h1, h2) -> tuple[Encoder, Encoder, Decoder]:
    """Encoders send the codebook index chosen by each covering map; the
    decoder looks both codewords up and applies ``h1``, ``h2`` letterwise."""
    if trial.codebooks is None or trial.index1 is None:
        raise ValidationError("trial does not carry its codebooks and index maps")
    cb1, cb2 = trial.codebooks
    enc1 = Encoder(trial.index1, cb1.n, cb1.m)
    enc2 = Encoder(trial.index2, cb2.n, cb2.m)
    return enc1, enc2, Decoder.from_letter_maps(cb1.words, cb2.words, h1, h2)

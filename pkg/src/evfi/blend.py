"""Pixel-wise attention blending of candidate reconstructions.

Three candidates are blended per pixel: the two refined warps and the
synthesized frame. Scores are turned into convex weights with a softmax,
which keeps the output inside the per-pixel candidate range and makes the
blend invariant to adding a constant to all three score planes.
"""

from __future__ import annotations

import numpy as np

N_CANDIDATES = 3


def _as_scores(attention) -> np.ndarray:
    arr = np.asarray(attention, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != N_CANDIDATES:
        raise ValueError("attention must have shape (3, H, W)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("attention scores must be finite")
    return arr


def blend(candidates, attention) -> np.ndarray:
    """Softmax-weighted average of 3 candidate images.

    ``candidates`` is a sequence of three (H, W, 3) images in [0, 255];
    ``attention`` a (3, H, W) stack of score planes. Returns the blended
    image clamped to [0, 255].
    """
    scores = _as_scores(attention)
    cands = [np.asarray(c, dtype=np.float64) for c in candidates]
    if len(cands) != N_CANDIDATES:
        raise ValueError("expected exactly 3 candidate images")
    shape = cands[0].shape
    for c in cands:
        if c.shape != shape:
            raise ValueError("candidate images must share one shape")
    if scores.shape[1:] != shape[:2]:
        raise ValueError("attention planes must match the candidate dimensions")

    shifted = scores - scores.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    weights = e / e.sum(axis=0, keepdims=True)

    out = np.zeros(shape, dtype=np.float64)
    for k in range(N_CANDIDATES):
        w = weights[k]
        out += (w[:, :, None] if out.ndim == 3 else w) * cands[k]
    return np.clip(out, 0.0, 255.0)


def contribution_stats(attention) -> np.ndarray:
    """Fraction of pixels won by each candidate (argmax, ties to the lowest
    index). The three fractions sum to exactly 1."""
    scores = _as_scores(attention)
    winners = np.argmax(scores, axis=0)
    counts = np.bincount(winners.ravel(), minlength=N_CANDIDATES)
    total = winners.size
    f0 = counts[0] / total
    f1 = counts[1] / total
    # last fraction closes the sum to exactly 1.0 in float arithmetic
    return np.array([f0, f1, 1.0 - (f0 + f1)])

"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np

from .errors import ContractViolation


def check_frames(frames, width: int | None = None, name: str = "frames") -> np.ndarray:
    """Coerce to a finite float64 (T>=1, d>=1) matrix."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractViolation(f"{name} must be a (T>=1, d>=1) matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains non-finite entries")
    if width is not None and arr.shape[1] != width:
        raise ContractViolation(f"{name} width {arr.shape[1]} does not match expected {width}")
    return arr


def check_sequences(X, width: int | None = None) -> list:
    """Validate a non-empty list of FeatureSequence-like items."""
    items = list(X)
    if not items:
        raise ContractViolation("expected at least one utterance")
    for item in items:
        check_frames(item.frames, width=width, name=f"utterance {item.utt_id!r}")
    return items


def check_labels(y, n: int, name: str = "y") -> list:
    labels = list(y)
    if len(labels) != n:
        raise ContractViolation(f"{name} has {len(labels)} entries for {n} utterances")
    return labels

"""Emotion tags as extra output symbols: vocabulary extension, target
augmentation, last-tag extraction, tag stripping, and best-model selection."""

from dataclasses import dataclass

from .errors import ContractViolation
from .transducer import Vocab

DEFAULT_EMOTIONS = ("NEUTRAL", "HAPPY", "ANGRY", "SAD")
NEUTRAL = "NEUTRAL"


def tag_symbol(emotion: str) -> str:
    return f"<{emotion.upper()}>"


def extend_vocab(base: Vocab, emotions) -> Vocab:
    """Append one tag symbol per emotion after all character symbols."""
    emotions = list(emotions)
    tags = [tag_symbol(e) for e in emotions]
    if len(set(tags)) != len(tags):
        raise ContractViolation("duplicate emotion labels")
    for t in tags:
        if t in base.symbols:
            raise ContractViolation(f"tag {t} already present in the vocabulary")
    new_ids = tuple(range(base.size, base.size + len(tags)))
    return Vocab(symbols=base.symbols + tuple(tags),
                 blank_id=base.blank_id,
                 tag_ids=base.tag_ids + new_ids)


def augment_target(tokens, emotion: str, vocab: Vocab) -> list[int]:
    """Target ids with the utterance's emotion tag appended at the end."""
    out = list(tokens)
    for t in out:
        if vocab.is_tag(t):
            raise ContractViolation("target already contains an emotion tag")
    tag = tag_symbol(emotion)
    if tag not in vocab.symbols:
        raise ContractViolation(f"unknown emotion {emotion!r}")
    return out + [vocab.id_of(tag)]


def extract_emotion(decoded, vocab: Vocab) -> str:
    """Emotion of the last tag in the decode; NEUTRAL when none was emitted."""
    for token_id in reversed(list(decoded)):
        if vocab.is_tag(token_id):
            return vocab.symbols[token_id][1:-1]
    return NEUTRAL


def strip_tags(decoded, vocab: Vocab) -> list[int]:
    return [t for t in decoded if not vocab.is_tag(t)]


@dataclass(frozen=True)
class HistoryEntry:
    epoch: int
    dev_emotion_accuracy: float
    checkpoint_id: str


class TrainingHistory:
    """Per-epoch dev accuracies; epochs must arrive strictly increasing."""

    def __init__(self):
        self.entries: list[HistoryEntry] = []

    def append(self, epoch: int, dev_emotion_accuracy: float, checkpoint_id: str):
        if self.entries and epoch <= self.entries[-1].epoch:
            raise ContractViolation("history epochs must be strictly increasing")
        if not 0.0 <= dev_emotion_accuracy <= 1.0:
            raise ContractViolation("accuracy must lie in [0, 1]")
        self.entries.append(HistoryEntry(epoch, dev_emotion_accuracy, checkpoint_id))

    def __len__(self):
        return len(self.entries)

    def epochs_since_best(self) -> int:
        best = select_best_model(self)
        last_best_epoch = next(e.epoch for e in self.entries
                               if e.checkpoint_id == best)
        return self.entries[-1].epoch - last_best_epoch


def select_best_model(history: TrainingHistory) -> str:
    """Checkpoint with maximal dev accuracy; ties go to the earliest epoch."""
    if not history.entries:
        raise ContractViolation("cannot select from an empty history")
    best = history.entries[0]
    for e in history.entries[1:]:
        if e.dev_emotion_accuracy > best.dev_emotion_accuracy:
            best = e
    return best.checkpoint_id

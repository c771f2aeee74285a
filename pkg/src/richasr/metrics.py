"""Edit distance, CER/WER, classification accuracy, and equal error rate."""

import bisect
import csv
import math
from dataclasses import dataclass

from .errors import ContractViolation


@dataclass(frozen=True)
class ErrorCounts:
    substitutions: int
    insertions: int
    deletions: int
    reference_length: int

    @property
    def total(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        if self.reference_length == 0:
            raise ContractViolation("error rate undefined for an empty reference")
        return self.total / self.reference_length


def edit_distance(ref, hyp) -> ErrorCounts:
    """Levenshtein alignment of ``ref`` against ``hyp`` with an S/I/D split.

    Deletions are reference tokens absent from the hypothesis, insertions are
    extra hypothesis tokens.  When several optimal alignments exist the
    backtrace prefers substitution, then deletion, then insertion.
    """
    ref = list(ref)
    hyp = list(hyp)
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ref[i - 1] != hyp[j - 1])
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)

    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return ErrorCounts(substitutions=subs, insertions=ins, deletions=dels,
                       reference_length=n)


def wer(ref_text: str, hyp_text: str) -> float:
    """Word error rate over whitespace tokens; may exceed 1."""
    ref_words = ref_text.split()
    if not ref_words:
        raise ContractViolation("reference is empty after tokenization")
    return edit_distance(ref_words, hyp_text.split()).rate


def cer(ref_text: str, hyp_text: str) -> float:
    """Character error rate; spaces count as characters."""
    if not ref_text:
        raise ContractViolation("reference is empty")
    return edit_distance(list(ref_text), list(hyp_text)).rate


def accuracy(pred, truth) -> float:
    pred = list(pred)
    truth = list(truth)
    if not pred or len(pred) != len(truth):
        raise ContractViolation("prediction/truth lists must be non-empty and equal length")
    return sum(p == t for p, t in zip(pred, truth)) / len(pred)


@dataclass(frozen=True)
class Trial:
    score: float
    is_target: bool


def eer(trials) -> float:
    """Equal error rate from pooled detection trials.

    Sweeps an accept-if-score>=threshold rule over the observed scores,
    keeps the undominated (FAR, FRR) operating points, and linearly
    interpolates between the two points where FAR-FRR changes sign.
    """
    trials = list(trials)
    tar = sorted(t.score for t in trials if t.is_target)
    non = sorted(t.score for t in trials if not t.is_target)
    if not tar or not non:
        raise ContractViolation("EER needs both target and non-target trials")
    if not all(math.isfinite(s) for s in tar + non):
        raise ContractViolation("trial scores must be finite")

    points = [(0.0, 1.0)]  # threshold above every score
    for th in sorted(set(tar + non), reverse=True):
        far = (len(non) - bisect.bisect_left(non, th)) / len(non)
        frr = bisect.bisect_left(tar, th) / len(tar)
        points.append((far, frr))

    # Keep the undominated operating points: strictly increasing FAR,
    # strictly decreasing FRR.
    frontier = []
    for far, frr in sorted(points):
        if not frontier or frr < frontier[-1][1]:
            frontier.append((far, frr))

    prev = frontier[0]  # FAR 0; perfect separation crosses right here
    if prev[1] == 0.0:
        return 0.0
    for far, frr in frontier[1:]:
        if far >= frr:
            span = (far - prev[0]) + (prev[1] - frr)
            s = (prev[1] - prev[0]) / span
            return prev[0] + s * (far - prev[0])
        prev = (far, frr)
    raise AssertionError("frontier always ends at FRR=0")  # pragma: no cover


def write_eval_report(path, rows) -> None:
    """Per-utterance CSV: utt_id, ref, hyp, cer, wer, true/pred emotion."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utt_id", "ref", "hyp", "cer", "wer",
                         "true_emotion", "pred_emotion"])
        for r in rows:
            writer.writerow([r["utt_id"], r["ref"], r["hyp"],
                             f"{r['cer']:.6f}", f"{r['wer']:.6f}",
                             r["true_emotion"], r["pred_emotion"]])


def write_trials(path, rows) -> None:
    """Detection trial CSV: utt_id, lang, score, is_target."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utt_id", "lang", "score", "is_target"])
        for utt_id, lang, score, is_target in rows:
            writer.writerow([utt_id, lang, f"{score:.10f}", int(is_target)])


def write_eer_summary(path, duration_eers) -> None:
    """duration_frames,eer rows feeding the log-log duration plot."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["duration_frames", "eer"])
        for duration, value in duration_eers:
            writer.writerow([duration, f"{value:.6f}"])

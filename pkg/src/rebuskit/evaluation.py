"""Fine-grained scoring of rebus generations.

Eight per-example metrics cover definition answering (def_acc), first-pass
assembly (fp_words, fp_letters, fp_em), and solution composition (key_match,
fp_match, s_words, s_em). Corpus numbers are macro-averages: every puzzle
weighs equally regardless of its word count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import t as t_dist

from rebuskit.core import RebusPuzzle, concat_first_pass, normalize
from rebuskit.textio import ParsedGeneration

METRIC_NAMES = (
    "def_acc",
    "fp_words",
    "fp_letters",
    "fp_em",
    "key_match",
    "fp_match",
    "s_words",
    "s_em",
)

# Correlations are called significant below this Bonferroni-corrected level.
SIGNIFICANCE_LEVEL = 1e-5


class EmptyReference(ValueError):
    """CER is undefined for an empty reference string."""


class EmptyInput(ValueError):
    """Aggregation needs at least one score."""


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance, two-row dynamic programming."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


def cer(reference: str, hypothesis: str) -> float:
    """Character error rate: edit distance over reference length.

    Operates on already-normalized strings; can exceed 1 for long hypotheses.
    """
    if not reference:
        raise EmptyReference("reference string is empty")
    return levenshtein(reference, hypothesis) / len(reference)


@dataclass(frozen=True)
class ExampleScore:
    """The eight per-example metrics, each in [0, 1]."""

    def_acc: float
    fp_words: float
    fp_letters: float
    fp_em: float
    key_match: float
    fp_match: float
    s_words: float
    s_em: float

    def __post_init__(self):
        for name in METRIC_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        for name in ("fp_em", "s_em"):
            if getattr(self, name) not in (0.0, 1.0):
                raise ValueError(f"{name} must be 0 or 1")
        if self.fp_em == 1.0 and (self.fp_words != 1.0 or self.fp_letters != 1.0):
            raise ValueError("fp_em=1 requires fp_words=1 and fp_letters=1")
        if self.s_em == 1.0 and self.s_words != 1.0:
            raise ValueError("s_em=1 requires s_words=1")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass(frozen=True)
class WordHit:
    word: str
    correct: bool


@dataclass(frozen=True)
class EvaluatedExample:
    """A scored example plus per-word outcomes for breakdowns."""

    puzzle_id: str
    score: ExampleScore
    fp_hits: tuple[WordHit, ...]
    s_hits: tuple[WordHit, ...]


def _collapse(text: str) -> str:
    return " ".join(text.split())


def _letter_count(token: str) -> int:
    return sum(ch.isalpha() for ch in token)


def _word_class_tokens(line: str) -> list[str]:
    """First-pass tokens that are not entirely uppercase (i.e. not letter runs)."""
    return [tok for tok in line.split() if not tok.isupper()]


def _positional_hits(predicted: Sequence[str], gold: Sequence[str]) -> list[bool]:
    hits = []
    for i, gold_word in enumerate(gold):
        hits.append(
            i < len(predicted)
            and normalize(predicted[i], "casefold") == normalize(gold_word, "casefold")
        )
    return hits


def score_example(gold: RebusPuzzle, parsed: ParsedGeneration) -> ExampleScore:
    """Score one parsed generation against its gold puzzle.

    Missing sections score 0 on every metric that depends on them. First-pass
    exact match is case-sensitive after whitespace collapsing (casing encodes
    which tokens are letter runs); solution exact match is case-insensitive.
    """
    slots = gold.first_pass.slots
    gold_stream = concat_first_pass(gold.first_pass)
    gold_fp_line = gold.first_pass.rendered()
    gold_sol_tokens = [w.rendered() for w in gold.solution.words]

    answers = parsed.definition_answers
    correct_defs = 0
    for i, slot in enumerate(slots):
        if i < len(answers) and answers[i] is not None:
            if normalize(answers[i].strip(), "casefold") == slot.word:
                correct_defs += 1
    def_acc = correct_defs / len(slots)

    fp_line = parsed.first_pass_line
    if fp_line:
        fp_hits = _positional_hits(_word_class_tokens(fp_line), [s.word for s in slots])
        fp_words = sum(fp_hits) / len(slots)
        pred_stream = normalize(fp_line, "casefold_strip_spaces")
        fp_letters = max(0.0, 1.0 - cer(gold_stream, pred_stream))
        fp_em = 1.0 if _collapse(fp_line) == _collapse(gold_fp_line) else 0.0
    else:
        fp_hits = [False] * len(slots)
        fp_words = fp_letters = fp_em = 0.0

    sol_line = parsed.solution_line
    if sol_line:
        pred_tokens = sol_line.split()
        matched = sum(
            1
            for i, token in enumerate(gold.key.tokens)
            if i < len(pred_tokens) and _letter_count(pred_tokens[i]) == token.length
        )
        key_match = matched / len(gold.key.tokens)
        s_hits = _positional_hits(pred_tokens, gold_sol_tokens)
        s_words = sum(s_hits) / len(gold_sol_tokens)
        s_em = (
            1.0
            if normalize(_collapse(sol_line), "casefold")
            == normalize(_collapse(gold.solution.display), "casefold")
            else 0.0
        )
    else:
        s_hits = [False] * len(gold_sol_tokens)
        key_match = s_words = s_em = 0.0

    if fp_line and sol_line:
        ref = normalize(fp_line, "casefold_strip_spaces_apostrophes")
        hyp = normalize(sol_line, "casefold_strip_spaces_apostrophes")
        fp_match = max(0.0, 1.0 - cer(ref, hyp)) if ref else 0.0
    else:
        fp_match = 0.0

    return ExampleScore(
        def_acc=def_acc,
        fp_words=fp_words,
        fp_letters=fp_letters,
        fp_em=fp_em,
        key_match=key_match,
        fp_match=fp_match,
        s_words=s_words,
        s_em=s_em,
    )


def evaluate_example(gold: RebusPuzzle, parsed: ParsedGeneration) -> EvaluatedExample:
    """Score an example and record per-word outcomes for later breakdowns."""
    score = score_example(gold, parsed)
    slots = gold.first_pass.slots
    if parsed.first_pass_line:
        fp_flags = _positional_hits(
            _word_class_tokens(parsed.first_pass_line), [s.word for s in slots]
        )
    else:
        fp_flags = [False] * len(slots)
    gold_sol_tokens = [w.rendered() for w in gold.solution.words]
    if parsed.solution_line:
        s_flags = _positional_hits(parsed.solution_line.split(), gold_sol_tokens)
    else:
        s_flags = [False] * len(gold_sol_tokens)
    return EvaluatedExample(
        puzzle_id=gold.id,
        score=score,
        fp_hits=tuple(WordHit(s.word, hit) for s, hit in zip(slots, fp_flags)),
        s_hits=tuple(
            WordHit(normalize(tok, "casefold"), hit)
            for tok, hit in zip(gold_sol_tokens, s_flags)
        ),
    )


@dataclass(frozen=True)
class SubsetBreakdown:
    """Per-subset word accuracies and exact-match rates (None = no such words)."""

    n: int
    fp_w_id: float | None
    fp_w_ood: float | None
    fp_em: float
    s_w_id: float | None
    s_w_ood: float | None
    s_em: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "fp_w_id": self.fp_w_id,
            "fp_w_ood": self.fp_w_ood,
            "fp_em": self.fp_em,
            "s_w_id": self.s_w_id,
            "s_w_ood": self.s_w_ood,
            "s_em": self.s_em,
        }


@dataclass(frozen=True)
class IdOodBreakdown:
    test_id: SubsetBreakdown
    test_ood: SubsetBreakdown

    def deltas(self) -> dict[str, float | None]:
        out = {}
        for name in ("fp_w_id", "fp_w_ood", "fp_em", "s_w_id", "s_w_ood", "s_em"):
            a = getattr(self.test_id, name)
            b = getattr(self.test_ood, name)
            out[name] = (a - b) if (a is not None and b is not None) else None
        return out

    def as_dict(self) -> dict:
        return {
            "test_id": self.test_id.as_dict(),
            "test_ood": self.test_ood.as_dict(),
            "delta": self.deltas(),
        }


@dataclass(frozen=True)
class Report:
    """Per-example scores plus corpus macro-averages."""

    n: int
    means: dict[str, float]
    per_example: tuple[tuple[str, ExampleScore], ...]
    breakdown: IdOodBreakdown | None = None

    def as_dict(self) -> dict:
        out = {
            "n": self.n,
            "means": dict(self.means),
            "per_example": [
                {"id": pid, **score.as_dict()} for pid, score in self.per_example
            ],
        }
        if self.breakdown is not None:
            out["breakdown"] = self.breakdown.as_dict()
        return out

    def to_table(self) -> str:
        """Aligned text table: Def., FP Words/Letters/EM, S Key/FPM/Words/EM."""
        headers = (
            "Def.",
            "FP Words",
            "FP Letters",
            "FP EM",
            "S Key Match",
            "S FP Match",
            "S Words",
            "S EM",
        )
        values = [f"{self.means[name]:.2f}" for name in METRIC_NAMES]
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
        return f"{head}\n{row}"


def _ratio(correct: int, total: int) -> float | None:
    return correct / total if total else None


def _subset_breakdown(examples, fp_vocab, s_vocab) -> SubsetBreakdown:
    counts = {key: [0, 0] for key in ("fp_id", "fp_ood", "s_id", "s_ood")}
    for ex in examples:
        for hit in ex.fp_hits:
            bucket = "fp_id" if hit.word in fp_vocab else "fp_ood"
            counts[bucket][0] += hit.correct
            counts[bucket][1] += 1
        for hit in ex.s_hits:
            bucket = "s_id" if hit.word in s_vocab else "s_ood"
            counts[bucket][0] += hit.correct
            counts[bucket][1] += 1
    fp_em = [ex.score.fp_em for ex in examples]
    s_em = [ex.score.s_em for ex in examples]
    return SubsetBreakdown(
        n=len(examples),
        fp_w_id=_ratio(*counts["fp_id"]),
        fp_w_ood=_ratio(*counts["fp_ood"]),
        fp_em=float(np.mean(fp_em)) if fp_em else 0.0,
        s_w_id=_ratio(*counts["s_id"]),
        s_w_ood=_ratio(*counts["s_ood"]),
        s_em=float(np.mean(s_em)) if s_em else 0.0,
    )


def aggregate(
    scored,
    id_ood_labels: Mapping[str, str] | None = None,
    train_fp_vocab: frozenset[str] | set[str] | None = None,
    train_solution_vocab: frozenset[str] | set[str] | None = None,
) -> Report:
    """Fold example scores into a corpus report.

    ``scored`` is a sequence of :class:`EvaluatedExample` or bare
    :class:`ExampleScore`. For the seen/unseen breakdown, pass per-id labels
    ("id"/"ood") plus the train vocabularies; this requires evaluated
    examples, whose word-level outcomes carry the needed detail.
    """
    scored = list(scored)
    if not scored:
        raise EmptyInput("no scores to aggregate")
    examples = [
        ex
        if isinstance(ex, EvaluatedExample)
        else EvaluatedExample(str(i), ex, (), ())
        for i, ex in enumerate(scored)
    ]
    means = {
        name: float(np.mean([getattr(ex.score, name) for ex in examples]))
        for name in METRIC_NAMES
    }
    breakdown = None
    if id_ood_labels is not None:
        if train_fp_vocab is None or train_solution_vocab is None:
            raise ValueError("breakdown requires both train vocabularies")
        subset_id = [ex for ex in examples if id_ood_labels.get(ex.puzzle_id) == "id"]
        subset_ood = [ex for ex in examples if id_ood_labels.get(ex.puzzle_id) == "ood"]
        breakdown = IdOodBreakdown(
            test_id=_subset_breakdown(subset_id, train_fp_vocab, train_solution_vocab),
            test_ood=_subset_breakdown(subset_ood, train_fp_vocab, train_solution_vocab),
        )
    return Report(
        n=len(examples),
        means=means,
        per_example=tuple((ex.puzzle_id, ex.score) for ex in examples),
        breakdown=breakdown,
    )


@dataclass(frozen=True)
class WordAccuracyRow:
    section: str  # "FP" or "S"
    word: str
    occurrences: int
    correct: int
    accuracy: float
    char_length: int
    train_frequency: int
    external_frequency: float


@dataclass(frozen=True)
class WordAccuracyTable:
    rows: tuple[WordAccuracyRow, ...]

    def section(self, name: str) -> tuple[WordAccuracyRow, ...]:
        return tuple(row for row in self.rows if row.section == name)

    def as_dict(self) -> list[dict]:
        return [
            {
                "section": r.section,
                "word": r.word,
                "occurrences": r.occurrences,
                "correct": r.correct,
                "accuracy": r.accuracy,
                "char_length": r.char_length,
                "train_frequency": r.train_frequency,
                "external_frequency": r.external_frequency,
            }
            for r in self.rows
        ]


def word_accuracy(
    gold_corpus: Sequence[RebusPuzzle],
    parsed_outputs: Sequence[ParsedGeneration],
    train_corpus: Sequence[RebusPuzzle] = (),
    freq_table: Mapping[str, float] | None = None,
) -> WordAccuracyTable:
    """Per-word-type accuracies over aligned gold/parsed pairs.

    Word types are casefolded and grouped per section; train frequencies are
    occurrence counts in the train first passes (FP) or solutions (S), and
    external frequencies come from ``freq_table`` (0 when absent).
    """
    if len(gold_corpus) != len(parsed_outputs):
        raise ValueError("gold corpus and parsed outputs must align")
    freq_table = freq_table or {}

    train_fp: dict[str, int] = {}
    train_s: dict[str, int] = {}
    for puzzle in train_corpus:
        for slot in puzzle.first_pass.slots:
            train_fp[slot.word] = train_fp.get(slot.word, 0) + 1
        for word in puzzle.solution.words:
            key = normalize(word.rendered(), "casefold")
            train_s[key] = train_s.get(key, 0) + 1

    tallies: dict[tuple[str, str], list[int]] = {}
    for gold, parsed in zip(gold_corpus, parsed_outputs):
        ex = evaluate_example(gold, parsed)
        for section, hits in (("FP", ex.fp_hits), ("S", ex.s_hits)):
            for hit in hits:
                entry = tallies.setdefault((section, hit.word), [0, 0])
                entry[0] += hit.correct
                entry[1] += 1

    rows = []
    for (section, word), (correct, occurrences) in sorted(tallies.items()):
        train_freq = (train_fp if section == "FP" else train_s).get(word, 0)
        rows.append(
            WordAccuracyRow(
                section=section,
                word=word,
                occurrences=occurrences,
                correct=correct,
                accuracy=correct / occurrences,
                char_length=sum(ch.isalpha() for ch in word),
                train_frequency=train_freq,
                external_frequency=float(freq_table.get(word, 0.0)),
            )
        )
    return WordAccuracyTable(tuple(rows))


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_raw: float
    p_bonferroni: float
    n: int
    significant: bool


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float], n_tests: int = 1) -> CorrelationResult:
    """Spearman rank correlation with tie handling and Bonferroni correction.

    Ranks both vectors (ties get average ranks), computes Pearson on the
    ranks, and derives a two-sided p-value from the t-approximation
    t = rho * sqrt((n-2) / (1-rho^2)) with n-2 degrees of freedom. Constant
    input leaves rho undefined; it is reported as 0 and not significant.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError(f"length mismatch: {xs.shape} vs {ys.shape}")
    n = len(xs)
    if n < 3:
        raise ValueError("need at least 3 observations")
    if n_tests < 1:
        raise ValueError("n_tests must be >= 1")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        return CorrelationResult(rho=0.0, p_raw=1.0, p_bonferroni=1.0, n=n, significant=False)

    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    rho = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    rho = max(-1.0, min(1.0, rho))

    if abs(rho) == 1.0:
        p_raw = 0.0
    else:
        t_stat = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p_raw = float(2.0 * t_dist.sf(abs(t_stat), df=n - 2))
    p_bonferroni = min(1.0, p_raw * n_tests)
    return CorrelationResult(
        rho=rho,
        p_raw=p_raw,
        p_bonferroni=p_bonferroni,
        n=n,
        significant=p_bonferroni < SIGNIFICANCE_LEVEL,
    )

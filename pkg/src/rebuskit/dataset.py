"""Corpus pipeline: coverage filtering, seeded definition sampling,
train/test and seen/unseen splitting, statistics, and synthetic fixtures."""

from __future__ import annotations

import hashlib
import random
import statistics
from dataclasses import dataclass, replace
from pathlib import Path

from rebuskit.core import (
    FirstPass,
    LetterRun,
    Metadata,
    RebusError,
    RebusPuzzle,
    SolutionPhrase,
    WordSlot,
    derive_key,
    normalize,
    validate,
)
from rebuskit.lexicon import Lexicon, Trie


class NoDefinition(RebusError):
    """A slot word has no definition candidates in the lexicon."""


class DecompositionFailed(RebusError):
    """The fixture generator could not decompose a stream within its budget."""


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    test_size: int
    shuffle: bool = True


@dataclass(frozen=True)
class SectionStats:
    unique_words: int
    words_per_example_mean: float
    words_per_example_sd: float
    word_length_mean: float
    word_length_sd: float
    sequence_length_mean: float
    sequence_length_sd: float


@dataclass(frozen=True)
class CorpusStats:
    n_examples: int
    n_authors: int
    year_min: int | None
    year_max: int | None
    first_pass: SectionStats
    solution: SectionStats


@dataclass(frozen=True)
class TrainVocab:
    """Casefolded word sets harvested from a training corpus."""

    fp_words: frozenset[str]
    solution_words: frozenset[str]


def filter_coverage(corpus, lexicon: Lexicon):
    """Keep puzzles whose every first-pass word has at least one definition."""
    kept, dropped = [], []
    for puzzle in corpus:
        if all(lexicon.has_word(slot.word) for slot in puzzle.first_pass.slots):
            kept.append(puzzle)
        else:
            dropped.append(puzzle)
    return kept, dropped


def choice_index(seed: int, puzzle_id: str, slot_index: int, n: int) -> int:
    """Deterministic, platform-stable choice in ``range(n)``.

    Keyed by (seed, puzzle id, slot index) so inserting or removing records
    never reshuffles the definitions of other puzzles.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    payload = f"{seed}\x1f{puzzle_id}\x1f{slot_index}".encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") % n


def sample_definitions(corpus, lexicon: Lexicon, seed: int):
    """Assign one definition per slot, drawn uniformly from its candidates."""
    out = []
    for puzzle in corpus:
        slot_index = 0
        elements = []
        for el in puzzle.first_pass.elements:
            if isinstance(el, WordSlot):
                candidates = lexicon.definitions_for(el.word)
                if not candidates:
                    raise NoDefinition(
                        f"puzzle {puzzle.id}: no definition for {el.word!r}"
                    )
                pick = candidates[choice_index(seed, puzzle.id, slot_index, len(candidates))]
                elements.append(WordSlot(el.word, pick))
                slot_index += 1
            else:
                elements.append(el)
        out.append(replace(puzzle, first_pass=FirstPass(tuple(elements))))
    return out


def split_train_test(corpus, spec: SplitSpec):
    """Deterministic seeded shuffle, then cut off the first ``test_size``."""
    if spec.test_size > len(corpus):
        raise ValueError(
            f"test_size {spec.test_size} exceeds corpus size {len(corpus)}"
        )
    ordered = sorted(corpus, key=lambda p: p.id)
    if spec.shuffle:
        random.Random(spec.seed).shuffle(ordered)
    test = ordered[: spec.test_size]
    train = ordered[spec.test_size:]
    return train, test


def train_vocabularies(train) -> TrainVocab:
    fp_words = frozenset(
        slot.word for puzzle in train for slot in puzzle.first_pass.slots
    )
    solution_words = frozenset(
        normalize(w.rendered(), "casefold")
        for puzzle in train
        for w in puzzle.solution.words
    )
    return TrainVocab(fp_words, solution_words)


def split_id_ood(train, test):
    """Partition test examples by first-pass word coverage in the train set.

    Returns (seen, unseen, train_fp_vocab): an example lands in the unseen
    bucket as soon as one of its first-pass words never occurs in training.
    """
    vocab = train_vocabularies(train).fp_words
    test_id, test_ood = [], []
    for puzzle in test:
        words = {slot.word for slot in puzzle.first_pass.slots}
        if words <= vocab:
            test_id.append(puzzle)
        else:
            test_ood.append(puzzle)
    return test_id, test_ood, vocab


def _moments(values) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    mean = statistics.fmean(values)
    sd = statistics.pstdev(values)
    return mean, sd


def _section_stats(word_lists, sequences) -> SectionStats:
    words_per = [len(ws) for ws in word_lists]
    lengths = [len(w) for ws in word_lists for w in ws]
    seq_lengths = [len(s) for s in sequences]
    wpe_mean, wpe_sd = _moments(words_per)
    wl_mean, wl_sd = _moments(lengths)
    sl_mean, sl_sd = _moments(seq_lengths)
    return SectionStats(
        unique_words=len({normalize(w, "casefold") for ws in word_lists for w in ws}),
        words_per_example_mean=wpe_mean,
        words_per_example_sd=wpe_sd,
        word_length_mean=wl_mean,
        word_length_sd=wl_sd,
        sequence_length_mean=sl_mean,
        sequence_length_sd=sl_sd,
    )


def compute_stats(corpus) -> CorpusStats:
    """Corpus statistics; standard deviations are population SDs (divide by N).

    Sequence lengths count characters of the rendered line, single spaces
    between tokens included.
    """
    fp_words = [[slot.word for slot in p.first_pass.slots] for p in corpus]
    fp_sequences = [p.first_pass.rendered() for p in corpus]
    sol_words = [[w.rendered() for w in p.solution.words] for p in corpus]
    sol_sequences = [" ".join(p.solution.display.split()) for p in corpus]
    years = []
    for p in corpus:
        try:
            years.append(int(p.metadata.year))
        except (TypeError, ValueError):
            pass
    return CorpusStats(
        n_examples=len(corpus),
        n_authors=len({p.metadata.author for p in corpus if p.metadata.author}),
        year_min=min(years) if years else None,
        year_max=max(years) if years else None,
        first_pass=_section_stats(fp_words, fp_sequences),
        solution=_section_stats(sol_words, sol_sequences),
    )


def _load_wordlist(wordlist) -> list[str]:
    if isinstance(wordlist, (str, Path)):
        lines = Path(wordlist).read_text(encoding="utf-8").splitlines()
        wordlist = [line.strip() for line in lines if line.strip()]
    words = sorted(
        {normalize(w, "casefold") for w in wordlist if w and w.strip().isalpha()}
    )
    if not words:
        raise ValueError("wordlist is empty")
    return words


def _decompose(stream: str, trie: Trie, rng: random.Random) -> list | None:
    """One randomized attempt to split ``stream`` into letters and trie words."""
    elements: list[LetterRun | WordSlot] = []
    pending: list[str] = []

    def flush():
        if pending:
            letters = "".join(pending).upper()
            grouping = " ".join(letters) if rng.random() < 0.5 else letters
            elements.append(LetterRun(grouping))
            pending.clear()

    pos = 0
    n = len(stream)
    while pos < n:
        matches = []
        node = trie.root
        for end in range(pos, n):
            node = node.children.get(stream[end])
            if node is None:
                break
            if node.is_word and end - pos + 1 >= 3:
                matches.append(stream[pos:end + 1])
        if matches and rng.random() < 0.6:
            word = rng.choice(matches)
            flush()
            elements.append(WordSlot(word))
            pos += len(word)
        else:
            pending.append(stream[pos])
            pos += 1
    flush()
    if not any(isinstance(el, WordSlot) for el in elements):
        return None
    return elements


def gen_fixtures(wordlist, n: int, seed: int, max_attempts: int = 200):
    """Generate ``n`` internally consistent synthetic puzzles.

    Each solution phrase samples 2-4 wordlist words; the concatenated stream
    is then re-decomposed into a first pass mixing letter runs with wordlist
    words of length >= 3 (at least one word slot). Every output passes
    :func:`rebuskit.core.validate`.
    """
    words = _load_wordlist(wordlist)
    trie = Trie(w for w in words if len(w) >= 3)
    rng = random.Random(seed)
    puzzles = []
    for i in range(n):
        elements = None
        for _ in range(max_attempts):
            phrase_words = [rng.choice(words) for _ in range(rng.randint(2, 4))]
            display = " ".join(phrase_words)
            display = display[0].upper() + display[1:]
            stream = normalize(display, "casefold_strip_spaces")
            elements = _decompose(stream, trie, rng)
            if elements is not None:
                break
        if elements is None:
            raise DecompositionFailed(
                f"fixture {i}: no decomposition found in {max_attempts} attempts"
            )
        solution = SolutionPhrase.from_display(display)
        puzzle = RebusPuzzle(
            id=f"fx{seed:04d}-{i:05d}",
            first_pass=FirstPass(tuple(elements)),
            key=derive_key(solution),
            solution=solution,
            metadata=Metadata(
                author=rng.choice(("aldo", "bice", "carlo", "dina")),
                source="fixture",
                year=str(rng.randint(1950, 2024)),
            ),
        )
        violations = validate(puzzle)
        if violations:
            raise DecompositionFailed(f"fixture {i}: {violations}")
        puzzles.append(puzzle)
    return puzzles


def make_fixture_lexicon(
    corpus,
    seed: int,
    max_defs_per_word: int = 3,
    distractors: int = 0,
    extra_words=(),
) -> Lexicon:
    """Build a synthetic lexicon covering every slot word of ``corpus``.

    Each word gets 1..max_defs_per_word numbered definitions; with
    ``distractors`` > 0, that many other words are filed under the word's
    first definition as well, so definition lookups return multiple
    candidates.
    """
    rng = random.Random(seed)
    slot_words = sorted({s.word for p in corpus for s in p.first_pass.slots})
    pool = sorted(set(slot_words) | {normalize(w, "casefold") for w in extra_words})
    pairs = []
    for word in slot_words:
        n_defs = rng.randint(1, max_defs_per_word)
        for j in range(n_defs):
            pairs.append((f"indizio {j + 1} per {word}", word))
        for _ in range(distractors):
            pairs.append((f"indizio 1 per {word}", rng.choice(pool)))
    return Lexicon.from_pairs(pairs)

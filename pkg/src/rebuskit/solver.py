"""Constraint-based rebus solving.

Given the puzzle elements (letter runs and definition slots), the key, a
definition lexicon and a solution vocabulary, the solver picks one candidate
word per slot such that the concatenated character stream re-segments under
the key into vocabulary words. ``solve`` is a depth-first search with length
and trie pruning; ``oracle_solve`` exhaustively enumerates the candidate
product and exists to verify it.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence, Union

from rebuskit.core import (
    FirstPass,
    LetterRun,
    RebusError,
    SolutionKey,
    SolutionPhrase,
    WordSlot,
    normalize,
    segment,
)
from rebuskit.lexicon import Lexicon, Vocabulary


class UnknownDefinition(RebusError):
    """A definition text has no entry in the lexicon."""


class NoCandidates(RebusError):
    """A slot ended up with an empty candidate list."""

    def __init__(self, slot_index: int, detail: str = ""):
        super().__init__(f"slot {slot_index} has no candidates{': ' + detail if detail else ''}")
        self.slot_index = slot_index


class SpaceTooLarge(RebusError):
    """The candidate product exceeds the exhaustive-search cap."""


@dataclass(frozen=True)
class SolverConfig:
    max_nodes: int = 1_000_000
    max_results: int = 100
    rank_by: Literal["vocabulary-frequency", "none"] = "none"
    frequency_table: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")


@dataclass(frozen=True)
class Solution:
    assignment: tuple[str, ...]
    phrase: SolutionPhrase
    score: float


@dataclass(frozen=True)
class SolveResult:
    solutions: tuple[Solution, ...]
    nodes_expanded: int
    exhausted: bool


PuzzlePart = Union[LetterRun, WordSlot, str]


def candidates(slot: WordSlot | str, lexicon: Lexicon) -> list[str]:
    """All lexicon words for the slot's exact definition text, sorted."""
    definition = slot.definition if isinstance(slot, WordSlot) else slot
    if not definition:
        raise ValueError("slot has no definition")
    words = lexicon.words_for(definition)
    if not words:
        raise UnknownDefinition(f"definition not in lexicon: {definition!r}")
    return list(words)


def _normalize_parts(elements, lexicon: Lexicon):
    """Turn mixed elements into ('L', letters) / ('S', candidates) parts."""
    if isinstance(elements, FirstPass):
        elements = elements.elements
    parts = []
    slot_index = 0
    for el in elements:
        if isinstance(el, LetterRun):
            parts.append(("L", normalize(el.letters, "casefold")))
        else:
            try:
                options = candidates(el, lexicon)
            except (UnknownDefinition, ValueError) as exc:
                raise NoCandidates(slot_index, str(exc)) from exc
            parts.append(("S", tuple(options)))
            slot_index += 1
    return parts


def _rank(
    found: list[tuple[tuple[str, ...], str]],
    key: SolutionKey,
    config: SolverConfig,
) -> tuple[Solution, ...]:
    """Score, order and cap raw (assignment, stream) results deterministically."""
    table = config.frequency_table or {}
    solutions = []
    for assignment, stream in found:
        phrase = segment(stream, key)
        if config.rank_by == "vocabulary-frequency":
            score = sum(
                math.log1p(table.get(normalize(w.letters, "casefold"), 0.0))
                for w in phrase.words
            )
        else:
            score = 0.0
        solutions.append(Solution(assignment, phrase, score))
    solutions.sort(key=lambda s: (-s.score, s.phrase.display))
    return tuple(solutions[: config.max_results])


def solve(
    elements: Sequence[PuzzlePart] | FirstPass,
    key: SolutionKey | str,
    lexicon: Lexicon,
    vocab: Vocabulary | None = None,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Depth-first search over slot candidates with pruning.

    Slots are filled left to right. A branch dies as soon as (a) the partial
    stream can no longer reach the key's total length given the min/max
    remaining candidate lengths, or (b) an appended character falls off the
    vocabulary trie within the current key segment. Completed non-elided
    segments must be trie words; elided segments only need their letters to
    stay on a valid trie path (the apostrophe is appended on rendering).

    ``nodes_expanded`` counts candidate placements tried; if it exceeds
    ``config.max_nodes`` the search stops with ``exhausted=False``.
    """
    if isinstance(key, str):
        key = SolutionKey.parse(key)
    if config is None:
        config = SolverConfig()
    if vocab is None:
        vocab = lexicon.vocabulary
    parts = _normalize_parts(elements, lexicon)

    total = key.total_length
    seg_lengths = [t.length for t in key.tokens]
    seg_elided = [t.elided for t in key.tokens]
    n_segments = len(seg_lengths)
    root = vocab.trie.root

    # Suffix bounds on how many characters parts i.. can still contribute.
    n_parts = len(parts)
    min_rest = [0] * (n_parts + 1)
    max_rest = [0] * (n_parts + 1)
    for i in range(n_parts - 1, -1, -1):
        kind, payload = parts[i]
        if kind == "L":
            lo = hi = len(payload)
        else:
            lo = min(len(w) for w in payload)
            hi = max(len(w) for w in payload)
        min_rest[i] = min_rest[i + 1] + lo
        max_rest[i] = max_rest[i + 1] + hi

    found: list[tuple[tuple[str, ...], str]] = []
    state = {"nodes": 0, "budget_hit": False}

    def advance(node, seg_i, offset, letters):
        """Walk ``letters`` through the trie across segment boundaries."""
        for ch in letters:
            if seg_i >= n_segments:
                return None
            node = node.children.get(ch)
            if node is None:
                return None
            offset += 1
            if offset == seg_lengths[seg_i]:
                if not seg_elided[seg_i] and not node.is_word:
                    return None
                node = root
                seg_i += 1
                offset = 0
        return node, seg_i, offset

    def dfs(part_i, pos, node, seg_i, offset, chosen):
        if state["budget_hit"]:
            return
        if part_i == n_parts:
            if pos == total and seg_i == n_segments and offset == 0:
                found.append((tuple(chosen), "".join(stream_parts)))
            return
        kind, payload = parts[part_i]
        if kind == "L":
            if pos + len(payload) + min_rest[part_i + 1] > total:
                return
            if pos + len(payload) + max_rest[part_i + 1] < total:
                return
            nxt = advance(node, seg_i, offset, payload)
            if nxt is None:
                return
            stream_parts.append(payload)
            dfs(part_i + 1, pos + len(payload), *nxt, chosen)
            stream_parts.pop()
            return
        for word in payload:
            if state["nodes"] >= config.max_nodes:
                state["budget_hit"] = True
                return
            state["nodes"] += 1
            if pos + len(word) + min_rest[part_i + 1] > total:
                continue
            if pos + len(word) + max_rest[part_i + 1] < total:
                continue
            nxt = advance(node, seg_i, offset, word)
            if nxt is None:
                continue
            stream_parts.append(word)
            chosen.append(word)
            dfs(part_i + 1, pos + len(word), *nxt, chosen)
            chosen.pop()
            stream_parts.pop()

    stream_parts: list[str] = []
    dfs(0, 0, root, 0, 0, [])

    return SolveResult(
        solutions=_rank(found, key, config),
        nodes_expanded=state["nodes"],
        exhausted=not state["budget_hit"],
    )


def oracle_solve(
    elements: Sequence[PuzzlePart] | FirstPass,
    key: SolutionKey | str,
    lexicon: Lexicon,
    vocab: Vocabulary | None = None,
    config: SolverConfig | None = None,
    cap: int = 10**6,
) -> SolveResult:
    """Exhaustive reference solver: full Cartesian product, no pruning.

    Checks each complete assignment by cutting the stream at the key lengths
    and testing every segment against a sorted word list (membership for
    plain segments, prefix via bisection for elided ones). Raises
    :class:`SpaceTooLarge` when the candidate product exceeds ``cap``.
    """
    if isinstance(key, str):
        key = SolutionKey.parse(key)
    if config is None:
        config = SolverConfig()
    if vocab is None:
        vocab = lexicon.vocabulary
    parts = _normalize_parts(elements, lexicon)

    slot_options = [payload for kind, payload in parts if kind == "S"]
    space = 1
    for options in slot_options:
        space *= len(options)
    if space > cap:
        raise SpaceTooLarge(f"candidate product {space} exceeds cap {cap}")

    sorted_words = sorted(vocab.words)

    def has_prefix(prefix: str) -> bool:
        i = bisect_left(sorted_words, prefix)
        return i < len(sorted_words) and sorted_words[i].startswith(prefix)

    total = key.total_length
    found = []
    nodes = 0

    def enumerate_assignments(index, acc):
        nonlocal nodes
        if index == len(slot_options):
            yield tuple(acc)
            return
        for word in slot_options[index]:
            nodes += 1
            acc.append(word)
            yield from enumerate_assignments(index + 1, acc)
            acc.pop()

    for assignment in enumerate_assignments(0, []):
        it = iter(assignment)
        stream = "".join(
            payload if kind == "L" else next(it) for kind, payload in parts
        )
        if len(stream) != total:
            continue
        ok = True
        pos = 0
        for token in key.tokens:
            seg = stream[pos:pos + token.length]
            pos += token.length
            if token.elided:
                if not has_prefix(seg):
                    ok = False
                    break
            elif seg not in vocab.words:
                ok = False
                break
        if ok:
            found.append((assignment, stream))

    return SolveResult(
        solutions=_rank(found, key, config),
        nodes_expanded=nodes,
        exhausted=True,
    )

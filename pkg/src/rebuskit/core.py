"""Core rebus formalism: first-pass elements, solution keys and segmentation.

A rebus hides a phrase behind a mix of plain letters and pictured (or, in the
verbalized variant, defined) words. Reading letters and word answers left to
right yields the *first pass*; re-cutting that character stream according to
the *solution key* (a list of word lengths, apostrophe-marked for elisions)
yields the solution phrase.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from typing import Literal, Union

NormalizeMode = Literal[
    "casefold",
    "casefold_strip_spaces",
    "casefold_strip_spaces_apostrophes",
]

# Straight and typographic apostrophes are treated alike everywhere.
APOSTROPHES = "'’ʼ"

_KEY_TOKEN_RE = re.compile(r"^(\d+)(')?$")


class RebusError(Exception):
    """Base class for domain errors raised by this package."""


class LengthMismatch(RebusError):
    """A character stream does not have the length the key demands."""

    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected a stream of {expected} characters, got {actual}")
        self.expected = expected
        self.actual = actual


class MalformedWord(RebusError):
    """A solution word contains punctuation other than one trailing apostrophe."""


class KeyParseError(RebusError):
    """A solution key string does not match the accepted grammar."""


def normalize(text: str, mode: NormalizeMode = "casefold") -> str:
    """Canonicalize ``text`` for comparison.

    All modes apply NFC normalization and Unicode casefolding (accents are
    preserved). The stricter modes additionally drop whitespace, then
    apostrophes. Idempotent per mode.
    """
    if mode not in ("casefold", "casefold_strip_spaces", "casefold_strip_spaces_apostrophes"):
        raise ValueError(f"unknown normalization mode: {mode!r}")
    out = unicodedata.normalize("NFC", text).casefold()
    if mode == "casefold":
        return out
    out = "".join(ch for ch in out if not ch.isspace())
    if mode == "casefold_strip_spaces":
        return out
    return "".join(ch for ch in out if ch not in APOSTROPHES)


@dataclass(frozen=True, eq=False)
class LetterRun:
    """A run of explicit letters in the first pass.

    ``grouping`` preserves the source spacing verbatim ("LO" vs "F F"); two
    runs are equal when their letters are equal, regardless of grouping.
    """

    grouping: str

    def __post_init__(self):
        object.__setattr__(self, "grouping", unicodedata.normalize("NFC", self.grouping))
        if not self.grouping or self.grouping != self.grouping.strip():
            raise ValueError(f"letter run grouping must be non-empty and trimmed: {self.grouping!r}")
        for ch in self.grouping:
            if ch == " ":
                continue
            if not (ch.isalpha() and ch.isupper()):
                raise ValueError(f"letter runs may only contain uppercase letters: {self.grouping!r}")
        if not self.letters:
            raise ValueError("letter run has no letters")

    @property
    def letters(self) -> str:
        return self.grouping.replace(" ", "")

    def spaced(self) -> str:
        """Letters separated by single spaces, e.g. 'LO' -> 'L O'."""
        return " ".join(self.letters)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LetterRun):
            return NotImplemented
        return self.letters == other.letters

    def __hash__(self) -> int:
        return hash(("LetterRun", self.letters))


@dataclass(frozen=True)
class WordSlot:
    """A hidden first-pass word, optionally paired with a clue definition."""

    word: str
    definition: str = ""

    def __post_init__(self):
        object.__setattr__(self, "word", unicodedata.normalize("NFC", self.word))
        object.__setattr__(self, "definition", unicodedata.normalize("NFC", self.definition))
        if not self.word or not self.word.isalpha():
            raise ValueError(f"slot word must be non-empty and alphabetic: {self.word!r}")
        if self.word != self.word.casefold():
            raise ValueError(f"slot word must be lowercase: {self.word!r}")
        if "[" in self.definition or "]" in self.definition:
            raise ValueError(f"definition may not contain square brackets: {self.definition!r}")


Element = Union[LetterRun, WordSlot]


@dataclass(frozen=True)
class FirstPass:
    """Ordered first-pass elements, read left to right."""

    elements: tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not any(isinstance(el, WordSlot) for el in self.elements):
            raise ValueError("a first pass needs at least one word slot")

    @property
    def slots(self) -> tuple[WordSlot, ...]:
        return tuple(el for el in self.elements if isinstance(el, WordSlot))

    def rendered(self) -> str:
        """The first-pass line as displayed: groupings verbatim, slot words lowercase."""
        parts = [el.grouping if isinstance(el, LetterRun) else el.word for el in self.elements]
        return " ".join(parts)


@dataclass(frozen=True)
class KeyToken:
    """One solution-word length; ``elided`` marks a trailing apostrophe (1')."""

    length: int
    elided: bool = False

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"key token length must be >= 1, got {self.length}")

    def __str__(self) -> str:
        return f"{self.length}'" if self.elided else str(self.length)


@dataclass(frozen=True)
class SolutionKey:
    """The ordered word lengths governing the re-segmentation."""

    tokens: tuple[KeyToken, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("solution key cannot be empty")

    @classmethod
    def parse(cls, text: str) -> "SolutionKey":
        """Parse a key string like ``'3 6 12 8'`` or ``"10 7 1' 5"``.

        Only whitespace-separated integers with an optional trailing
        apostrophe are accepted; anything else raises :class:`KeyParseError`.
        """
        tokens = []
        for raw in text.split():
            m = _KEY_TOKEN_RE.match(raw)
            if m is None:
                raise KeyParseError(f"bad key token {raw!r} in key {text!r}")
            length = int(m.group(1))
            if length < 1:
                raise KeyParseError(f"key token must be >= 1, got {raw!r}")
            tokens.append(KeyToken(length, elided=m.group(2) is not None))
        if not tokens:
            raise KeyParseError(f"empty solution key: {text!r}")
        return cls(tuple(tokens))

    @property
    def total_length(self) -> int:
        return sum(t.length for t in self.tokens)

    def __str__(self) -> str:
        return " ".join(str(t) for t in self.tokens)


@dataclass(frozen=True)
class SolutionWord:
    """One solution word: its letters plus an elision flag."""

    letters: str
    elided: bool = False

    def __post_init__(self):
        object.__setattr__(self, "letters", unicodedata.normalize("NFC", self.letters))
        if not self.letters or not self.letters.isalpha():
            raise ValueError(f"solution word letters must be non-empty and alphabetic: {self.letters!r}")

    def rendered(self) -> str:
        return self.letters + "'" if self.elided else self.letters


@dataclass(frozen=True)
class SolutionPhrase:
    """The solution as word tokens plus its display string."""

    words: tuple[SolutionWord, ...]
    display: str

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "display", unicodedata.normalize("NFC", self.display))
        if not self.words:
            raise ValueError("solution phrase cannot be empty")

    @classmethod
    def from_display(cls, display: str) -> "SolutionPhrase":
        """Build a phrase from a display string such as "Bellissima novella d' amore"."""
        display = unicodedata.normalize("NFC", display)
        tokens = display.split()
        if not tokens:
            raise MalformedWord(f"no words in solution display {display!r}")
        words = []
        for token in tokens:
            elided = token[-1] in APOSTROPHES
            letters = token[:-1] if elided else token
            if not letters or not letters.isalpha():
                raise MalformedWord(
                    f"solution word {token!r} has punctuation beyond a trailing apostrophe"
                )
            words.append(SolutionWord(letters, elided=elided))
        return cls(tuple(words), display)

    def stream(self) -> str:
        """Casefolded character stream with spaces and apostrophes removed."""
        return normalize(self.display, "casefold_strip_spaces_apostrophes")


@dataclass(frozen=True)
class Metadata:
    author: str | None = None
    source: str | None = None
    year: str | None = None


@dataclass(frozen=True)
class RebusPuzzle:
    """A complete puzzle: first pass, key, gold solution and provenance."""

    id: str
    first_pass: FirstPass
    key: SolutionKey
    solution: SolutionPhrase
    metadata: Metadata = field(default_factory=Metadata)


@dataclass(frozen=True)
class Violation:
    """One failed consistency check; ``index`` points at the offending word/position."""

    code: str
    index: int | None
    message: str


def concat_first_pass(fp: FirstPass) -> str:
    """Concatenate all first-pass letters into one casefolded stream."""
    raw = "".join(
        el.letters if isinstance(el, LetterRun) else el.word for el in fp.elements
    )
    return normalize(raw, "casefold_strip_spaces")


def segment(stream: str, key: SolutionKey | str) -> SolutionPhrase:
    """Cut ``stream`` into solution words at the key's cumulative lengths.

    The first word is capitalized, the rest are lowercased; elided tokens get
    a trailing apostrophe. Raises :class:`LengthMismatch` when the stream
    length differs from the key total.
    """
    if isinstance(key, str):
        key = SolutionKey.parse(key)
    if len(stream) != key.total_length:
        raise LengthMismatch(key.total_length, len(stream))
    lowered = normalize(stream, "casefold")
    words = []
    pos = 0
    for i, token in enumerate(key.tokens):
        letters = lowered[pos:pos + token.length]
        if i == 0:
            letters = letters[0].upper() + letters[1:]
        words.append(SolutionWord(letters, elided=token.elided))
        pos += token.length
    display = " ".join(w.rendered() for w in words)
    return SolutionPhrase(tuple(words), display)


def derive_key(solution: SolutionPhrase | str) -> SolutionKey:
    """Derive the solution key from solution word lengths.

    Accepts a phrase or a display string. Apostrophes mark elided tokens and
    are excluded from the letter count, so ``derive_key(segment(s, k)) == k``.
    """
    if isinstance(solution, str):
        solution = SolutionPhrase.from_display(solution)
    return SolutionKey(
        tuple(KeyToken(len(w.letters), elided=w.elided) for w in solution.words)
    )


def validate(puzzle: RebusPuzzle) -> list[Violation]:
    """Check cross-field consistency; an empty list means the puzzle is sound.

    Violations are data, not exceptions, so corrupt records can be inspected.
    """
    violations: list[Violation] = []
    fp_stream = concat_first_pass(puzzle.first_pass)
    sol_stream = puzzle.solution.stream()

    if fp_stream != sol_stream:
        index = next(
            (i for i, (a, b) in enumerate(zip(fp_stream, sol_stream)) if a != b),
            min(len(fp_stream), len(sol_stream)),
        )
        violations.append(
            Violation(
                "StreamMismatch",
                index,
                f"first pass stream {fp_stream!r} != solution stream {sol_stream!r}",
            )
        )

    if len(fp_stream) != puzzle.key.total_length:
        violations.append(
            Violation(
                "LengthMismatch",
                None,
                f"key total {puzzle.key.total_length} != first pass length {len(fp_stream)}",
            )
        )
        return violations

    # Word-level checks only make sense once the total length agrees.
    if len(puzzle.solution.words) != len(puzzle.key.tokens):
        violations.append(
            Violation(
                "KeyTokenCountMismatch",
                None,
                f"{len(puzzle.solution.words)} solution words vs {len(puzzle.key.tokens)} key tokens",
            )
        )
        return violations
    for i, (word, token) in enumerate(zip(puzzle.solution.words, puzzle.key.tokens)):
        if len(word.letters) != token.length:
            violations.append(
                Violation(
                    "WordLengthMismatch",
                    i,
                    f"word {word.rendered()!r} has {len(word.letters)} letters, key says {token.length}",
                )
            )
        if word.elided != token.elided:
            violations.append(
                Violation(
                    "ElisionMismatch",
                    i,
                    f"word {word.rendered()!r} elision disagrees with key token {token}",
                )
            )
    return violations

"""Crossword-definition lexicon: definition/word maps and a prefix trie."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from rebuskit.core import RebusError, normalize


class LexiconFormatError(RebusError):
    """A lexicon file line does not have exactly two tab-separated columns."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class TrieNode:
    __slots__ = ("children", "is_word")

    def __init__(self):
        self.children: dict[str, TrieNode] = {}
        self.is_word = False


class Trie:
    """Character prefix trie over a word set."""

    def __init__(self, words: Iterable[str] = ()):
        self.root = TrieNode()
        for word in words:
            self.insert(word)

    def insert(self, word: str) -> None:
        node = self.root
        for ch in word:
            node = node.children.setdefault(ch, TrieNode())
        node.is_word = True

    def contains(self, word: str) -> bool:
        node = self._walk(word)
        return node is not None and node.is_word

    def has_prefix(self, prefix: str) -> bool:
        return self._walk(prefix) is not None

    def _walk(self, text: str) -> TrieNode | None:
        node = self.root
        for ch in text:
            node = node.children.get(ch)
            if node is None:
                return None
        return node


class Vocabulary:
    """A word set with a prefix trie, for segment checking during search."""

    def __init__(self, words: Iterable[str]):
        self.words = frozenset(normalize(w, "casefold") for w in words)
        self.trie = Trie(sorted(self.words))

    def __contains__(self, word: str) -> bool:
        return normalize(word, "casefold") in self.words

    def __len__(self) -> int:
        return len(self.words)

    def has_prefix(self, prefix: str) -> bool:
        return self.trie.has_prefix(normalize(prefix, "casefold"))

    def union(self, extra: Iterable[str]) -> "Vocabulary":
        return Vocabulary(list(self.words) + [normalize(w, "casefold") for w in extra])


@dataclass(frozen=True)
class Lexicon:
    """Bidirectional definition/word maps plus the word vocabulary.

    Words are casefolded; definition texts are kept verbatim (stripped of
    surrounding whitespace) and looked up by exact match. Candidate lists are
    lexicographically sorted for determinism.
    """

    definition_to_words: dict[str, tuple[str, ...]]
    word_to_definitions: dict[str, tuple[str, ...]]
    vocabulary: Vocabulary

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "Lexicon":
        seen: set[tuple[str, str]] = set()
        def_words: dict[str, set[str]] = {}
        word_defs: dict[str, set[str]] = {}
        for definition, word in pairs:
            definition = definition.strip()
            word = normalize(word.strip(), "casefold")
            pair = (definition, word)
            if pair in seen:
                continue
            seen.add(pair)
            def_words.setdefault(definition, set()).add(word)
            word_defs.setdefault(word, set()).add(definition)
        return cls(
            definition_to_words={d: tuple(sorted(ws)) for d, ws in def_words.items()},
            word_to_definitions={w: tuple(sorted(ds)) for w, ds in word_defs.items()},
            vocabulary=Vocabulary(word_defs),
        )

    def words_for(self, definition: str) -> tuple[str, ...]:
        return self.definition_to_words.get(definition.strip(), ())

    def definitions_for(self, word: str) -> tuple[str, ...]:
        return self.word_to_definitions.get(normalize(word, "casefold"), ())

    def has_word(self, word: str) -> bool:
        return normalize(word, "casefold") in self.word_to_definitions

    def __len__(self) -> int:
        return sum(len(ws) for ws in self.definition_to_words.values())


def load_lexicon(path) -> Lexicon:
    """Load a UTF-8 TSV lexicon: ``definition<TAB>word``, no header.

    Whitespace-only lines are skipped; any other line without exactly two
    non-empty columns raises :class:`LexiconFormatError` with its line number.
    Duplicate pairs are deduplicated.
    """
    pairs = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        columns = line.split("\t")
        if len(columns) != 2:
            raise LexiconFormatError(path, line_no, f"expected 2 tab-separated columns, got {len(columns)}")
        definition, word = columns[0].strip(), columns[1].strip()
        if not definition or not word:
            raise LexiconFormatError(path, line_no, "empty definition or word column")
        pairs.append((definition, word))
    return Lexicon.from_pairs(pairs)


def write_lexicon(lexicon_or_pairs, path) -> None:
    """Write a lexicon back to TSV, pairs sorted for reproducible files."""
    if isinstance(lexicon_or_pairs, Lexicon):
        pairs = [
            (definition, word)
            for definition, words in lexicon_or_pairs.definition_to_words.items()
            for word in words
        ]
    else:
        pairs = list(lexicon_or_pairs)
    lines = [f"{definition}\t{word}\n" for definition, word in sorted(set(pairs))]
    Path(path).write_text("".join(lines), encoding="utf-8")

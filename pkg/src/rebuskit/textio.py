"""Serialization and text I/O: corpus files, the puzzle prompt/answer
template, and lenient parsing of model generations.

The template is fixed, byte for byte: rendering the same puzzle twice yields
identical text, and sections are always separated by exactly one blank line.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from rebuskit.core import (
    FirstPass,
    LetterRun,
    Metadata,
    RebusError,
    RebusPuzzle,
    SolutionKey,
    SolutionPhrase,
    WordSlot,
    validate,
)

SCHEMA_VERSION = 1

# Template literals. Rendering concatenates these verbatim; parsing matches
# them case-insensitively and tolerates Markdown decoration.
INSTRUCTION_LINE = (
    "Risolvi gli indizi tra parentesi per ottenere una prima lettura, "
    "e usa la chiave di lettura per ottenere la soluzione del rebus."
)
REBUS_PREFIX = "Rebus: "
KEY_PREFIX = "Chiave di lettura: "
GENERATION_HEADER = "Procediamo alla risoluzione del rebus passo per passo:"
FIRST_PASS_PREFIX = "Prima lettura: "
COMPOSE_LINE = "Ora componiamo la soluzione seguendo la chiave risolutiva:"
SOLUTION_PREFIX = "Soluzione: "


class CorpusFormatError(RebusError):
    """A corpus file line violates the schema; carries the line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class MissingDefinition(RebusError):
    """A word slot has no definition but one is required for rendering."""

    def __init__(self, slot_index: int):
        super().__init__(f"slot {slot_index} has no definition")
        self.slot_index = slot_index


@dataclass(frozen=True)
class VerbalizedRebus:
    """A rendered puzzle: the prompt shown to a solver and the gold answer.

    ``rebus_line`` and ``key_line`` hold the bare content, without the
    ``Rebus: `` / ``Chiave di lettura: `` prefixes used in ``prompt_text``.
    """

    puzzle_id: str
    prompt_text: str
    rebus_line: str
    key_line: str
    gold_generation: str


@dataclass(frozen=True)
class GenerationShape:
    """How many definition answers and key segments a generation should have."""

    n_slots: int
    n_segments: int

    @classmethod
    def from_puzzle(cls, puzzle: RebusPuzzle) -> "GenerationShape":
        return cls(len(puzzle.first_pass.slots), len(puzzle.key.tokens))


@dataclass(frozen=True)
class ParsedGeneration:
    """Best-effort structured view of a model's step-by-step answer.

    Construction never fails: absent or surplus sections are recorded in
    ``diagnostics``. When a shape is supplied, ``definition_answers`` is
    padded with ``None`` (or truncated) to one entry per word slot.
    """

    definition_answers: tuple[str | None, ...] = ()
    first_pass_line: str | None = None
    segments: tuple[tuple[str, str], ...] = ()
    solution_line: str | None = None
    diagnostics: tuple[str, ...] = ()


def render_rebus_line(fp: FirstPass) -> str:
    """Letter runs verbatim and ``[definition]`` per slot, space-joined."""
    parts = []
    slot_index = 0
    for el in fp.elements:
        if isinstance(el, LetterRun):
            parts.append(el.grouping)
        else:
            if not el.definition:
                raise MissingDefinition(slot_index)
            parts.append(f"[{el.definition}]")
            slot_index += 1
    return " ".join(parts)


def render_prompt(puzzle: RebusPuzzle) -> VerbalizedRebus:
    """Render the full prompt and gold generation for one puzzle."""
    rebus = render_rebus_line(puzzle.first_pass)
    key = str(puzzle.key)
    prompt = (
        f"{INSTRUCTION_LINE}\n\n"
        f"{REBUS_PREFIX}{rebus}\n\n"
        f"{KEY_PREFIX}{key}"
    )
    return VerbalizedRebus(
        puzzle_id=puzzle.id,
        prompt_text=prompt,
        rebus_line=rebus,
        key_line=key,
        gold_generation=render_gold_generation(puzzle),
    )


def render_gold_generation(puzzle: RebusPuzzle) -> str:
    """Render the gold step-by-step answer.

    Resolution lines echo letter runs space-separated on both sides
    ("- L O = L O") and answer each definition ("- [clue] = word"); the first
    pass keeps the source grouping; segment lines pair each key token with the
    gold solution word, apostrophe included for elisions.
    """
    resolution = []
    slot_index = 0
    for el in puzzle.first_pass.elements:
        if isinstance(el, LetterRun):
            spaced = el.spaced()
            resolution.append(f"- {spaced} = {spaced}")
        else:
            if not el.definition:
                raise MissingDefinition(slot_index)
            resolution.append(f"- [{el.definition}] = {el.word}")
            slot_index += 1
    segments = [
        f"{token} = {word.rendered()}"
        for token, word in zip(puzzle.key.tokens, puzzle.solution.words)
    ]
    return "\n\n".join(
        [
            GENERATION_HEADER,
            "\n".join(resolution),
            f"{FIRST_PASS_PREFIX}{puzzle.first_pass.rendered()}",
            COMPOSE_LINE,
            "\n".join(segments),
            f"{SOLUTION_PREFIX}{puzzle.solution.display}",
        ]
    )


_MD = r"[\s*_`>#]*"
_RESOLUTION_RE = re.compile(r"^\s*[-*•]\s*(.+?)\s*=\s*(.*?)\s*$")
_SEGMENT_RE = re.compile(r"^" + _MD + r"(\d+'?)\s*=\s*(.*?)\s*$")
_FIRST_PASS_RE = re.compile(
    r"^" + _MD + r"prima\s+lettura" + _MD + r":\s*(.*?)\s*$", re.IGNORECASE
)
_SOLUTION_RE = re.compile(
    r"^" + _MD + r"soluzione" + _MD + r":\s*(.*?)\s*$", re.IGNORECASE
)


def _strip_md(text: str) -> str:
    return text.strip().strip("*_`").strip()


def parse_generation(
    text: str,
    shape: GenerationShape | RebusPuzzle | None = None,
) -> ParsedGeneration:
    """Leniently extract the structured answer from arbitrary model output.

    Resolution lines are those starting with a bullet and containing " = ";
    only bracketed left-hand sides count as definition answers. The first
    pass and solution are the remainders of the first lines whose prefix
    matches "prima lettura:" / "soluzione:" case-insensitively, Markdown
    decoration tolerated. Never raises; problems land in ``diagnostics``.
    """
    if isinstance(shape, RebusPuzzle):
        shape = GenerationShape.from_puzzle(shape)

    answers: list[str] = []
    segments: list[tuple[str, str]] = []
    first_pass_line: str | None = None
    solution_line: str | None = None

    for line in text.splitlines():
        if first_pass_line is None:
            m = _FIRST_PASS_RE.match(line)
            if m:
                first_pass_line = _strip_md(m.group(1))
                continue
        if solution_line is None:
            m = _SOLUTION_RE.match(line)
            if m:
                solution_line = _strip_md(m.group(1))
                continue
        m = _RESOLUTION_RE.match(line)
        if m:
            if "[" in m.group(1):
                answers.append(_strip_md(m.group(2)))
            continue
        m = _SEGMENT_RE.match(line)
        if m:
            segments.append((m.group(1), _strip_md(m.group(2))))

    diagnostics: list[str] = []
    if not answers:
        diagnostics.append("no definition answers found")
    if first_pass_line is None:
        diagnostics.append("first pass line missing")
    if not segments:
        diagnostics.append("no segment lines found")
    if solution_line is None:
        diagnostics.append("solution line missing")

    definition_answers: tuple[str | None, ...] = tuple(answers)
    if shape is not None:
        if len(answers) > shape.n_slots:
            diagnostics.append(
                f"{len(answers)} definition answers for {shape.n_slots} slots; surplus ignored"
            )
        elif answers and len(answers) < shape.n_slots:
            diagnostics.append(
                f"only {len(answers)} definition answers for {shape.n_slots} slots"
            )
        padded: list[str | None] = list(answers[: shape.n_slots])
        padded.extend([None] * (shape.n_slots - len(padded)))
        definition_answers = tuple(padded)
        if segments and len(segments) != shape.n_segments:
            diagnostics.append(
                f"{len(segments)} segment lines for {shape.n_segments} key tokens"
            )

    return ParsedGeneration(
        definition_answers=definition_answers,
        first_pass_line=first_pass_line,
        segments=tuple(segments),
        solution_line=solution_line,
        diagnostics=tuple(diagnostics),
    )


_BRACKET_RE = re.compile(r"\[([^\[\]]*)\]")


def parse_rebus_line(text: str) -> list[LetterRun | str]:
    """Split rebus-line content into letter runs and definition texts.

    The inverse of :func:`render_rebus_line` for solver use: bracketed spans
    become definition strings, everything between them letter runs (grouping
    preserved).
    """
    parts: list[LetterRun | str] = []
    pos = 0
    for m in _BRACKET_RE.finditer(text):
        between = text[pos:m.start()].strip()
        if between:
            parts.append(LetterRun(between))
        parts.append(m.group(1))
        pos = m.end()
    tail = text[pos:].strip()
    if tail:
        parts.append(LetterRun(tail))
    return parts


def puzzle_to_record(puzzle: RebusPuzzle) -> dict:
    """Flatten a puzzle into its JSON-lines record."""
    elements = []
    for el in puzzle.first_pass.elements:
        if isinstance(el, LetterRun):
            elements.append({"t": "L", "s": el.grouping})
        else:
            entry = {"t": "W", "w": el.word}
            if el.definition:
                entry["d"] = el.definition
            elements.append(entry)
    record = {
        "v": SCHEMA_VERSION,
        "id": puzzle.id,
        "elements": elements,
        "key": str(puzzle.key),
        "solution": puzzle.solution.display,
    }
    for name in ("author", "source", "year"):
        value = getattr(puzzle.metadata, name)
        if value is not None:
            record[name] = value
    return record


def puzzle_from_record(record: dict) -> RebusPuzzle:
    """Rebuild a puzzle from its record; raises on schema violations."""
    if record.get("v") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {record.get('v')!r}")
    elements: list[LetterRun | WordSlot] = []
    for entry in record["elements"]:
        tag = entry.get("t")
        if tag == "L":
            elements.append(LetterRun(entry["s"]))
        elif tag == "W":
            elements.append(WordSlot(entry["w"], entry.get("d", "")))
        else:
            raise ValueError(f"unknown element tag {tag!r}")
    return RebusPuzzle(
        id=str(record["id"]),
        first_pass=FirstPass(tuple(elements)),
        key=SolutionKey.parse(record["key"]),
        solution=SolutionPhrase.from_display(record["solution"]),
        metadata=Metadata(
            author=record.get("author"),
            source=record.get("source"),
            year=record.get("year"),
        ),
    )


def read_corpus(path, strict: bool = True) -> list[RebusPuzzle]:
    """Read a JSON-lines corpus; with ``strict`` each record must validate."""
    puzzles = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(path, line_no, f"invalid JSON: {exc}") from exc
        try:
            puzzle = puzzle_from_record(record)
        except (KeyError, TypeError, ValueError, RebusError) as exc:
            raise CorpusFormatError(path, line_no, str(exc)) from exc
        if strict:
            violations = validate(puzzle)
            if violations:
                summary = "; ".join(f"{v.code}: {v.message}" for v in violations)
                raise CorpusFormatError(path, line_no, summary)
        puzzles.append(puzzle)
    return puzzles


def write_corpus(puzzles, path) -> None:
    """Write puzzles as canonical JSON lines (UTF-8, fixed field order)."""
    with open(path, "w", encoding="utf-8") as out:
        for puzzle in puzzles:
            json.dump(puzzle_to_record(puzzle), out, ensure_ascii=False)
            out.write("\n")


def write_verbalized(items, path) -> None:
    """Write rendered puzzles (prompt + gold) as JSON lines."""
    with open(path, "w", encoding="utf-8") as out:
        for item in items:
            json.dump(
                {
                    "v": SCHEMA_VERSION,
                    "id": item.puzzle_id,
                    "rebus": item.rebus_line,
                    "key": item.key_line,
                    "prompt": item.prompt_text,
                    "gold": item.gold_generation,
                },
                out,
                ensure_ascii=False,
            )
            out.write("\n")


def read_verbalized(path) -> list[VerbalizedRebus]:
    items = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            items.append(
                VerbalizedRebus(
                    puzzle_id=str(record["id"]),
                    prompt_text=record["prompt"],
                    rebus_line=record["rebus"],
                    key_line=record["key"],
                    gold_generation=record["gold"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusFormatError(path, line_no, str(exc)) from exc
    return items

"""Toolkit for building, solving and scoring verbalized Italian rebus puzzles."""

from rebuskit.core import (
    FirstPass,
    KeyToken,
    LetterRun,
    Metadata,
    RebusPuzzle,
    SolutionKey,
    SolutionPhrase,
    SolutionWord,
    WordSlot,
    concat_first_pass,
    derive_key,
    normalize,
    segment,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "FirstPass",
    "KeyToken",
    "LetterRun",
    "Metadata",
    "RebusPuzzle",
    "SolutionKey",
    "SolutionPhrase",
    "SolutionWord",
    "WordSlot",
    "concat_first_pass",
    "derive_key",
    "normalize",
    "segment",
    "validate",
]

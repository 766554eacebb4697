"""Shared fixtures: four real worked puzzles and a synthetic pipeline corpus."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from rebuskit.core import (
    FirstPass,
    LetterRun,
    Metadata,
    RebusPuzzle,
    SolutionKey,
    SolutionPhrase,
    WordSlot,
)
from rebuskit.dataset import gen_fixtures, make_fixture_lexicon
from rebuskit.textio import render_gold_generation, render_prompt


def make_puzzle(puzzle_id, elements, key, display, **meta):
    return RebusPuzzle(
        id=puzzle_id,
        first_pass=FirstPass(tuple(elements)),
        key=SolutionKey.parse(key),
        solution=SolutionPhrase.from_display(display),
        metadata=Metadata(**meta) if meta else Metadata(),
    )


@pytest.fixture
def staffettista():
    """Mixed letter-run groupings ("LO" vs "F F"), key 3 6 12 8."""
    return make_puzzle(
        "staffettista",
        [
            LetterRun("U"),
            WordSlot("nave", "Lo è il passacavallo"),
            LetterRun("LO"),
            WordSlot("cesta", "È fatta di vimini"),
            LetterRun("F F"),
            WordSlot("etti", "Decimi di chilo"),
            LetterRun("S"),
            WordSlot("tait", "Disusato soprabito"),
            LetterRun("A"),
            WordSlot("liana", "Un rampicante dei Tropici"),
        ],
        "3 6 12 8",
        "Una veloce staffettista italiana",
        author="Il Piacentino",
    )


@pytest.fixture
def malinconica():
    """Adjacent word slots and a trailing multi-letter run, key 11 5."""
    return make_puzzle(
        "malinconica",
        [
            LetterRun("M"),
            WordSlot("ali", "Two attacking footballers"),
            LetterRun("N"),
            WordSlot("coni", "Used for eating icecream"),
            WordSlot("cane", "Barks and bites"),
            LetterRun("NIA"),
        ],
        "11 5",
        "Malinconica nenia",
    )


@pytest.fixture
def sappiate():
    """Six definition slots, key 8 3 2 12 7 5."""
    return make_puzzle(
        "sappiate",
        [
            LetterRun("SAP"),
            WordSlot("pia", "La porta della breccia"),
            LetterRun("TE"),
            WordSlot("chela", "La pinza del granchio"),
            LetterRun("SBA"),
            WordSlot("data", "Si legge su alcuni orologi"),
            LetterRun("G"),
            WordSlot("ginepro", "Le sue coccole sono aromatiche"),
            LetterRun("V"),
            WordSlot("oca", "Un gioco con dadi e pedine"),
            LetterRun("D"),
            WordSlot("anni", "Sono verdi in gioventù"),
        ],
        "8 3 2 12 7 5",
        "Sappiate che la sbadataggine provoca danni",
    )


@pytest.fixture
def bellissima():
    """Elided key token (1') and an apostrophized solution word."""
    return make_puzzle(
        "bellissima",
        [
            LetterRun("B"),
            WordSlot("ellissi", "Una figura geometrica"),
            WordSlot("manovella", "La si impugna per far girare un congegno"),
            LetterRun("DA"),
            WordSlot("more", "Le produce il rovo"),
        ],
        "10 7 1' 5",
        "Bellissima novella d' amore",
    )


def build_pseudo_wordlist():
    """Deterministic consonant-vowel pseudo-words (~2.5k, lengths 4 and 6).

    Closed under syllable recombination, so streams decompose richly.
    """
    syllables = [c + v for c in "bcdfglmnprst" for v in "aeo"]
    words = [a + b for a in syllables for b in syllables]
    three = [a + b + c for a in syllables for b in syllables for c in syllables]
    words.extend(three[:: 37])
    return sorted(set(words))


@pytest.fixture(scope="session")
def pseudo_wordlist():
    return build_pseudo_wordlist()


@pytest.fixture(scope="session")
def fixture_corpus(pseudo_wordlist):
    return gen_fixtures(pseudo_wordlist, 30, seed=7)


@pytest.fixture(scope="session")
def fixture_lexicon(fixture_corpus):
    return make_fixture_lexicon(fixture_corpus, seed=11)


class GoldEchoServer:
    """Local chat-completions endpoint answering with gold generations.

    Looks up the last "Rebus: " line of the incoming prompt and replies with
    that puzzle's gold step-by-step answer; counts requests served.
    """

    def __init__(self, puzzles):
        gold_by_rebus = {
            render_prompt(p).rebus_line: render_gold_generation(p) for p in puzzles
        }

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length))
                prompt = payload["messages"][0]["content"]
                rebus_lines = [
                    line[len("Rebus: "):]
                    for line in prompt.splitlines()
                    if line.startswith("Rebus: ")
                ]
                self.server.request_count += 1
                content = gold_by_rebus[rebus_lines[-1]]
                body = json.dumps(
                    {"choices": [{"message": {"content": content}}]}
                ).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.request_count = 0
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()

    @property
    def endpoint(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1"

    @property
    def request_count(self):
        return self.server.request_count

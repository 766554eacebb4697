"""Acceptance suite: nine exit criteria, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import functools
import json
import random
import time

import numpy as np
import scipy.stats

from rebuskit.core import (
    FirstPass,
    LetterRun,
    RebusPuzzle,
    WordSlot,
    derive_key,
    segment,
    validate,
)
from rebuskit.dataset import (
    SplitSpec,
    gen_fixtures,
    make_fixture_lexicon,
    sample_definitions,
    split_id_ood,
    split_train_test,
    train_vocabularies,
)
from rebuskit.evaluation import (
    aggregate,
    evaluate_example,
    levenshtein,
    score_example,
    spearman,
)
from rebuskit.lexicon import Vocabulary
from rebuskit.llm import EndpointConfig, LlmClient, ResponseCache, run_eval
from rebuskit.solver import SolverConfig, oracle_solve, solve
from rebuskit.textio import ParsedGeneration, parse_generation, render_gold_generation, render_prompt

from conftest import GoldEchoServer, build_pseudo_wordlist, make_puzzle
from test_evaluation import _generation, reference_edit_distance
from test_textio import STAFFETTISTA_GOLD, STAFFETTISTA_PROMPT


def criterion(number, name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"[acceptance] criterion {number} ({name}): FAIL")
                raise
            print(f"[acceptance] criterion {number} ({name}): PASS")
            return result

        return wrapper

    return decorate


@criterion(1, "template fidelity")
def test_template_fidelity(staffettista, malinconica):
    start = time.perf_counter()
    verbalized = render_prompt(staffettista)
    assert verbalized.prompt_text == STAFFETTISTA_PROMPT
    assert verbalized.gold_generation == STAFFETTISTA_GOLD
    assert "Prima lettura: U nave LO cesta F F etti S tait A liana" in verbalized.gold_generation
    assert "Soluzione: Una veloce staffettista italiana" in verbalized.gold_generation

    english = render_prompt(malinconica)
    assert english.rebus_line == (
        "M [Two attacking footballers] N [Used for eating icecream] [Barks and bites] NIA"
    )
    assert english.key_line == "11 5"
    gold = english.gold_generation
    for line in (
        "- M = M",
        "- [Two attacking footballers] = ali",
        "- N = N",
        "- [Used for eating icecream] = coni",
        "- [Barks and bites] = cane",
        "- N I A = N I A",
        "Prima lettura: M ali N coni cane NIA",
        "11 = Malinconica",
        "5 = nenia",
        "Soluzione: Malinconica nenia",
    ):
        assert line in gold
    assert time.perf_counter() - start < 1.0


@criterion(2, "pipeline identity on 500 fixtures")
def test_pipeline_identity(pseudo_wordlist, bellissima):
    start = time.perf_counter()
    corpus = gen_fixtures(pseudo_wordlist, 500, seed=2024)
    lexicon = make_fixture_lexicon(corpus, seed=2024)
    assigned = sample_definitions(corpus, lexicon, seed=2024)
    assigned.append(bellissima)  # exercise elision through the same identity
    for puzzle in assigned:
        parsed = parse_generation(render_gold_generation(puzzle), shape=puzzle)
        score = score_example(puzzle, parsed)
        assert score.as_dict() == {name: 1.0 for name in score.as_dict()}, puzzle.id
    assert time.perf_counter() - start < 10.0


@criterion(3, "key handling")
def test_key_handling():
    from rebuskit.core import SolutionPhrase, normalize

    cases = [
        ("Una veloce staffettista italiana", "3 6 12 8"),
        ("Sappiate che la sbadataggine provoca danni", "8 3 2 12 7 5"),
        ("Malinconica nenia", "11 5"),
        ("Bellissima novella d' amore", "10 7 1' 5"),
    ]
    for display, expected_key in cases:
        key = derive_key(display)
        assert str(key) == expected_key
        # segment inverts derive_key on the display's own stream
        phrase = SolutionPhrase.from_display(display)
        rebuilt = segment(normalize(display, "casefold_strip_spaces_apostrophes"), key)
        assert [w.letters.casefold() for w in rebuilt.words] == [
            w.letters.casefold() for w in phrase.words
        ]
        assert [w.elided for w in rebuilt.words] == [w.elided for w in phrase.words]
        assert derive_key(rebuilt) == key


@criterion(4, "published metric vectors")
def test_metric_vectors(sappiate):
    rows = {
        "weak-prompted": (
            ["p", "chela", "ora", "ginepro", "ludo", "acerbi"],
            ["Spettacolo", "che", "fa", "sognare", "ogni", "sera"],
        ),
        "strong-prompted": (
            ["one", "chela", "data", "lio", "oca", "anni"],
            ["Saponate", "che", "la", "sbadataggine", "vocando", "danni"],
        ),
        "finetuned": (
            ["pia", "chela", "data", "ginepro", "oca", "anni"],
            ["Sappiate", "che", "la", "sbadataggine", "provoca", "danni"],
        ),
    }
    scores = {
        name: score_example(
            sappiate, parse_generation(_generation(sappiate, answers, solution), shape=sappiate)
        )
        for name, (answers, solution) in rows.items()
    }
    assert scores["weak-prompted"].def_acc == 2 / 6
    assert scores["strong-prompted"].def_acc == 4 / 6
    assert scores["finetuned"].def_acc == 6 / 6
    assert scores["finetuned"].s_words == 6 / 6
    assert scores["finetuned"].s_em == 1.0
    # Per the answer table's correctness marks: che/la/sbadataggine/danni are
    # right for the strong prompted model, one word for the weak one.
    assert scores["strong-prompted"].s_words == 4 / 6
    assert scores["weak-prompted"].s_words == 1 / 6


@criterion(5, "CER against an independent DP oracle")
def test_cer_oracle():
    rng = random.Random(555)
    alphabet = "abcdefghilmnopqrstuvzàèìòù'"
    for _ in range(1000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
        assert levenshtein(a, b) == reference_edit_distance(a, b)


@criterion(6, "solver soundness and completeness on 200 fixtures")
def test_solver_against_oracle():
    start = time.perf_counter()
    wordlist = build_pseudo_wordlist()
    corpus = gen_fixtures(wordlist, 200, seed=606)
    lexicon = make_fixture_lexicon(corpus, seed=606, max_defs_per_word=1, distractors=3)
    assigned = sample_definitions(corpus, lexicon, seed=606)
    vocab = Vocabulary(wordlist)
    config = SolverConfig(max_nodes=10**9, max_results=10**6)
    checked = 0
    for puzzle in assigned:
        product = 1
        for slot in puzzle.first_pass.slots:
            product *= len(lexicon.words_for(slot.definition))
        if product > 10**5:
            continue
        checked += 1
        fast = solve(puzzle.first_pass, puzzle.key, lexicon, vocab, config)
        slow = oracle_solve(puzzle.first_pass, puzzle.key, lexicon, vocab, config, cap=10**5)
        assert fast.exhausted
        assert {s.assignment for s in fast.solutions} == {
            s.assignment for s in slow.solutions
        }
        for solution in fast.solutions:
            elements = []
            words = iter(solution.assignment)
            for el in puzzle.first_pass.elements:
                elements.append(el if isinstance(el, LetterRun) else WordSlot(next(words)))
            rebuilt = RebusPuzzle(
                id=puzzle.id,
                first_pass=FirstPass(tuple(elements)),
                key=puzzle.key,
                solution=solution.phrase,
            )
            assert validate(rebuilt) == []
            parsed = ParsedGeneration(solution_line=solution.phrase.display)
            assert score_example(puzzle, parsed).key_match == 1.0
    assert checked == 200
    assert time.perf_counter() - start < 60.0


@criterion(7, "seen/unseen split and word-accuracy breakdown")
def test_id_ood_breakdown():
    train = [
        make_puzzle("t1", [WordSlot("casa", "la dimora"), WordSlot("matta", "folle")], "9", "Casamatta")
    ]
    p_id = make_puzzle(
        "q1", [WordSlot("casa", "la dimora"), WordSlot("matta", "folle")], "9", "Casamatta"
    )
    p_ood = make_puzzle(
        "q2",
        [WordSlot("casa", "la dimora"), WordSlot("matta", "folle"), WordSlot("zonzo", "a spasso")],
        "9 5",
        "Casamatta zonzo",
    )
    test = [p_id, p_ood]
    test_id, test_ood, _ = split_id_ood(train, test)
    assert [p.id for p in test_id] == ["q1"]
    assert [p.id for p in test_ood] == ["q2"]

    generations = {
        "q1": render_gold_generation(p_id),
        "q2": _generation(p_ood, ["casa", "matta", "zonzi"], ["Casamatta", "zonzi"]),
    }
    labels = {"q1": "id", "q2": "ood"}
    vocabs = train_vocabularies(train)
    evaluated = [
        evaluate_example(p, parse_generation(generations[p.id], shape=p)) for p in test
    ]
    report = aggregate(evaluated, labels, vocabs.fp_words, vocabs.solution_words)
    b = report.breakdown
    for subset in (b.test_id, b.test_ood):
        assert subset.fp_w_id == 1.0
        assert subset.s_w_id == 1.0
    assert b.test_id.fp_w_ood is None
    assert b.test_ood.fp_w_ood == 0.0
    assert b.test_ood.s_w_ood == 0.0


@criterion(8, "Spearman against a rank-then-Pearson oracle")
def test_spearman_oracle():
    rng = np.random.default_rng(808)
    checked = 0
    while checked < 100:
        x = rng.integers(0, 10, size=50).astype(float)
        y = rng.integers(0, 10, size=50).astype(float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        checked += 1
        result = spearman(x, y, n_tests=6)
        rx = scipy.stats.rankdata(x, method="average")
        ry = scipy.stats.rankdata(y, method="average")
        oracle_rho = float(np.corrcoef(rx, ry)[0, 1])
        assert abs(result.rho - oracle_rho) < 1e-9
        assert result.p_bonferroni == min(1.0, result.p_raw * 6)
        assert result.p_bonferroni >= result.p_raw
    assert spearman([1, 2, 3], [10, 20, 30]).rho == 1.0
    assert spearman([1, 2, 3], [30, 20, 10]).rho == -1.0


@criterion(9, "eval loop determinism with a warm cache")
def test_eval_determinism(tmp_path, fixture_corpus, fixture_lexicon):
    assigned = sample_definitions(fixture_corpus, fixture_lexicon, seed=23)
    train, test = split_train_test(assigned, SplitSpec(seed=5, test_size=6))
    cache_path = tmp_path / "cache.jsonl"
    with GoldEchoServer(assigned) as server:
        config = EndpointConfig(endpoint=server.endpoint, model="mock-model", backoff=0.0)
        client = LlmClient(config, ResponseCache(cache_path))
        report = run_eval(test, train, client, seed=3, jobs=2)
        assert all(v == 1.0 for v in report.means.values())
        first_bytes = json.dumps(report.as_dict(), ensure_ascii=False)
        first_calls = server.request_count
        assert first_calls == len(test)

        client2 = LlmClient(config, ResponseCache(cache_path))
        report2 = run_eval(test, train, client2, seed=3, jobs=2)
        assert json.dumps(report2.as_dict(), ensure_ascii=False) == first_bytes
        assert server.request_count == first_calls
        assert client2.requests_sent == 0

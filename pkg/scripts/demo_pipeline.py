#!/usr/bin/env python3
"""Offline end-to-end demo: fixtures -> lexicon -> split -> verbalize -> solve -> score.

Everything runs on synthetic data, no network needed:

    python scripts/demo_pipeline.py --n 40 --seed 7
"""

import argparse
import sys

from rebuskit.dataset import (
    SplitSpec,
    compute_stats,
    gen_fixtures,
    make_fixture_lexicon,
    sample_definitions,
    split_id_ood,
    split_train_test,
)
from rebuskit.evaluation import aggregate, evaluate_example
from rebuskit.lexicon import Vocabulary
from rebuskit.solver import SolverConfig, solve
from rebuskit.textio import parse_generation, render_gold_generation, render_prompt


def build_wordlist():
    syllables = [c + v for c in "bcdfglmnprst" for v in "aeo"]
    words = [a + b for a in syllables for b in syllables]
    words += [a + b + c for a in syllables for b in syllables for c in syllables][::37]
    return sorted(set(words))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=40)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--test-size", type=int, default=10)
    args = parser.parse_args(argv)

    wordlist = build_wordlist()
    print(f"wordlist: {len(wordlist)} pseudo-words")

    corpus = gen_fixtures(wordlist, args.n, seed=args.seed)
    lexicon = make_fixture_lexicon(corpus, seed=args.seed, distractors=3)
    corpus = sample_definitions(corpus, lexicon, seed=args.seed)
    print(f"corpus: {args.n} synthetic puzzles, lexicon: {len(lexicon)} pairs")

    stats = compute_stats(corpus)
    print(
        f"stats: {stats.first_pass.unique_words} unique first-pass words, "
        f"{stats.solution.unique_words} unique solution words"
    )

    train, test = split_train_test(corpus, SplitSpec(seed=args.seed, test_size=args.test_size))
    test_id, test_ood, _ = split_id_ood(train, test)
    print(f"split: {len(train)} train / {len(test)} test ({len(test_id)} seen, {len(test_ood)} unseen)")

    sample = render_prompt(test[0])
    print("\n--- sample prompt " + "-" * 40)
    print(sample.prompt_text)
    print("--- sample gold " + "-" * 42)
    print(sample.gold_generation)
    print("-" * 58 + "\n")

    vocab = Vocabulary(wordlist)
    config = SolverConfig(max_results=5)
    solved = 0
    for puzzle in test:
        result = solve(puzzle.first_pass, puzzle.key, lexicon, vocab, config)
        displays = {s.phrase.display for s in result.solutions}
        if puzzle.solution.display in displays:
            solved += 1
    print(f"solver: gold solution ranked in the top {config.max_results} for {solved}/{len(test)} puzzles")

    evaluated = [
        evaluate_example(p, parse_generation(render_gold_generation(p), shape=p))
        for p in test
    ]
    report = aggregate(evaluated)
    print("\nself-scored gold generations (expect a row of ones):")
    print(report.to_table())
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Word-accuracy analysis demo: does word accuracy track train frequency?

Simulates a model that recalls a first-pass word with probability growing in
its train-set frequency, then computes per-word accuracies and Spearman
correlations of accuracy vs train frequency and vs word length:

    python scripts/word_accuracy_correlations.py --n 400
"""

import argparse
import random
import sys

from rebuskit.core import WordSlot
from rebuskit.dataset import SplitSpec, gen_fixtures, make_fixture_lexicon, sample_definitions, split_train_test
from rebuskit.evaluation import spearman, word_accuracy
from rebuskit.textio import parse_generation

from demo_pipeline import build_wordlist


def simulate_generation(puzzle, train_freq, rng):
    """Step-by-step answer with frequency-dependent first-pass mistakes."""
    lines = ["Procediamo alla risoluzione del rebus passo per passo:", ""]
    fp_tokens = []
    for el in puzzle.first_pass.elements:
        if isinstance(el, WordSlot):
            p_correct = min(0.95, 0.2 + 0.15 * train_freq.get(el.word, 0))
            answer = el.word if rng.random() < p_correct else el.word[::-1] + "x"
            lines.append(f"- [{el.definition}] = {answer}")
            fp_tokens.append(answer)
        else:
            lines.append(f"- {el.spaced()} = {el.spaced()}")
            fp_tokens.append(el.grouping)
    lines += ["", "Prima lettura: " + " ".join(fp_tokens), ""]
    lines.append("Ora componiamo la soluzione seguendo la chiave risolutiva:")
    lines.append("")
    for token, word in zip(puzzle.key.tokens, puzzle.solution.words):
        lines.append(f"{token} = {word.rendered()}")
    lines += ["", "Soluzione: " + puzzle.solution.display]
    return "\n".join(lines)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=400)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args(argv)

    corpus = gen_fixtures(build_wordlist(), args.n, seed=args.seed)
    lexicon = make_fixture_lexicon(corpus, seed=args.seed)
    corpus = sample_definitions(corpus, lexicon, seed=args.seed)
    train, test = split_train_test(corpus, SplitSpec(seed=args.seed, test_size=args.n // 4))

    train_freq = {}
    for puzzle in train:
        for slot in puzzle.first_pass.slots:
            train_freq[slot.word] = train_freq.get(slot.word, 0) + 1

    rng = random.Random(args.seed)
    parsed = [
        parse_generation(simulate_generation(p, train_freq, rng), shape=p)
        for p in test
    ]
    table = word_accuracy(test, parsed, train_corpus=train)

    rows = [r for r in table.rows if r.section == "FP"]
    print(f"{len(rows)} first-pass word types, {sum(r.occurrences for r in rows)} occurrences")
    print("most frequent word types:")
    for row in sorted(rows, key=lambda r: -r.occurrences)[:10]:
        print(
            f"  {row.word:<14} acc={row.accuracy:.2f} occ={row.occurrences} "
            f"train_freq={row.train_frequency} len={row.char_length}"
        )

    accuracies = [r.accuracy for r in rows]
    n_tests = 2
    by_freq = spearman(accuracies, [r.train_frequency for r in rows], n_tests=n_tests)
    by_len = spearman(accuracies, [r.char_length for r in rows], n_tests=n_tests)
    print("\nSpearman correlation of word accuracy with:")
    for name, result in (("train frequency", by_freq), ("word length", by_len)):
        marker = "*" if result.significant else " "
        print(
            f"  {name:<16} rho={result.rho:+.3f}{marker} "
            f"(p_raw={result.p_raw:.2e}, bonferroni={result.p_bonferroni:.2e}, n={result.n})"
        )
    print("\n(* = significant at the Bonferroni-corrected 1e-5 level)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: one subcommand per pipeline stage.

Output is machine-readable JSON on stdout by default (``--pretty`` switches
the score/stats reports to aligned text tables). Options marked as
resolvable follow the precedence: command line > environment variable
(``REBUSKIT_<NAME>``) > ``--config`` JSON file > built-in default.
Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from rebuskit import dataset, evaluation, llm, solver, textio
from rebuskit.core import RebusError, SolutionKey
from rebuskit.lexicon import Vocabulary, load_lexicon, write_lexicon


def _load_config(path) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _resolve(args, name, cast=str, default=None):
    """Option precedence: CLI flag > REBUSKIT_<NAME> env > config file > default."""
    cli_value = getattr(args, name, None)
    if cli_value is not None:
        return cli_value
    env_value = os.environ.get(f"REBUSKIT_{name.upper()}")
    if env_value is not None:
        return cast(env_value)
    config = getattr(args, "_config_map", {})
    if name in config:
        return cast(config[name])
    return default


def _emit(args, payload) -> None:
    json.dump(payload, sys.stdout, ensure_ascii=False)
    sys.stdout.write("\n")


def _verbose(args, resolved: dict) -> None:
    if args.verbose:
        print(f"resolved options: {json.dumps(resolved, ensure_ascii=False)}", file=sys.stderr)


def cmd_fixtures(args) -> int:
    seed = _resolve(args, "seed", int, 0)
    puzzles = dataset.gen_fixtures(args.wordlist, args.n, seed)
    textio.write_corpus(puzzles, args.out)
    result = {"n": len(puzzles), "corpus": str(args.out)}
    if args.lexicon_out:
        lex = dataset.make_fixture_lexicon(
            puzzles, seed, distractors=args.distractors
        )
        write_lexicon(lex, args.lexicon_out)
        result["lexicon"] = str(args.lexicon_out)
        result["lexicon_pairs"] = len(lex)
    _verbose(args, {"seed": seed})
    _emit(args, result)
    return 0


def _stats_table(stats: dataset.CorpusStats) -> str:
    def sec(name, s: dataset.SectionStats):
        return [
            f"-- {name} --",
            f"unique words      {s.unique_words}",
            f"avg/sd words/ex   {s.words_per_example_mean:.2f}/{s.words_per_example_sd:.2f}",
            f"avg/sd word len   {s.word_length_mean:.2f}/{s.word_length_sd:.2f}",
            f"avg/sd seq len    {s.sequence_length_mean:.2f}/{s.sequence_length_sd:.2f}",
        ]

    years = (
        f"{stats.year_min} - {stats.year_max}"
        if stats.year_min is not None
        else "n/a"
    )
    lines = [
        f"examples          {stats.n_examples}",
        f"authors           {stats.n_authors}",
        f"year range        {years}",
        *sec("first pass", stats.first_pass),
        *sec("solution", stats.solution),
    ]
    return "\n".join(lines)


def _stats_dict(stats: dataset.CorpusStats) -> dict:
    def sec(s: dataset.SectionStats):
        return {
            "unique_words": s.unique_words,
            "words_per_example": [s.words_per_example_mean, s.words_per_example_sd],
            "word_length": [s.word_length_mean, s.word_length_sd],
            "sequence_length": [s.sequence_length_mean, s.sequence_length_sd],
        }

    return {
        "n_examples": stats.n_examples,
        "n_authors": stats.n_authors,
        "year_range": [stats.year_min, stats.year_max],
        "first_pass": sec(stats.first_pass),
        "solution": sec(stats.solution),
    }


def cmd_stats(args) -> int:
    corpus = textio.read_corpus(args.corpus)
    stats = dataset.compute_stats(corpus)
    if args.pretty:
        print(_stats_table(stats))
    else:
        _emit(args, _stats_dict(stats))
    return 0


def cmd_split(args) -> int:
    seed = _resolve(args, "seed", int, 0)
    corpus = textio.read_corpus(args.corpus)
    spec = dataset.SplitSpec(seed=seed, test_size=args.test_size, shuffle=not args.no_shuffle)
    train, test = dataset.split_train_test(corpus, spec)
    textio.write_corpus(train, args.train_out)
    textio.write_corpus(test, args.test_out)
    result = {"train": len(train), "test": len(test)}
    if args.id_out or args.ood_out:
        test_id, test_ood, _ = dataset.split_id_ood(train, test)
        if args.id_out:
            textio.write_corpus(test_id, args.id_out)
        if args.ood_out:
            textio.write_corpus(test_ood, args.ood_out)
        result.update({"test_id": len(test_id), "test_ood": len(test_ood)})
    _verbose(args, {"seed": seed})
    _emit(args, result)
    return 0


def cmd_verbalize(args) -> int:
    seed = _resolve(args, "seed", int, 0)
    corpus = textio.read_corpus(args.corpus)
    dropped = []
    needs_lexicon = args.filter_coverage or not args.no_sample
    if needs_lexicon and not args.lexicon:
        print("verbalize: --lexicon is required unless --no-sample is given", file=sys.stderr)
        return 2
    if needs_lexicon:
        lexicon = load_lexicon(args.lexicon)
    if args.filter_coverage:
        corpus, dropped = dataset.filter_coverage(corpus, lexicon)
    if not args.no_sample:
        corpus = dataset.sample_definitions(corpus, lexicon, seed)
    rendered = [textio.render_prompt(p) for p in corpus]
    textio.write_verbalized(rendered, args.out)
    if args.assigned_out:
        textio.write_corpus(corpus, args.assigned_out)
    _verbose(args, {"seed": seed})
    _emit(args, {"verbalized": len(rendered), "dropped": len(dropped), "out": str(args.out)})
    return 0


def _load_freq_table(path) -> dict[str, float]:
    table = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        word, _, count = line.partition("\t")
        table[word.strip()] = float(count) if count.strip() else 0.0
    return table


def cmd_solve(args) -> int:
    jobs = _resolve(args, "jobs", int, os.cpu_count() or 1)
    items = textio.read_verbalized(args.verbalized)
    lexicon = load_lexicon(args.lexicon)
    words = set(lexicon.vocabulary.words)
    if args.train:
        for puzzle in textio.read_corpus(args.train):
            words.update(w.letters for w in puzzle.solution.words)
    if args.vocab:
        for line in Path(args.vocab).read_text(encoding="utf-8").splitlines():
            if line.strip():
                words.add(line.strip())
    vocab = Vocabulary(words)
    config = solver.SolverConfig(
        max_nodes=args.budget,
        max_results=args.max_results,
        rank_by=args.rank_by,
        frequency_table=_load_freq_table(args.freq_table) if args.freq_table else None,
    )

    def solve_one(item):
        elements = textio.parse_rebus_line(item.rebus_line)
        key = SolutionKey.parse(item.key_line)
        result = solver.solve(elements, key, lexicon, vocab, config)
        return {
            "id": item.puzzle_id,
            "solutions": [
                {
                    "words": [w.rendered() for w in s.phrase.words],
                    "assignment": list(s.assignment),
                    "score": s.score,
                }
                for s in result.solutions
            ],
            "nodes_expanded": result.nodes_expanded,
            "exhausted": result.exhausted,
        }

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(solve_one, items))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for row in results:
            json.dump(row, out, ensure_ascii=False)
            out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    _verbose(args, {"jobs": jobs})
    return 0


def _read_generations(path) -> dict[str, str]:
    generations = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            generations[str(record["id"])] = record["generation"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise textio.CorpusFormatError(path, line_no, str(exc)) from exc
    return generations


def cmd_score(args) -> int:
    jobs = _resolve(args, "jobs", int, os.cpu_count() or 1)
    corpus = textio.read_corpus(args.corpus)
    generations = _read_generations(args.generations)

    def score_one(puzzle):
        parsed = textio.parse_generation(generations.get(puzzle.id, ""), shape=puzzle)
        return evaluation.evaluate_example(puzzle, parsed)

    ordered = sorted(corpus, key=lambda p: p.id)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        evaluated = list(pool.map(score_one, ordered))
    labels = fp_vocab = s_vocab = None
    if args.train:
        train = textio.read_corpus(args.train)
        test_id, test_ood, _ = dataset.split_id_ood(train, corpus)
        labels = {p.id: "id" for p in test_id}
        labels.update({p.id: "ood" for p in test_ood})
        vocabs = dataset.train_vocabularies(train)
        fp_vocab, s_vocab = vocabs.fp_words, vocabs.solution_words
    report = evaluation.aggregate(evaluated, labels, fp_vocab, s_vocab)
    if args.pretty:
        print(report.to_table())
    else:
        _emit(args, report.as_dict())
    return 0


def cmd_eval(args) -> int:
    endpoint = _resolve(args, "endpoint")
    model = _resolve(args, "model")
    cache_path = _resolve(args, "cache")
    seed = _resolve(args, "seed", int, 0)
    jobs = _resolve(args, "jobs", int, 4)
    if not endpoint or not model:
        print("eval: --endpoint and --model are required (flag, env or config)", file=sys.stderr)
        return 2
    test = textio.read_corpus(args.test)
    train = textio.read_corpus(args.train)
    config = llm.EndpointConfig(
        endpoint=endpoint,
        model=model,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
        api_key_env=args.api_key_env,
        max_requests=args.max_requests,
    )
    cache = llm.ResponseCache(cache_path) if cache_path else None
    client = llm.LlmClient(config, cache)
    report = llm.run_eval(test, train, client, seed, jobs=jobs, breakdown=args.breakdown)
    _verbose(
        args,
        {"endpoint": endpoint, "model": model, "cache": cache_path, "seed": seed, "jobs": jobs},
    )
    if args.pretty:
        print(report.to_table())
    else:
        _emit(args, report.as_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rebuskit",
        description="Build, solve and score verbalized rebus benchmarks.",
    )
    parser.add_argument("--config", help="JSON file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--pretty", action="store_true", help="human-readable output")
        p.add_argument("--verbose", action="store_true", help="print resolved options to stderr")

    p = sub.add_parser("fixtures", help="generate synthetic puzzles from a wordlist")
    p.add_argument("--wordlist", required=True, help="UTF-8 wordlist, one word per line")
    p.add_argument("--n", type=int, required=True, help="number of puzzles")
    p.add_argument("--seed", type=int, help="generator seed")
    p.add_argument("--out", required=True, help="output corpus (JSON lines)")
    p.add_argument("--lexicon-out", help="also write a covering synthetic lexicon (TSV)")
    p.add_argument("--distractors", type=int, default=0, help="extra candidates per definition")
    common(p)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--corpus", required=True)
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="seeded train/test split, optional seen/unseen subsets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--test-size", type=int, required=True)
    p.add_argument("--seed", type=int, help="shuffle seed")
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--id-out", help="test subset whose first-pass words all occur in train")
    p.add_argument("--ood-out", help="test subset with at least one unseen first-pass word")
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("verbalize", help="assign definitions and render prompts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", help="definition TSV (required unless --no-sample without --filter-coverage)")
    p.add_argument("--seed", type=int, help="definition sampling seed")
    p.add_argument("--filter-coverage", action="store_true", help="drop puzzles with uncovered words")
    p.add_argument("--no-sample", action="store_true", help="keep definitions already in the corpus")
    p.add_argument("--out", required=True, help="verbalized prompts (JSON lines)")
    p.add_argument("--assigned-out", help="also write the corpus with assigned definitions")
    common(p)
    p.set_defaults(func=cmd_verbalize)

    p = sub.add_parser("solve", help="search for solutions of verbalized puzzles")
    p.add_argument("--verbalized", required=True, help="output of the verbalize subcommand")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--vocab", help="extra solution vocabulary, one word per line")
    p.add_argument("--train", help="corpus whose solution words extend the vocabulary")
    p.add_argument("--budget", type=int, default=1_000_000, help="search node budget")
    p.add_argument("--max-results", type=int, default=100)
    p.add_argument("--rank-by", choices=("vocabulary-frequency", "none"), default="none")
    p.add_argument("--freq-table", help="word<TAB>count table for frequency ranking")
    p.add_argument("--jobs", type=int, help="parallel puzzles (default: cpu count)")
    p.add_argument("--out", help="write results here instead of stdout")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("score", help="score a generations file against a gold corpus")
    p.add_argument("--corpus", required=True, help="gold corpus")
    p.add_argument("--generations", required=True, help='JSON lines: {"id", "generation"}')
    p.add_argument("--train", help="train corpus enabling the seen/unseen breakdown")
    p.add_argument("--jobs", type=int, help="parallel scoring (default: cpu count)")
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="few-shot query an endpoint and score the answers")
    p.add_argument("--test", required=True, help="test corpus with definitions")
    p.add_argument("--train", required=True, help="train corpus providing demonstrations")
    p.add_argument("--endpoint", help="chat-completions base URL")
    p.add_argument("--model", help="model identifier")
    p.add_argument("--cache", help="response cache file (JSON lines)")
    p.add_argument("--seed", type=int, help="demonstration selection seed")
    p.add_argument("--jobs", type=int, help="bounded request concurrency (default 4)")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-tokens", type=int, default=1024)
    p.add_argument("--max-requests", type=int, help="hard request budget")
    p.add_argument("--api-key-env", default=llm.API_KEY_ENV,
                   help="environment variable holding the bearer credential")
    p.add_argument("--breakdown", action="store_true", help="include the seen/unseen breakdown")
    common(p)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config_map = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"rebuskit: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (RebusError, OSError, ValueError) as exc:
        print(f"rebuskit: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

"""Corpus pipeline: filtering, sampling, splits, stats, fixture generation."""

import math

import pytest

from rebuskit.core import LetterRun, WordSlot, validate
from rebuskit.dataset import (
    NoDefinition,
    SplitSpec,
    choice_index,
    compute_stats,
    filter_coverage,
    gen_fixtures,
    make_fixture_lexicon,
    sample_definitions,
    split_id_ood,
    split_train_test,
    train_vocabularies,
)
from rebuskit.lexicon import Lexicon

from conftest import make_puzzle


@pytest.fixture
def mini_lexicon():
    return Lexicon.from_pairs(
        [
            ("def nave 1", "nave"),
            ("def nave 2", "nave"),
            ("def nave 3", "nave"),
            ("def cesta", "cesta"),
            ("def etti", "etti"),
            ("def tait", "tait"),
            ("def liana", "liana"),
        ]
    )


class TestFilterCoverage:
    def test_unknown_word_dropped(self, staffettista, mini_lexicon):
        kept, dropped = filter_coverage([staffettista], mini_lexicon)
        assert kept == [staffettista]
        no_tait = Lexicon.from_pairs(
            [(d, w) for d, ws in mini_lexicon.definition_to_words.items() for w in ws if w != "tait"]
        )
        kept, dropped = filter_coverage([staffettista], no_tait)
        assert kept == [] and dropped == [staffettista]

    def test_empty_lexicon_drops_all(self, staffettista, bellissima):
        kept, dropped = filter_coverage([staffettista, bellissima], Lexicon.from_pairs([]))
        assert kept == []
        assert len(dropped) == 2

    def test_idempotent(self, fixture_corpus, fixture_lexicon):
        kept, _ = filter_coverage(fixture_corpus, fixture_lexicon)
        again, _ = filter_coverage(kept, fixture_lexicon)
        assert again == kept


class TestSampleDefinitions:
    def test_single_candidate(self, staffettista, mini_lexicon):
        (assigned,) = sample_definitions([staffettista], mini_lexicon, seed=123)
        slots = assigned.first_pass.slots
        assert slots[1].definition == "def cesta"

    def test_deterministic(self, fixture_corpus, fixture_lexicon):
        a = sample_definitions(fixture_corpus, fixture_lexicon, seed=5)
        b = sample_definitions(fixture_corpus, fixture_lexicon, seed=5)
        assert a == b

    def test_seed_changes_assignments(self, staffettista, mini_lexicon):
        picks = {
            sample_definitions([staffettista], mini_lexicon, seed=s)[0]
            .first_pass.slots[0]
            .definition
            for s in range(40)
        }
        assert len(picks) > 1

    def test_missing_word_raises(self, staffettista):
        with pytest.raises(NoDefinition):
            sample_definitions([staffettista], Lexicon.from_pairs([]), seed=1)

    def test_uniform_within_5_sigma(self):
        # 30k keyed draws over 3 candidates; bound each count by 5 sigma.
        n, k = 30_000, 3
        counts = [0] * k
        for i in range(n):
            counts[choice_index(99, f"p{i}", 0, k)] += 1
        expected = n / k
        sigma = math.sqrt(n * (1 / k) * (1 - 1 / k))
        for count in counts:
            assert abs(count - expected) < 5 * sigma

    def test_insertion_does_not_reshuffle(self, fixture_corpus, fixture_lexicon):
        full = sample_definitions(fixture_corpus, fixture_lexicon, seed=17)
        subset = sample_definitions(fixture_corpus[1:], fixture_lexicon, seed=17)
        assert full[1:] == subset


class TestSplit:
    def test_disjoint_exhaustive(self, fixture_corpus):
        train, test = split_train_test(fixture_corpus, SplitSpec(seed=3, test_size=10))
        assert len(train) + len(test) == len(fixture_corpus)
        assert {p.id for p in train}.isdisjoint({p.id for p in test})
        assert {p.id for p in train} | {p.id for p in test} == {
            p.id for p in fixture_corpus
        }

    def test_seed_reproducible(self, fixture_corpus):
        a = split_train_test(fixture_corpus, SplitSpec(seed=3, test_size=10))
        b = split_train_test(fixture_corpus, SplitSpec(seed=3, test_size=10))
        assert a == b

    def test_zero_test_size(self, fixture_corpus):
        train, test = split_train_test(fixture_corpus, SplitSpec(seed=3, test_size=0))
        assert test == []
        assert len(train) == len(fixture_corpus)

    def test_oversized_test(self, fixture_corpus):
        with pytest.raises(ValueError):
            split_train_test(fixture_corpus, SplitSpec(seed=3, test_size=len(fixture_corpus) + 1))

    def test_input_order_irrelevant(self, fixture_corpus):
        a = split_train_test(fixture_corpus, SplitSpec(seed=3, test_size=10))
        b = split_train_test(list(reversed(fixture_corpus)), SplitSpec(seed=3, test_size=10))
        assert a == b


class TestIdOod:
    def test_shared_words_are_id(self):
        train = [make_puzzle("t1", [WordSlot("casa"), WordSlot("matta")], "9", "Casamatta")]
        test = [make_puzzle("q1", [WordSlot("casa"), WordSlot("matta")], "9", "Casamatta")]
        test_id, test_ood, vocab = split_id_ood(train, test)
        assert [p.id for p in test_id] == ["q1"]
        assert test_ood == []
        assert vocab == {"casa", "matta"}

    def test_nonce_word_is_ood(self):
        train = [make_puzzle("t1", [WordSlot("casa"), WordSlot("matta")], "9", "Casamatta")]
        test = [
            make_puzzle("q1", [WordSlot("casa"), WordSlot("matta")], "9", "Casamatta"),
            make_puzzle("q2", [WordSlot("casa"), WordSlot("zonzo")], "4 5", "Casa zonzo"),
        ]
        test_id, test_ood, vocab = split_id_ood(train, test)
        assert [p.id for p in test_id] == ["q1"]
        assert [p.id for p in test_ood] == ["q2"]

    def test_exact_set_property(self, fixture_corpus):
        train, test = split_train_test(fixture_corpus, SplitSpec(seed=3, test_size=12))
        test_id, test_ood, vocab = split_id_ood(train, test)
        for puzzle in test_id:
            assert all(s.word in vocab for s in puzzle.first_pass.slots)
        for puzzle in test_ood:
            assert any(s.word not in vocab for s in puzzle.first_pass.slots)
        assert len(test_id) + len(test_ood) == len(test)

    def test_train_vocabularies(self):
        train = [make_puzzle("t1", [WordSlot("casa"), WordSlot("matta")], "9", "Casamatta")]
        vocabs = train_vocabularies(train)
        assert vocabs.fp_words == {"casa", "matta"}
        assert vocabs.solution_words == {"casamatta"}


class TestStats:
    def test_hand_computed(self):
        corpus = [
            make_puzzle("a", [WordSlot("casa"), WordSlot("matta")], "9", "Casamatta", year="1960"),
            make_puzzle(
                "b",
                [WordSlot("casa"), LetterRun("L"), WordSlot("matta"), WordSlot("casa"), WordSlot("matta")],
                "10 9",
                "Casalmatta casamatta",
                author="aldo",
                year="1970",
            ),
        ]
        stats = compute_stats(corpus)
        assert stats.n_examples == 2
        assert stats.n_authors == 1
        assert (stats.year_min, stats.year_max) == (1960, 1970)
        fp = stats.first_pass
        assert fp.unique_words == 2
        assert fp.words_per_example_mean == pytest.approx(3.0)
        assert fp.words_per_example_sd == pytest.approx(1.0)
        # sequences: "casa matta" (10) and "casa L matta casa matta" (23)
        assert fp.sequence_length_mean == pytest.approx(16.5)
        sol = stats.solution
        assert sol.unique_words == 2
        assert sol.words_per_example_mean == pytest.approx(1.5)
        assert sol.word_length_mean == pytest.approx((9 + 10 + 9) / 3)

    def test_permutation_invariant(self, fixture_corpus):
        assert compute_stats(fixture_corpus) == compute_stats(list(reversed(fixture_corpus)))

    def test_empty_corpus(self):
        stats = compute_stats([])
        assert stats.n_examples == 0
        assert stats.year_min is None
        assert stats.first_pass.unique_words == 0
        assert stats.first_pass.sequence_length_mean == 0.0


class TestGenFixtures:
    def test_all_valid(self, fixture_corpus):
        for puzzle in fixture_corpus:
            assert validate(puzzle) == []

    def test_deterministic(self, pseudo_wordlist):
        assert gen_fixtures(pseudo_wordlist, 5, seed=21) == gen_fixtures(
            pseudo_wordlist, 5, seed=21
        )

    def test_fifty_over_2k_wordlist(self, pseudo_wordlist):
        assert len(pseudo_wordlist) >= 2000
        puzzles = gen_fixtures(pseudo_wordlist, 50, seed=42)
        assert len(puzzles) == 50
        assert all(validate(p) == [] for p in puzzles)

    def test_wordlist_from_file(self, tmp_path, pseudo_wordlist):
        path = tmp_path / "words.txt"
        path.write_text("\n".join(pseudo_wordlist[:200]) + "\n", encoding="utf-8")
        puzzles = gen_fixtures(path, 3, seed=1)
        assert len(puzzles) == 3

    def test_empty_wordlist(self):
        with pytest.raises(ValueError):
            gen_fixtures([], 1, seed=0)


class TestFixtureLexicon:
    def test_covers_corpus(self, fixture_corpus, fixture_lexicon):
        kept, dropped = filter_coverage(fixture_corpus, fixture_lexicon)
        assert dropped == []

    def test_distractors_add_candidates(self, fixture_corpus):
        lex = make_fixture_lexicon(fixture_corpus, seed=2, distractors=3)
        some_word = fixture_corpus[0].first_pass.slots[0].word
        assert len(lex.words_for(f"indizio 1 per {some_word}")) >= 2

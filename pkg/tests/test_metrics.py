import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdsgen.corpus import Utterance
from cdsgen.errors import MeasureUndefinedError
from cdsgen.metrics import (
    FrequencyDistribution,
    bootstrap,
    contiguous_strings,
    jsd,
    lexical_divergence,
    mean_utterance_length,
    perplexity,
    quadratic_fit,
    ttr,
)


def _dist(**probs):
    return FrequencyDistribution(probs=dict(probs), total_count=100)


class TestTTR:
    def test_all_same(self):
        assert ttr(["dog", "dog", "dog"]) == pytest.approx(1 / 3)

    def test_all_distinct(self):
        assert ttr(["a", "b", "c", "d"]) == 1.0

    def test_mixed(self):
        assert ttr(["the", "dog", "the"]) == pytest.approx(2 / 3)

    def test_empty_undefined(self):
        with pytest.raises(MeasureUndefinedError):
            ttr([])

    @given(st.lists(st.sampled_from("abcde"), min_size=1, max_size=30), st.randoms())
    def test_permutation_invariant_and_bounded(self, lemmas, rnd):
        value = ttr(lemmas)
        assert 0 < value <= 1
        shuffled = list(lemmas)
        rnd.shuffle(shuffled)
        assert ttr(shuffled) == value


class TestMeanUtteranceLength:
    def test_basic(self):
        utts = [Utterance(("go", "ahead"), 6.0), Utterance(("yeah",), 6.0)]
        assert mean_utterance_length(utts) == 1.5

    def test_single(self):
        assert mean_utterance_length([Utterance(tuple("abcdefg"), 6.0)]) == 7

    def test_matches_direct_average_oracle(self):
        rng = np.random.default_rng(0)
        utts = [
            Utterance(tuple(f"w{i}" for i in range(rng.integers(1, 12))), 6.0)
            for _ in range(1000)
        ]
        direct = sum(len(u.words) for u in utts) / len(utts)
        assert mean_utterance_length(utts) == pytest.approx(direct)

    def test_empty_undefined(self):
        with pytest.raises(MeasureUndefinedError):
            mean_utterance_length([])


class TestJSD:
    def test_identity(self):
        p = _dist(a=0.5, b=0.5)
        assert jsd(p, p) == 0.0

    def test_disjoint_supports_is_one_bit(self):
        assert jsd(_dist(a=0.4, b=0.6), _dist(c=1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_derived_value(self):
        # direct evaluation of the two base-2 KL terms:
        # KL(p||m) = 0.5 lg(0.5/0.75) + 0.5 lg(0.5/0.25), KL(q||m) = lg(4/3)
        expected = 0.5 * (
            0.5 * math.log2(0.5 / 0.75) + 0.5 * math.log2(0.5 / 0.25)
        ) + 0.5 * math.log2(1.0 / 0.75)
        assert expected == pytest.approx(0.31127812445913283)
        assert jsd(_dist(a=0.5, b=0.5), _dist(a=1.0)) == pytest.approx(expected, abs=1e-12)

    @given(
        st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6),
        st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6),
    )
    @settings(max_examples=100)
    def test_symmetric_and_bounded(self, pw, qw):
        p = FrequencyDistribution.from_counts({f"p{i}": w for i, w in enumerate(pw)})
        q = FrequencyDistribution.from_counts({f"p{i}": w for i, w in enumerate(qw)})
        d = jsd(p, q)
        assert abs(d - jsd(q, p)) < 1e-12
        assert 0.0 <= d <= 1.0 + 1e-12


class TestLexicalDivergence:
    def test_identical_samples(self):
        sample = ["a", "a", "b", "b", "c"]
        assert lexical_divergence(sample, list(sample)) == 0.0

    def test_all_singletons_undefined(self):
        with pytest.raises(MeasureUndefinedError):
            lexical_divergence(["a", "b", "c"], ["a", "a", "b", "b"])

    def test_hand_computed_filtered_jsd(self):
        # sample: a x2, b x2, c x1 -> filter -> {a: .5, b: .5}
        # reference: a x4 (singleton d dropped) -> {a: 1}
        left = ["a", "a", "b", "b", "c"]
        right = ["a", "a", "a", "a", "d"]
        expected = jsd(_dist(a=0.5, b=0.5), _dist(a=1.0))
        assert lexical_divergence(left, right) == pytest.approx(expected, abs=1e-12)


class TestPerplexity:
    def test_uniform_model(self):
        v = 50
        logprobs = [math.log(1 / v)] * 10
        assert perplexity(logprobs) == pytest.approx(v)

    def test_certain_model(self):
        assert perplexity([0.0, 0.0]) == pytest.approx(1.0)

    def test_closed_form(self):
        assert perplexity([-1.0, -2.0, -3.0]) == pytest.approx(math.e**2)

    def test_monotone_in_each_logprob(self):
        base = [-1.0, -0.5, -2.0]
        p0 = perplexity(base)
        for i in range(3):
            worse = list(base)
            worse[i] -= 0.1
            assert perplexity(worse) > p0

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            perplexity([-1.0, float("-inf")])

    def test_empty_undefined(self):
        with pytest.raises(MeasureUndefinedError):
            perplexity([])


class TestQuadraticFit:
    def test_exact_recovery(self):
        points = [(x, 2 * x * x + 1) for x in (1.0, 2.0, 3.0, 4.0)]
        fit = quadratic_fit(points)
        assert fit.a == pytest.approx(2.0, abs=1e-9)
        assert fit.b == pytest.approx(0.0, abs=1e-9)
        assert fit.c == pytest.approx(1.0, abs=1e-9)

    def test_collinear_points_give_zero_curvature(self):
        fit = quadratic_fit([(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)])
        assert fit.a == pytest.approx(0.0, abs=1e-9)
        assert fit.b == pytest.approx(2.0, abs=1e-9)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 10, size=100)
        y = 1.5 * x**2 - 0.7 * x + 2.0 + rng.normal(0, 0.5, size=100)
        design = np.column_stack([x**2, x, np.ones_like(x)])
        oracle = np.linalg.solve(design.T @ design, design.T @ y)
        fit = quadratic_fit(list(zip(x, y)))
        assert np.allclose([fit.a, fit.b, fit.c], oracle, atol=1e-9)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(0, 5, size=50)
        y = x**2 + rng.normal(0, 1, size=50)
        fit = quadratic_fit(list(zip(x, y)))
        resid = y - (fit.a * x**2 + fit.b * x + fit.c)
        for basis in (np.ones_like(x), x, x**2):
            assert abs(resid @ basis) < 1e-8

    def test_too_few_distinct_x(self):
        with pytest.raises(ValueError):
            quadratic_fit([(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)])


class TestBootstrap:
    def _corpus(self, n=500, seed=0):
        rng = np.random.default_rng(seed)
        return [
            Utterance(
                tuple(f"w{rng.integers(0, 40)}" for _ in range(rng.integers(1, 9))), 6.0
            )
            for _ in range(n)
        ]

    def test_constant_measure(self):
        dist = bootstrap("const", lambda s: 3.5, self._corpus(), "real", 6.0,
                         n_subsamples=1, utterances_per_sample=10)
        assert dist.values == [3.5]

    def test_deterministic_under_fixed_seed(self):
        corpus = self._corpus()
        kwargs = dict(unit="words", n_subsamples=10, words_per_sample=200, master_seed=42)
        a = bootstrap("ttr", lambda s: ttr([w for u in s for w in u.words]), corpus, "real", 6.0, **kwargs)
        b = bootstrap("ttr", lambda s: ttr([w for u in s for w in u.words]), corpus, "real", 6.0, **kwargs)
        assert a.values == b.values

    def test_word_budget_reached_but_not_overshot_by_more_than_one_utterance(self):
        corpus = self._corpus()
        dist = bootstrap(
            "nwords", lambda s: sum(len(u.words) for u in s), corpus, "real", 6.0,
            unit="words", n_subsamples=20, words_per_sample=100,
        )
        max_len = max(len(u.words) for u in corpus)
        assert all(100 <= v < 100 + max_len for v in dist.values)

    def test_ttr_bootstrap_mean_close_to_direct_resampling_oracle(self):
        corpus = self._corpus(n=2000, seed=1)

        def word_ttr(sample):
            return ttr([w for u in sample for w in u.words])

        dist = bootstrap("ttr", word_ttr, corpus, "real", 6.0, unit="words",
                         n_subsamples=100, words_per_sample=500, master_seed=0)
        boot_mean = np.mean(dist.values)
        # independent direct resampling with a different generator
        rng = np.random.default_rng(999)
        direct = []
        for _ in range(100):
            sample = []
            words = 0
            while words < 500:
                u = corpus[int(rng.integers(0, len(corpus)))]
                sample.append(u)
                words += len(u.words)
            direct.append(word_ttr(sample))
        sd = np.std(direct)
        assert abs(boot_mean - np.mean(direct)) < 2 * sd

    def test_empty_corpus_undefined(self):
        with pytest.raises(MeasureUndefinedError):
            bootstrap("mlu", mean_utterance_length, [], "real", 6.0)


class TestContiguousStrings:
    def test_strings_meet_word_minimum(self):
        rng = np.random.default_rng(0)
        utts = [Utterance(("a", "b", "c"), 6.0)] * 200
        strings = contiguous_strings(utts, n_strings=10, min_words=50, rng=rng)
        assert len(strings) == 10
        for s in strings:
            assert sum(len(u.words) for u in s) >= 50

    def test_strings_are_contiguous(self):
        utts = [Utterance((f"u{i}",), 6.0) for i in range(100)]
        rng = np.random.default_rng(1)
        (string,) = contiguous_strings(utts, n_strings=1, min_words=5, rng=rng)
        indices = [int(u.words[0][1:]) for u in string]
        assert indices == list(range(indices[0], indices[0] + len(indices)))

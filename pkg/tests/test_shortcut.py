from __future__ import annotations

import math

import numpy as np
import pytest

from driftscope.errors import ConfigInvalid, SpurTokenAbsent, UnknownExample
from driftscope.metrics import normalize
from driftscope.shortcut import SpurConfig, spur_mass, spur_mass_curve
from driftscope.toylab import TinyClassifier, grad_x_input_attribution, shortcut_task_config
from driftscope.toylab.corpus import generate_corpus

from .conftest import make_normalized


class TestSpurConfig:
    def test_equal_tokens_rejected(self):
        with pytest.raises(ConfigInvalid, match="pos_token"):
            SpurConfig(pos_token=3, neg_token=3, injection_prob=0.5)

    def test_probability_out_of_range_rejected(self):
        with pytest.raises(ConfigInvalid, match="injection_prob"):
            SpurConfig(pos_token=0, neg_token=1, injection_prob=1.5)


class TestSpurMass:
    def test_single_occurrence(self):
        attr = make_normalized((0.6, 0.1, 0.3), token_ids=(99, 5, 6))
        assert spur_mass(attr, 99) == pytest.approx(0.6, abs=1e-15)

    def test_multiple_occurrences_sum(self):
        attr = make_normalized((0.2, 0.5, 0.1, 0.2), token_ids=(7, 3, 7, 4))
        assert spur_mass(attr, 7) == pytest.approx(0.3, abs=1e-15)

    def test_uniform_weights_give_one_over_n(self):
        n = 8
        attr = make_normalized((1.0 / n,) * n, token_ids=(42, *range(n - 1)))
        assert spur_mass(attr, 42) == pytest.approx(1.0 / n, abs=1e-15)

    def test_absent_token_raises(self):
        attr = make_normalized((0.5, 0.5), token_ids=(1, 2))
        with pytest.raises(SpurTokenAbsent):
            spur_mass(attr, 99)

    def test_mass_plus_rest_equals_total(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 24))
            weights = np.abs(rng.normal(size=n))
            weights /= weights.sum() + 1e-12
            tokens = tuple(int(t) for t in rng.integers(0, 6, size=n))
            attr = make_normalized(tuple(weights), token_ids=tokens)
            spur_token = tokens[0]
            mass = spur_mass(attr, spur_token)
            rest = math.fsum(w for w, t in zip(attr.weights, tokens) if t != spur_token)
            total = math.fsum(attr.weights)
            assert 0.0 <= mass <= total <= 1.0
            assert mass + rest == pytest.approx(total, abs=1e-12)


class TestSpurMassCurve:
    def config(self):
        return SpurConfig(pos_token=0, neg_token=1, injection_prob=0.8)

    def test_mean_over_probe(self):
        attrs = {
            1: {
                "a": make_normalized((0.6, 0.2, 0.2), token_ids=(0, 5, 6)),
                "b": make_normalized((0.4, 0.3, 0.3), token_ids=(1, 5, 6)),
            }
        }
        labels = {"a": "pos", "b": "neg"}
        curve = spur_mass_curve(attrs, self.config(), labels)
        assert curve.values == pytest.approx((0.5,), abs=1e-15)
        assert curve.epochs == (1,)
        assert curve.probe_size == 2

    def test_label_picks_matching_token(self):
        # the "neg" example holds both tokens; only its own spur counts
        attrs = {
            1: {"b": make_normalized((0.7, 0.2, 0.1), token_ids=(0, 1, 6))}
        }
        curve = spur_mass_curve(attrs, self.config(), {"b": "neg"})
        assert curve.values == pytest.approx((0.2,), abs=1e-15)

    def test_missing_label_raises(self):
        attrs = {1: {"a": make_normalized((1.0, 0.0), token_ids=(0, 5))}}
        with pytest.raises(UnknownExample):
            spur_mass_curve(attrs, self.config(), {})

    def test_absent_spur_reports_example(self):
        attrs = {1: {"a": make_normalized((0.5, 0.5), token_ids=(5, 6))}}
        with pytest.raises(SpurTokenAbsent, match="example a"):
            spur_mass_curve(attrs, self.config(), {"a": "pos"})

    def test_untrained_model_has_no_preferential_mass(self):
        # Monte-Carlo over random initializations: with fresh random
        # embeddings the spur position is exchangeable with every other
        # position, so the expected mass is the probe's mean of 1/length.
        task = shortcut_task_config(seed=7, num_train=400, num_val=50, probe_size=10,
                                    spur_probe_size=40)
        corpus = generate_corpus(task)
        target = np.mean([1.0 / len(e.tokens) for e in corpus.spur_probe])
        labels = corpus.labels_of(corpus.spur_probe)
        per_init = []
        for i in range(100):
            model = TinyClassifier.initialize(task.vocab_size, rng=np.random.default_rng(1000 + i))
            attrs = {
                e.example_id: normalize(grad_x_input_attribution(model, e))
                for e in corpus.spur_probe
            }
            curve = spur_mass_curve({1: attrs}, task.spur, labels)
            per_init.append(curve.values[0])
        per_init = np.asarray(per_init)
        stderr = per_init.std(ddof=1) / math.sqrt(len(per_init))
        assert abs(per_init.mean() - target) <= 3 * stderr + 1e-4

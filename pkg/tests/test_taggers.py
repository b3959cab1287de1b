"""Morphology, PoS, and sentiment decoders on separable fixtures."""

import logging

import numpy as np
import pytest

from chdzdt.chartok import build_vocab
from chdzdt.encoder import EncoderState, ModelConfig
from chdzdt.errors import ConfigError, DataError
from chdzdt.evalsuite.embedder import CheckpointEmbedder
from chdzdt.evalsuite.taggers import (
    morph_tagger,
    pos_tagger,
    sentiment_classifier,
)

VOC = build_vocab([(97, 122)])

STEMS = ["tab", "lor", "mik", "dun", "vel", "pon", "rag", "sel", "tig",
         "bur", "cam", "fex", "gol", "hin", "jop", "kib", "lun", "mop",
         "nid", "ost"]


def _word_rng(word):
    return np.random.default_rng(
        sum(ord(c) * (i + 1) for i, c in enumerate(word)) % 2**31)


class SuffixEmbedder:
    """Last-character one-hot plus per-word noise."""

    is_trainable = False
    dim = 12

    def embed(self, word):
        vec = _word_rng(word).normal(0, 0.3, 12)
        vec[ord(word[-1]) % 12] += 2.0
        return vec


class Suffix2Embedder:
    """Last two characters one-hot in separate blocks plus noise."""

    is_trainable = False
    dim = 24

    def embed(self, word):
        vec = _word_rng(word).normal(0, 0.3, 24)
        vec[ord(word[-1]) % 12] += 2.0
        if len(word) >= 2:
            vec[12 + ord(word[-2]) % 12] += 2.0
        return vec


class LastCharEmbedder:
    """Last-character one-hot with no noise; words of one suffix coincide."""

    is_trainable = False
    dim = 12

    def embed(self, word):
        vec = np.zeros(12)
        vec[ord(word[-1]) % 12] = 2.0
        return vec


class MarkerEmbedder:
    """Marker words carry a loud class direction; fillers stay quiet."""

    is_trainable = False
    dim = 16
    MARKERS = {"splendid": 0, "awful": 1, "okay": 2}

    def embed(self, word):
        vec = _word_rng(word).normal(0, 0.2, 16)
        if word in self.MARKERS:
            vec[self.MARKERS[word]] += 3.0
        return vec


def morph_rows():
    rows = []
    for stem in STEMS:
        rows.append((stem + "a", {"number": "sing", "kind": "A"}))
        rows.append((stem + "as", {"number": "plur", "kind": "A"}))
        rows.append((stem + "o", {"number": "sing", "kind": "B"}))
        rows.append((stem + "os", {"number": "plur", "kind": "B"}))
        rows.append((stem + "e", {"number": "sing", "kind": "C"}))
    return rows


def pos_sentences(n=40, seed=1):
    rng = np.random.default_rng(seed)
    nouns = [s + "a" for s in STEMS]
    verbs = [s + "o" for s in STEMS]
    sents = []
    for _ in range(n):
        length = int(rng.integers(3, 7))
        sent = []
        for _ in range(length):
            if rng.random() < 0.5:
                sent.append((nouns[int(rng.integers(20))], "N"))
            else:
                sent.append((verbs[int(rng.integers(20))], "V"))
        sents.append(sent)
    return sents


def sentiment_rows(n=90, seed=2):
    rng = np.random.default_rng(seed)
    filler = ["the", "a", "it", "was", "very", "quite", "so", "that",
              "thing", "day"]
    marker = {"positive": "splendid", "negative": "awful",
              "neutral": "okay"}
    rows = []
    for i in range(n):
        label = ("positive", "negative", "neutral")[i % 3]
        words = [filler[int(rng.integers(10))]
                 for _ in range(int(rng.integers(3, 7)))]
        words.insert(int(rng.integers(len(words) + 1)), marker[label])
        rows.append((label, " ".join(words)))
    return rows


def assert_non_increasing(losses):
    assert all(b <= a + 1e-6 for a, b in zip(losses, losses[1:]))


@pytest.fixture(scope="module")
def morph_report():
    return morph_tagger(Suffix2Embedder(), morph_rows(), shared_dim=32,
                        epochs=100, lr=0.05, seed=0)


@pytest.fixture(scope="module")
def pos_report():
    return pos_tagger(SuffixEmbedder(), pos_sentences(), gru_hidden=32,
                      dense_dim=32, epochs=50, lr=0.05, seed=0)


@pytest.fixture(scope="module")
def sentiment_report():
    return sentiment_classifier(MarkerEmbedder(), sentiment_rows(),
                                gru_hidden=32, dense_dim=32,
                                epochs=100, lr=0.02, seed=0)


class TestMorphTagger:
    def test_suffix_features_learned(self, morph_report):
        assert morph_report["features"]["number"]["accuracy"] > 0.95
        assert morph_report["overall"] > 0.95

    def test_converged_heads_beat_majority_rate(self, morph_report):
        assert morph_report["train_losses"][-1] < 0.1
        rows = morph_rows()
        for name, stats in morph_report["features"].items():
            values = [feats[name] for _, feats in rows]
            majority = max(values.count(v) for v in set(values)) / len(values)
            assert stats["accuracy"] >= majority

    def test_early_stop_and_monotone_loss(self, morph_report):
        assert morph_report["epochs_run"] < 100
        assert morph_report["train_losses"][-1] < 0.1
        assert_non_increasing(morph_report["train_losses"])

    def test_na_is_ordinary_class(self):
        rows = []
        for stem in STEMS:
            rows.append((stem + "d", {"tense": "past"}))
            rows.append((stem + "a", {}))
        report = morph_tagger(LastCharEmbedder(), rows, shared_dim=32,
                              epochs=100, lr=0.05, seed=0)
        assert "NA" in report["features"]["tense"]["tagset"]
        assert report["features"]["tense"]["accuracy"] > 0.95

    def test_unknown_eval_tag_counted_wrong(self, caplog):
        train = [(s + "a", {"number": "sing"}) for s in STEMS[:10]]
        train += [(s + "as", {"number": "plur"}) for s in STEMS[:10]]
        test = [(STEMS[10] + "a", {"number": "sing"}),
                (STEMS[11] + "os", {"number": "dual"})]
        with caplog.at_level(logging.WARNING):
            report = morph_tagger(Suffix2Embedder(), train, test_rows=test,
                                  shared_dim=16, epochs=60, lr=0.05, seed=0)
        stats = report["features"]["number"]
        assert stats["unknown_tags"] == ["dual"]
        assert stats["accuracy"] <= 0.5
        assert any("dual" in rec.message for rec in caplog.records)

    def test_train_value_outside_declared_tagset(self):
        rows = [(s + "a", {"number": "dual"}) for s in STEMS]
        with pytest.raises(DataError, match="dual"):
            morph_tagger(Suffix2Embedder(), rows,
                         features={"number": ["sing", "plur"]},
                         shared_dim=8, epochs=2)

    def test_declared_tagset_gains_na_when_needed(self):
        rows = [(s + "d", {"tense": "past"}) for s in STEMS]
        rows += [(s + "a", {}) for s in STEMS]
        report = morph_tagger(Suffix2Embedder(), rows,
                              features={"tense": ["past"]},
                              shared_dim=16, epochs=30, lr=0.05)
        assert report["features"]["tense"]["tagset"] == ["NA", "past"]

    def test_empty_rows_rejected(self):
        with pytest.raises(DataError, match="no morphology"):
            morph_tagger(Suffix2Embedder(), [])

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError, match="mode"):
            morph_tagger(Suffix2Embedder(), morph_rows(), mode="thawed")


class TestPosTagger:
    def test_suffix_tagging_learned(self, pos_report):
        assert pos_report["accuracy"] > 0.95
        assert pos_report["macro_f1"] > 0.95
        assert pos_report["tagset"] == ["N", "V"]

    def test_accuracy_equals_micro_f1(self, pos_report):
        per_tag = pos_report["per_tag"]
        n = sum(stats["support"] for stats in per_tag.values())
        true_positives = sum(stats["recall"] * stats["support"]
                             for stats in per_tag.values())
        assert pos_report["accuracy"] == pytest.approx(true_positives / n,
                                                       abs=1e-9)

    def test_loss_monotone_and_early_stop(self, pos_report):
        assert pos_report["train_losses"][-1] < 0.1
        assert_non_increasing(pos_report["train_losses"])

    def test_truncation_scores_sixty_tokens(self):
        rng = np.random.default_rng(5)
        nouns = [s + "a" for s in STEMS]
        long_sents = [[(nouns[int(rng.integers(20))], "N")
                       for _ in range(70)] for _ in range(4)]
        report = pos_tagger(SuffixEmbedder(), long_sents, gru_hidden=8,
                            dense_dim=8, epochs=1, seed=0)
        assert report["n_train_tokens"] == 60 * report["n_train_sentences"]
        assert report["n_test_tokens"] == 60 * report["n_test_sentences"]

    def test_empty_sentences_skipped(self, caplog):
        sents = pos_sentences(n=6) + [[], []]
        with caplog.at_level(logging.WARNING):
            report = pos_tagger(SuffixEmbedder(), sents, gru_hidden=8,
                                dense_dim=8, epochs=1, seed=0)
        assert report["skipped_empty"] == 2
        assert any("empty" in rec.message for rec in caplog.records)

    def test_unknown_eval_tag(self, caplog):
        train = pos_sentences(n=10)
        test = [[(STEMS[0] + "a", "X"), (STEMS[1] + "o", "V")]]
        with caplog.at_level(logging.WARNING):
            report = pos_tagger(SuffixEmbedder(), train,
                                test_sentences=test, gru_hidden=8,
                                dense_dim=8, epochs=2, seed=0)
        assert report["unknown_tags"] == ["X"]
        assert any("unknown" in rec.message for rec in caplog.records)

    def test_too_few_sentences(self):
        with pytest.raises(DataError, match="at least 2"):
            pos_tagger(SuffixEmbedder(), [[("taba", "N")]])


class TestSentimentClassifier:
    def test_marker_words_separable(self, sentiment_report):
        assert sentiment_report["accuracy"] > 0.9
        assert sentiment_report["macro_f1"] > 0.9

    def test_label_counts_match_dataset(self, sentiment_report):
        totals = {lab: sentiment_report["label_counts"]["train"][lab]
                  + sentiment_report["label_counts"]["test"][lab]
                  for lab in ("negative", "neutral", "positive")}
        assert totals == {"negative": 30, "neutral": 30, "positive": 30}

    def test_loss_monotone_and_early_stop(self, sentiment_report):
        assert sentiment_report["train_losses"][-1] < 0.1
        assert_non_increasing(sentiment_report["train_losses"])

    def test_truncation_counted(self):
        rows = sentiment_rows(n=10)
        rows.append(("positive", " ".join(["word"] * 39 + ["splendid"])))
        report = sentiment_classifier(MarkerEmbedder(), rows, gru_hidden=8,
                                      dense_dim=8, epochs=1, seed=0)
        assert report["n_truncated"] == 1
        assert report["max_words"] == 30

    def test_empty_text_skipped(self, caplog):
        rows = sentiment_rows(n=10) + [("neutral", "   ")]
        with caplog.at_level(logging.WARNING):
            report = sentiment_classifier(MarkerEmbedder(), rows,
                                          gru_hidden=8, dense_dim=8,
                                          epochs=1, seed=0)
        assert report["skipped_empty"] == 1
        assert any("empty" in rec.message for rec in caplog.records)

    def test_unknown_label_rejected(self):
        with pytest.raises(DataError, match="'angry'"):
            sentiment_classifier(MarkerEmbedder(), [("angry", "grr")])


class TestFinetune:
    def test_tsv_style_embedder_rejected(self):
        with pytest.raises(ConfigError, match="frozen"):
            pos_tagger(SuffixEmbedder(), pos_sentences(n=4),
                       mode="finetune")

    def test_finetune_updates_encoder_and_beats_frozen(self):
        sents = pos_sentences()
        cfg = ModelConfig(vocab_size=VOC.size, n_blocks=1, n_heads=2,
                          hidden=16, seed=0)
        frozen = pos_tagger(CheckpointEmbedder(EncoderState.init(cfg, VOC)),
                            sents, mode="frozen", gru_hidden=32,
                            dense_dim=32, epochs=50, lr=0.01, seed=0)
        emb = CheckpointEmbedder(EncoderState.init(cfg, VOC))
        before = emb.state.params["char_emb"].data.copy()
        cached = emb.embed("taba").copy()
        tuned = pos_tagger(emb, sents, mode="finetune", gru_hidden=32,
                           dense_dim=32, epochs=50, lr=0.01, seed=0)
        assert not np.array_equal(before, emb.state.params["char_emb"].data)
        assert not np.array_equal(cached, emb.embed("taba"))
        assert tuned["accuracy"] >= frozen["accuracy"]
        assert tuned["accuracy"] > 0.95

    def test_frozen_mode_leaves_encoder_untouched(self):
        cfg = ModelConfig(vocab_size=VOC.size, n_blocks=1, n_heads=2,
                          hidden=16, seed=0)
        emb = CheckpointEmbedder(EncoderState.init(cfg, VOC))
        before = {k: v.data.copy() for k, v in emb.state.params.items()}
        pos_tagger(emb, pos_sentences(n=6), mode="frozen", gru_hidden=8,
                   dense_dim=8, epochs=2, seed=0)
        for key, value in before.items():
            np.testing.assert_array_equal(value,
                                          emb.state.params[key].data)

    def test_sentiment_finetune_flows_gradients(self):
        cfg = ModelConfig(vocab_size=VOC.size, n_blocks=1, n_heads=2,
                          hidden=16, seed=1)
        emb = CheckpointEmbedder(EncoderState.init(cfg, VOC))
        before = emb.state.params["char_emb"].data.copy()
        sentiment_classifier(emb, sentiment_rows(n=12), mode="finetune",
                             gru_hidden=8, dense_dim=8, epochs=3, lr=0.01,
                             seed=0)
        assert not np.array_equal(before,
                                  emb.state.params["char_emb"].data)

from pathlib import Path

import numpy as np
import pytest

from wmlab.errors import StegoEncodingError, StegoModelFormatError, UndecodableTextError
from wmlab.stego.corpus import StegoCorpusName, corpus_digest, load_corpus, split_sentences
from wmlab.stego.message import StegoMessage, StegoText
from wmlab.stego.model import (
    StegoModel,
    nearest_stego,
    nearest_stego_decode,
    read_stegos,
    write_stegos,
)


class TestStegoMessage:
    def test_string_roundtrip(self) -> None:
        m = StegoMessage.from_string("0110")
        assert m.bits == (0, 1, 1, 0)
        assert str(m) == "0110"

    def test_random_is_seeded(self) -> None:
        assert StegoMessage.random(5) == StegoMessage.random(5)
        assert len(StegoMessage.random(5, num_bits=12)) == 12

    @pytest.mark.parametrize("s", ["", "0120", "abc"])
    def test_invalid_strings(self, s: str) -> None:
        with pytest.raises(ValueError):
            StegoMessage.from_string(s)


class TestCorpus:
    def test_split_sentences(self) -> None:
        text = "The river ran fast. Boats waited!\n\nA bell rang; nobody came. Ok."
        assert split_sentences(text) == [
            ["the", "river", "ran", "fast"],
            ["boats", "waited"],
            ["a", "bell", "rang"],
            ["nobody", "came"],
        ]

    def test_shipped_corpus_is_available(self) -> None:
        sentences = load_corpus(StegoCorpusName.DEFAULT)
        assert len(sentences) > 100
        assert load_corpus("default") == sentences

    def test_shipped_corpus_has_fifty_thousand_tokens(self) -> None:
        assert sum(len(s) for s in load_corpus(StegoCorpusName.DEFAULT)) >= 50_000

    def test_digest_depends_on_content(self) -> None:
        assert corpus_digest([["a", "b"]]) != corpus_digest([["a", "c"]])


class TestStegoModel:
    def test_roundtrip_of_random_messages(self, stego_model: StegoModel) -> None:
        for seed in range(1000):
            message = StegoMessage.random(seed)
            stegos = stego_model.encode_message(message, n=10, seed=seed)
            assert len({s.text for s in stegos}) == 10
            assert [s.clip_index for s in stegos] == list(range(10))
            for stego in stegos:
                assert stego_model.decode_text(stego) == message

    def test_all_zeros_takes_the_top_continuation(self, stego_model: StegoModel) -> None:
        zeros = StegoMessage((0,) * 20)
        (stego,) = stego_model.encode_message(zeros, n=1, seed=0)
        tokens = stego.tokens
        assert tokens[0] == stego_model.choose_start_contexts(1, seed=0)[0]
        for prev, token in zip(tokens, tokens[1:21], strict=False):
            candidates, _ = stego_model.candidates(prev)
            assert token == candidates[0]
        assert stego_model.decode_text(stego) == zeros

    def test_deterministic(self, stego_model: StegoModel) -> None:
        message = StegoMessage.random(3)
        assert stego_model.encode_message(message, 4, seed=9) == stego_model.encode_message(
            message, 4, seed=9
        )

    def test_corpus_sentences_are_rejected(self, stego_model: StegoModel) -> None:
        sentences = load_corpus(StegoCorpusName.DEFAULT)
        rng = np.random.default_rng(0)
        chosen = [sentences[i] for i in rng.choice(len(sentences), size=100, replace=False)]
        num_rejected = 0
        for sentence in chosen:
            try:
                stego_model.decode_text(" ".join(sentence))
            except UndecodableTextError:
                num_rejected += 1
        assert num_rejected >= 99

    def test_model_from_another_corpus_cannot_decode(
        self, stego_model: StegoModel, tmp_path: Path
    ) -> None:
        reversed_sentences = [s[::-1] for s in load_corpus(StegoCorpusName.DEFAULT)]
        (tmp_path / "reversed.txt").write_text(
            ". ".join(" ".join(s) for s in reversed_sentences) + ".", encoding="utf-8"
        )
        other_model = StegoModel.from_corpus(tmp_path, seed=0)
        assert other_model.corpus_hash != stego_model.corpus_hash
        for seed in range(100):
            message = StegoMessage.random(seed)
            (stego,) = stego_model.encode_message(message, n=1, seed=seed)
            try:
                decoded = other_model.decode_text(stego)
            except UndecodableTextError:
                continue
            assert decoded != message

    def test_wrong_message_length(self, stego_model: StegoModel) -> None:
        with pytest.raises(StegoEncodingError):
            stego_model.encode_message(StegoMessage((0, 1)), n=1, seed=0)

    def test_too_many_stegos(self, stego_model: StegoModel) -> None:
        with pytest.raises(StegoEncodingError):
            stego_model.encode_message(
                StegoMessage.random(0), n=len(stego_model.start_contexts) + 1, seed=0
            )

    def test_multi_bit_steps(self) -> None:
        model = StegoModel.from_corpus(seed=1, bits_per_step=2, message_bits=20)
        message = StegoMessage.random(11)
        for stego in model.encode_message(message, n=3, seed=2):
            assert len(stego.tokens) == model.text_length == 13
            assert model.decode_text(stego) == message

    def test_bytes_roundtrip(self, stego_model: StegoModel, tmp_path: Path) -> None:
        path = stego_model.save(tmp_path / "model.bin")
        restored = StegoModel.load(path, expected_corpus_hash=stego_model.corpus_hash)
        assert restored.to_bytes() == stego_model.to_bytes()
        message = StegoMessage.random(1)
        assert restored.encode_message(message, 3, 1) == stego_model.encode_message(message, 3, 1)

    def test_bad_magic(self, stego_model: StegoModel) -> None:
        with pytest.raises(StegoModelFormatError):
            StegoModel.from_bytes(b"NOTSTEGO" + stego_model.to_bytes()[8:])

    def test_truncated(self, stego_model: StegoModel) -> None:
        with pytest.raises(StegoModelFormatError):
            StegoModel.from_bytes(stego_model.to_bytes()[:-10])
        with pytest.raises(StegoModelFormatError):
            StegoModel.from_bytes(stego_model.to_bytes()[:12])

    def test_corpus_mismatch(self, stego_model: StegoModel) -> None:
        with pytest.raises(StegoModelFormatError):
            StegoModel.from_bytes(stego_model.to_bytes(), expected_corpus_hash=b"\0" * 32)


class TestNearestStego:
    @pytest.fixture()
    def known_stegos(self) -> list[StegoText]:
        return [
            StegoText.from_text("aaaa bbbb", 0),
            StegoText.from_text("cccc dddd", 1),
            StegoText.from_text("aaaa dddd", 2),
        ]

    def test_exact_match(self, known_stegos: list[StegoText]) -> None:
        assert nearest_stego("cccc dddd", known_stegos) == (known_stegos[1], 0.0)

    def test_ties_go_to_the_lowest_clip_index(self, known_stegos: list[StegoText]) -> None:
        stego, cer = nearest_stego("aaaa xxxx", known_stegos[::-1])
        assert stego.clip_index == 0
        assert cer == pytest.approx(4 / 9)

    def test_single_substitution_in_forty_characters(self) -> None:
        text = "abcdefghi " * 3 + "abcdefghij"
        assert len(text) == 40
        stego = StegoText.from_text(text)
        _, cer = nearest_stego("x" + text[1:], [stego])
        assert cer == pytest.approx(1 / 40)

    def test_decodes_the_nearest_stego(self, stego_model: StegoModel) -> None:
        message = StegoMessage.random(42)
        stegos = stego_model.encode_message(message, n=4, seed=0)
        garbled = "x" + stegos[2].text[1:]
        decoded, cer = nearest_stego_decode(garbled, stegos, stego_model)
        assert decoded == message
        assert 0 < cer <= 1 / len(stegos[2].text)

    def test_no_known_stegos(self) -> None:
        with pytest.raises(StegoEncodingError):
            nearest_stego("abc", [])

    def test_write_and_read(self, known_stegos: list[StegoText], tmp_path: Path) -> None:
        path = write_stegos(known_stegos[::-1], tmp_path / "stegos.txt")
        assert read_stegos(path) == known_stegos

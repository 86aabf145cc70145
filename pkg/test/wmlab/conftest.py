from pathlib import Path

import pytest
from pytest import MonkeyPatch

from wmlab.asr.hyperparams import AsrTrainingConfig
from wmlab.asr.model import AsrModel
from wmlab.config import top_level_directory
from wmlab.datagen import ToneCorpus, ToneLanguageSpec, gen_corpus
from wmlab.stego.model import StegoModel
from wmlab.types import PathLike

SMALL_ALPHABET = "abcd "


@pytest.fixture(autouse=True)
def from_top_level_dir(monkeypatch: MonkeyPatch) -> None:
    monkeypatch.chdir(top_level_directory)


def existing_path(path: PathLike) -> Path:
    path = Path(path)
    if not path.is_absolute():
        path = Path(top_level_directory) / path
    assert path.exists() or path.is_dir()
    return path


@pytest.fixture(scope="session")
def default_config_path() -> Path:
    return existing_path("configs/default.json")


@pytest.fixture(scope="session")
def stego_model() -> StegoModel:
    return StegoModel.from_corpus(seed=0)


@pytest.fixture(scope="session")
def small_language() -> ToneLanguageSpec:
    return ToneLanguageSpec(alphabet=SMALL_ALPHABET, symbol_ms=60.0, seed=3)


@pytest.fixture(scope="session")
def small_corpus(small_language: ToneLanguageSpec) -> ToneCorpus:
    return gen_corpus(small_language, num_utterances=20, min_len=2, max_len=4)


@pytest.fixture(scope="session")
def tiny_training_config() -> AsrTrainingConfig:
    return AsrTrainingConfig(hidden_size=8, epochs=2, lr=0.05, batch_size=4)


@pytest.fixture()
def tiny_model(tiny_training_config: AsrTrainingConfig) -> AsrModel:
    return AsrModel.create(seed=0, training=tiny_training_config)

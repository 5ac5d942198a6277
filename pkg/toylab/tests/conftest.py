"""Shared fixtures: one small corpus and model config for the whole run."""

import pytest

from toylab.data import CorpusConfig, build_corpus
from toylab.model import ToyModelConfig


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    cache = tmp_path_factory.mktemp("corpus") / "corpus.npz"
    return build_corpus(CorpusConfig(max_bytes=600_000), cache_path=str(cache))


@pytest.fixture(scope="session")
def small_config():
    return ToyModelConfig(layers=4, hidden=32, heads=4, vocab=512, context=64)

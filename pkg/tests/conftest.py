"""Shared fixtures. The trained model is built once per session: training is
the slowest thing the suite does and several tests only need *a* good model."""
import time

import numpy as np
import pytest

from plasmodet.nnet import AugmentConfig, TrainConfig, save_params, train
from plasmodet.synth import synth_patch_corpus

CORPUS_SEED = 0
CORPUS_PER_CLASS = 200

_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def patch_corpus():
    return synth_patch_corpus(CORPUS_SEED, CORPUS_PER_CLASS)


@pytest.fixture(scope="session")
def training_run(patch_corpus):
    """10 epochs on the seeded 200+200 corpus: params, history, seconds."""
    images, labels = patch_corpus
    t0 = time.perf_counter()
    params, history = train(
        images,
        labels,
        TrainConfig(epochs=10, rng_seed=0),
        AugmentConfig(target_per_class=CORPUS_PER_CLASS, rng_seed=0),
    )
    return {"params": params, "history": history, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def trained(training_run):
    return training_run["params"], training_run["history"]


@pytest.fixture(scope="session")
def weights_file(trained, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "weights.bin"
    save_params(path, trained[0])
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def criterion():
    """``criterion(n, ok, detail)`` prints and records one acceptance line."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _acceptance_lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)

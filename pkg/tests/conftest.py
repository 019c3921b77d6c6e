import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from soundsource.cli import main  # noqa: E402


@pytest.fixture(scope="session")
def reference_run(tmp_path_factory):
    """Reference synthetic corpus (60 per class, seed 42), featurized once per session."""
    root = tmp_path_factory.mktemp("reference")
    t0 = time.perf_counter()
    assert main(["synth", "--out", str(root / "corpus"), "--n-per-class", "60", "--seed", "42"]) == 0
    assert main(["featurize", "--manifest", str(root / "corpus" / "manifest.csv"), "--out", str(root / "features.csv")]) == 0
    elapsed = time.perf_counter() - t0
    return {"root": root, "corpus": root / "corpus", "features": root / "features.csv", "elapsed": elapsed}


@pytest.fixture(scope="session")
def reference_model(reference_run):
    from soundsource.pooling import read_pooled_csv
    from soundsource.svm import train_multiclass

    _, labels, X = read_pooled_csv(reference_run["features"])
    return train_multiclass(X, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import shutil
import subprocess
import sys

import pytest

from evnet.train import TrainingConfig, staged_train


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    """Toy dataset generated through the harness CLI (the external interface)."""
    root = tmp_path_factory.mktemp("toyset")
    subprocess.run(
        [sys.executable, "-m", "evfi.cli", "make-dataset", "--out", str(root), "--kind", "toy", "--seed", "0"],
        check=True,
        capture_output=True,
    )
    return root


@pytest.fixture(scope="session")
def micro_root(toy_root, tmp_path_factory):
    """Two-sequence subset for fast mechanism tests (freeze, determinism)."""
    root = tmp_path_factory.mktemp("microset")
    for name in ("translate_00", "rotate_00"):
        shutil.copytree(toy_root / name, root / name)
    return root


@pytest.fixture(scope="session")
def trained(toy_root, tmp_path_factory):
    """One full staged training run shared by the acceptance tests."""
    ckpt = tmp_path_factory.mktemp("ckpt") / "toy.pt"
    result = staged_train(toy_root, TrainingConfig(), ckpt)
    return result

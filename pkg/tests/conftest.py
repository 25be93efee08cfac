import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth_ckd import make_ckd_arff  # noqa: E402


@pytest.fixture(scope="session")
def ckd_arff(tmp_path_factory):
    return make_ckd_arff(tmp_path_factory.mktemp("data") / "ckd_synth.arff")


def small_config_dict(data_path, out_dir, seed=0):
    """Pipeline config with reduced budgets so end-to-end tests stay quick."""
    return {
        "data": {"path": str(data_path)},
        "run": {"master_seed": seed, "out_dir": str(out_dir)},
        "cuckoo": {"max_iter": 50},
        "anneal": {"max_iter": 40},
        "cv": {"folds": 3},
        "models": {
            "logreg": {"fixed": {"epochs": 100}, "grid": {"l2": [0.01, 0.1]}},
            "mlp": {"fixed": {"epochs": 10, "hidden": 8}, "grid": {"lr": [0.01]}},
            "forest": {"fixed": {"n_trees": 10}, "grid": {"max_depth": [4, "none"]}},
            "boost": {"fixed": {"iterations": 30, "learning_rate": 0.1}, "grid": {"depth": [3, 4]}},
        },
    }


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])

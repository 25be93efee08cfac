import math

import numpy as np
import pytest

from ckdpipe.errors import ConfigError, SchemaError
from ckdpipe.ingest import EncodedMatrix
from ckdpipe.outliers import (
    CuckooConfig,
    adjust_outliers,
    cuckoo_adjust,
    detect_outliers,
    levy_sigma,
    levy_step,
    mantegna,
    winsorize,
)


def column_matrix(*cols, categorical=()):
    values = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    names = [f"c{j}" for j in range(values.shape[1])]
    return EncodedMatrix(names, values, np.zeros(values.shape, bool), np.zeros(values.shape[0], np.int64), categorical)


def test_detect_interpolated_quartiles():
    fences, idx = detect_outliers(np.array([1, 2, 3, 100.0]))
    assert fences.q1 == pytest.approx(1.75)
    assert fences.q3 == pytest.approx(27.25)
    assert fences.upper == pytest.approx(65.5)
    assert idx == [3]


def test_detect_tight_spread():
    assert detect_outliers(np.array([1, 2, 3, 4.0]))[1] == []


def test_detect_constant_column():
    fences, idx = detect_outliers(np.full(7, 2.5))
    assert fences.iqr == 0 and fences.lower == fences.upper == 2.5
    assert idx == []


def test_detect_needs_four_values():
    with pytest.raises(SchemaError):
        detect_outliers(np.array([1.0, 2.0, 3.0]))


def test_levy_sigma_matches_gamma_formula():
    b = 1.5
    oracle = (math.gamma(1 + b) * math.sin(math.pi * b / 2) / (math.gamma((1 + b) / 2) * b * 2 ** ((b - 1) / 2))) ** (
        1 / b
    )
    assert levy_sigma(b) == pytest.approx(oracle, rel=1e-14)
    assert levy_sigma(b) == pytest.approx(0.6966, abs=1e-4)


def test_mantegna_zero_numerator():
    assert mantegna(0.0, 0.7, 1.5) == 0.0


def test_levy_steps_heavier_than_gaussian():
    steps = levy_step(np.random.default_rng(11), 1.5, 100_000)
    frac = np.mean(np.abs(steps) > 3 * steps.std())
    assert frac > 0.0027


@pytest.mark.parametrize(
    "kw", [{"n_nests": 0}, {"pa": 1.5}, {"levy_beta": 1.0}, {"levy_beta": 2.5}, {"max_iter": 0}, {"step_scale": 0}]
)
def test_config_bounds(kw):
    with pytest.raises(ConfigError):
        CuckooConfig(**kw)


def test_no_outliers_leaves_matrix_unchanged():
    m = column_matrix([1, 2, 3, 4, 5.0])
    out, logs = adjust_outliers(m, CuckooConfig(seed=1))
    assert logs == [] and np.array_equal(out.values, m.values)


def test_single_outlier_reaches_fence():
    out, logs = adjust_outliers(column_matrix([1, 2, 3, 100.0]), CuckooConfig(seed=4))
    f = logs[0].fences
    assert abs(out.values[3, 0] - 65.5) <= 1e-3 * f.iqr
    assert out.values[:3, 0].tolist() == [1.0, 2.0, 3.0]


def test_two_sided_outliers_each_reach_their_fence():
    col = np.r_[np.linspace(10, 20, 40), [-80.0, 150.0]]
    out, logs = adjust_outliers(column_matrix(col), CuckooConfig(seed=9))
    f = logs[0].fences
    assert abs(out.values[40, 0] - f.lower) <= 1e-3 * f.iqr
    assert abs(out.values[41, 0] - f.upper) <= 1e-3 * f.iqr
    assert np.array_equal(out.values[:40, 0], col[:40])


def test_history_non_increasing_and_solution_inside_fences():
    rng = np.random.default_rng(2)
    col = np.r_[rng.normal(0, 1, 200), rng.normal(0, 1, 6) * 3 + np.array([9, -9, 12, -12, 15, 8])]
    fences, idx = detect_outliers(col)
    best, history = cuckoo_adjust(col[idx], fences, CuckooConfig(), np.random.default_rng(5))
    assert all(a >= b for a, b in zip(history, history[1:]))
    eps = 1e-6 * fences.iqr
    assert np.all(best >= fences.lower - eps) and np.all(best <= fences.upper + eps)
    assert np.abs(best - winsorize(col[idx], fences)).max() <= 1e-3 * fences.iqr


def test_fixed_seed_is_byte_identical():
    col = np.r_[np.arange(30.0), [200.0, -150.0, 99.0]]
    a, _ = adjust_outliers(column_matrix(col), CuckooConfig(seed=3))
    b, _ = adjust_outliers(column_matrix(col), CuckooConfig(seed=3))
    assert a.values.tobytes() == b.values.tobytes()


def test_categorical_columns_skipped():
    m = column_matrix([0, 0, 0, 0, 0, 0, 9.0], [1, 2, 3, 4, 5, 6, 500.0], categorical=("c0",))
    out, logs = adjust_outliers(m, CuckooConfig(seed=0))
    assert [log.column for log in logs] == ["c1"]
    assert out.values[6, 0] == 9.0


def test_zero_iqr_column_left_alone():
    # mostly-zero counts collapse the fences while nonzero cells still sit outside them
    m = column_matrix([0, 0, 0, 0, 0, 0, 0, 0, 2, 4.0])
    out, logs = adjust_outliers(m, CuckooConfig(seed=0))
    assert logs[0].skipped and logs[0].outlier_rows == [8, 9]
    assert np.array_equal(out.values, m.values)


def test_columns_independent_of_processing_order():
    a = np.r_[np.arange(20.0), [90.0]]
    b = np.r_[np.arange(20.0) * 2, [-300.0]]
    m = column_matrix(a, b)
    both, _ = adjust_outliers(m, CuckooConfig(seed=8), columns=["c0", "c1"])
    rev, _ = adjust_outliers(m, CuckooConfig(seed=8), columns=["c1", "c0"])
    assert both.values.tobytes() == rev.values.tobytes()


def test_requires_imputed_matrix():
    m = column_matrix([1, 2, 3, 4.0])
    m.missing[0, 0] = True
    with pytest.raises(SchemaError):
        adjust_outliers(m)

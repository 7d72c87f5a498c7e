import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from halfspace.corpus import (
    CORPUS_VERSION,
    SUITE_RUNNERS,
    SUITES,
    boundary_l1,
    fd_harmonic_residuals,
    get_entry,
    registry,
    registry_json,
    run_corpus,
    run_expectation,
)
from halfspace.errors import HalfSpaceError

TRIGGERS = {"ring": {"satisfied", "not-satisfied", "inconclusive"}}


def test_registry_names_unique_and_ordered():
    names = [e.name for e in registry()]
    assert len(names) == len(set(names))
    assert names == [e.name for e in registry()]


def test_registry_contract():
    for entry in registry():
        assert entry.expectations, entry.name
        assert set(entry.dims) <= {2, 3}
        for exp in entry.expectations:
            assert exp.suite in SUITES and exp.suite in SUITE_RUNNERS
            assert exp.claim
            if exp.suite == "ring":
                assert exp.expected in TRIGGERS["ring"]
                assert exp.params["condition"] in ("(R)", "(R+)", "(R+0)")


def test_registry_json():
    doc = json.loads(registry_json())
    assert doc["version"] == CORPUS_VERSION
    assert [e["name"] for e in doc["entries"]] == [e.name for e in registry()]
    assert registry_json() == registry_json()


def test_get_entry():
    assert get_entry("linear").description == "u = x_N"
    with pytest.raises(HalfSpaceError):
        get_entry("missing")
    with pytest.raises(HalfSpaceError):
        get_entry("neg_inv_square").field(3)


@pytest.mark.parametrize("dim", [2, 3])
def test_unotl1c_is_harmonic_to_second_order(dim):
    u = get_entry("unotl1c").field(dim)
    pts = np.random.default_rng(1).uniform([-1.0] * (dim - 1) + [0.5], [1.0] * (dim - 1) + [1.5], (20, dim))
    r1, r2 = fd_harmonic_residuals(u, pts, steps=(2e-2, 1e-2))
    assert r2 < r1
    assert 3.0 < r1 / r2 < 5.0


def test_neg_inv_square_superharmonic():
    u = get_entry("neg_inv_square").field(2)
    pts = np.array([[0.3, 0.5], [1.0, 2.0], [-2.0, 0.1]])
    assert_allclose(u.laplacian(pts), -4 * np.sum(pts**2, axis=1) ** -2)


def test_boundary_l1_log_growth():
    # int over (-1,1) x (d, 1) of |x|^-2 grows like pi log(1/d)
    u = get_entry("neg_inv_square").field(2)
    a = boundary_l1(u, 1e-2)
    b = boundary_l1(u, 1e-3)
    assert_allclose(b - a, math.pi * math.log(10), rtol=1e-3)


def test_single_expectation_row():
    entry = get_entry("linear")
    row = run_expectation(entry, entry.expectations[0], 2)
    assert row.ok and row.observed == "satisfied"
    assert row.params == '{"condition":"(R+)","h":1.0,"levels":8}'


@pytest.fixture(scope="module")
def small_run():
    return run_corpus(2, names=["linear", "constant", "green_delta_ref"], suites=["ring", "harmonic", "reference"])


def test_small_corpus_run(small_run):
    assert small_run.ok, [(r.entry, r.suite, r.observed) for r in small_run.failures]
    assert {r.entry for r in small_run.rows} == {"linear", "constant", "green_delta_ref"}


def test_corpus_report_formats(small_run):
    lines = small_run.to_csv().splitlines()
    assert lines[0] == "entry,dim,suite,params,expected,observed,ok,metric,detail,claim"
    assert len(lines) == len(small_run.rows) + 1
    doc = json.loads(small_run.to_json())
    assert doc["ok"] is True and doc["dim"] == 2
    assert doc["rows"][0]["metric"] == "-inf"


def test_corpus_run_is_deterministic(small_run):
    again = run_corpus(2, names=["linear", "constant", "green_delta_ref"], suites=["ring", "harmonic", "reference"])
    assert again.to_csv() == small_run.to_csv()


def test_corpus_filters():
    rep = run_corpus(2, names=["remark_v_plus"])
    assert [r.suite for r in rep.rows] == ["trace"]
    assert rep.ok
    assert run_corpus(3, names=["remark_v_plus"]).rows == []


@pytest.mark.slow
def test_full_corpus_two_dimensions():
    rep = run_corpus(2)
    assert rep.ok, [(r.entry, r.suite, r.observed) for r in rep.failures]

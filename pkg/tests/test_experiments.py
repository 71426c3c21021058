import csv
import io

import pytest

from fogplace.exact import Budget, Status
from fogplace.experiments import (
    POWER_CSV,
    SAVINGS_CSV,
    SHARES_CSV,
    SweepRecord,
    SweepSpec,
    all_solved,
    compute_savings,
    emit_report,
    reference_scenario,
    run_sweep,
    savings_by_seed,
    thread_count,
    write_report,
)
from fogplace.power import PowerBreakdown, evaluate


def small_spec(**kw):
    sc = reference_scenario(5, requests=2)
    return SweepSpec(scenario=sc, budget=Budget(node_limit=5000), **kw)


@pytest.fixture(scope="module")
def records():
    return run_sweep(small_spec(solvers=("bnb", "greedy")), workers=1)


def rec(delta, k, total):
    bd = PowerBreakdown(total, 0, 0, 0, 0, 0)
    return SweepRecord(delta, k, "bnb", bd, Status.OPTIMAL, 0.0, total, total)


def test_cell_count_and_order(records):
    assert len(records) == 3 * 2 * 2
    keys = [(r.delta, r.k, r.solver) for r in records]
    assert keys == sorted(keys, key=lambda t: (t[0], t[1], ("bnb", "greedy").index(t[2])))


def test_records_re_evaluate(records):
    spec = small_spec()
    for r in records:
        sc = spec.scenario.with_(delta=r.delta, k=r.k)
        assert evaluate(sc, r.placement).total == pytest.approx(r.total, rel=1e-12)
        assert r.objective == pytest.approx(r.total, rel=1e-12)


def test_monotone_and_dominance(records):
    for solver in ("bnb", "greedy"):
        rows = {(r.delta, r.k): r.total for r in records if r.solver == solver}
        for k in (1, 2):
            totals = [rows[(d, k)] for d in (0.03, 0.06, 0.10)]
            assert totals == sorted(totals)
        for d in (0.03, 0.06, 0.10):
            assert rows[(d, 2)] <= rows[(d, 1)] * (1 + 1e-12)
    exact = {(r.delta, r.k): r.total for r in records if r.solver == "bnb"}
    for r in records:
        if r.solver == "greedy":
            assert exact[(r.delta, r.k)] <= r.total * (1 + 1e-12)


def test_default_spec_cells():
    spec = SweepSpec()
    assert spec.delta_values == (0.03, 0.06, 0.10)
    assert spec.k_values == (1, 2)
    assert len(spec.delta_values) * len(spec.k_values) * len(spec.solvers) == 6


@pytest.mark.parametrize("kw", [
    {"delta_values": ()},
    {"delta_values": (0.0,)},
    {"delta_values": (1.5,)},
    {"k_values": (0,)},
    {"solvers": ("cplex",)},
])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        SweepSpec(**kw)


def test_savings_arithmetic():
    assert compute_savings([rec(0.03, 1, 100.0), rec(0.03, 2, 35.0)]) == {0.03: pytest.approx(65.0)}
    assert compute_savings([rec(0.1, 1, 80.0), rec(0.1, 2, 80.0)]) == {0.1: 0.0}
    with pytest.raises(KeyError):
        compute_savings([rec(0.03, 1, 100.0)])


def test_savings_non_negative(records):
    for v in compute_savings(records, 1, 2, "bnb").values():
        assert v >= 0


def test_report_shapes(records):
    bnb = [r for r in records if r.solver == "bnb"]
    docs = emit_report(bnb, compute_savings(bnb))
    assert set(docs) == {POWER_CSV, SHARES_CSV, SAVINGS_CSV}
    power = list(csv.DictReader(io.StringIO(docs[POWER_CSV])))
    assert len(power) == 6
    assert list(power[0])[:5] == ["delta", "k", "solver", "status", "total"]
    for row in csv.DictReader(io.StringIO(docs[SHARES_CSV])):
        shares = [float(row[t]) for t in ("IoTDevice", "AccessFog", "MetroFog", "CloudDc")]
        assert sum(shares) == pytest.approx(1.0, abs=1e-9)
    assert len(docs[SAVINGS_CSV].splitlines()) == 4


def test_report_byte_identical(tmp_path):
    a = run_sweep(small_spec(), workers=1)
    b = run_sweep(small_spec(), workers=1)
    da, db = emit_report(a, compute_savings(a)), emit_report(b, compute_savings(b))
    assert da == db
    pa = write_report(da, tmp_path / "a")
    pb = write_report(db, tmp_path / "b")
    for x, y in zip(pa, pb):
        assert x.read_bytes() == y.read_bytes()


def test_parallel_matches_serial(records):
    par = run_sweep(small_spec(solvers=("bnb", "greedy")), workers=2)
    assert [(r.delta, r.k, r.solver, r.total) for r in par] == [(r.delta, r.k, r.solver, r.total) for r in records]


def test_multi_seed_report():
    spec = SweepSpec(seed=1, extra_seeds=(2,), solvers=("greedy",), k_values=(1, 2),
                     delta_values=(0.03,), requests=2)
    recs = run_sweep(spec, workers=1)
    spread = savings_by_seed(recs, 1, 2, "greedy")
    assert len(spread[0.03]) == 2
    docs = emit_report(recs, compute_savings(recs, solver="greedy"), spread)
    assert docs[SAVINGS_CSV].splitlines()[0] == "delta,savings_percent,min,max,seeds"
    assert docs[POWER_CSV].splitlines()[0].startswith("seed,")


def test_infeasible_cell_recorded():
    from tests_support import infeasible_scenario
    spec = SweepSpec(scenario=infeasible_scenario(), delta_values=(0.1,), k_values=(1,), solvers=("bnb", "brute"))
    recs = run_sweep(spec, workers=1)
    assert [r.status for r in recs] == [Status.INFEASIBLE, Status.INFEASIBLE]
    assert not all_solved(recs)
    docs = emit_report(recs, {})
    assert docs[POWER_CSV].splitlines()[1].startswith("0.1,1,bnb,Infeasible,,")


def test_thread_env(monkeypatch):
    monkeypatch.setenv("FOGPLACE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("FOGPLACE_THREADS", "zero")
    with pytest.raises(ValueError):
        thread_count()
    monkeypatch.delenv("FOGPLACE_THREADS")
    assert thread_count() == 1

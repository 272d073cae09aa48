import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sucil.bench import (REFERENCE_TABLES, RunRecord, ingest_reference, make_profile, metric_csv,
                         performance_table, reference_records, replication_summary, run_suite,
                         runs_csv, standard_instances, write_outputs)
from sucil.errors import MissingPair, SchemaMismatch


def _rec(solver, problem, N, first=None, certified=True, n=3):
    return RunRecord(solver, problem, n, N, first if first is not None else N, certified)


def _curve(curves, solver):
    return next(c for c in curves if c.solver == solver)


def test_two_solver_profile():
    curves = make_profile([_rec("a", "p", 10), _rec("b", "p", 20)])
    a, b = _curve(curves, "a"), _curve(curves, "b")
    assert a.ratios.tolist() == [1.0] and b.ratios.tolist() == [2.0]
    assert a.rho(1.0)[0] == 1 and b.rho(1.0)[0] == 0 and b.rho(2.0)[0] == 1


def test_tied_solvers_both_get_ratio_one():
    curves = make_profile([_rec("a", "p", 7), _rec("b", "p", 7), _rec("a", "q", 3), _rec("b", "q", 3)])
    for c in curves:
        assert c.rho(1.0)[0] == 1.0


def test_uncertified_runs_never_count():
    recs = [_rec("a", "p", 1000, certified=False), _rec("b", "p", 500)]
    assert _curve(make_profile(recs), "a").rho(1e9)[0] == 0
    literal = make_profile(recs, literal_cap=True)
    assert _curve(literal, "a").ratios.tolist() == [2.0]


def test_missing_and_duplicate_pairs():
    with pytest.raises(MissingPair):
        make_profile([_rec("a", "p", 1), _rec("b", "q", 1)])
    with pytest.raises(ValueError):
        make_profile([_rec("a", "p", 1), _rec("a", "p", 2)])


@given(st.lists(st.lists(st.one_of(st.integers(1, 500), st.just(None)), min_size=3, max_size=3),
                min_size=1, max_size=8))
def test_profile_invariants(table):
    recs = []
    for j, row in enumerate(table):
        for s, v in zip("abc", row):
            recs.append(RunRecord(s, f"p{j}", 3, v, v, v is not None))
    curves = make_profile(recs)
    alphas = np.concatenate([[1.0], np.linspace(1, 600, 50)])
    ok = [np.isfinite(c.ratios) for c in curves]
    for c in curves:
        xs, ys = c.samples()
        r = c.rho(np.sort(alphas))
        assert np.all(np.diff(r) >= 0) and np.all((0 <= r) & (r <= 1))
        assert np.all(np.diff(ys) >= 0)
        finite = c.ratios[np.isfinite(c.ratios)]
        if finite.size:
            assert c.rho(finite.max())[0] == pytest.approx(finite.size / c.problems)
    # on every problem some solver is best unless all failed
    _, _, N, ratio = performance_table(recs, "terminate")
    for j in range(N.shape[1]):
        if np.isfinite(N[:, j]).any():
            assert (ratio[:, j] == 1).sum() >= 1
    assert len(ok) == 3


def test_reference_examples():
    c1 = {(r.solver, r.problem): r for r in ingest_reference("C1")}
    assert (c1["DFLINT", "abhi"].N_terminate, c1["DFLINT", "abhi"].N_first_opt) == (161, 57)
    assert (c1["NOMAD", "abhi"].N_terminate, c1["NOMAD", "abhi"].N_first_opt) == (59, 20)
    assert all(r.external and r.n == 3 for r in c1.values())
    c3 = {(r.solver, r.problem): r for r in ingest_reference("C3")}
    assert (c3["SUCIL", "maxq"].N_terminate, c3["SUCIL", "maxq"].N_first_opt) == (80, 1)
    assert c3["SUCIL", "maxq"].n == 5


@pytest.mark.parametrize("table", sorted(REFERENCE_TABLES))
def test_every_fixture_loads(table):
    recs = ingest_reference(table)
    assert {r.problem for r in recs} == {"abhi", "quad", "KLT", "maxq", "mxhilb", "LQ", "CB3I", "CB3II"}
    assert {r.n for r in recs} == {REFERENCE_TABLES[table]}


def test_malformed_row_reports_line_number():
    bad = io.StringIO("# comment\ntable,n,problem,solver,N_terminate,N_first_opt\n"
                      "C1,3,abhi,SUCIL,30,17\nC1,3,quad,SUCIL,thirty,17\n")
    with pytest.raises(SchemaMismatch, match=":4:"):
        ingest_reference(bad, where="x.csv")
    short = io.StringIO("table,n,problem,solver,N_terminate,N_first_opt\nC1,3,abhi,SUCIL,30\n")
    with pytest.raises(SchemaMismatch, match=":2:"):
        ingest_reference(short)
    with pytest.raises(SchemaMismatch):
        ingest_reference(io.StringIO("a,b,c\n1,2,3\n"))


def test_replication_floor_means():
    for problem, (printed, computed) in replication_summary("C4").items():
        assert printed == computed, problem
    c5 = replication_summary("C5")
    # the printed summary disagrees with its own replications in two places
    assert c5["CB3I"] == ((126, 81), (126, 72))
    assert all(p == c for k, (p, c) in c5.items() if k != "CB3I")
    c6 = replication_summary("C6")
    assert c6["CB3II"] == ((281, 224), (354, 224))
    assert all(p == c for k, (p, c) in c6.items() if k != "CB3II")


def test_reference_profile_solver_share():
    solvers = ["SUCIL", "DFLINT", "DFLINT-M", "NOMAD", "NOMAD-dm", "MATSuMoTo"]
    recs = reference_records(("C1", "C2", "C3"), solvers)
    assert len({r.key for r in recs}) == 24
    curves = make_profile(recs, "terminate")
    assert _curve(curves, "SUCIL").rho(1.0)[0] == pytest.approx(16 / 24)


def test_standard_instances():
    inst = standard_instances()
    assert len(inst) == 24
    assert {(p.name, d.n) for p, d in inst} == {(p.name, p.n) for p, _ in inst}
    assert all(d.lower == (-4,) * d.n for _, d in inst)


def test_budget_one_caps_every_run():
    recs = run_suite(standard_instances((3,), ("quad", "maxq")), ["SUCIL"], budget=1)
    assert all(r.certified is False and r.N_terminate == 1 for r in recs)
    assert all(r.metric("terminate") == math.inf for r in recs)
    assert all(r.metric("terminate", literal_cap=True) == 1 for r in recs)


def test_maxq_ideal_run_record():
    (rec,) = run_suite(standard_instances((3,), ("maxq",)), ["ideal1"])
    assert rec.certified and rec.N_first_opt == 1
    assert 7 <= rec.N_terminate <= 21
    assert rec.N_first_opt <= rec.N_terminate


def test_suite_output_is_deterministic(tmp_path):
    inst = standard_instances((2,), ("quad", "LQ", "CB3I"))
    a = run_suite(inst, ["SUCIL", "ideal2"], jobs=2)
    b = run_suite(inst, ["ideal2", "SUCIL"], jobs=1)
    assert runs_csv(a) == runs_csv(b)
    pa = write_outputs(a, tmp_path / "a")
    pb = write_outputs(b, tmp_path / "b")
    for k in pa:
        assert pa[k].read_bytes() == pb[k].read_bytes()
    head = metric_csv(a, "terminate").splitlines()[0]
    assert head == "solver,problem,n,N,ratio"


def test_solver_errors_are_captured():
    from sucil.problems import get_problem
    from sucil.underestimator import Domain
    inst = [(get_problem("quad", 2), Domain.box(2, 0, 4))]
    recs = run_suite(inst, ["SUCIL"], base=None)
    assert recs[0].error is None  # midpoint (2,2) has room
    inst = [(get_problem("maxq", 2), Domain.box(2, 0, 4))]
    (rec,) = run_suite(inst, ["SUCIL"])
    assert rec.error and rec.error.startswith("StencilOutsideDomain")
    assert rec.metric("terminate") == math.inf

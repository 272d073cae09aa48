import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import random_poised
from sucil.errors import IncompleteAssignment, NoPoisedSubset, ZeroNormal
from sucil.geometry import Secant
from sucil.milp_export import (ConstantBundle, build_cpf, closed_form_counts, completion_exists,
                               cone_assignment, cpf_sequence, derive_eps_lambda, derive_M_eta,
                               derive_M_lambda, export_lp, format_lp, integer_facet, parse_lp,
                               poised_cuts, read_lp, validate_assignment)
from sucil.problems import get_problem
from sucil.underestimator import Domain

# first twelve all-cut model instances for abhi on [-2,2]^3 from the centre:
# (number of cuts, reported lower bound, reported incumbent, reported bound minimizer)
ABHI_SEQUENCE = [
    (20, -616.3, 79.9, (2, 2, -2)), (52, -555.1, 79.9, (2, 2, -1)),
    (100, -475.2, 44.7, (2, 1, -2)), (172, -434.4, 44.7, (1, 2, -2)),
    (276, -413.9, 19.1, (2, 1, -1)), (418, -373.1, 19.1, (1, 2, -1)),
    (611, -311.7, 19.1, (2, -2, -2)), (866, -293.2, 19.1, (1, 1, -2)),
    (1196, -232.0, 19.1, (1, 1, -1)), (1532, -199.5, 19.1, (2, -2, -1)),
    (2038, -192.9, 19.1, (2, -1, -2)), (2605, -140.9, 19.1, (1, -1, -2)),
]
ABHI_BINARIES = [335, 847, 1615, 2767, 4431, 6703, 9791, 13871, 19151, 24527, 32623, 41695]


def _d1_model(eps=None, l_f=-10.0):
    box = Domain.box(1, -2, 2)
    m = build_cpf([[-1], [1]], [1.0, 1.0], box, l_f=l_f)
    if eps is not None:
        c = m.constants
        forced = ConstantBundle(c.M_eta, c.M_lambda, eps, c.M_cut, c.M_nogood, c.l_f)
        m = build_cpf([[-1], [1]], [1.0, 1.0], box, constants=forced)
    return m


# ---- constants ----------------------------------------------------------

def test_M_eta_examples():
    box = Domain.box(3, -2, 2)
    per, big = derive_M_eta([Secant(np.array([1.0, -1.0, 2.0]), 0.0)], box, 0.0)
    assert per.tolist() == [8.0] and big == 8.0
    per, _ = derive_M_eta([Secant(np.zeros(3), 5.0)], box, 5.0)
    assert per.tolist() == [0.0]
    per, big = derive_M_eta([Secant(np.array([0.5, 0.0, 0.0]), 2.0),
                             Secant(np.array([1.0, -1.0, 2.0]), 0.0)], box, 0.0)
    assert per.tolist() == [3.0, 8.0] and big == 8.0


def test_eps_lambda_euclidean_examples():
    assert derive_eps_lambda([((3, 4), 0)]) == pytest.approx(0.2)
    assert derive_eps_lambda([((1, 0), 0)]) == 1.0
    assert derive_eps_lambda([((3, 4), 0), ((1, 0), 0)]) == pytest.approx(0.2)
    with pytest.raises(ZeroNormal):
        derive_eps_lambda([((0, 0), 1)])


def test_M_lambda_euclidean_examples():
    box = Domain.box(2, -4, 4)
    assert derive_M_lambda([((1, 0), 0)], box) == 4.0
    assert derive_M_lambda([((1, 1), 0)], box) == pytest.approx(8 / math.sqrt(2))
    assert derive_M_lambda([((1, 1), 1)], Domain((2, 3), (2, 3))) == pytest.approx(6 / math.sqrt(2))


def test_integer_facet_clears_denominators():
    c, b = integer_facet([0.5, -1.0 / 3.0], 1.0 / 6.0)
    assert c.tolist() == [3, -2] and b == 1
    c, b = integer_facet([2.0, 4.0], -6.0)
    assert c.tolist() == [1, 2] and b == -3


@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_eps_lambda_never_exceeds_true_multiplier_gap(n, seed):
    """On the box, every nonzero multiplier has magnitude at least eps_lambda."""
    rng = np.random.default_rng(seed)
    P = random_poised(rng, n, -2, 2)
    cuts = poised_cuts(P, np.zeros(n + 1))
    box = Domain.box(n, -3, 3)
    facets = [f for c in cuts for f in c.facets]
    anchors = [p for c in cuts for p in c.points]
    eps = derive_eps_lambda(facets, anchors)
    m_lam = derive_M_lambda(facets, box, anchors)
    mult = np.array([cuts[0].multipliers(x) for x in box.points])
    nz = np.abs(mult[np.abs(mult) > 1e-9])
    assert nz.min() >= eps - 1e-12
    assert np.abs(mult).max() <= m_lam + 1e-9


# ---- the one-dimensional false-termination example ------------------------

def test_d1_constants():
    m = _d1_model()
    assert m.constants.eps_lambda == pytest.approx(0.5)
    assert m.constants.M_eta == pytest.approx(11.0)


@pytest.mark.parametrize("eta", [0.0, -3.0])
def test_d1_true_optimum_is_feasible(eta):
    m = _d1_model()
    vals = cone_assignment(m, [0], eta)
    assert all(vals[f"z_1_{j}"] == 0 for j in (1, 2))
    assert validate_assignment(m, vals).feasible
    assert completion_exists(m, [0], eta)


def test_d1_large_eps_excludes_the_optimum():
    m = _d1_model(eps=0.6)
    rep = validate_assignment(m, cone_assignment(m, [0], 0.0))
    assert not rep.feasible
    assert any(name.startswith("lamub_") for name in rep.names())
    assert not completion_exists(m, [0], 0.0)
    assert not completion_exists(m, [0], 1.0)
    # away from the origin the model still has room
    assert completion_exists(m, [2], 1.0)


def test_two_active_indicators_are_reported():
    m = _d1_model()
    vals = cone_assignment(m, [2], 5.0)
    vals["z_1_1"] = vals["z_1_2"] = 1.0
    assert "sos_1" in validate_assignment(m, vals).names()


def test_missing_variables_raise():
    m = _d1_model()
    vals = cone_assignment(m, [0], 0.0)
    del vals["w_1_1_2"]
    with pytest.raises(IncompleteAssignment):
        validate_assignment(m, vals)


def test_no_poised_subset():
    with pytest.raises(NoPoisedSubset):
        build_cpf([[0, 0], [1, 1], [2, 2]], [0, 1, 2], Domain.box(2, -3, 3))


# ---- counts ---------------------------------------------------------------

def test_single_cut_in_one_dimension():
    m = _d1_model()
    c = m.counts()
    assert c["binaries"] == 4
    assert sum(v.startswith("lam_") for v in m.variables()) == 2
    assert c == closed_form_counts(1, 1)
    assert c["rows"] == 2 + 3 * 2 + 2 * 2


@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.booleans())
@settings(max_examples=30)
def test_counts_match_closed_form(n, seed, no_good):
    rng = np.random.default_rng(seed)
    box = Domain.box(n, -2, 2)
    k = n + 1 + int(rng.integers(0, 3))
    pts = box.points[rng.choice(box.size, size=k, replace=False)]
    cuts = poised_cuts(pts, np.zeros(k))
    if not cuts:
        return
    m = build_cpf(pts, (pts ** 2).sum(axis=1), box, with_no_good=no_good, l_f=-100.0)
    assert m.counts() == closed_form_counts(n, len(cuts), k, box.widths, no_good)


def test_binary_expansion_size_on_nonnegative_box():
    box = Domain((0, 0), (3, 3))
    m = build_cpf([[0, 0], [1, 0], [0, 1]], [0, 1, 1], box, with_no_good=True, l_f=-5)
    xi = [v for v in m.binaries if v.startswith("xi_")]
    # one-hot over all U+1 values per coordinate
    assert len(xi) == 2 * 4


# ---- semantics ---------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2])
def test_cone_consistent_assignment_is_feasible_everywhere(n, rng):
    box = Domain.box(n, -3, 3)
    f = lambda x: float(np.dot(x, x)) + float(x[0])  # noqa: E731
    pts = box.points[rng.choice(box.size, size=n + 3, replace=False)]
    m = build_cpf(pts, [f(p) for p in pts], box, l_f=-50.0)
    for x in box.points:
        rep = validate_assignment(m, cone_assignment(m, x))
        assert rep.feasible, (x, rep.violations[:3])
        assert cone_assignment(m, x)["eta"] <= f(x) + 1e-9


def test_no_good_forces_eta_up_at_evaluated_points():
    box = Domain.box(2, -2, 2)
    f = lambda x: float((x[0] - 1) ** 2 + x[1] ** 2)  # noqa: E731
    pts = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]])
    fv = [f(p) for p in pts]
    m = build_cpf(pts, fv, box, with_no_good=True, l_f=-20.0)
    for p, v in zip(pts, fv):
        vals = cone_assignment(m, p)
        assert vals["eta"] >= v - 1e-9
        assert validate_assignment(m, vals).feasible
        low = dict(vals, eta=v - 0.5)
        assert any(n.startswith("nogood_") for n in validate_assignment(m, low).names())
    # at an unevaluated point the block does not bind
    other = cone_assignment(m, [2, 2])
    assert validate_assignment(m, other).feasible


# ---- LP text -----------------------------------------------------------------

def test_lp_round_trip_is_byte_identical(tmp_path):
    box = Domain.box(2, -2, 2)
    pts = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]])
    m = build_cpf(pts, (pts ** 2).sum(axis=1), box, with_no_good=True, l_f=-20.0)
    path = tmp_path / "m.lp"
    export_lp(m, path)
    text = path.read_text()
    again = format_lp(read_lp(path))
    assert again == text
    export_lp(m, tmp_path / "m2.lp")
    assert (tmp_path / "m2.lp").read_bytes() == path.read_bytes()


def test_lp_sections_and_names():
    text = format_lp(_d1_model())
    heads = [ln for ln in text.splitlines() if ln in
             ("Minimize", "Subject To", "Bounds", "Generals", "Binaries", "End")]
    assert heads == ["Minimize", "Subject To", "Bounds", "Generals", "Binaries", "End"]
    for name in ("eta", "x_1", "z_1_1", "w_1_2_1", "lam_1_1_2"):
        assert name in text
    assert max(len(ln) for ln in text.splitlines()) <= 100


def test_reparsed_model_validates_the_same():
    m = _d1_model(eps=0.6)
    back = parse_lp(format_lp(m))
    vals = cone_assignment(m, [0], 0.0)
    assert validate_assignment(back, vals).names() == validate_assignment(m, vals).names()
    assert back.counts() == m.counts()


# ---- instance sequence along a run --------------------------------------------

def test_abhi_instance_sequence():
    prob = get_problem("abhi", 3)
    dom = Domain.box(3, -2, 2)
    seq = list(cpf_sequence(prob, dom, 12, x0=(0, 0, 0)))
    assert len(seq) == 12
    for inst, (cuts, lb, ub, xhat), nbin in zip(seq, ABHI_SEQUENCE, ABHI_BINARIES):
        assert inst.n_cuts == cuts
        assert math.trunc(inst.lower * 10) / 10 == pytest.approx(lb)
        assert inst.next_point == xhat
        # the reported incumbent also counts the value at the bound minimizer;
        # both bounds are printed truncated to one decimal
        best = min(inst.upper, prob(np.array(xhat)))
        assert math.trunc(best * 10) / 10 == pytest.approx(ub)
        counts = closed_form_counts(3, cuts, len(inst.points), dom.widths, True)
        assert counts["binaries"] == nbin


def test_first_abhi_instance_builds_with_matching_counts():
    prob = get_problem("abhi", 3)
    dom = Domain.box(3, -2, 2)
    first = next(cpf_sequence(prob, dom, 1, x0=(0, 0, 0)))
    m = build_cpf(first.points, first.fvals, dom, with_no_good=True)
    assert m.counts() == closed_form_counts(3, 20, 7, dom.widths, True)
    assert m.counts()["binaries"] == 335
    assert "l_f" in m.constants.provenance
    assert m.constants.l_f == pytest.approx(first.lower)


def test_plp_bound_agrees_with_brute_model_minimum():
    """Cone-consistent eta over the box reproduces the all-cut lower bound."""
    dom = Domain.box(2, -2, 2)
    prob = get_problem("quad", 2)
    inst = next(cpf_sequence(prob, dom, 1, x0=(0, 0)))
    m = build_cpf(inst.points, inst.fvals, dom, l_f=-100.0)
    evaluated = {tuple(p) for p in inst.points}
    etas = [cone_assignment(m, x)["eta"] for x in dom.points if tuple(x) not in evaluated]
    assert min(etas) == pytest.approx(inst.lower)
    assert len(list(itertools.combinations(range(len(inst.points)), 3))) >= inst.n_cuts

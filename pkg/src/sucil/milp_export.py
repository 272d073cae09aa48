"""Mixed-integer linear model of the piecewise-linear lower-bounding problem.

For a set of evaluated points, every poised (n+1)-subset contributes a
conditional cut ``eta >= c.x + b`` that is switched on by binaries ``z``
exactly when x lies in one of the subset's cones.  Cone membership is encoded
through multipliers ``lam`` (x written in the cone's ray coordinates) and
sign indicators ``w``.  The module builds that model, derives big-M and
separation constants that are valid on the box, writes and reads LP-format
files, and checks candidate assignments row by row so models can be verified
without an external MILP solver.

Variable names (all indices 1-based)::

    eta             model objective
    x_h             lattice coordinate h
    z_i_j           cut i, x in the cone anchored at the cut's j-th point
    w_i_j_l         cut i, cone j, multiplier of ray l is nonnegative
    lam_i_j_l       cut i, cone j, multiplier of ray toward point l
    xi_h_v          one-hot digit: x_h == lower_h + v  (v starts at 0)
"""
from __future__ import annotations

import itertools
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import (CapacityExceeded, DimensionMismatch, IncompleteAssignment, NoPoisedSubset,
                     ZeroNormal)
from .geometry import (MEMBER_TOL, POISED_TOL, Secant, check_poised, facet_halfspaces,
                       fit_secant)
from .underestimator import Domain, init_table, merge_combinations, refresh_active

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
RATIONAL_TOL = 1e-9
_LINE_WIDTH = 100


# --------------------------------------------------------------------------
# generic linear model and LP text format


@dataclass
class Row:
    name: str
    coefs: tuple  # ((var, coef), ...) in write order
    sense: str  # ">=", "<=" or "="
    rhs: float

    def activity(self, values: dict) -> float:
        return sum(c * values[v] for v, c in self.coefs)

    def violation(self, values: dict) -> float:
        lhs = self.activity(values)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        return abs(lhs - self.rhs)


@dataclass
class LinearModel:
    """A minimization model over named variables, as written to an LP file.

    ``bounds`` lists explicit bounds in write order; variables absent from it
    follow the LP-format default ``[0, inf)`` unless declared binary.
    """

    objective: str = "eta"
    rows: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    generals: list = field(default_factory=list)
    binaries: list = field(default_factory=list)
    comments: list = field(default_factory=list)

    def variables(self) -> list:
        seen = dict.fromkeys([self.objective])
        seen.update(dict.fromkeys(self.bounds))
        seen.update(dict.fromkeys(self.generals))
        seen.update(dict.fromkeys(self.binaries))
        for r in self.rows:
            seen.update(dict.fromkeys(v for v, _ in r.coefs))
        return list(seen)

    def bound_of(self, var: str) -> tuple:
        if var in self.bounds:
            return self.bounds[var]
        if var in self._binary_set:
            return (0.0, 1.0)
        return (0.0, math.inf)

    @property
    def _binary_set(self) -> set:
        return set(self.binaries)

    def counts(self) -> dict:
        nb = len(self.binaries)
        ng = len(self.generals)
        return {"binaries": nb, "integers": ng,
                "continuous": len(self.variables()) - nb - ng, "rows": len(self.rows)}


def _num(v: float) -> str:
    s = format(float(v) + 0.0, ".15g")
    return "0" if s == "-0" else s


def _wrap(head: str, tokens: Sequence[str], cont: str = "   ") -> list:
    lines, cur = [], head
    for tok in tokens:
        if len(cur) + 1 + len(tok) > _LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = cont + tok
        else:
            cur = cur + (" " if cur else "") + tok
    lines.append(cur)
    return lines


def _term_tokens(coefs) -> list:
    toks = []
    for k, (var, c) in enumerate(coefs):
        sign = "-" if c < 0 else "+"
        mag = _num(abs(c))
        # decide on the printed text so that reparsing reproduces the same line
        body = var if mag == "1" else f"{mag} {var}"
        if k == 0:
            toks.append(f"-{body}" if c < 0 else body)
        else:
            toks.append(f"{sign} {body}")
    return toks


def format_lp(model: LinearModel) -> str:
    out = [f"\\ {c}" for c in model.comments]
    out += ["Minimize", f" obj: {model.objective}", "Subject To"]
    for r in model.rows:
        toks = _term_tokens(r.coefs) + [r.sense, _num(r.rhs)]
        out += _wrap(f" {r.name}:", toks)
    out.append("Bounds")
    for var, (lo, hi) in model.bounds.items():
        if lo == -math.inf and hi == math.inf:
            out.append(f" {var} free")
        elif hi == math.inf:
            out.append(f" {var} >= {_num(lo)}")
        elif lo == -math.inf:
            out.append(f" -inf <= {var} <= {_num(hi)}")
        else:
            out.append(f" {_num(lo)} <= {var} <= {_num(hi)}")
    if model.generals:
        out.append("Generals")
        out += [" " + ln.strip() for ln in _wrap("", model.generals, "")]
    if model.binaries:
        out.append("Binaries")
        out += [" " + ln.strip() for ln in _wrap("", model.binaries, "")]
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: LinearModel, path) -> None:
    """Write ``model`` in LP format; identical models give identical bytes."""
    with open(path, "w", newline="\n") as fh:
        fh.write(format_lp(model))


_SECTIONS = {"minimize": "obj", "subject to": "rows", "bounds": "bounds",
             "generals": "generals", "binaries": "binaries", "end": "end"}
_TERM = re.compile(r"([+-]?)\s*(?:(\d[\d.eE+-]*|inf)\s+)?([A-Za-z_][\w]*)")


def _parse_float(s: str) -> float:
    s = s.strip()
    if s in ("inf", "+inf", "infinity"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    return float(s)


def _parse_expr(expr: str) -> tuple:
    coefs = []
    pos = 0
    expr = expr.strip()
    while pos < len(expr):
        m = _TERM.match(expr, pos)
        if m is None:
            raise ValueError(f"cannot parse linear expression near {expr[pos:]!r}")
        sign, mag, var = m.groups()
        c = float(mag) if mag else 1.0
        coefs.append((var, -c if sign == "-" else c))
        pos = m.end()
        while pos < len(expr) and expr[pos] == " ":
            pos += 1
    return tuple(coefs)


def parse_lp(text: str) -> LinearModel:
    """Read the LP dialect written by :func:`format_lp`."""
    model = LinearModel()
    section = None
    pending: list = []

    def flush_row():
        if not pending:
            return
        body = " ".join(pending)
        pending.clear()
        name, rest = body.split(":", 1)
        m = re.search(r"(>=|<=|=)\s*(\S+)\s*$", rest)
        if m is None:
            raise ValueError(f"row {name.strip()!r} has no sense/rhs")
        model.rows.append(Row(name.strip(), _parse_expr(rest[:m.start()]), m.group(1),
                              _parse_float(m.group(2))))

    for raw in text.splitlines():
        if raw.startswith("\\"):
            model.comments.append(raw[1:].strip())
            continue
        key = raw.strip().lower()
        if key in _SECTIONS:
            flush_row()
            section = _SECTIONS[key]
            continue
        line = raw.strip()
        if not line:
            continue
        if section == "obj":
            model.objective = line.split(":", 1)[1].strip()
        elif section == "rows":
            if raw.startswith(" ") and not raw.startswith("   ") and ":" in line:
                flush_row()
            pending.append(line)
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 2 and parts[1] == "free":
                model.bounds[parts[0]] = (-math.inf, math.inf)
            elif len(parts) == 3 and parts[1] == ">=":
                model.bounds[parts[0]] = (_parse_float(parts[2]), math.inf)
            elif len(parts) == 5 and parts[1] == parts[3] == "<=":
                model.bounds[parts[2]] = (_parse_float(parts[0]), _parse_float(parts[4]))
            else:
                raise ValueError(f"unrecognized bound line {line!r}")
        elif section == "generals":
            model.generals.extend(line.split())
        elif section == "binaries":
            model.binaries.extend(line.split())
        else:
            raise ValueError(f"content outside a section: {line!r}")
    flush_row()
    return model


def read_lp(path) -> LinearModel:
    with open(path) as fh:
        return parse_lp(fh.read())


# --------------------------------------------------------------------------
# constants


def integer_facet(normal, offset, tol: float = RATIONAL_TOL) -> tuple:
    """Scale a rational hyperplane to coprime integer coefficients.

    Each coefficient is recovered as a fraction by continued-fraction
    approximation, the denominators are cleared with their lcm and the
    result is divided by the gcd.  The sign of the input is kept.
    """
    vals = list(np.asarray(normal, dtype=float)) + [float(offset)]
    fracs = []
    for v in vals:
        bound = 16
        while True:
            fr = Fraction(v).limit_denominator(bound)
            if abs(float(fr) - v) <= tol * max(1.0, abs(v)):
                break
            if bound > 10**12:
                raise ValueError(f"coefficient {v!r} is not recognizably rational")
            bound *= 16
        fracs.append(fr)
    den = math.lcm(*(f.denominator for f in fracs))
    ints = [int(f * den) for f in fracs]
    g = math.gcd(*ints)
    if g == 0:
        raise ZeroNormal("hyperplane has all-zero coefficients")
    ints = [v // g for v in ints]
    return np.array(ints[:-1], dtype=np.int64), int(ints[-1])


def derive_M_eta(cuts: Sequence[Secant], box: Domain, l_f: float) -> tuple:
    """Per-cut big-M values (max of the cut over the box minus ``l_f``) and their max."""
    lo = np.array(box.lower, dtype=float)
    hi = np.array(box.upper, dtype=float)
    per = []
    for s in cuts:
        c = np.asarray(s.c, dtype=float)
        top = float(np.where(c < 0, c * lo, c * hi).sum() + s.b)
        per.append(top - l_f)
    per = np.array(per, dtype=float)
    return per, float(per.max()) if per.size else 0.0


def _facet_scale(c, b, anchor) -> float:
    if anchor is None:
        return float(np.linalg.norm(c))
    return float(np.dot(c, anchor) + b)


def derive_eps_lambda(facets, anchors=None) -> float:
    """Smallest nonzero separation of lattice points from integer facets.

    Without ``anchors`` this is the Euclidean bound ``min 1/||c||``.  With the
    excluded vertex of each facet given, the bound is expressed in the units
    of the cone multipliers instead: ``min 1/(c.x_anchor + b)``.
    """
    best = math.inf
    for k, (c, b) in enumerate(facets):
        c = np.asarray(c)
        if not np.any(c):
            raise ZeroNormal(f"facet {k} has a zero normal")
        scale = _facet_scale(c, b, None if anchors is None else anchors[k])
        if scale <= 0:
            raise ValueError(f"facet {k} is not positive at its anchor")
        best = min(best, 1.0 / scale)
    return best


def derive_M_lambda(facets, box: Domain, anchors=None) -> float:
    """Largest ``|c.x + b|`` over box vertices, scaled like :func:`derive_eps_lambda`."""
    lo = np.array(box.lower, dtype=float)
    hi = np.array(box.upper, dtype=float)
    best = 0.0
    for k, (c, b) in enumerate(facets):
        c = np.asarray(c, dtype=float)
        top = float(np.maximum(c * lo, c * hi).sum() + b)
        bot = float(np.minimum(c * lo, c * hi).sum() + b)
        scale = _facet_scale(c, b, None if anchors is None else anchors[k])
        if scale == 0:
            raise ZeroNormal(f"facet {k} has a zero normal")
        best = max(best, max(abs(top), abs(bot)) / scale)
    return best


@dataclass
class CutRecord:
    ids: tuple
    points: np.ndarray
    secant: Secant
    facets: list  # [(int normal, int offset)] facet l is opposite points[l]

    def multipliers(self, x) -> np.ndarray:
        """Barycentric coordinates of ``x``; the cone multiplier toward point l is minus entry l."""
        x = np.asarray(x, dtype=float)
        return np.array([(np.dot(c, x) + b) / (np.dot(c, p) + b)
                         for (c, b), p in zip(self.facets, self.points)])


@dataclass
class ConstantBundle:
    M_eta: float
    M_lambda: float
    eps_lambda: float
    M_cut: tuple
    M_nogood: float
    l_f: float
    provenance: dict = field(default_factory=dict)

    def describe(self) -> str:
        lines = [f"M_eta = {_num(self.M_eta)}", f"M_lambda = {_num(self.M_lambda)}",
                 f"eps_lambda = {_num(self.eps_lambda)}", f"M_nogood = {_num(self.M_nogood)}",
                 f"l_f = {_num(self.l_f)}",
                 "M_cut = " + " ".join(_num(v) for v in self.M_cut)]
        lines += [f"# {k}: {v}" for k, v in sorted(self.provenance.items())]
        return "\n".join(lines) + "\n"


def poised_cuts(points, fvals, tol: float = POISED_TOL) -> list:
    """Every poised (n+1)-subset of the evaluated points, lexicographic in log order."""
    pts = np.asarray(points, dtype=np.int64)
    fv = np.asarray(fvals, dtype=float)
    n = pts.shape[1]
    cuts = []
    for combo in itertools.combinations(range(len(pts)), n + 1):
        ps = check_poised(pts[list(combo)], tol)
        if ps is None:
            continue
        sec = fit_secant(ps, fv[list(combo)])
        cc = facet_halfspaces(ps)
        facets = [integer_facet(cc.normals[j], cc.offsets[j]) for j in range(n + 1)]
        for j, (c, b) in enumerate(facets):
            for l, p in enumerate(pts[list(combo)]):
                v = int(np.dot(c, p)) + b
                if (v == 0) != (l != j):
                    raise ValueError(f"integer facet {j} of {combo} is inconsistent")
        cuts.append(CutRecord(ids=combo, points=pts[list(combo)].copy(), secant=sec, facets=facets))
    return cuts


def plp_lower_bound(points, fvals, dom: Domain, parallel: bool = True) -> tuple:
    """Minimum over the domain of the lower bound built from all poised cuts.

    Evaluated points count with their observed value.  Returns
    ``(bound, argmin over unevaluated points or None, covered)`` where
    ``covered`` is False when some unevaluated point has no bound at all.
    """
    pts = np.asarray(points, dtype=np.int64)
    fv = np.asarray(fvals, dtype=float)
    table = init_table(dom)
    evaluated = np.zeros(dom.size, dtype=bool)
    for p in pts:
        evaluated[dom.index_of(p)] = True
    active = refresh_active(table, evaluated, math.inf)
    ids = range(len(pts))
    merge_combinations(table, active, ids, ids, pts, fv, math.inf, parallel=parallel)
    if active.size == 0:
        return float(fv.min()), None, True
    k = int(np.argmin(table.eta[active]))
    low = float(table.eta[active[k]])
    return min(low, float(fv.min())), int(active[k]), bool(np.isfinite(table.eta[active]).all())


# --------------------------------------------------------------------------
# model construction


@dataclass
class CpfModel(LinearModel):
    n: int = 0
    lower: tuple = ()
    upper: tuple = ()
    points: np.ndarray = None
    fvals: np.ndarray = None
    cuts: list = field(default_factory=list)
    constants: ConstantBundle = None
    with_no_good: bool = False
    per_cut_big_m: bool = True


def derive_constants(cuts: list, points, fvals, box: Domain, l_f: Optional[float] = None,
                     per_cut_big_m: bool = True) -> ConstantBundle:
    fv = np.asarray(fvals, dtype=float)
    prov = {}
    if l_f is None:
        covered = False
        if box.size * box.bytes_per_point() <= 256 * 2**20:
            try:
                l_f, _, covered = plp_lower_bound(points, fvals, box)
            except CapacityExceeded:
                covered = False
        if covered:
            prov["l_f"] = "minimum of the all-cut lower bound over the box"
        else:
            diam = float(np.max(np.array(box.upper) - np.array(box.lower)))
            slope = max((float(np.abs(c.secant.c).sum()) for c in cuts), default=0.0)
            l_f = float(fv.min()) - diam * slope
            prov["l_f"] = "heuristic: min observed f - box diameter * max |c|_1"
            log.warning("lower bound l_f falls back to a heuristic; big-M values may be invalid")
    else:
        prov["l_f"] = "caller supplied"
    per, m_eta = derive_M_eta([c.secant for c in cuts], box, l_f)
    facets = [f for c in cuts for f in c.facets]
    anchors = [p for c in cuts for p in c.points]
    eps = derive_eps_lambda(facets, anchors)
    m_lam = derive_M_lambda(facets, box, anchors) + eps
    prov["eps_lambda"] = "min 1/(c.x_anchor + b) over integer facets (multiplier units)"
    prov["M_lambda"] = "max over box vertices of |c.x + b|/(c.x_anchor + b), plus eps_lambda"
    prov["M_eta"] = "max over cuts of the box maximum of the cut minus l_f"
    prov["M_cut"] = "per-cut values written into cut rows" if per_cut_big_m else "unused (single M_eta)"
    m_ng = max(0.0, float(fv.max()) - l_f)
    prov["M_nogood"] = "max observed f - l_f"
    return ConstantBundle(M_eta=m_eta, M_lambda=m_lam, eps_lambda=eps, M_cut=tuple(per.tolist()),
                          M_nogood=m_ng, l_f=float(l_f), provenance=prov)


def build_cpf(points, fvals, box: Domain, constants: Optional[ConstantBundle] = None,
              with_no_good: bool = False, per_cut_big_m: bool = True,
              cuts: Optional[list] = None, l_f: Optional[float] = None) -> CpfModel:
    pts = np.asarray(points, dtype=np.int64)
    fv = np.asarray(fvals, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != box.n or len(fv) != len(pts):
        raise DimensionMismatch("points must be (k, n) with one value each")
    n = box.n
    if cuts is None:
        cuts = poised_cuts(pts, fv)
    if not cuts:
        raise NoPoisedSubset(f"no poised subset among {len(pts)} points")
    if constants is None:
        constants = derive_constants(cuts, pts, fv, box, l_f, per_cut_big_m)

    m = CpfModel(n=n, lower=box.lower, upper=box.upper, points=pts, fvals=fv, cuts=cuts,
                 constants=constants, with_no_good=with_no_good, per_cut_big_m=per_cut_big_m)
    m.comments = [f"conditional-cut lower-bounding model: n={n} cuts={len(cuts)} points={len(pts)}",
                  f"M_eta={_num(constants.M_eta)} M_lambda={_num(constants.M_lambda)} "
                  f"eps_lambda={_num(constants.eps_lambda)}"]
    xs = [f"x_{h + 1}" for h in range(n)]
    m.bounds["eta"] = (-math.inf, math.inf)
    for h in range(n):
        m.bounds[xs[h]] = (float(box.lower[h]), float(box.upper[h]))
    m.generals = list(xs)

    M_lam, eps = constants.M_lambda, constants.eps_lambda
    for i, cut in enumerate(cuts, start=1):
        big = constants.M_cut[i - 1] if per_cut_big_m else constants.M_eta
        slope = _snap(cut.secant.c, cut.secant.b)
        J = range(1, n + 2)
        z = [f"z_{i}_{j}" for j in J]
        m.binaries += z
        # eta - c.x - M sum z >= b - M
        coefs = [("eta", 1.0)] + [(xs[h], -float(slope[h])) for h in range(n) if slope[h] != 0]
        coefs += [(v, -big) for v in z]
        m.rows.append(Row(f"cut_{i}", tuple(coefs), ">=", float(cut.secant.b) - big))
        m.rows.append(Row(f"sos_{i}", tuple((v, 1.0) for v in z), "<=", 1.0))
        for j in J:
            others = [l for l in J if l != j]
            lam = {l: f"lam_{i}_{j}_{l}" for l in others}
            w = {l: f"w_{i}_{j}_{l}" for l in others}
            for l in others:
                m.bounds[lam[l]] = (-math.inf, math.inf)
            m.binaries += [w[l] for l in others]
            xj = cut.points[j - 1]
            # x - sum_l lam_l (x_j - x_l) = x_j
            for h in range(n):
                coefs = [(xs[h], 1.0)]
                coefs += [(lam[l], -float(xj[h] - cut.points[l - 1][h])) for l in others
                          if xj[h] != cut.points[l - 1][h]]
                m.rows.append(Row(f"cone_{i}_{j}_{h + 1}", tuple(coefs), "=", float(xj[h])))
            for l in others:
                m.rows.append(Row(f"lamlb_{i}_{j}_{l}", ((lam[l], 1.0), (z[j - 1], -M_lam)),
                                  ">=", -M_lam))
            for l in others:
                m.rows.append(Row(f"lamub_{i}_{j}_{l}", ((lam[l], 1.0), (w[l], -M_lam)),
                                  "<=", -eps))
            m.rows.append(Row(f"zwlo_{i}_{j}", ((z[j - 1], float(n)),)
                              + tuple((w[l], -1.0) for l in others), "<=", 0.0))
            m.rows.append(Row(f"zwhi_{i}_{j}", tuple((w[l], 1.0) for l in others)
                              + ((z[j - 1], -1.0),), "<=", float(n - 1)))

    if with_no_good:
        _add_no_good(m, xs)
    return m


def _snap(c, b) -> np.ndarray:
    # interpolation round-off leaves ~1e-16 slopes on flat cuts
    c = np.asarray(c, dtype=float)
    scale = max(1.0, float(np.abs(c).max(initial=0.0)), abs(float(b)))
    return np.where(np.abs(c) < 1e-12 * scale, 0.0, c)


def _digits(m: CpfModel, h: int) -> list:
    return [f"xi_{h + 1}_{v}" for v in range(m.upper[h] - m.lower[h] + 1)]


def _add_no_good(m: CpfModel, xs: list) -> None:
    n = m.n
    digits = [_digits(m, h) for h in range(n)]
    for h in range(n):
        m.binaries += digits[h]
        m.rows.append(Row(f"link_{h + 1}", ((xs[h], 1.0),) + tuple(
            (d, -float(v)) for v, d in enumerate(digits[h]) if v != 0), "=", float(m.lower[h])))
        m.rows.append(Row(f"onehot_{h + 1}", tuple((d, 1.0) for d in digits[h]), "=", 1.0))
    M = m.constants.M_nogood
    for k, (p, fk) in enumerate(zip(m.points, m.fvals), start=1):
        coefs = [("eta", 1.0)]
        for h in range(n):
            on = int(p[h] - m.lower[h])
            coefs += [(d, M if v != on else -M) for v, d in enumerate(digits[h])]
        # the evaluated point has exactly n digits set
        m.rows.append(Row(f"nogood_{k}", tuple(coefs), ">=", float(fk) - M * n))


def closed_form_counts(n: int, n_cuts: int, n_points: int = 0, widths: Sequence[int] = (),
                       with_no_good: bool = False) -> dict:
    """Variable and row counts implied by the model layout."""
    per_bin = (n + 1) + n * (n + 1)
    per_rows = 1 + 1 + n * (n + 1) + n * (n + 1) + n * (n + 1) + 2 * (n + 1)
    out = {"binaries": n_cuts * per_bin, "integers": n,
           "continuous": 1 + n_cuts * n * (n + 1), "rows": n_cuts * per_rows}
    if with_no_good:
        out["binaries"] += int(sum(widths))
        out["rows"] += 2 * n + n_points
    return out


# --------------------------------------------------------------------------
# validation


@dataclass
class Violation:
    name: str
    kind: str  # "row", "bound" or "integrality"
    amount: float


@dataclass
class ValidationReport:
    violations: list

    @property
    def feasible(self) -> bool:
        return not self.violations

    def names(self) -> list:
        return [v.name for v in self.violations]


def validate_assignment(model: LinearModel, assignment: dict, tol: float = FEAS_TOL) -> ValidationReport:
    """Check every row, bound and integrality requirement of ``model``."""
    missing = [v for v in model.variables() if v not in assignment]
    if missing:
        raise IncompleteAssignment(f"{len(missing)} variables unassigned, e.g. {missing[:5]}")
    viol = []
    for r in model.rows:
        amt = r.violation(assignment)
        if amt > tol * max(1.0, abs(r.rhs)):
            viol.append(Violation(r.name, "row", amt))
    integral = set(model.generals) | set(model.binaries)
    for v in model.variables():
        val = float(assignment[v])
        lo, hi = model.bound_of(v)
        if val < lo - tol or val > hi + tol:
            viol.append(Violation(v, "bound", max(lo - val, val - hi)))
        if v in integral and abs(val - round(val)) > tol:
            viol.append(Violation(v, "integrality", abs(val - round(val))))
    return ValidationReport(viol)


def _min_eta(model: LinearModel, values: dict) -> float:
    need = -math.inf
    for r in model.rows:
        c = dict(r.coefs).get(model.objective, 0.0)
        if c > 0 and r.sense == ">=":
            rest = sum(cf * values[v] for v, cf in r.coefs if v != model.objective)
            need = max(need, (r.rhs - rest) / c)
    return need


def cone_assignment(model: CpfModel, x, eta: Optional[float] = None,
                    tol: float = MEMBER_TOL) -> dict:
    """Assignment that sets every indicator according to true cone membership of ``x``.

    Multipliers come from the cone coordinates of ``x``; ``z`` marks the cone
    that contains ``x`` (if any) and ``w`` marks nonnegative multipliers.  When
    ``eta`` is None the smallest value allowed by the rows is used.
    """
    x = np.asarray(x, dtype=np.int64)
    vals = {"eta": 0.0}
    for h in range(model.n):
        vals[f"x_{h + 1}"] = float(x[h])
    n = model.n
    for i, cut in enumerate(model.cuts, start=1):
        bary = cut.multipliers(x)
        for j in range(1, n + 2):
            others = [l for l in range(1, n + 2) if l != j]
            inside = all(bary[l - 1] <= tol for l in others)
            vals[f"z_{i}_{j}"] = 1.0 if inside else 0.0
            for l in others:
                vals[f"lam_{i}_{j}_{l}"] = float(-bary[l - 1])
                vals[f"w_{i}_{j}_{l}"] = 1.0 if bary[l - 1] <= tol else 0.0
    if model.with_no_good:
        for h in range(n):
            on = int(x[h] - model.lower[h])
            for v, d in enumerate(_digits(model, h)):
                vals[d] = 1.0 if v == on else 0.0
    vals["eta"] = _min_eta(model, vals) if eta is None else float(eta)
    return vals


def completion_exists(model: CpfModel, x, eta: float, tol: float = FEAS_TOL,
                      max_binaries_per_cut: int = 12) -> bool:
    """Exhaustively decide whether ``(x, eta)`` extends to a feasible assignment.

    Cuts share only ``x`` and ``eta``, so each cut's indicators are searched
    independently; multipliers are fixed by ``x``.  Meant for small n.
    """
    base = cone_assignment(model, x, eta)
    n = model.n
    per = (n + 1) + n * (n + 1)
    if per > max_binaries_per_cut:
        raise ValueError(f"{per} binaries per cut is too many for exhaustive search")
    by_cut: dict = {}
    shared = []
    for r in model.rows:
        head = r.name.split("_")
        if head[0] in ("cut", "sos", "cone", "lamlb", "lamub", "zwlo", "zwhi"):
            by_cut.setdefault(int(head[1]), []).append(r)
        else:
            shared.append(r)
    if any(r.violation(base) > tol * max(1.0, abs(r.rhs)) for r in shared):
        return False
    for i in range(1, len(model.cuts) + 1):
        names = [f"z_{i}_{j}" for j in range(1, n + 2)]
        names += [f"w_{i}_{j}_{l}" for j in range(1, n + 2) for l in range(1, n + 2) if l != j]
        rows = by_cut.get(i, [])
        ok = False
        for bits in itertools.product((0.0, 1.0), repeat=len(names)):
            trial = dict(base)
            trial.update(zip(names, bits))
            if all(r.violation(trial) <= tol * max(1.0, abs(r.rhs)) for r in rows):
                ok = True
                break
        if not ok:
            return False
    return True


# --------------------------------------------------------------------------
# sequence of models along a run


@dataclass
class CpfInstance:
    k: int
    points: np.ndarray
    fvals: np.ndarray
    lower: float
    upper: float
    next_point: Optional[tuple]
    n_cuts: int


def cpf_sequence(problem, dom: Domain, iters: int, x0=None) -> Iterator[CpfInstance]:
    """Run the all-cuts framework and yield the data behind each model instance.

    Instance k holds the evaluated points before the k-th model solve.  The
    next iterate is the minimizer of the all-cut bound over unevaluated points.
    """
    from .problems import midpoint
    from .solver import initial_stencil

    x0 = midpoint(dom.lower, dom.upper) if x0 is None else np.asarray(x0, dtype=np.int64)
    pts = [np.asarray(p) for p in initial_stencil(x0, dom)]
    fv = [float(problem(p)) for p in pts]
    for k in range(1, iters + 1):
        P = np.array(pts)
        F = np.array(fv)
        lower, nxt, _ = plp_lower_bound(P, F, dom)
        n_cuts = len(poised_cuts(P, F))
        nxt_pt = None if nxt is None else tuple(int(v) for v in dom.points[nxt])
        yield CpfInstance(k=k, points=P, fvals=F, lower=lower, upper=float(F.min()),
                          next_point=nxt_pt, n_cuts=n_cuts)
        if nxt is None or lower >= F.min() - 1e-9:
            return
        pts.append(dom.points[nxt].copy())
        fv.append(float(problem(pts[-1])))

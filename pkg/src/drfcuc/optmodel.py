"""Solver-agnostic optimization model and MISOCP solution strategy.

The model is a plain intermediate representation: continuous/binary
variables, sparse linear rows, second-order cone rows ``||A x + b|| <=
c'x + d``, and a linear minimization objective.  Mixed-integer SOC
models are solved by an outer-approximation loop: solve the MILP
relaxation with accumulated supporting-hyperplane cuts, add a gradient
cut for every cone violated at the incumbent, repeat until every cone
holds within ``tol_soc``.  The MILP itself goes to a pluggable backend;
the default wraps :func:`scipy.optimize.milp` (HiGHS).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

INF = math.inf


class ModelError(ValueError):
    """Malformed model or invalid solver options."""


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


class LinExpr:
    """Sparse affine expression c'x + const over model variables."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=0.0):
        self.coeffs: dict[int, float] = dict(coeffs) if coeffs else {}
        self.const = float(const)

    def copy(self) -> "LinExpr":
        return LinExpr(self.coeffs, self.const)

    def _iadd(self, other, sign: float) -> "LinExpr":
        if isinstance(other, Var):
            self.coeffs[other.idx] = self.coeffs.get(other.idx, 0.0) + sign
        elif isinstance(other, LinExpr):
            for idx, c in other.coeffs.items():
                self.coeffs[idx] = self.coeffs.get(idx, 0.0) + sign * c
            self.const += sign * other.const
        elif isinstance(other, (int, float)):
            self.const += sign * other
        else:
            return NotImplemented
        return self

    def __add__(self, other):
        return self.copy()._iadd(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __rsub__(self, other):
        out = self.copy()
        for idx in out.coeffs:
            out.coeffs[idx] = -out.coeffs[idx]
        out.const = -out.const
        return out._iadd(other, 1.0)

    def __mul__(self, k):
        if not isinstance(k, (int, float)):
            return NotImplemented
        return LinExpr({i: k * c for i, c in self.coeffs.items()}, k * self.const)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x: np.ndarray) -> float:
        return float(self.const + sum(c * x[i] for i, c in self.coeffs.items()))

    def __repr__(self):
        terms = " + ".join(f"{c:g}*v{i}" for i, c in sorted(self.coeffs.items()))
        return f"LinExpr({terms} + {self.const:g})"


class Var:
    """Handle to a declared model variable; arithmetic builds LinExpr."""

    __slots__ = ("idx", "name")

    def __init__(self, idx: int, name: str):
        self.idx = idx
        self.name = name

    def expr(self) -> LinExpr:
        return LinExpr({self.idx: 1.0})

    def __add__(self, other):
        return self.expr()._iadd(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self.expr()._iadd(other, -1.0)

    def __rsub__(self, other):
        return (-1.0 * self.expr())._iadd(other, 1.0)

    def __mul__(self, k):
        if not isinstance(k, (int, float)):
            return NotImplemented
        return LinExpr({self.idx: float(k)})

    __rmul__ = __mul__

    def __neg__(self):
        return LinExpr({self.idx: -1.0})

    def __repr__(self):
        return f"Var({self.idx}, {self.name!r})"


def as_expr(x) -> LinExpr:
    if isinstance(x, LinExpr):
        return x
    if isinstance(x, Var):
        return x.expr()
    if isinstance(x, (int, float)):
        return LinExpr(const=float(x))
    raise ModelError(f"cannot coerce {x!r} to a linear expression")


def lin_sum(items) -> LinExpr:
    out = LinExpr()
    for it in items:
        out._iadd(it, 1.0)
    return out


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

CONTINUOUS = "continuous"
BINARY = "binary"

LE, GE, EQ = "<=", ">=", "=="


@dataclass
class LinRow:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""

    def violation(self, x: np.ndarray) -> float:
        lhs = sum(c * x[i] for i, c in self.coeffs.items())
        if self.sense == LE:
            return lhs - self.rhs
        if self.sense == GE:
            return self.rhs - lhs
        return abs(lhs - self.rhs)


@dataclass
class SocRow:
    vector: list[LinExpr]
    bound: LinExpr
    name: str = ""

    def violation(self, x: np.ndarray) -> float:
        norm = math.sqrt(sum(e.value(x) ** 2 for e in self.vector))
        return norm - self.bound.value(x)


class Model:
    """Mutable MISOCP being assembled; immutable once handed to a solver."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.var_kinds: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.rows: list[LinRow] = []
        self.socs: list[SocRow] = []
        self.objective = LinExpr()

    # -- variables ---------------------------------------------------------

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                kind: str = CONTINUOUS) -> Var:
        if kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {kind!r}")
        if lb > ub:
            raise ModelError(f"variable {name}: lb {lb} > ub {ub}")
        if kind == BINARY and (lb < 0.0 or ub > 1.0):
            raise ModelError(f"binary {name} must have bounds within [0, 1]")
        self.var_names.append(name)
        self.var_kinds.append(kind)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        return Var(len(self.var_names) - 1, name)

    def add_binary(self, name: str) -> Var:
        return self.add_var(name, 0.0, 1.0, BINARY)

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    # -- rows ----------------------------------------------------------------

    def add_linear(self, expr, sense: str, rhs: float = 0.0, name: str = "") -> LinRow:
        """Add expr (sense) rhs; expression constants are folded into rhs."""
        if sense not in (LE, GE, EQ):
            raise ModelError(f"unknown sense {sense!r}")
        e = as_expr(expr)
        coeffs = {i: c for i, c in e.coeffs.items() if c != 0.0}
        row = LinRow(coeffs, sense, float(rhs) - e.const, name)
        self._check_refs(coeffs, name)
        self.rows.append(row)
        return row

    def add_le(self, lhs, rhs, name: str = "") -> LinRow:
        return self.add_linear(as_expr(lhs) - as_expr(rhs), LE, 0.0, name)

    def add_ge(self, lhs, rhs, name: str = "") -> LinRow:
        return self.add_linear(as_expr(lhs) - as_expr(rhs), GE, 0.0, name)

    def add_eq(self, lhs, rhs, name: str = "") -> LinRow:
        return self.add_linear(as_expr(lhs) - as_expr(rhs), EQ, 0.0, name)

    def add_soc(self, vector, bound, name: str = "") -> SocRow:
        """Add ||vector|| <= bound with affine entries."""
        vec = [as_expr(v) for v in vector]
        if not vec:
            raise ModelError(f"SOC row {name!r} needs a nonempty vector")
        b = as_expr(bound)
        for e in vec + [b]:
            self._check_refs(e.coeffs, name)
        row = SocRow(vec, b, name)
        self.socs.append(row)
        return row

    def minimize(self, expr) -> None:
        self.objective = as_expr(expr)
        self._check_refs(self.objective.coeffs, "objective")

    def _check_refs(self, coeffs: dict[int, float], name: str) -> None:
        n = self.num_vars
        for i in coeffs:
            if not 0 <= i < n:
                raise ModelError(f"row {name!r} references undeclared variable {i}")

    # -- inspection --------------------------------------------------------

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint violation (linear and SOC) at point x."""
        worst = 0.0
        for row in self.rows:
            worst = max(worst, row.violation(x))
        for soc in self.socs:
            worst = max(worst, soc.violation(x))
        for i in range(self.num_vars):
            worst = max(worst, self.lb[i] - x[i], x[i] - self.ub[i])
        return worst

    def stats(self) -> dict:
        return {
            "vars": self.num_vars,
            "binaries": sum(k == BINARY for k in self.var_kinds),
            "linear_rows": len(self.rows),
            "soc_rows": len(self.socs),
        }


# ---------------------------------------------------------------------------
# options / results
# ---------------------------------------------------------------------------


@dataclass
class SolveOptions:
    """Outer-approximation and backend controls."""

    mip_gap: float = 0.01
    time_limit: float | None = None
    tol_soc: float = 1e-6
    max_cut_rounds: int = 200
    seed_cuts: bool = True
    backend: str | None = None
    verbose: bool = False

    def __post_init__(self):
        set_mip_gap(self, self.mip_gap)
        set_time_limit(self, self.time_limit)


def set_mip_gap(options: SolveOptions, gap: float) -> None:
    if not 0.0 <= gap < 1.0:
        raise ModelError(f"MIP gap must lie in [0, 1), got {gap}")
    options.mip_gap = float(gap)


def set_time_limit(options: SolveOptions, limit: float | None) -> None:
    if limit is not None and limit <= 0:
        raise ModelError(f"time limit must be positive, got {limit}")
    options.time_limit = limit


OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
LIMIT = "limit"


@dataclass
class SolveResult:
    status: str
    values: np.ndarray | None = None
    objective: float | None = None
    mip_gap: float | None = None
    cut_count: int = 0
    cut_rounds: int = 0
    max_soc_violation: float = 0.0
    wall_time: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)

    def value(self, var: Var) -> float:
        if self.values is None:
            raise ModelError(f"no values available (status {self.status})")
        return float(self.values[var.idx])


# ---------------------------------------------------------------------------
# MILP backend
# ---------------------------------------------------------------------------


class ScipyMilpBackend:
    """MILP backend over scipy.optimize.milp (HiGHS)."""

    name = "scipy"

    def solve(self, c, integrality, lb, ub, a_matrix, row_lb, row_ub, options):
        constraints = []
        if a_matrix is not None and a_matrix.shape[0] > 0:
            constraints.append(LinearConstraint(a_matrix, row_lb, row_ub))
        opts = {"presolve": True}
        if options.mip_gap is not None:
            opts["mip_rel_gap"] = options.mip_gap
        if options.time_limit is not None:
            opts["time_limit"] = options.time_limit
        res = milp(c=c, integrality=integrality,
                   bounds=Bounds(lb, ub), constraints=constraints, options=opts)
        status = {0: OPTIMAL, 1: LIMIT, 2: INFEASIBLE, 3: INFEASIBLE}.get(res.status, LIMIT)
        if res.x is None and status == LIMIT:
            status = INFEASIBLE
        gap = getattr(res, "mip_gap", None)
        return status, res.x, res.fun, gap, res.message


_BACKENDS = {"scipy": ScipyMilpBackend}


def register_backend(name: str, factory) -> None:
    _BACKENDS[name] = factory


def get_backend(name: str | None = None):
    key = name or os.environ.get("DRFCUC_BACKEND", "scipy")
    try:
        return _BACKENDS[key]()
    except KeyError:
        raise ModelError(f"unknown MILP backend {key!r}; registered: {sorted(_BACKENDS)}")


# ---------------------------------------------------------------------------
# outer-approximation solve
# ---------------------------------------------------------------------------


def _seed_cuts(soc: SocRow) -> list[tuple[LinExpr, str]]:
    """Coordinate-direction supporting cuts +-v_i <= bound, valid since
    |v_i| <= ||v||."""
    cuts = []
    for k, entry in enumerate(soc.vector):
        for sign in (1.0, -1.0):
            cuts.append((sign * entry - soc.bound, f"{soc.name}.seed[{k};{sign:+.0f}]"))
    return cuts


def _cut_from_direction(soc: SocRow, u) -> LinExpr:
    """Supporting hyperplane u'(Ax+b) <= c'x+d for any direction with
    ||u|| <= 1; at an incumbent the deepest cut uses u = v/||v||."""
    lhs = LinExpr()
    for uk, entry in zip(u, soc.vector):
        if uk != 0.0:
            lhs._iadd(entry * float(uk), 1.0)
    return lhs - soc.bound


POOL_DIRECTIONS_PER_CONE = 8


def solve_misocp(model: Model, options: SolveOptions | None = None,
                 backend=None, cut_pool: dict[str, list] | None = None
                 ) -> SolveResult:
    """Solve the model by outer approximation over the MILP backend.

    Every cut is a supporting hyperplane of a cone, hence valid for all
    binary assignments; cuts accumulate monotonically across rounds.

    ``cut_pool`` maps cone names to unit directions from earlier solves;
    matching cones are pre-cut with them and the pool is updated in
    place, which warm-starts sequential re-solves of related models.
    """
    import time as _time

    t0 = _time.perf_counter()
    options = options or SolveOptions()
    backend = backend or get_backend(options.backend)

    n = model.num_vars
    c = np.zeros(n)
    for i, coef in model.objective.coeffs.items():
        c[i] = coef
    integrality = np.array([1 if k == BINARY else 0 for k in model.var_kinds])
    lb = np.array(model.lb)
    ub = np.array(model.ub)

    # cut rows as (coeffs dict, rhs) for expr <= 0 normalized to c'x <= rhs
    cut_rows: list[tuple[dict[int, float], float]] = []
    if options.seed_cuts:
        for soc in model.socs:
            for expr, _ in _seed_cuts(soc):
                cut_rows.append((dict(expr.coeffs), -expr.const))
    if cut_pool:
        for soc in model.socs:
            for u in cut_pool.get(soc.name, ()):
                if len(u) == len(soc.vector):
                    expr = _cut_from_direction(soc, u)
                    cut_rows.append((dict(expr.coeffs), -expr.const))

    def build_matrix():
        n_rows = len(model.rows) + len(cut_rows)
        if n_rows == 0:
            return None, None, None
        rows_i, cols_i, data = [], [], []
        row_lb = np.empty(n_rows)
        row_ub = np.empty(n_rows)
        for r, row in enumerate(model.rows):
            for i, coef in row.coeffs.items():
                rows_i.append(r)
                cols_i.append(i)
                data.append(coef)
            if row.sense == LE:
                row_lb[r], row_ub[r] = -INF, row.rhs
            elif row.sense == GE:
                row_lb[r], row_ub[r] = row.rhs, INF
            else:
                row_lb[r], row_ub[r] = row.rhs, row.rhs
        base = len(model.rows)
        for k, (coeffs, rhs) in enumerate(cut_rows):
            r = base + k
            for i, coef in coeffs.items():
                rows_i.append(r)
                cols_i.append(i)
                data.append(coef)
            row_lb[r], row_ub[r] = -INF, rhs
        a = sparse.csr_matrix((data, (rows_i, cols_i)), shape=(n_rows, n))
        return a, row_lb, row_ub

    status = INFEASIBLE
    x = None
    obj = None
    gap = None
    message = ""
    worst = 0.0
    n_initial_cuts = len(cut_rows)
    rounds = 0

    for rounds in range(1, options.max_cut_rounds + 1):
        a, row_lb, row_ub = build_matrix()
        status, x, obj, gap, message = backend.solve(
            c, integrality, lb, ub, a, row_lb, row_ub, options)
        if status == INFEASIBLE or x is None:
            return SolveResult(INFEASIBLE, message=message,
                               cut_count=len(cut_rows) - n_initial_cuts,
                               cut_rounds=rounds,
                               wall_time=_time.perf_counter() - t0)
        x = np.asarray(x, dtype=float)
        violated = [(soc, soc.violation(x)) for soc in model.socs]
        worst = max((v for _, v in violated), default=0.0)
        if options.verbose:
            print(f"[oa] round {rounds}: obj={obj:.6g} max_soc_violation={worst:.3g}")
        if worst <= options.tol_soc:
            break
        for soc, v in violated:
            if v > options.tol_soc:
                vals = np.array([e.value(x) for e in soc.vector])
                u = vals / float(np.linalg.norm(vals))
                cut = _cut_from_direction(soc, u)
                cut_rows.append((dict(cut.coeffs), -cut.const))
                if cut_pool is not None and soc.name:
                    pool = cut_pool.setdefault(soc.name, [])
                    pool.append(tuple(float(v) for v in u))
                    del pool[:-POOL_DIRECTIONS_PER_CONE]
    else:
        rounds = options.max_cut_rounds

    if worst > options.tol_soc:
        status = LIMIT
        message = (message + " " if message else "") + \
            f"cut-round limit with SOC violation {worst:.3g} > {options.tol_soc:g}"
    elif status == LIMIT and options.mip_gap is not None and gap is not None \
            and gap <= max(options.mip_gap * 1.01, options.mip_gap + 1e-12):
        status = FEASIBLE

    return SolveResult(
        status=status, values=x, objective=obj, mip_gap=gap,
        cut_count=len(cut_rows) - n_initial_cuts, cut_rounds=rounds,
        max_soc_violation=worst, wall_time=_time.perf_counter() - t0,
        message=message)


# ---------------------------------------------------------------------------
# conic text export / import
# ---------------------------------------------------------------------------

_KIND_CODE = {CONTINUOUS: "c", BINARY: "b"}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def _fmt(x: float) -> str:
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return repr(float(x))


def _expr_tokens(e: LinExpr) -> str:
    toks = [_fmt(e.const)]
    toks += [f"{i}:{_fmt(c)}" for i, c in sorted(e.coeffs.items())]
    return " ".join(toks)


def _parse_expr(tokens: list[str]) -> LinExpr:
    e = LinExpr(const=float(tokens[0]))
    for tok in tokens[1:]:
        i, c = tok.split(":")
        e.coeffs[int(i)] = float(c)
    return e


def export_conic(model: Model, path) -> None:
    """Write the model in the line-oriented conic exchange format.

    Grammar (one record per line, whitespace separated)::

        CONIC 1
        VARS <n>
        <idx> <kind c|b> <lb> <ub> <name>
        OBJ
        <const> <idx>:<coeff> ...
        LIN <m>
        <sense> <rhs> <idx>:<coeff> ...
        SOC <k>
        <dim> <bound-expr> ; entries follow, one line each: <expr>

    Expressions are ``<const> <idx>:<coeff> ...``; floats use repr so a
    round trip is bit-exact.
    """
    lines = [f"CONIC 1 {model.name}"]
    lines.append(f"VARS {model.num_vars}")
    for i in range(model.num_vars):
        lines.append(f"{i} {_KIND_CODE[model.var_kinds[i]]} "
                     f"{_fmt(model.lb[i])} {_fmt(model.ub[i])} {model.var_names[i]}")
    lines.append("OBJ")
    lines.append(_expr_tokens(model.objective))
    lines.append(f"LIN {len(model.rows)}")
    for row in model.rows:
        toks = " ".join(f"{i}:{_fmt(c)}" for i, c in sorted(row.coeffs.items()))
        lines.append(f"{row.sense} {_fmt(row.rhs)} {toks}".rstrip())
    lines.append(f"SOC {len(model.socs)}")
    for soc in model.socs:
        lines.append(f"{len(soc.vector)} {_expr_tokens(soc.bound)}")
        for entry in soc.vector:
            lines.append(_expr_tokens(entry))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def import_conic(path) -> Model:
    """Parse a file written by :func:`export_conic`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    pos = 0

    def nxt():
        nonlocal pos
        ln = lines[pos]
        pos += 1
        return ln

    header = nxt().split(maxsplit=2)
    if header[:2] != ["CONIC", "1"]:
        raise ModelError(f"not a conic v1 file: {header}")
    model = Model(header[2] if len(header) > 2 else "model")

    n = int(nxt().split()[1])
    for _ in range(n):
        idx, kind, lo, hi, name = nxt().split(maxsplit=4)
        model.add_var(name, float(lo), float(hi), _CODE_KIND[kind])
        assert int(idx) == model.num_vars - 1
    if nxt() != "OBJ":
        raise ModelError("expected OBJ section")
    model.objective = _parse_expr(nxt().split())

    m = int(nxt().split()[1])
    for _ in range(m):
        toks = nxt().split()
        sense, rhs = toks[0], float(toks[1])
        coeffs = {}
        for tok in toks[2:]:
            i, c = tok.split(":")
            coeffs[int(i)] = float(c)
        model.rows.append(LinRow(coeffs, sense, rhs))

    k = int(nxt().split()[1])
    for _ in range(k):
        toks = nxt().split()
        dim = int(toks[0])
        bound = _parse_expr(toks[1:])
        vector = [_parse_expr(nxt().split()) for _ in range(dim)]
        model.socs.append(SocRow(vector, bound))
    return model

#!/usr/bin/env python3
"""Reference LP/MILP/diagonal-QP solver for the canonical LP-text subset.

Usage: solve_lp.py PROBLEM.lp SOLUTION.sol [TIME_LIMIT_SECONDS]

Reads the LP file written by the Rust side, solves it with HiGHS (via
scipy) for linear problems or Clarabel (via cvxpy) when the objective has a
quadratic bracket, and writes a plain key-value solution file:

    status optimal|infeasible|unbounded|time_limit|error
    objective <float>            (when a value is available)
    gap <float>                  (MILP only, when available)
    var <name> <float>           (one line per variable, declaration order)
"""

import sys


def parse_lp(path):
    sense = None
    obj_line = None
    constraints = []  # (name, [(coef, var)], cmp, rhs)
    bounds = []       # (name, lo, hi) in declaration order
    binaries = set()
    section = None

    with open(path) as fh:
        lines = fh.readlines()

    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        if line in ("Minimize", "Maximize"):
            sense = line
            section = "objective"
            continue
        if line == "Subject To":
            section = "constraints"
            continue
        if line == "Bounds":
            section = "bounds"
            continue
        if line == "Binary":
            section = "binary"
            continue
        if line == "End":
            section = "done"
            continue
        if section == "objective":
            obj_line = line
        elif section == "constraints":
            constraints.append(line)
        elif section == "bounds":
            bounds.append(parse_bound(line))
        elif section == "binary":
            binaries.add(line.strip())
        else:
            raise ValueError("unexpected content: %r" % line)

    if sense is None:
        raise ValueError("missing objective sense")

    order = [name for name, _, _ in bounds]
    lo = {name: l for name, l, _ in bounds}
    hi = {name: h for name, _, h in bounds}

    linear, quad = parse_objective(obj_line)
    rows = [parse_constraint(c) for c in constraints]
    return {
        "sense": sense,
        "order": order,
        "lo": lo,
        "hi": hi,
        "binaries": binaries,
        "linear": linear,
        "quad": quad,
        "rows": rows,
    }


def parse_bound(line):
    tokens = line.split()
    inf = float("inf")
    if len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
        return tokens[2], float(tokens[0]), float(tokens[4])
    if len(tokens) == 3 and tokens[1] == ">=":
        return tokens[0], float(tokens[2]), inf
    if len(tokens) == 3 and tokens[1] == "<=":
        return tokens[0], -inf, float(tokens[2])
    if len(tokens) == 2 and tokens[1] == "free":
        return tokens[0], -inf, inf
    raise ValueError("bad bounds line: %r" % line)


def parse_terms(text):
    tokens = text.split()
    terms = []
    sign = 1.0
    i = 0
    while i < len(tokens):
        t = tokens[i]
        if t == "+":
            sign = 1.0
            i += 1
        elif t == "-":
            sign = -1.0
            i += 1
        else:
            coef = float(t)
            name = tokens[i + 1]
            terms.append((sign * coef, name))
            sign = 1.0
            i += 2
    return terms


def parse_objective(line):
    if line is None:
        return [], []
    body = line.split(":", 1)[1].strip() if ":" in line else line
    quad = []
    if "[" in body:
        open_i = body.index("[")
        close_i = body.rindex("]")
        tail = body[close_i + 1:].strip()
        if tail not in ("/2", "/ 2"):
            raise ValueError("quadratic bracket must end with '/ 2'")
        linear_part = body[:open_i].strip()
        if linear_part.endswith("+"):
            linear_part = linear_part[:-1].strip()
        qtokens = body[open_i + 1:close_i].split()
        i = 0
        while i < len(qtokens):
            if qtokens[i] == "+":
                i += 1
                continue
            coef = float(qtokens[i])
            name = qtokens[i + 1]
            if qtokens[i + 2] != "^" or qtokens[i + 3] != "2":
                raise ValueError("quadratic term must end with '^ 2'")
            quad.append((coef / 2.0, name))
            i += 4
        body = linear_part
    return parse_terms(body), quad


def parse_constraint(line):
    name, body = line.split(":", 1)
    body = body.strip()
    for op in ("<=", ">="):
        if op in body:
            lhs, rhs = body.split(op, 1)
            return name.strip(), parse_terms(lhs), op, float(rhs)
    # equality: single '=' surrounded by spaces
    lhs, rhs = body.rsplit(" = ", 1)
    return name.strip(), parse_terms(lhs), "=", float(rhs)


def solve_linear(model, time_limit):
    import numpy as np
    import scipy.sparse as sp
    from scipy.optimize import milp, LinearConstraint, Bounds

    order = model["order"]
    idx = {name: i for i, name in enumerate(order)}
    n = len(order)
    sign = -1.0 if model["sense"] == "Maximize" else 1.0

    c = np.zeros(n)
    for coef, name in model["linear"]:
        c[idx[name]] += sign * coef

    rows_i, cols_i, vals = [], [], []
    con_lo, con_hi = [], []
    for r, (_, terms, op, rhs) in enumerate(model["rows"]):
        acc = {}
        for coef, name in terms:
            acc[idx[name]] = acc.get(idx[name], 0.0) + coef
        for j, v in acc.items():
            rows_i.append(r)
            cols_i.append(j)
            vals.append(v)
        if op == "<=":
            con_lo.append(-np.inf)
            con_hi.append(rhs)
        elif op == ">=":
            con_lo.append(rhs)
            con_hi.append(np.inf)
        else:
            con_lo.append(rhs)
            con_hi.append(rhs)

    lb = np.array([model["lo"][name] for name in order])
    ub = np.array([model["hi"][name] for name in order])
    integrality = np.array(
        [1 if name in model["binaries"] else 0 for name in order]
    )

    kwargs = {
        "bounds": Bounds(lb, ub),
        "integrality": integrality,
    }
    if model["rows"]:
        a = sp.csc_matrix(
            (vals, (rows_i, cols_i)), shape=(len(model["rows"]), n)
        )
        kwargs["constraints"] = LinearConstraint(
            a, np.array(con_lo), np.array(con_hi)
        )
    options = {"mip_rel_gap": 1e-9}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(c, options=options, **kwargs)

    if res.status == 0:
        status = "optimal"
    elif res.status == 1:
        status = "time_limit"
    elif res.status == 2:
        status = "infeasible"
    elif res.status == 3:
        status = "unbounded"
    else:
        return "error", None, None, None, res.message

    values = None
    objective = None
    if res.x is not None:
        values = [float(v) for v in res.x]
        objective = sign * float(res.fun)
    gap = getattr(res, "mip_gap", None)
    return status, objective, values, gap, None


def solve_quadratic(model, time_limit):
    import numpy as np
    import scipy.sparse as sp
    import cvxpy as cp

    if model["binaries"]:
        return "error", None, None, None, "binary variables with quadratic objective"
    if model["sense"] == "Maximize":
        return "error", None, None, None, "quadratic objective requires Minimize"

    order = model["order"]
    idx = {name: i for i, name in enumerate(order)}
    n = len(order)
    x = cp.Variable(n)

    c = np.zeros(n)
    for coef, name in model["linear"]:
        c[idx[name]] += coef
    q = np.zeros(n)
    for coef, name in model["quad"]:
        q[idx[name]] += coef

    cons = []
    lb = np.array([model["lo"][name] for name in order])
    ub = np.array([model["hi"][name] for name in order])
    finite_lb = np.isfinite(lb)
    finite_ub = np.isfinite(ub)
    if finite_lb.any():
        cons.append(x[finite_lb] >= lb[finite_lb])
    if finite_ub.any():
        cons.append(x[finite_ub] <= ub[finite_ub])

    by_op = {"<=": [], ">=": [], "=": []}
    for _, terms, op, rhs in model["rows"]:
        by_op[op].append((terms, rhs))
    for op, rows in by_op.items():
        if not rows:
            continue
        ri, ci, vals, rhs_v = [], [], [], []
        for r, (terms, rhs) in enumerate(rows):
            for coef, name in terms:
                ri.append(r)
                ci.append(idx[name])
                vals.append(coef)
            rhs_v.append(rhs)
        a = sp.csc_matrix((vals, (ri, ci)), shape=(len(rows), n))
        b = np.array(rhs_v)
        if op == "<=":
            cons.append(a @ x <= b)
        elif op == ">=":
            cons.append(a @ x >= b)
        else:
            cons.append(a @ x == b)

    objective = cp.Minimize(c @ x + cp.sum(cp.multiply(q, cp.square(x))))
    prob = cp.Problem(objective, cons)
    try:
        prob.solve(solver=cp.CLARABEL, time_limit=time_limit)
    except TypeError:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as e:
        return "error", None, None, None, str(e)

    status = prob.status
    if status in ("optimal", "optimal_inaccurate"):
        return (
            "optimal",
            float(prob.value),
            [float(v) for v in x.value],
            None,
            None,
        )
    if "infeasible" in status:
        return "infeasible", None, None, None, None
    if "unbounded" in status:
        return "unbounded", None, None, None, None
    return "error", None, None, None, status


def main():
    if len(sys.argv) < 3:
        sys.stderr.write(__doc__)
        return 2
    problem_path, solution_path = sys.argv[1], sys.argv[2]
    time_limit = float(sys.argv[3]) if len(sys.argv) > 3 else None

    try:
        model = parse_lp(problem_path)
        if model["quad"]:
            status, obj, values, gap, msg = solve_quadratic(model, time_limit)
        else:
            status, obj, values, gap, msg = solve_linear(model, time_limit)
    except Exception as e:  # surface parse/solve failures in the file
        status, obj, values, gap, msg = "error", None, None, None, repr(e)
        model = None

    with open(solution_path, "w") as fh:
        fh.write("status %s\n" % status)
        if msg:
            fh.write("message %s\n" % msg.replace("\n", " "))
        if obj is not None:
            fh.write("objective %r\n" % obj)
        if gap is not None:
            fh.write("gap %r\n" % gap)
        if values is not None and model is not None:
            for name, v in zip(model["order"], values):
                fh.write("var %s %r\n" % (name, v))
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""External solver adapter: reads an LP interchange file, solves it with
HiGHS through scipy and writes a solution document.

usage: highs_solve.py model.lp solution.txt
"""
import math
import re
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import csr_matrix

def parse_number(tok):
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


def parse_terms(text):
    """Parses `a x + b y - c z` into [(name, coef)]; bare numbers are constants."""
    terms, const = [], 0.0
    sign, coef = 1.0, None
    for t in text.split():
        if t in ("+", "-"):
            if coef is not None:
                const += sign * coef
                coef = None
            sign = 1.0 if t == "+" else -1.0
            continue
        try:
            coef = parse_number(t)
        except ValueError:
            terms.append((t, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return terms, const


def parse_lp(path):
    names, index = [], {}
    lb, ub, binary = {}, {}, set()
    objective, rows = [], []

    def var(n):
        if n not in index:
            index[n] = len(names)
            names.append(n)
        return index[n]

    section = None
    obj_const = 0.0
    for raw in open(path):
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in ("minimize", "subject to", "bounds", "binary", "end"):
            section = key
            continue
        if section == "minimize":
            body = line.split(":", 1)[1]
            terms, obj_const = parse_terms(body)
            objective = [(var(n), c) for n, c in terms]
        elif section == "subject to":
            name, body = line.split(":", 1)
            m = re.match(r"(.*?)\s*(<=|>=|=)\s*(\S+)$", body.strip())
            lhs, sense, rhs = m.group(1), m.group(2), parse_number(m.group(3))
            terms, const = parse_terms(lhs)
            rows.append((name.strip(), [(var(n), c) for n, c in terms], sense, rhs - const))
        elif section == "bounds":
            toks = line.split()
            if len(toks) == 2 and toks[1] == "free":
                j = var(toks[0])
                lb[j], ub[j] = -math.inf, math.inf
            elif len(toks) == 5:
                j = var(toks[2])
                lb[j], ub[j] = parse_number(toks[0]), parse_number(toks[4])
            elif len(toks) == 3:
                j = var(toks[0])
                if toks[1] == ">=":
                    lb[j] = parse_number(toks[2])
                else:
                    ub[j] = parse_number(toks[2])
        elif section == "binary":
            for t in line.split():
                binary.add(var(t))
    n = len(names)
    lo = np.array([lb.get(j, 0.0) for j in range(n)])
    hi = np.array([ub.get(j, 1.0 if j in binary else math.inf) for j in range(n)])
    c = np.zeros(n)
    for j, a in objective:
        c[j] += a
    return names, c, obj_const, rows, lo, hi, binary


def matrix(rows, n):
    data, ri, ci = [], [], []
    for i, (_, terms, _, _) in enumerate(rows):
        for j, a in terms:
            ri.append(i)
            ci.append(j)
            data.append(a)
    return csr_matrix((data, (ri, ci)), shape=(len(rows), n))


def solve(path):
    names, c, const, rows, lo, hi, binary = parse_lp(path)
    n = len(names)
    a = matrix(rows, n)
    rl = np.array([r[3] if r[2] in (">=", "=") else -math.inf for r in rows])
    ru = np.array([r[3] if r[2] in ("<=", "=") else math.inf for r in rows])
    if binary:
        integrality = np.array([1 if j in binary else 0 for j in range(n)])
        cons = [LinearConstraint(a, rl, ru)] if rows else []
        res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lo, hi),
                   options={"mip_rel_gap": 1e-9})
        if res.status == 2:
            return "infeasible", None, None, names, rows
        if res.x is None:
            return "limit", None, None, names, rows
        x = res.x.copy()
        for j in binary:
            x[j] = round(x[j])
            lo[j] = hi[j] = x[j]
    # LP (or the LP with binaries fixed) for duals
    le = [i for i, r in enumerate(rows) if r[2] != "="]
    eq = [i for i, r in enumerate(rows) if r[2] == "="]
    sign = np.array([1.0 if rows[i][2] == "<=" else -1.0 for i in le])
    a_ub = a[le] if le else None
    if le:
        a_ub = csr_matrix(a[le].multiply(sign[:, None]))
    b_ub = np.array([rows[i][3] for i in le]) * sign if le else None
    a_eq = a[eq] if eq else None
    b_eq = np.array([rows[i][3] for i in eq]) if eq else None
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=list(zip(lo, hi)), method="highs")
    if res.status == 2:
        return "infeasible", None, None, names, rows
    if res.status == 3:
        return "unbounded", None, None, names, rows
    if res.status != 0:
        return "limit", None, None, names, rows
    duals = np.zeros(len(rows))
    for k, i in enumerate(le):
        duals[i] = res.ineqlin.marginals[k] * sign[k]
    for k, i in enumerate(eq):
        duals[i] = res.eqlin.marginals[k]
    obj = float(c @ res.x) + const
    return "optimal", (obj, res.x), duals, names, rows


def main():
    model_path, solution_path = sys.argv[1], sys.argv[2]
    status, point, duals, names, rows = solve(model_path)
    with open(solution_path, "w") as f:
        f.write(f"status {status}\n")
        if point is not None:
            obj, x = point
            f.write(f"objective {obj:.16e}\n")
            f.write("primal\n")
            for name, v in zip(names, x):
                f.write(f"{name} {v:.16e}\n")
            f.write("dual\n")
            for (name, _, _, _), y in zip(rows, duals):
                f.write(f"{name} {y:.16e}\n")
        f.write("end\n")


if __name__ == "__main__":
    main()

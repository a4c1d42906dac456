#!/usr/bin/env python3
"""External MILP solver for gridplan: `scipy_milp.py [--gap G] model.mps solution.out`.

Reads the MPS dialect gridplan writes (whitespace separated, INTORG/INTEND
markers, explicit bounds, objective constant as the negated objective RHS),
solves it with scipy's HiGHS interface and writes:

    <status>
    <objective>
    <name> <value>
    ...
"""

import argparse
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix


def read_mps(path):
    rows = {}  # name -> sense
    row_order = []
    obj = None
    cols = {}
    col_order = []
    entries = []  # (row, col, value)
    rhs = {}
    lower, upper, integer = {}, {}, set()
    section = None
    in_int = False

    def col_index(name):
        if name not in cols:
            cols[name] = len(col_order)
            col_order.append(name)
            lower[name] = 0.0
            upper[name] = np.inf
            if in_int:
                integer.add(name)
        return cols[name]

    with open(path) as f:
        for raw in f:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                section = line.split()[0]
                continue
            tok = line.split()
            if section == "ROWS":
                sense, name = tok
                if sense == "N":
                    if obj is None:
                        obj = name
                else:
                    rows[name] = sense
                    row_order.append(name)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                j = col_index(tok[0])
                for k in range(1, len(tok) - 1, 2):
                    entries.append((tok[k], j, float(tok[k + 1])))
            elif section == "RHS":
                for k in range(1, len(tok) - 1, 2):
                    rhs[tok[k]] = float(tok[k + 1])
            elif section == "BOUNDS":
                kind, name = tok[0], tok[2]
                col_index(name)
                val = float(tok[3]) if len(tok) > 3 else None
                if kind == "LO":
                    lower[name] = val
                elif kind == "UP":
                    upper[name] = val
                elif kind == "FX":
                    lower[name] = upper[name] = val
                elif kind == "FR":
                    lower[name], upper[name] = -np.inf, np.inf
                elif kind == "MI":
                    lower[name] = -np.inf
                elif kind == "PL":
                    upper[name] = np.inf
                elif kind == "BV":
                    lower[name], upper[name] = 0.0, 1.0
                    integer.add(name)
                else:
                    raise ValueError(f"unsupported bound type {kind}")

    n = len(col_order)
    ridx = {name: i for i, name in enumerate(row_order)}
    c = np.zeros(n)
    data, ri, ci = [], [], []
    for row, j, v in entries:
        if row == obj:
            c[j] += v
        else:
            ri.append(ridx[row])
            ci.append(j)
            data.append(v)
    m = len(row_order)
    a = csr_matrix((data, (ri, ci)), shape=(m, n))
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    for name, i in ridx.items():
        b = rhs.get(name, 0.0)
        sense = rows[name]
        if sense in ("L", "E"):
            hi[i] = b
        if sense in ("G", "E"):
            lo[i] = b
    constant = -rhs.get(obj, 0.0) if obj is not None else 0.0
    lb = np.array([lower[name] for name in col_order])
    ub = np.array([upper[name] for name in col_order])
    integrality = np.array([1 if name in integer else 0 for name in col_order])
    return col_order, c, constant, a, lo, hi, lb, ub, integrality


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--gap", type=float, default=1e-4)
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("model")
    ap.add_argument("solution")
    args = ap.parse_args()

    names, c, constant, a, lo, hi, lb, ub, integrality = read_mps(args.model)
    options = {"mip_rel_gap": args.gap, "disp": False}
    if args.time_limit:
        options["time_limit"] = args.time_limit
    constraints = [LinearConstraint(a, lo, hi)] if a.shape[0] else []
    # Penalty terms reach 1e10 and more; HiGHS is happier with O(1) costs.
    scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    res = milp(c / scale, constraints=constraints, bounds=Bounds(lb, ub), integrality=integrality, options=options)

    if res.x is not None:
        status = "optimal" if res.status == 0 else "time_limit"
    elif res.status == 2:
        status = "infeasible"
    elif res.status == 3:
        status = "unbounded"
    elif res.status == 1:
        status = "time_limit"
    else:
        print(res.message, file=sys.stderr)
        return 1

    with open(args.solution, "w") as f:
        f.write(status + "\n")
        if res.x is None:
            return 0
        f.write(repr(float(c @ res.x) + constant) + "\n")
        for name, v in zip(names, res.x):
            f.write(f"{name} {float(v)!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Small dense linear programs solved with a two-phase tableau simplex.

Only what the Bayesian tit-for-tat agent needs: a handful of variables,
box bounds and one or two equality rows. Bland's rule keeps the pivoting
finite on the degenerate vertices that box constraints produce.
"""

from __future__ import annotations

import itertools

import numpy as np

TOL = 1e-10


class InfeasibleError(Exception):
    """The constraints admit no point."""


class UnboundedError(Exception):
    """The objective grows without limit on the feasible set."""


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]


def _run(tab: np.ndarray, basis: list, allowed: int) -> None:
    # Last row holds reduced costs of a minimisation; stop when none is negative.
    n_rows = tab.shape[0] - 1
    while True:
        cost = tab[-1, :allowed]
        entering = next((j for j in range(allowed) if cost[j] < -TOL), None)
        if entering is None:
            return
        col = tab[:n_rows, entering]
        ratios = [(tab[i, -1] / col[i], basis[i], i) for i in range(n_rows) if col[i] > TOL]
        if not ratios:
            raise UnboundedError("objective unbounded below")
        best = min(r for r, _, _ in ratios)
        # Bland: among tied rows, leave the lowest-indexed basic variable.
        leave = min((b, i) for r, b, i in ratios if r <= best + TOL)[1]
        _pivot(tab, leave, entering)
        basis[leave] = entering


def linprog_min(c, A_eq, b_eq) -> np.ndarray:
    """Minimise ``c @ x`` subject to ``A_eq @ x = b_eq`` and ``x >= 0``."""
    c = np.asarray(c, float)
    A = np.array(A_eq, float, ndmin=2)
    b = np.asarray(b_eq, float).reshape(-1)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    m, n = A.shape

    # Phase I: artificial variables n..n+m-1 start basic.
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run(tab, basis, n + m)
    if -tab[-1, -1] > 1e-9:
        raise InfeasibleError("no point satisfies the constraints")

    # Drive artificial variables that stayed basic (at zero) out of the basis.
    for i, bv in enumerate(basis):
        if bv >= n:
            col = next((j for j in range(n) if abs(tab[i, j]) > TOL), None)
            if col is not None:
                _pivot(tab, i, col)
                basis[i] = col

    # Phase II on the original costs.
    tab[-1, :] = 0.0
    tab[-1, :n] = c
    for i, bv in enumerate(basis):
        if bv < n and tab[-1, bv] != 0.0:
            tab[-1] -= tab[-1, bv] * tab[i]
    tab[-1, n:n + m] = 0.0
    _run(tab, basis, n)

    x = np.zeros(n)
    for i, bv in enumerate(basis):
        if bv < n:
            x[bv] = tab[i, -1]
    return x


def _box_form(coeffs, rhs, extra=()):
    """Equality rows over (x, s) with x + s = 1 encoding 0 <= x <= 1."""
    m = len(coeffs)
    rows = [np.concatenate([coeffs, np.zeros(m)])]
    rhs_v = [rhs]
    for a, r in extra:
        rows.append(np.concatenate([a, np.zeros(m)]))
        rhs_v.append(r)
    for i in range(m):
        row = np.zeros(2 * m)
        row[i] = row[m + i] = 1.0
        rows.append(row)
        rhs_v.append(1.0)
    return np.array(rows), np.array(rhs_v)


def simplex_solve(objective, equality, decimals: int = 9) -> np.ndarray:
    """Maximise ``objective @ x`` over ``{x in [0,1]^m : a @ x = rhs}``.

    ``equality`` is the pair ``(a, rhs)``. Among optimal vertices the
    lexicographically smallest is returned, found by re-solving with the
    optimum pinned and each coordinate minimised in turn.

    Raises:
        InfeasibleError: when ``rhs`` lies outside ``[sum(min(a,0)), sum(max(a,0))]``.
    """
    obj = np.asarray(objective, float)
    a, rhs = np.asarray(equality[0], float), float(equality[1])
    m = len(obj)
    if a.shape != (m,):
        raise ValueError("objective and constraint dimensions differ")

    A, b = _box_form(a, rhs)
    x = linprog_min(np.concatenate([-obj, np.zeros(m)]), A, b)[:m]
    best = float(obj @ x)
    pinned = [(obj, best)]
    for i in range(m):
        A, b = _box_form(a, rhs, pinned)
        e = np.zeros(2 * m)
        e[i] = 1.0
        x = linprog_min(e, A, b)[:m]
        unit = np.zeros(m)
        unit[i] = 1.0
        pinned.append((unit, float(x[i])))
    x = np.clip(x, 0.0, 1.0)
    # Round away pivoting noise unless that would break the equality row.
    xr = np.round(x, decimals) + 0.0
    if abs(a @ xr - rhs) <= abs(a @ x - rhs) + 1e-12:
        return xr
    return x


def box_vertices(a, rhs, tol: float = 1e-12) -> list:
    """Every vertex of ``{x in [0,1]^m : a @ x = rhs}`` by brute enumeration."""
    a = np.asarray(a, float)
    m = len(a)
    out = []
    for free in range(m):
        if abs(a[free]) < tol:
            continue
        others = [j for j in range(m) if j != free]
        for bits in itertools.product((0.0, 1.0), repeat=m - 1):
            x = np.zeros(m)
            x[others] = bits
            x[free] = (rhs - a[others] @ np.asarray(bits)) / a[free]
            if -tol <= x[free] <= 1 + tol:
                x[free] = min(max(x[free], 0.0), 1.0)
                if not any(np.allclose(x, v, atol=1e-9) for v in out):
                    out.append(x)
    for bits in itertools.product((0.0, 1.0), repeat=m):
        x = np.asarray(bits)
        if abs(a @ x - rhs) < 1e-9 and not any(np.allclose(x, v, atol=1e-9) for v in out):
            out.append(x)
    return out

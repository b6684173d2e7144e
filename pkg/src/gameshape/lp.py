"""Dense simplex solver for zero-sum matrix games.

The row player maximizes ``p^T A q``; the column player minimizes it.  The
game is solved through the classic scaled formulation: shift and normalize
the payoffs positive, then solve

    max sum(y)  subject to  B y <= 1,  y >= 0

on ``B = normalize(-A^T)``, whose feasible origin avoids any phase-1 work.
The primal solution is the row player's maximin strategy and the dual
multipliers (the slack columns' reduced costs) give the column player's
minimax strategy.  Bland's entering rule keeps pivoting deterministic and
cycle-free; ties in the ratio test fall back to the lowest basis index, so
the first pure action wins whenever the game leaves a choice.

The kernel is written as plain loops so numba can compile it; a pure-Python
fallback keeps everything working (slowly) without numba.
"""

from __future__ import annotations

import numpy as np

from .errors import DivergenceError, DomainError

_PIVOT_EPS = 1e-12
_OPT_EPS = 1e-9
_MAX_PIVOTS = 10_000


def _zero_sum_kernel_impl(a):
    """Solve the zero-sum game with row-maximizer payoffs ``a`` (m x k).

    Returns ``(status, value, row_strategy, col_strategy)`` with status 0 on
    success, 1 on pivot-cap overrun, 2 on an unbounded tableau (impossible
    for normalized inputs, kept as a guard).
    """
    m, k = a.shape

    # pure saddle short-circuit: when max_i min_j A = min_j max_i A the
    # lexicographically-first pure pair is optimal and exact, no pivoting
    # needed (constant matrices land here too)
    best_row = 0
    maximin = -np.inf
    for i in range(m):
        row_min = a[i, 0]
        for j in range(1, k):
            if a[i, j] < row_min:
                row_min = a[i, j]
        if row_min > maximin:
            maximin = row_min
            best_row = i
    best_col = 0
    minimax = np.inf
    for j in range(k):
        col_max = a[0, j]
        for i in range(1, m):
            if a[i, j] > col_max:
                col_max = a[i, j]
        if col_max < minimax:
            minimax = col_max
            best_col = j
    if maximin == minimax:
        row_strategy = np.zeros(m)
        col_strategy = np.zeros(k)
        row_strategy[best_row] = 1.0
        col_strategy[best_col] = 1.0
        return 0, maximin, row_strategy, col_strategy

    b = -a.T.copy()
    b_min = b.min()
    scale = b.max() - b_min
    b_norm = (b - b_min) / scale + 1.0

    n_cols = m + k + 1
    tab = np.zeros((k + 1, n_cols))
    for r in range(k):
        for c in range(m):
            tab[r, c] = b_norm[r, c]
        tab[r, m + r] = 1.0
        tab[r, n_cols - 1] = 1.0
    for c in range(m):
        tab[k, c] = -1.0

    basis = np.empty(k, dtype=np.int64)
    for r in range(k):
        basis[r] = m + r

    status = 0
    for _ in range(_MAX_PIVOTS):
        enter = -1
        for j in range(m + k):
            if tab[k, j] < -_OPT_EPS:
                enter = j
                break
        if enter < 0:
            break

        leave = -1
        best_ratio = np.inf
        for r in range(k):
            coef = tab[r, enter]
            if coef > _PIVOT_EPS:
                ratio = tab[r, n_cols - 1] / coef
                if ratio < best_ratio - _PIVOT_EPS:
                    best_ratio = ratio
                    leave = r
                elif ratio < best_ratio + _PIVOT_EPS and leave >= 0:
                    if basis[r] < basis[leave]:
                        best_ratio = min(best_ratio, ratio)
                        leave = r
        if leave < 0:
            status = 2
            break

        piv = tab[leave, enter]
        for c in range(n_cols):
            tab[leave, c] /= piv
        for r in range(k + 1):
            if r != leave:
                f = tab[r, enter]
                if f != 0.0:
                    for c in range(n_cols):
                        tab[r, c] -= f * tab[leave, c]
        basis[leave] = enter
    else:
        status = 1

    sum_y = tab[k, n_cols - 1]
    row_strategy = np.zeros(m)
    for r in range(k):
        if basis[r] < m:
            y = tab[r, n_cols - 1]
            row_strategy[basis[r]] = y if y > 0.0 else 0.0
    col_strategy = np.zeros(k)
    for r in range(k):
        d = tab[k, m + r]
        col_strategy[r] = d if d > 0.0 else 0.0

    if sum_y <= 0.0:
        status = 2
        return status, 0.0, row_strategy, col_strategy

    row_strategy /= row_strategy.sum()
    dual_sum = col_strategy.sum()
    if dual_sum <= 0.0:
        status = 2
        return status, 0.0, row_strategy, col_strategy
    col_strategy /= dual_sum

    value_b = (1.0 / sum_y - 1.0) * scale + b_min
    return status, -value_b, row_strategy, col_strategy


def _zero_sum_into_impl(a, tab, basis, row_strategy, col_strategy):
    """Workspace variant of the solver for hot loops: identical arithmetic
    to ``_zero_sum_kernel`` but writes into caller-provided buffers
    (``tab`` at least (k+1, m+k+1), ``basis`` at least (k,), strategies
    exactly (m,) and (k,)).  Returns ``(status, value)``.
    """
    m, k = a.shape

    best_row = 0
    maximin = -np.inf
    for i in range(m):
        row_min = a[i, 0]
        for j in range(1, k):
            if a[i, j] < row_min:
                row_min = a[i, j]
        if row_min > maximin:
            maximin = row_min
            best_row = i
    best_col = 0
    minimax = np.inf
    for j in range(k):
        col_max = a[0, j]
        for i in range(1, m):
            if a[i, j] > col_max:
                col_max = a[i, j]
        if col_max < minimax:
            minimax = col_max
            best_col = j
    for i in range(m):
        row_strategy[i] = 0.0
    for j in range(k):
        col_strategy[j] = 0.0
    if maximin == minimax:
        row_strategy[best_row] = 1.0
        col_strategy[best_col] = 1.0
        return 0, maximin

    b_min = np.inf
    b_max = -np.inf
    for i in range(m):
        for j in range(k):
            v = -a[i, j]
            if v < b_min:
                b_min = v
            if v > b_max:
                b_max = v
    scale = b_max - b_min

    n_cols = m + k + 1
    for r in range(k):
        for c in range(n_cols):
            tab[r, c] = 0.0
        for c in range(m):
            tab[r, c] = (-a[c, r] - b_min) / scale + 1.0
        tab[r, m + r] = 1.0
        tab[r, n_cols - 1] = 1.0
    for c in range(n_cols):
        tab[k, c] = 0.0
    for c in range(m):
        tab[k, c] = -1.0
    for r in range(k):
        basis[r] = m + r

    status = 0
    for _ in range(_MAX_PIVOTS):
        enter = -1
        for j in range(m + k):
            if tab[k, j] < -_OPT_EPS:
                enter = j
                break
        if enter < 0:
            break
        leave = -1
        best_ratio = np.inf
        for r in range(k):
            coef = tab[r, enter]
            if coef > _PIVOT_EPS:
                ratio = tab[r, n_cols - 1] / coef
                if ratio < best_ratio - _PIVOT_EPS:
                    best_ratio = ratio
                    leave = r
                elif ratio < best_ratio + _PIVOT_EPS and leave >= 0:
                    if basis[r] < basis[leave]:
                        best_ratio = min(best_ratio, ratio)
                        leave = r
        if leave < 0:
            status = 2
            break
        piv = tab[leave, enter]
        for c in range(n_cols):
            tab[leave, c] /= piv
        for r in range(k + 1):
            if r != leave:
                f = tab[r, enter]
                if f != 0.0:
                    for c in range(n_cols):
                        tab[r, c] -= f * tab[leave, c]
        basis[leave] = enter
    else:
        status = 1

    sum_y = tab[k, n_cols - 1]
    for r in range(k):
        if basis[r] < m:
            y = tab[r, n_cols - 1]
            row_strategy[basis[r]] = y if y > 0.0 else 0.0
    for r in range(k):
        d = tab[k, m + r]
        col_strategy[r] = d if d > 0.0 else 0.0

    if sum_y <= 0.0:
        return 2, 0.0
    row_sum = 0.0
    for i in range(m):
        row_sum += row_strategy[i]
    for i in range(m):
        row_strategy[i] /= row_sum
    dual_sum = 0.0
    for j in range(k):
        dual_sum += col_strategy[j]
    if dual_sum <= 0.0:
        return 2, 0.0
    for j in range(k):
        col_strategy[j] /= dual_sum

    value_b = (1.0 / sum_y - 1.0) * scale + b_min
    return status, -value_b


try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit

    _zero_sum_kernel = njit(cache=True)(_zero_sum_kernel_impl)
    _zero_sum_into = njit(cache=True)(_zero_sum_into_impl)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _zero_sum_kernel = _zero_sum_kernel_impl
    _zero_sum_into = _zero_sum_into_impl
    HAVE_NUMBA = False


def solve_matrix_lp(payoff) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and optimal strategies of a zero-sum matrix game.

    ``payoff`` is the row player's (maximizer's) matrix.  Returns
    ``(value, row_strategy, column_strategy)``; the column strategy comes
    from the dual multipliers of the same tableau.
    """
    a = np.ascontiguousarray(payoff, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise DomainError("payoff must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise DomainError("payoff must be finite")
    status, value, p, q = _zero_sum_kernel(a)
    if status == 1:
        raise DivergenceError("simplex exceeded its pivot cap")
    if status == 2:
        raise DivergenceError("simplex produced a degenerate tableau")
    return float(value), p, q


def warm_up() -> None:
    """Trigger kernel compilation so later timing-sensitive code is fast."""
    _zero_sum_kernel(np.array([[1.0, -1.0], [-1.0, 1.0]]))

"""Family-wise error rate controlling procedures over precomputed p-values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return delta


def fixed_sequence(pvalues, delta: float) -> list[int]:
    """Test in the given order at full level ``delta``; stop at the first non-rejection.

    Returns the rejected indices, always a prefix ``[0, 1, ..., m - 1]``.
    """
    delta = _check_delta(delta)
    pvalues = np.asarray(pvalues, dtype=np.float64)
    if pvalues.ndim != 1 or pvalues.size == 0:
        raise ValueError("fixed_sequence needs a non-empty 1-D array of p-values")
    rejected = []
    for j, p in enumerate(pvalues):
        if p <= delta:
            rejected.append(j)
        else:
            break
    return rejected


def initial_budgets(n_rows: int, n_cols: int, delta: float) -> np.ndarray:
    """``delta / n_rows`` on the first cell of each row, zero elsewhere."""
    delta = _check_delta(delta)
    budgets = np.zeros((n_rows, n_cols))
    budgets[:, 0] = delta / n_rows
    return budgets


@dataclass
class FallbackResult:
    rejected: list[tuple[int, int]]
    budgets: np.ndarray  # budget left on each cell after the traversal
    tested_at: np.ndarray  # budget each cell held when it was tested

    @property
    def rejected_mask(self) -> np.ndarray:
        mask = np.zeros(self.budgets.shape, dtype=bool)
        for k, j in self.rejected:
            mask[k, j] = True
        return mask


def fallback_graph(pvalues, delta: float, budgets=None) -> FallbackResult:
    """Fallback procedure on a rows-by-columns grid of hypotheses.

    Cells are visited row by row, left to right.  A cell is rejected when its
    p-value is at most its current budget; the budget of a rejected cell moves
    to the next cell in its row, or from the last cell of a row to the first
    cell of the next row.  A non-rejection keeps its budget and the traversal
    continues.  Rows are 0-based.
    """
    delta = _check_delta(delta)
    pvalues = np.asarray(pvalues, dtype=np.float64)
    if pvalues.ndim != 2 or pvalues.size == 0:
        raise ValueError("fallback_graph needs a non-empty 2-D array of p-values")
    n_rows, n_cols = pvalues.shape
    if budgets is None:
        budgets = initial_budgets(n_rows, n_cols, delta)
    else:
        budgets = np.array(budgets, dtype=np.float64)
        if budgets.shape != pvalues.shape:
            raise ValueError("budget matrix shape differs from the p-value grid")
        if np.any(budgets < 0) or budgets.sum() > delta * (1 + 1e-12):
            raise ValueError("budgets must be non-negative and sum to at most delta")
    tested_at = np.zeros_like(budgets)
    rejected = []
    for k in range(n_rows):
        for j in range(n_cols):
            tested_at[k, j] = budgets[k, j]
            if pvalues[k, j] <= budgets[k, j]:
                rejected.append((k, j))
                if j < n_cols - 1:
                    budgets[k, j + 1] += budgets[k, j]
                    budgets[k, j] = 0.0
                elif k < n_rows - 1:
                    budgets[k + 1, 0] += budgets[k, j]
                    budgets[k, j] = 0.0
    return FallbackResult(rejected, budgets, tested_at)


def bonferroni(pvalues, delta: float) -> list[int]:
    """Reject every p-value at most ``delta / m``.  Comparison baseline only."""
    delta = _check_delta(delta)
    pvalues = np.asarray(pvalues, dtype=np.float64).ravel()
    return [int(j) for j in np.nonzero(pvalues <= delta / pvalues.size)[0]]

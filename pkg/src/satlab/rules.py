"""Cell-selection and polarity rules shared by the concrete solver and the ODE engine.

A variable with i positive and j negative live occurrences sits in degree
cell (i, j).  A selection rule is a total preorder on cells with i+j >= 1;
pure cells (i == 0 or j == 0) always preempt the rule.  Every rule ranks the
two orientations (i, j), (j, i) of an unordered pair so that the winning
cell identifies the pair, and variables of both orientations are treated as
interchangeable by the engines.
"""

from __future__ import annotations

import enum

import numpy as np


class SelectionRule(enum.IntEnum):
    """Which non-pure degree cell to set a variable from."""

    MAXDIFF_MAXSUM = 0  # max |i-j|, ties -> max i+j
    MAXDIFF_MINSUM = 1  # max |i-j|, ties -> min i+j
    MAXRATIO = 2        # max of max(i,j)/min(i,j), ties -> max i+j, then |i-j|
    MAXMAX = 3          # max max(i,j), ties -> max i+j


class PolarityRule(enum.IntEnum):
    """Truth value given to a variable picked from cell (i, j).

    MAJORITY: True iff i > j, ties True -- satisfies the more frequent sign.
    MINORITY: True iff i < j, ties False -- satisfies the rarer sign.
    """

    MAJORITY = 0
    MINORITY = 1


RULE_NAMES = {
    SelectionRule.MAXDIFF_MAXSUM: "maxdiff-maxsum",
    SelectionRule.MAXDIFF_MINSUM: "maxdiff-minsum",
    SelectionRule.MAXRATIO: "maxratio",
    SelectionRule.MAXMAX: "maxmax",
}
RULES_BY_NAME = {v: k for k, v in RULE_NAMES.items()}

# CLI vocabulary: "majority" keeps the frequent sign satisfied, "paper" is
# the verbatim set-True-when-i<j variant.
POLARITY_NAMES = {PolarityRule.MAJORITY: "majority", PolarityRule.MINORITY: "paper"}
POLARITIES_BY_NAME = {v: k for k, v in POLARITY_NAMES.items()}


def is_pure_cell(i: int, j: int) -> bool:
    """Pure cells have occurrences of one sign only (and at least one)."""
    return (i == 0 or j == 0) and i + j >= 1


def pure_key(i: int, j: int) -> tuple:
    """Priority among pure cells: maximal i+j (satisfies the most clauses)."""
    return (i + j,)


def rule_key(i: int, j: int, rule: SelectionRule) -> tuple:
    """Exact, totally ordered priority key for non-pure cells; larger wins.

    Mirror cells (i, j) and (j, i) always receive the same key, so the key
    really orders unordered pairs.  The MAXRATIO component uses IEEE division
    of the two small integer degrees: equal rationals produce identical
    doubles and distinct rationals with denominators below ~10**6 produce
    distinct doubles, so tuple comparison implements the cross-multiplied
    ratio order exactly.
    """
    d = abs(i - j)
    s = i + j
    if rule == SelectionRule.MAXDIFF_MAXSUM:
        return (d, s)
    if rule == SelectionRule.MAXDIFF_MINSUM:
        return (d, -s)
    if rule == SelectionRule.MAXRATIO:
        lo = min(i, j)
        r = np.inf if lo == 0 else max(i, j) / lo
        return (r, s, d)
    if rule == SelectionRule.MAXMAX:
        return (max(i, j), s)
    raise ValueError(f"unknown selection rule: {rule!r}")


def choose_polarity(i: int, j: int, rule: PolarityRule) -> bool:
    """Truth value for a variable with i positive / j negative occurrences."""
    if rule == PolarityRule.MAJORITY:
        return i >= j
    if rule == PolarityRule.MINORITY:
        return i < j
    raise ValueError(f"unknown polarity rule: {rule!r}")


# Single-float encodings of the keys above for the ODE engine's vectorized
# argmax.  Layer strides keep the components from interfering as long as
# degrees stay below _MAX_DEGREE; score_grids enforces that bound.
_MAX_DEGREE = 128
_LAYER = 4.0 * _MAX_DEGREE
_RATIO_SCALE = 1.0e8


def _score_scalar(i: int, j: int, rule: SelectionRule) -> float:
    d = abs(i - j)
    s = i + j
    if rule == SelectionRule.MAXDIFF_MAXSUM:
        return d * _LAYER + s
    if rule == SelectionRule.MAXDIFF_MINSUM:
        return d * _LAYER - s
    if rule == SelectionRule.MAXRATIO:
        # gap between distinct ratios >= _RATIO_SCALE/_MAX_DEGREE**2, larger
        # than any tie-break contribution below.
        return (max(i, j) / min(i, j)) * _RATIO_SCALE + s * 4.0 + d * 0.25
    if rule == SelectionRule.MAXMAX:
        return max(i, j) * _LAYER + s
    raise ValueError(f"unknown selection rule: {rule!r}")


def score_grids(h: int, rule: SelectionRule) -> tuple[np.ndarray, np.ndarray]:
    """Dense (h+1)x(h+1) score grids for vectorized selection.

    Returns (pure, nonpure); cells not eligible under a grid carry -inf.
    """
    if h >= _MAX_DEGREE:
        raise ValueError(f"truncation degree {h} too large for exact scoring")
    pure = np.full((h + 1, h + 1), -np.inf)
    nonpure = np.full((h + 1, h + 1), -np.inf)
    for i in range(h + 1):
        for j in range(h + 1):
            if is_pure_cell(i, j):
                pure[i, j] = float(i + j)
            elif i >= 1 and j >= 1:
                nonpure[i, j] = _score_scalar(i, j, rule)
    return pure, nonpure

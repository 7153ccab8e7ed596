"""Degree-guided greedy solving of concrete 3-CNF formulas.

The core loop alternates one voluntary ("free") assignment -- a variable
drawn from the best degree cell under the configured selection rule, set by
the polarity rule -- with exhaustive unit propagation ("forced" moves).
Variants: optional one-step backtracking (flip the last free move once on
conflict), and a complete DPLL search that uses the same cell heuristic as
its branching rule.  A vectorized exhaustive enumerator serves as the
correctness oracle for small instances.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

import numpy as np

from .formula import (
    DegreeTable,
    Formula,
    build_degree_table,
    set_variable,
    undo_to,
    verify_assignment,
)
from .rules import PolarityRule, SelectionRule, choose_polarity, is_pure_cell, rule_key

__all__ = [
    "SolverConfig",
    "PropagationResult",
    "RunOutcome",
    "SolveResult",
    "NoLiveVariable",
    "select_cell",
    "unit_propagate",
    "run_algorithm_a",
    "dpll_solve",
    "brute_force_solve",
]


class NoLiveVariable(RuntimeError):
    """Raised when selection is asked for but no variable occurs in a live clause."""


@dataclass
class SolverConfig:
    selection: SelectionRule = SelectionRule.MAXDIFF_MAXSUM
    polarity: PolarityRule = PolarityRule.MAJORITY
    backtracking: str = "none"  # "none" | "one_step"
    seed: int = 0

    def __post_init__(self):
        if self.backtracking not in ("none", "one_step"):
            raise ValueError(f"unknown backtracking mode {self.backtracking!r}")


@dataclass
class PropagationResult:
    forced: int
    conflict: bool


@dataclass
class RunOutcome:
    """Result of one greedy run; assignment is certified on success."""

    status: str  # "success" | "failure"
    assignment: list[bool] | None
    free_moves: int
    forced_moves: int
    failure_depth: int | None = None
    trace: list[tuple] | None = None


@dataclass
class SolveResult:
    """Complete-search verdict: status in {"SAT", "UNSAT", "BUDGET"}."""

    status: str
    assignment: list[bool] | None = None
    nodes: int = 0


def select_cell(
    table: DegreeTable, rule: SelectionRule, rng: random.Random | None = None
) -> tuple[tuple[int, int], int]:
    """Pick the next cell and a uniformly random variable from its pair.

    A nonempty pure cell preempts the rule (among pure cells, maximal i+j
    wins); otherwise the rule-maximal cell is taken.  The winning cell and
    its mirror form one unordered pair whose members are indistinguishable,
    so the variable is drawn uniformly from their union; the returned cell
    is the drawn variable's own.  Raises NoLiveVariable if every unset
    variable is isolated.
    """
    best_pure = best_rule = None
    for key in table.cells:
        i, j = key
        if i + j == 0:
            continue
        if is_pure_cell(i, j):
            cand = (i + j, key)
            if best_pure is None or cand[0] > best_pure[0]:
                best_pure = cand
        else:
            cand = (rule_key(i, j, rule), key)
            if best_rule is None or cand[0] > best_rule[0]:
                best_rule = cand
    chosen = best_pure[1] if best_pure is not None else None
    if chosen is None and best_rule is not None:
        chosen = best_rule[1]
    if chosen is None:
        raise NoLiveVariable("no unset variable occurs in a live clause")
    return _draw_from_pair(table, chosen, rng or random.Random(0))


def _draw_from_pair(
    table: DegreeTable, key: tuple[int, int], rng: random.Random
) -> tuple[tuple[int, int], int]:
    i, j = key
    mirror = (j, i)
    ca = table.count(key)
    cb = table.count(mirror) if mirror != key else 0
    r = rng.randrange(ca + cb)
    v = table.pick(key, r) if r < ca else table.pick(mirror, r - ca)
    return table.cell_of[v], v


def unit_propagate(f: Formula, table: DegreeTable) -> PropagationResult:
    """Exhaust the FIFO unit queue, or stop at the first empty clause."""
    forced = 0
    queue = f.unit_queue
    while queue:
        ci = queue.popleft()
        if not f.live[ci]:
            continue
        clause = f.clauses[ci]
        if not clause:
            return PropagationResult(forced, True)
        lit = clause[0]
        report = set_variable(f, table, abs(lit), lit > 0)
        forced += 1
        if report.empty_clause_created:
            return PropagationResult(forced, True)
    return PropagationResult(forced, False)


class _CellHeaps:
    """Lazy max-heaps over nonempty cells, fed by DegreeTable transitions.

    Entries are (negated priority key, cell); stale entries (cells that
    emptied since the push) are discarded on pop.  Priorities are static per
    cell, so any entry for a currently nonempty cell is valid.
    """

    def __init__(self, table: DegreeTable, rule: SelectionRule):
        self.table = table
        self.rule = rule
        self.pure: list[tuple] = []
        self.nonpure: list[tuple] = []
        table.on_nonempty = self.push
        for key in table.cells:
            self.push(key)

    def push(self, key: tuple[int, int]) -> None:
        i, j = key
        if i + j == 0:
            return
        if is_pure_cell(i, j):
            heapq.heappush(self.pure, (-(i + j), key))
        else:
            k = rule_key(i, j, self.rule)
            heapq.heappush(self.nonpure, (tuple(-x for x in k), key))

    def _top(self, heap: list) -> tuple[int, int] | None:
        table = self.table
        while heap and table.count(heap[0][1]) == 0:
            heapq.heappop(heap)
        return heap[0][1] if heap else None

    def best_cell(self) -> tuple[int, int] | None:
        key = self._top(self.pure)
        if key is None:
            key = self._top(self.nonpure)
        return key


def run_algorithm_a(
    f: Formula,
    cfg: SolverConfig,
    table: DegreeTable | None = None,
    collect_trace: bool = False,
    debug_check: bool = False,
) -> RunOutcome:
    """Run the greedy heuristic to completion on a fresh formula.

    Alternates a free move with exhaustive unit propagation.  With
    cfg.backtracking == "one_step", a conflict triggered by a free move
    undoes exactly that move and its forced consequences, tries the opposite
    value once, and fails terminally on a second conflict.  Isolated
    variables (degree (0,0)) are set True at the end.  A success outcome is
    always verified against the original clauses before being returned.
    """
    if table is None:
        table = build_degree_table(f)
    heaps = _CellHeaps(table, cfg.selection)
    rng = random.Random(cfg.seed)
    trace: list[tuple] | None = [] if collect_trace else None
    free_moves = 0
    forced_moves = 0

    def fail() -> RunOutcome:
        return RunOutcome(
            status="failure",
            assignment=None,
            free_moves=free_moves,
            forced_moves=forced_moves,
            failure_depth=f.num_set,
            trace=trace,
        )

    prop = unit_propagate(f, table)
    forced_moves += prop.forced
    if prop.conflict:
        return fail()

    while f.num_set < f.n:
        if debug_check:
            f.check_consistency(table)
        if f.num_live == 0:
            for v in range(1, f.n + 1):
                if f.assignment[v] == -1:
                    set_variable(f, table, v, True)
            break
        assert not f.unit_queue, "free move attempted while units pending"
        key = heaps.best_cell()
        assert key is not None, "live clauses but no occupied cell"
        cell, v = _draw_from_pair(table, key, rng)
        value = choose_polarity(cell[0], cell[1], cfg.polarity)
        free_moves += 1
        mark = f.mark()
        report = set_variable(f, table, v, value)
        prop = unit_propagate(f, table)
        forced_moves += prop.forced
        conflict = report.empty_clause_created or prop.conflict
        if collect_trace:
            trace.append((cell, value, prop.forced))
        if conflict:
            if cfg.backtracking != "one_step":
                return fail()
            undone = undo_to(f, table, mark)
            forced_moves -= undone - 1
            report = set_variable(f, table, v, not value)
            prop = unit_propagate(f, table)
            forced_moves += prop.forced
            if collect_trace:
                trace.append((cell, not value, prop.forced))
            if report.empty_clause_created or prop.conflict:
                return fail()

    assignment = [bool(x == 1) for x in f.assignment]
    if not verify_assignment(f, assignment):
        raise AssertionError("internal error: success verdict failed certification")
    return RunOutcome(
        status="success",
        assignment=assignment,
        free_moves=free_moves,
        forced_moves=forced_moves,
        failure_depth=None,
        trace=trace,
    )


def dpll_solve(f: Formula, cfg: SolverConfig, limit: int | None = None) -> SolveResult:
    """Complete backtracking search branching on the heuristic's variable.

    Each node propagates units, then branches on the selected variable with
    the polarity rule's value first.  `limit` bounds the number of branching
    assignments tried; exceeding it returns status "BUDGET".  SAT answers
    are verified against the original clauses.
    """
    table = build_degree_table(f)
    heaps = _CellHeaps(table, cfg.selection)
    rng = random.Random(cfg.seed)
    nodes = 0

    def finish_sat() -> SolveResult:
        for v in range(1, f.n + 1):
            if f.assignment[v] == -1:
                set_variable(f, table, v, True)
        assignment = [bool(x == 1) for x in f.assignment]
        if not verify_assignment(f, assignment):
            raise AssertionError("internal error: SAT verdict failed certification")
        return SolveResult("SAT", assignment, nodes)

    prop = unit_propagate(f, table)
    conflict = prop.conflict
    # Stack frames: [mark, variable, first value, second value tried?]
    stack: list[list] = []
    while True:
        if not conflict:
            if f.num_live == 0:
                return finish_sat()
            key = heaps.best_cell()
            assert key is not None
            cell, v = _draw_from_pair(table, key, rng)
            value = choose_polarity(cell[0], cell[1], cfg.polarity)
            if limit is not None and nodes >= limit:
                return SolveResult("BUDGET", None, nodes)
            nodes += 1
            stack.append([f.mark(), v, value, False])
            report = set_variable(f, table, v, value)
            prop = unit_propagate(f, table)
            conflict = report.empty_clause_created or prop.conflict
            continue
        # Backtrack to the deepest frame with an untried second value.
        while stack and stack[-1][3]:
            undo_to(f, table, stack[-1][0])
            stack.pop()
        if not stack:
            return SolveResult("UNSAT", None, nodes)
        frame = stack[-1]
        undo_to(f, table, frame[0])
        frame[3] = True
        if limit is not None and nodes >= limit:
            return SolveResult("BUDGET", None, nodes)
        nodes += 1
        report = set_variable(f, table, frame[1], not frame[2])
        prop = unit_propagate(f, table)
        conflict = report.empty_clause_created or prop.conflict


_BRUTE_LIMIT = 25


def brute_force_solve(f: Formula) -> SolveResult:
    """Exhaustively enumerate all 2**n assignments (n <= 25 enforced).

    Assignments are packed one per bit over numpy uint64 words, ordered so
    that index b has variable v true iff bit (n - v) of b is set; the first
    satisfying index is therefore the lexicographically first assignment
    under (x1, ..., xn) with False < True.
    """
    n = f.n
    if n > _BRUTE_LIMIT:
        raise ValueError(f"brute force capped at n <= {_BRUTE_LIMIT}, got {n}")
    if n == 0:
        return SolveResult("SAT", [False])
    size = 1 << n
    words = max(1, size >> 6)
    idx = np.arange(words, dtype=np.uint64)

    masks: dict[int, np.ndarray] = {}

    def var_mask(v: int) -> np.ndarray:
        # Word array with bit k of word w set iff variable v is true in
        # assignment index 64*w + k.
        b = n - v
        got = masks.get(b)
        if got is None:
            if b >= 6:
                full = ((idx >> np.uint64(b - 6)) & np.uint64(1)).astype(bool)
                got = np.where(full, np.uint64(0xFFFFFFFFFFFFFFFF), np.uint64(0))
            else:
                pat = 0
                for k in range(64):
                    if (k >> b) & 1:
                        pat |= 1 << k
                got = np.full(words, np.uint64(pat))
            masks[b] = got
        return got

    if size < 64:
        universe = np.uint64((1 << size) - 1)
    else:
        universe = np.uint64(0xFFFFFFFFFFFFFFFF)
    sat = np.full(words, universe)
    for clause in f.original:
        clause_mask = np.zeros(words, dtype=np.uint64)
        for lit in clause:
            m = var_mask(abs(lit))
            clause_mask |= m if lit > 0 else ~m
        sat &= clause_mask
        if size < 64:
            sat &= universe
    nz = np.nonzero(sat)[0]
    if len(nz) == 0:
        return SolveResult("UNSAT", None)
    w = int(nz[0])
    word = int(sat[w])
    k = (word & -word).bit_length() - 1
    index = (w << 6) | k
    assignment = [False] * (n + 1)
    for v in range(1, n + 1):
        assignment[v] = bool((index >> (n - v)) & 1)
    return SolveResult("SAT", assignment)

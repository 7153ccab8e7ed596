"""3-CNF formulas under partial assignment, with exact degree bookkeeping.

Representation conventions (DIMACS style):
  - a literal is a signed nonzero int: +v is the positive literal of
    variable v, -v its negation;
  - a clause is a list of literals over distinct variables, length 1..3;
  - a formula holds the live (not yet satisfied) clauses, per-variable
    occurrence lists, a partial assignment, and counters of live clause
    lengths.

Setting a variable removes every clause containing the satisfied literal
from the occurrence lists of its other variables immediately, so the degree
(i, j) of an unset variable -- i positive and j negative live occurrences --
is always exact.  All mutations are journaled; `undo_to` rolls the formula
and its degree table back to a previous quiescent point, which is what
one-step backtracking and the DPLL search use.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParseError",
    "ReductionReport",
    "DegreeTable",
    "Formula",
    "parse_dimacs",
    "emit_dimacs",
    "generate_random",
    "build_degree_table",
    "set_variable",
    "undo_to",
    "verify_assignment",
]


class ParseError(ValueError):
    """DIMACS syntax or semantics violation, tagged with a 1-based line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class ReductionReport:
    """Effects of setting one variable."""

    satisfied_clauses: int = 0
    shrunk_clauses: int = 0
    new_unit_clauses: list[int] = field(default_factory=list)
    empty_clause_created: bool = False


class DegreeTable:
    """Buckets of unset variables keyed by (positive, negative) live degree.

    Each bucket is a list with a position map, so removal and uniform random
    choice are O(1).  `on_nonempty` (if set) is invoked with the cell key
    whenever a bucket transitions from empty to nonempty; the solver uses it
    to feed its lazy selection heaps.
    """

    __slots__ = ("cells", "_pos", "cell_of", "on_nonempty")

    def __init__(self):
        self.cells: dict[tuple[int, int], list[int]] = {}
        self._pos: dict[int, int] = {}
        self.cell_of: dict[int, tuple[int, int]] = {}
        self.on_nonempty = None

    def __len__(self) -> int:
        return len(self.cell_of)

    def count(self, key: tuple[int, int]) -> int:
        bucket = self.cells.get(key)
        return 0 if bucket is None else len(bucket)

    def add(self, v: int, i: int, j: int) -> None:
        key = (i, j)
        bucket = self.cells.get(key)
        if bucket is None:
            bucket = []
            self.cells[key] = bucket
        self._pos[v] = len(bucket)
        bucket.append(v)
        self.cell_of[v] = key
        if len(bucket) == 1 and self.on_nonempty is not None:
            self.on_nonempty(key)

    def remove(self, v: int) -> None:
        key = self.cell_of.pop(v)
        bucket = self.cells[key]
        idx = self._pos.pop(v)
        last = bucket[-1]
        if last != v:
            bucket[idx] = last
            self._pos[last] = idx
        bucket.pop()
        if not bucket:
            del self.cells[key]

    def move(self, v: int, i: int, j: int) -> None:
        self.remove(v)
        self.add(v, i, j)

    def pick(self, key: tuple[int, int], idx: int) -> int:
        return self.cells[key][idx]


class Formula:
    """A 3-CNF instance under partial assignment.

    Attributes:
        n: number of variables (indices 1..n).
        clauses: live literal lists, mutated in place as clauses shrink.
        live: per-clause liveness flags (a satisfied clause keeps its
            literal list frozen for undo).
        original: pristine clause tuples, used for certification.
        pos_occ / neg_occ: per-variable lists of live clause indices in
            which the variable occurs positively / negatively.
        assignment: per-variable value, -1 unset / 0 False / 1 True.
        live_counts: live clause counts indexed by length 0..3.
    """

    def __init__(self, n: int, clauses: list[list[int]]):
        if n < 0:
            raise ValueError("variable count must be nonnegative")
        self.n = n
        self.clauses: list[list[int]] = [list(c) for c in clauses]
        self.original: list[tuple[int, ...]] = [tuple(c) for c in clauses]
        self.live = bytearray(b"\x01" * len(clauses))
        self.assignment: list[int] = [-1] * (n + 1)
        self.pos_occ: list[list[int]] = [[] for _ in range(n + 1)]
        self.neg_occ: list[list[int]] = [[] for _ in range(n + 1)]
        self.live_counts = [0, 0, 0, 0]
        self.unit_queue: deque[int] = deque()
        self.journal: list[tuple] = []
        self.num_set = 0
        for ci, clause in enumerate(self.clauses):
            if not 1 <= len(clause) <= 3:
                raise ValueError(f"clause {ci} has length {len(clause)}")
            seen = set()
            for lit in clause:
                v = abs(lit)
                if lit == 0 or v > n:
                    raise ValueError(f"literal {lit} out of range in clause {ci}")
                if v in seen:
                    raise ValueError(f"duplicate variable {v} in clause {ci}")
                seen.add(v)
                (self.pos_occ if lit > 0 else self.neg_occ)[v].append(ci)
            self.live_counts[len(clause)] += 1
            if len(clause) == 1:
                self.unit_queue.append(ci)

    @property
    def num_live(self) -> int:
        return sum(self.live_counts)

    def degree(self, v: int) -> tuple[int, int]:
        return len(self.pos_occ[v]), len(self.neg_occ[v])

    def unset_count(self) -> int:
        return self.n - self.num_set

    def mark(self) -> int:
        return len(self.journal)

    def assigned_literals(self) -> list[int]:
        return [
            v if self.assignment[v] == 1 else -v
            for v in range(1, self.n + 1)
            if self.assignment[v] != -1
        ]

    def check_consistency(self, table: DegreeTable | None = None) -> None:
        """Recount everything from scratch; raise on any drift (debug aid)."""
        counts = [0, 0, 0, 0]
        pos = [set() for _ in range(self.n + 1)]
        neg = [set() for _ in range(self.n + 1)]
        for ci, clause in enumerate(self.clauses):
            if not self.live[ci]:
                continue
            counts[len(clause)] += 1
            for lit in clause:
                v = abs(lit)
                if self.assignment[v] != -1:
                    raise AssertionError(f"live clause {ci} references set variable {v}")
                (pos if lit > 0 else neg)[v].add(ci)
        if counts != self.live_counts:
            raise AssertionError(f"live counts {self.live_counts} != recount {counts}")
        occ_total = 0
        for v in range(1, self.n + 1):
            if self.assignment[v] != -1:
                continue
            if set(self.pos_occ[v]) != pos[v] or set(self.neg_occ[v]) != neg[v]:
                raise AssertionError(f"occurrence lists of variable {v} drifted")
            occ_total += len(pos[v]) + len(neg[v])
        live_len_total = sum(length * counts[length] for length in (1, 2, 3))
        if occ_total != live_len_total:
            raise AssertionError("occurrence mass != total live clause length")
        if table is not None:
            if len(table) != self.n - self.num_set:
                raise AssertionError("table size != number of unset variables")
            for v in range(1, self.n + 1):
                if self.assignment[v] == -1:
                    want = (len(self.pos_occ[v]), len(self.neg_occ[v]))
                    if table.cell_of.get(v) != want:
                        raise AssertionError(
                            f"variable {v} in cell {table.cell_of.get(v)}, expected {want}"
                        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Formula):
            return NotImplemented
        return self.n == other.n and self.original == other.original

    def __repr__(self) -> str:
        return f"Formula(n={self.n}, m={len(self.clauses)}, set={self.num_set})"


def build_degree_table(f: Formula) -> DegreeTable:
    """Place every unset variable in its (live positive, live negative) cell."""
    table = DegreeTable()
    for v in range(1, f.n + 1):
        if f.assignment[v] == -1:
            table.add(v, len(f.pos_occ[v]), len(f.neg_occ[v]))
    return table


def set_variable(f: Formula, table: DegreeTable, v: int, value: bool) -> ReductionReport:
    """Assign v, satisfying/shrinking its clauses and updating the table.

    Clauses whose literal of v becomes true are detached from every other
    variable's occurrence list; clauses whose literal of v becomes false
    lose that literal.  New unit clauses are queued FIFO on the formula.
    The variable's own occurrence lists are left untouched: they are exactly
    the pre-assignment state that `undo_to` restores.
    """
    if f.assignment[v] != -1:
        raise ValueError(f"variable {v} is already set")
    journal = f.journal
    clauses = f.clauses
    live = f.live
    counts = f.live_counts
    report = ReductionReport()

    f.assignment[v] = 1 if value else 0
    f.num_set += 1
    table.remove(v)
    journal.append(("assign", v))

    sat_list = f.pos_occ[v] if value else f.neg_occ[v]
    fal_list = f.neg_occ[v] if value else f.pos_occ[v]

    for ci in sat_list:
        clause = clauses[ci]
        live[ci] = 0
        counts[len(clause)] -= 1
        journal.append(("sat", ci))
        report.satisfied_clauses += 1
        for lit in clause:
            u = abs(lit)
            if u == v:
                continue
            occ = f.pos_occ[u] if lit > 0 else f.neg_occ[u]
            occ.remove(ci)
            journal.append(("occ", lit, ci))
            table.move(u, len(f.pos_occ[u]), len(f.neg_occ[u]))

    falsified = -v if value else v
    for ci in fal_list:
        clause = clauses[ci]
        length = len(clause)
        clause.remove(falsified)
        counts[length] -= 1
        counts[length - 1] += 1
        journal.append(("shrink", ci, falsified))
        report.shrunk_clauses += 1
        if length == 2:
            f.unit_queue.append(ci)
            report.new_unit_clauses.append(clause[0])
        elif length == 1:
            report.empty_clause_created = True
    return report


def undo_to(f: Formula, table: DegreeTable, mark: int) -> int:
    """Roll formula and table back to a journal mark taken at quiescence.

    The pending unit queue is cleared (at a quiescent mark it was empty).
    Returns the number of assignments undone.
    """
    journal = f.journal
    clauses = f.clauses
    counts = f.live_counts
    undone = 0
    while len(journal) > mark:
        entry = journal.pop()
        tag = entry[0]
        if tag == "occ":
            _, lit, ci = entry
            u = abs(lit)
            (f.pos_occ[u] if lit > 0 else f.neg_occ[u]).append(ci)
            table.move(u, len(f.pos_occ[u]), len(f.neg_occ[u]))
        elif tag == "shrink":
            _, ci, lit = entry
            clause = clauses[ci]
            counts[len(clause)] -= 1
            clause.append(lit)
            counts[len(clause)] += 1
        elif tag == "sat":
            ci = entry[1]
            f.live[ci] = 1
            counts[len(clauses[ci])] += 1
        elif tag == "assign":
            v = entry[1]
            f.assignment[v] = -1
            f.num_set -= 1
            table.add(v, len(f.pos_occ[v]), len(f.neg_occ[v]))
            undone += 1
        else:  # pragma: no cover - journal is internal
            raise AssertionError(f"corrupt journal entry {entry!r}")
    f.unit_queue.clear()
    return undone


def verify_assignment(f: Formula, assignment) -> bool:
    """True iff every original clause has a true literal under `assignment`.

    `assignment` maps variable -> bool (a dict, or a sequence indexed by
    variable with index 0 unused).  Raises ValueError if any variable
    occurring in the formula is missing.
    """
    if isinstance(assignment, dict):
        lookup = assignment.get
    else:
        lookup = lambda v: assignment[v] if v < len(assignment) else None
    for clause in f.original:
        for lit in clause:
            val = lookup(abs(lit))
            if val is None or val == -1:
                raise ValueError(f"assignment incomplete: variable {abs(lit)} unset")
    for clause in f.original:
        if not any(bool(lookup(abs(lit))) == (lit > 0) for lit in clause):
            return False
    return True


def parse_dimacs(text) -> Formula:
    """Parse DIMACS CNF (`c` comments, `p cnf n m` header, 0-terminated clauses).

    Clauses may span lines.  Rejected with a line-tagged ParseError:
    malformed or duplicate header, literals out of range, clause length
    outside 1..3, duplicate variable inside a clause, a clause left
    unterminated at end of input, and a clause count that contradicts the
    header.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii")
    n = m = None
    clauses: list[list[int]] = []
    current: list[int] = []
    current_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if n is not None:
                raise ParseError("duplicate header", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[0] != "p" or parts[1] != "cnf":
                raise ParseError(f"malformed header {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"malformed header {line!r}", lineno) from None
            if n < 0 or m < 0:
                raise ParseError("negative counts in header", lineno)
            continue
        if n is None:
            raise ParseError("clause data before header", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"bad token {tok!r}", lineno) from None
            if lit == 0:
                if not 1 <= len(current) <= 3:
                    raise ParseError(
                        f"clause of length {len(current)} (must be 1..3)", lineno
                    )
                seen = set()
                for c_lit in current:
                    if abs(c_lit) in seen:
                        raise ParseError(
                            f"duplicate variable {abs(c_lit)} in clause", lineno
                        )
                    seen.add(abs(c_lit))
                clauses.append(current)
                current = []
            else:
                if abs(lit) > n:
                    raise ParseError(f"literal {lit} out of range (n={n})", lineno)
                current.append(lit)
                current_line = lineno
    if current:
        raise ParseError("unterminated clause at end of input", current_line)
    if n is None:
        raise ParseError("missing header", 1)
    if len(clauses) != m:
        raise ParseError(
            f"header promised {m} clauses, found {len(clauses)}", current_line or 1
        )
    return Formula(n, clauses)


def emit_dimacs(f: Formula) -> str:
    """Serialize the live, reduced clauses; inverse of parse_dimacs on structure.

    A partially assigned formula emits only its live clauses, preceded by a
    comment line `c set <literals>` recording the assignment made so far.
    """
    lines = []
    set_lits = f.assigned_literals()
    if set_lits:
        lines.append("c set " + " ".join(map(str, set_lits)))
    live_clauses = [f.clauses[ci] for ci in range(len(f.clauses)) if f.live[ci]]
    lines.append(f"p cnf {f.n} {len(live_clauses)}")
    for clause in live_clauses:
        lines.append(" ".join(map(str, clause)) + " 0")
    return "\n".join(lines) + "\n"


def generate_random(n: int, c: float, seed: int) -> Formula:
    """Draw round(c*n) proper 3-clauses uniformly with replacement.

    Each clause picks an ordered triple of distinct variables (uniform by
    rejection) and three independent sign bits.  The generator is pinned for
    reproducibility: numpy PCG64 seeded with `seed` (a 64-bit value), first
    drawing the (m, 3) variable table -- redrawing duplicate rows in batches
    until none remain -- and then the (m, 3) sign table.
    """
    if n < 3:
        raise ValueError("need at least 3 variables for proper 3-clauses")
    if c <= 0:
        raise ValueError("density must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    m = round(c * n)
    vars_ = rng.integers(1, n + 1, size=(m, 3), dtype=np.int64)
    while True:
        srt = np.sort(vars_, axis=1)
        bad = (srt[:, 0] == srt[:, 1]) | (srt[:, 1] == srt[:, 2])
        k = int(bad.sum())
        if k == 0:
            break
        vars_[bad] = rng.integers(1, n + 1, size=(k, 3), dtype=np.int64)
    signs = rng.integers(0, 2, size=(m, 3), dtype=np.int64)
    lits = np.where(signs == 1, vars_, -vars_)
    return Formula(n, lits.tolist())

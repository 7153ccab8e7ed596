"""Mean-field evolution of the degree spectrum under the greedy heuristic.

State: the truncated grid n[i][j] of variable densities with i positive and
j negative live occurrences (index h collects degrees >= h on that side),
plus 3- and 2-clause densities m3, m2.  One *round* freezes the state, sets
a small mass dt of variables from the selected cell pair, and applies

    S_new = S + dt * (free-move deltas) + dt * m1/(1-rho) * (forced-move deltas)

where m1 is the unit-clause density one free move creates and rho is the
mean number of new unit clauses per forced move (the branching factor of
the unit-propagation cascade); dt * m1/(1-rho) is the expected mass of
forced assignments the round triggers.  A round's selected unordered pair
{a, b} is processed as cell (a, b) with the polarity rule's value and
(b, a) with the complement, dt split in proportion to the two cell masses,
which keeps a symmetric spectrum exactly symmetric.

Total occurrence density Sigma = 2*m2 + 3*m3 is used for both the clause
and the variable side normalizations (they agree up to the monitored
mass-balance residual).  Cells at index h are treated as having degree
exactly h; inflow that would reference index h+1 is zero, and the paper
sums over forced-literal cells stop below h, so row/column h never absorbs
forced moves.  The truncation tail is monitored and is negligible for the
default h = 31.

The hot loop is compiled with numba; the standalone delta functions below
are the readable reference implementations and the kernels are tested
against them (and against an O(h^4) literal summation oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .rules import PolarityRule, SelectionRule, score_grids

__all__ = [
    "OdeConfig",
    "SpectrumState",
    "FreeMoveDelta",
    "ForcedMoveDelta",
    "RoundReport",
    "Trajectory",
    "MassBalanceError",
    "NumericFaultError",
    "init_spectrum",
    "free_move_delta",
    "malthus_rho",
    "forced_move_delta",
    "forced_move_delta_naive",
    "advance_round",
    "run_trajectory",
    "trajectory_csv_lines",
    "TERM_ENDGAME",
    "TERM_RHO_BLOWUP",
    "TERM_MASS_EXHAUSTED",
    "TERM_MAX_ROUNDS",
]

TERM_ENDGAME = "EndgameReached"
TERM_RHO_BLOWUP = "RhoBlowup"
TERM_MASS_EXHAUSTED = "MassExhausted"
TERM_MAX_ROUNDS = "MaxRounds"

# internal kernel status codes
_ST_RUN = 0
_ST_ENDGAME = 1
_ST_RHO = 2
_ST_EXHAUSTED = 3
_ST_MAXROUNDS = 4
_ST_CLAMP_FAULT = 5
_ST_MONITOR_FAULT = 6
_ST_TSTOP = 7
_ST_CHUNK = 8

_STATUS_NAMES = {
    _ST_ENDGAME: TERM_ENDGAME,
    _ST_RHO: TERM_RHO_BLOWUP,
    _ST_EXHAUSTED: TERM_MASS_EXHAUSTED,
    _ST_MAXROUNDS: TERM_MAX_ROUNDS,
}

_PRUNE_EPS = 1e-30    # spectrum entries below this collapse to exact zero
_FORCED_CAP = 8.0     # max forced mass per round, in units of cfg.delta
_REL_STEP_CAP = 0.5   # max per-cell relative shrink per round

CSV_HEADER = "round,t,cell_i,cell_j,dt,m2,m3,m1,rho,total_var_mass,mass_residual"


class MassBalanceError(RuntimeError):
    """Occurrence mass drifted from 2*m2+3*m3 beyond the monitored bound."""


class NumericFaultError(RuntimeError):
    """An update drove a density below the clamp tolerance."""


@dataclass
class OdeConfig:
    """Knobs of the spectrum evolution.

    h: truncation degree; delta: per-round free mass; clamp_eps: negativity
    tolerance (entries in [-clamp_eps, 0) snap to 0, below it is a fault);
    rho_guard: abort once rho >= 1 - rho_guard; end_mass: success threshold
    on the live (non-isolated) variable mass; endgame: optional replacement
    success predicate, called with (live_mass, m2, m3, t) at sampling
    granularity.

    mass_floor hides numerically empty cells from selection.  None resolves
    to max(1e-14, min(delta/10, end_mass/1000)): a flat 1e-14 floor lets
    flow refill pure cells with ever-smaller masses every round, which
    multiplies the round count by thousands; tying the floor to the round
    size keeps invisible cells below one round's worth of mass without ever
    obstructing the endgame test.

    clamp_eps None resolves to max(1e-12, 1000*delta**2): emptying a cell of
    mass ~delta structurally overshoots zero by O(delta^2 * degree * rate),
    which is Euler discretization dust, not a fault.

    The balance monitor bound is mass_tol0 + mass_tol_kappa * (truncation
    row/column mass) + 2h * (cumulative clamped mass); the last term is an
    exact upper bound on the occurrence mass that clamping re-created.
    max_rounds 0 means an automatic cap of 400/delta rounds.
    """

    h: int = 31
    delta: float = 1e-6
    clamp_eps: float | None = None
    rho_guard: float = 1e-3
    end_mass: float = 1e-4
    endgame: object = None
    mass_floor: float | None = None
    mass_tol0: float = 1e-8
    mass_tol_kappa: float = 1e3
    max_rounds: int = 0

    def __post_init__(self):
        if self.h < 2:
            raise ValueError("truncation degree must be >= 2")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if not 0 < self.rho_guard < 1:
            raise ValueError("rho_guard must be in (0, 1)")

    def resolved_mass_floor(self) -> float:
        if self.mass_floor is not None:
            return self.mass_floor
        return max(1e-14, min(self.delta / 10.0, self.end_mass / 1000.0))

    def resolved_clamp_eps(self) -> float:
        if self.clamp_eps is not None:
            return self.clamp_eps
        return max(1e-12, 1000.0 * self.delta**2)

    def auto_max_rounds(self) -> int:
        return self.max_rounds if self.max_rounds > 0 else int(400 / self.delta)


@dataclass
class SpectrumState:
    """Spectrum grid plus clause densities; m1 is transient within a round."""

    n: np.ndarray
    m3: float
    m2: float = 0.0
    m1: float = 0.0
    t: float = 0.0

    @property
    def h(self) -> int:
        return self.n.shape[0] - 1

    def copy(self) -> "SpectrumState":
        return SpectrumState(self.n.copy(), self.m3, self.m2, self.m1, self.t)

    def sigma(self) -> float:
        """Total occurrence density 2*m2 + 3*m3."""
        return 2.0 * self.m2 + 3.0 * self.m3

    def occurrence_mass(self) -> float:
        h = self.h
        idx = np.arange(h + 1, dtype=float)
        return float(((idx[:, None] + idx[None, :]) * self.n).sum())

    def live_mass(self) -> float:
        """Density of unset variables that still occur in live clauses."""
        return float(self.n.sum() - self.n[0, 0])

    def mass_residual(self) -> float:
        return abs(self.occurrence_mass() - self.sigma())

    def tail_mass(self) -> float:
        h = self.h
        return float(self.n[h, :].sum() + self.n[:, h].sum() - self.n[h, h])


@dataclass
class FreeMoveDelta:
    d_m3: float
    d_m2: float
    d_m1: float
    d_n: np.ndarray


@dataclass
class ForcedMoveDelta:
    d_m3: float
    d_m2: float
    d_n: np.ndarray


@dataclass
class RoundReport:
    round_index: int
    cell: tuple[int, int]
    dt: float
    rho: float
    m1: float
    mass_balance_residual: float
    t: float
    m2: float
    m3: float
    total_var_mass: float


@dataclass
class Trajectory:
    c: float
    cfg: OdeConfig
    rule: SelectionRule
    polarity: PolarityRule
    termination: str
    rounds: int
    max_rho: float
    final_state: SpectrumState
    reports: list[RoundReport] = field(default_factory=list)
    snapshots: list[tuple[float, SpectrumState]] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.termination == TERM_ENDGAME


def _poisson_with_tail(lam: float, h: int) -> np.ndarray:
    """pmf values [P(0), ..., P(h-1), P(>=h)], the tail summed upward."""
    p = np.zeros(h + 1)
    term = math.exp(-lam)
    for i in range(h):
        p[i] = term
        term *= lam / (i + 1)
    # continue the recursion for the tail until terms vanish
    tail = 0.0
    i = h
    while term > 0.0 and i < h + 2000:
        tail += term
        term *= lam / (i + 1)
        i += 1
    p[h] = tail
    return p


def init_spectrum(c: float, h: int) -> SpectrumState:
    """Product-Poisson spectrum with mean 3c/2 per sign; m3 = c, m2 = 0.

    Each of the 3cn literal slots picks a uniform variable and sign, so the
    per-sign occurrence counts converge to independent Poisson(3c/2)
    variables.  Degrees >= h fold into index h.  Entries below 1e-30 are
    dropped (total discarded mass < 1e-27) so the dynamic range stays
    bounded.
    """
    if c <= 0:
        raise ValueError("density must be positive")
    lam = 1.5 * c
    q = _poisson_with_tail(lam, h)
    n = np.outer(q, q)
    n[n < 1e-30] = 0.0
    return SpectrumState(n=n, m3=float(c), m2=0.0, m1=0.0, t=0.0)


def _flow_grid(n: np.ndarray, sigma: float) -> np.ndarray:
    """Flow(i,j): net outflow rate of cell (i,j) per deleted occurrence.

    ((i+j) n[i,j] - (i+1) n[i+1,j] - (j+1) n[i,j+1]) / sigma, with inflow
    referencing index h+1 taken as zero.
    """
    h = n.shape[0] - 1
    idx = np.arange(h + 1, dtype=float)
    out = (idx[:, None] + idx[None, :]) * n
    inflow = np.zeros_like(n)
    inflow[:h, :] += idx[1:, None] * n[1:, :]
    inflow[:, :h] += idx[None, 1:] * n[:, 1:]
    return (out - inflow) / sigma


def free_move_delta(s: SpectrumState, k: int, l: int, value: bool) -> FreeMoveDelta:
    """Expected per-unit-dt changes from setting a (k,l)-variable to `value`.

    Setting True satisfies the k positive occurrences (those clauses vanish,
    deleting their other literals' occurrences) and falsifies the l negative
    ones (those clauses shrink).  Setting False swaps the roles of k and l;
    the variable is removed from its own cell (k,l) either way.
    """
    sigma = s.sigma()
    if sigma <= 0:
        raise ValueError("no live clause mass (2*m2 + 3*m3 = 0)")
    sat, fal = (k, l) if value else (l, k)
    d_m3 = -(k + l) * 3.0 * s.m3 / sigma
    d_m2 = -(k + l) * 2.0 * s.m2 / sigma + fal * 3.0 * s.m3 / sigma
    d_m1 = fal * 2.0 * s.m2 / sigma
    c_rate = (2.0 * 1.0 * s.m2 + 3.0 * 2.0 * s.m3) / sigma
    d_n = -sat * c_rate * _flow_grid(s.n, sigma)
    d_n[k, l] -= 1.0
    return FreeMoveDelta(d_m3=d_m3, d_m2=d_m2, d_m1=d_m1, d_n=d_n)


def _unit_literal_probs(s: SpectrumState) -> tuple[np.ndarray, np.ndarray]:
    """pT[k,l], pF[k,l] for 0 <= k,l < h: the unit literal is the positive
    literal of a cell-(k+1,l) variable (pT) or the negative literal of a
    cell-(k,l+1) variable (pF); excluding the unit clause itself the
    variable has degree (k,l)."""
    sigma = s.sigma()
    h = s.h
    idx = np.arange(1, h + 1, dtype=float)
    pT = idx[:, None] * s.n[1:, :h] / sigma  # (k+1) n[k+1, l]
    pF = idx[None, :] * s.n[:h, 1:] / sigma  # (l+1) n[k, l+1]
    return pT, pF


def malthus_rho(s: SpectrumState) -> float:
    """Mean number of new unit clauses spawned by one forced assignment."""
    sigma = s.sigma()
    if sigma <= 0:
        raise ValueError("no live clause mass (2*m2 + 3*m3 = 0)")
    if s.m2 == 0.0:
        return 0.0
    pT, pF = _unit_literal_probs(s)
    h = s.h
    ks = np.arange(h, dtype=float)
    unit_rate = 2.0 * s.m2 / sigma
    return float((pT * ks[None, :] * unit_rate + pF * ks[:, None] * unit_rate).sum())


def forced_move_delta(s: SpectrumState) -> ForcedMoveDelta:
    """Expected per-move changes from one forced (unit-clause) assignment.

    Uses the separable form: the flow part of every branch is a multiple of
    the same Flow grid, so the expectation collapses to
    -Kbar * C * Flow(i,j) minus the absorption of the forced variable from
    its own cell, at O(h^2) total cost.
    """
    sigma = s.sigma()
    if sigma <= 0:
        raise ValueError("no live clause mass (2*m2 + 3*m3 = 0)")
    pT, pF = _unit_literal_probs(s)
    h = s.h
    ks = np.arange(h, dtype=float)
    w_T = (ks[:, None] + ks[None, :]) * pT
    w_F = (ks[:, None] + ks[None, :]) * pF
    W = float(w_T.sum() + w_F.sum())
    V = float((pT * ks[None, :]).sum() + (pF * ks[:, None]).sum())
    kbar = W - V
    d_m3 = -W * 3.0 * s.m3 / sigma
    d_m2 = -W * 2.0 * s.m2 / sigma + V * 3.0 * s.m3 / sigma
    c_rate = (2.0 * s.m2 + 6.0 * s.m3) / sigma
    d_n = -kbar * c_rate * _flow_grid(s.n, sigma)
    # absorption: pT removes the variable from cell (k+1, l), pF from (k, l+1)
    d_n[1:, :h] -= pT
    d_n[:h, 1:] -= pF
    return ForcedMoveDelta(d_m3=d_m3, d_m2=d_m2, d_n=d_n)


def forced_move_delta_naive(s: SpectrumState) -> ForcedMoveDelta:
    """Literal O(h^4) evaluation of the forced-move expectation (test oracle).

    Sums, over every forced-literal cell (k', l') below the truncation, the
    probability-weighted per-branch clause deltas, flow contribution, and
    self-absorption, without exploiting any factorization.
    """
    sigma = s.sigma()
    if sigma <= 0:
        raise ValueError("no live clause mass (2*m2 + 3*m3 = 0)")
    h = s.h
    flow = _flow_grid(s.n, sigma)
    c_rate = (2.0 * s.m2 + 6.0 * s.m3) / sigma
    d_m3 = 0.0
    d_m2 = 0.0
    d_n = np.zeros_like(s.n)

    def dM3(k, l):
        return -(k + l) * 3.0 * s.m3 / sigma

    def dM2(k, l):
        return -(k + l) * 2.0 * s.m2 / sigma + l * 3.0 * s.m3 / sigma

    for kp in range(h):
        for lp in range(h):
            pT = (kp + 1) * s.n[kp + 1, lp] / sigma
            pF = (lp + 1) * s.n[kp, lp + 1] / sigma
            d_m3 += pT * dM3(kp, lp) + pF * dM3(lp, kp)
            d_m2 += pT * dM2(kp, lp) + pF * dM2(lp, kp)
            if pT != 0.0:
                d_n += pT * (-kp * c_rate) * flow
                d_n[kp + 1, lp] -= pT
            if pF != 0.0:
                d_n += pF * (-lp * c_rate) * flow
                d_n[kp, lp + 1] -= pF
    return ForcedMoveDelta(d_m3=d_m3, d_m2=d_m2, d_n=d_n)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------
# State scalar vector layout
_S_M2, _S_M3, _S_T, _S_MAXRHO, _S_CUMCLAMP = 0, 1, 2, 3, 4
# Metrics vector layout (filled by _round_metrics)
_R_LIVE, _R_OCC, _R_TAIL, _R_V, _R_W, _R_A, _R_B = range(7)
# Apply-result vector layout (filled by _round_apply)
_A_M2, _A_M3, _A_TADV, _A_CLAMP, _A_DT, _A_M1 = range(6)


@njit(cache=True)
def _round_metrics(n, box, h, floor, pure_sc, rule_sc, out):
    """One pass: live/occurrence/tail masses, rho/forced reductions, selection.

    The sums over forced-literal cells (k', l') below the truncation
    reindex to elementwise moments of the grid:
      V = sum i*j*([j<h] + [i<h]) * n[i,j]          (new-unit weights)
      W = sum (i+j-1)*(i*[j<h] + j*[i<h]) * n[i,j]  (occurrence weights)
    both left unnormalized here (divide by sigma at use sites).
    """
    live = 0.0
    occ = 0.0
    tail = 0.0
    vn = 0.0
    wn = 0.0
    best_p = -np.inf
    best_r = -np.inf
    pa = -1
    pb = -1
    ra = -1
    rb = -1
    for i in range(box + 1):
        for j in range(box + 1):
            m = n[i, j]
            if m == 0.0:
                continue
            live += m
            occ += (i + j) * m
            if i == h or j == h:
                tail += m
            a_coef = 0.0  # i*[j<h] + j*[i<h]
            b_coef = 0.0  # [j<h] + [i<h]
            if j < h:
                a_coef += i
                b_coef += 1.0
            if i < h:
                a_coef += j
                b_coef += 1.0
            vn += i * j * b_coef * m
            wn += (i + j - 1) * a_coef * m
            if m >= floor:
                sp = pure_sc[i, j]
                if sp > best_p:
                    best_p = sp
                    pa = i
                    pb = j
                sr = rule_sc[i, j]
                if sr > best_r:
                    best_r = sr
                    ra = i
                    rb = j
    live -= n[0, 0]
    if pa >= 0:
        out[_R_A] = pa
        out[_R_B] = pb
    else:
        out[_R_A] = ra
        out[_R_B] = rb
    out[_R_LIVE] = live
    out[_R_OCC] = occ
    out[_R_TAIL] = tail
    out[_R_V] = vn
    out[_R_W] = wn


@njit(cache=True)
def _round_apply(n, box, h, m2, m3, a, b, polarity, delta, clamp_eps,
                 sigma, rho, vn, wn, out):
    """Apply one round on the pair {a, b}; returns (m2', m3', fault)."""
    m_ab = n[a, b]
    m_ba = n[b, a] if a != b else 0.0
    avail = m_ab + m_ba
    dt = delta if delta < avail else avail
    dt_ab = dt * (m_ab / avail)
    dt_ba = dt * (m_ba / avail) if a != b else 0.0

    # polarity for cell (a, b); mirror cell gets the complement
    if polarity == 0:  # majority
        val_ab = a >= b
    else:  # minority
        val_ab = a < b

    sat_ab = float(a) if val_ab else float(b)
    fal_ab = float(b) if val_ab else float(a)
    sat_ba = float(b) if not val_ab else float(a)
    fal_ba = float(a) if not val_ab else float(b)

    dm3_rate = -(a + b) * 3.0 * m3 / sigma
    dm2_ab = -(a + b) * 2.0 * m2 / sigma + fal_ab * 3.0 * m3 / sigma
    dm2_ba = -(a + b) * 2.0 * m2 / sigma + fal_ba * 3.0 * m3 / sigma
    dm1_ab = fal_ab * 2.0 * m2 / sigma
    dm1_ba = fal_ba * 2.0 * m2 / sigma

    m1_gen = dt_ab * dm1_ab + dt_ba * dm1_ba
    dtf = m1_gen / (1.0 - rho) if m1_gen > 0.0 else 0.0
    # Near the guard 1/(1-rho) amplifies the forced mass far beyond the free
    # step and the frozen-state assumption degrades; shrink the round (delta
    # may vary per round) so the forced mass stays within a few free steps.
    if dtf > _FORCED_CAP * delta:
        scale = _FORCED_CAP * delta / dtf
        dt *= scale
        dt_ab *= scale
        dt_ba *= scale
        m1_gen *= scale
        dtf = _FORCED_CAP * delta

    kbar = (wn - vn) / sigma
    c_rate = (2.0 * m2 + 6.0 * m3) / sigma
    alpha = (dt_ab * sat_ab + dt_ba * sat_ba + dtf * kbar) * c_rate

    # Cap the largest per-cell relative shrink (flow-out plus absorption) so
    # cells cannot be driven below zero when the occurrence mass sigma gets
    # small late in a run; another per-round delta reduction, all linear.
    rel = (alpha + dtf) * (2.0 * box) / sigma
    if rel > _REL_STEP_CAP:
        scale = _REL_STEP_CAP / rel
        dt *= scale
        dt_ab *= scale
        dt_ba *= scale
        m1_gen *= scale
        dtf *= scale
        alpha *= scale

    # forced-move clause deltas
    w = wn / sigma
    v = vn / sigma
    dpm3 = -w * 3.0 * m3 / sigma
    dpm2 = -w * 2.0 * m2 / sigma + v * 3.0 * m3 / sigma

    new_m3 = m3 + (dt_ab + dt_ba) * dm3_rate + dtf * dpm3
    new_m2 = m2 + dt_ab * dm2_ab + dt_ba * dm2_ba + dtf * dpm2

    # fused update: flow + forced absorption, reading only old neighbor
    # values (indices (i+1, j) and (i, j+1) are written after (i, j))
    fault = 0
    clamp_add = 0.0
    for i in range(box + 1):
        for j in range(box + 1):
            nij = n[i, j]
            infl = 0.0
            if i < h:
                infl += (i + 1) * n[i + 1, j]
            if j < h:
                infl += (j + 1) * n[i, j + 1]
            flow = ((i + j) * nij - infl) / sigma
            absorb_coef = 0.0
            if j < h:
                absorb_coef += i
            if i < h:
                absorb_coef += j
            val = nij - alpha * flow - dtf * absorb_coef * nij / sigma
            if val < _PRUNE_EPS:
                if val < 0.0:
                    if val < -clamp_eps:
                        fault = 1
                    clamp_add -= val
                val = 0.0
            n[i, j] = val

    # remove the freshly set mass from the pair's own cells
    n[a, b] -= dt_ab
    if a != b:
        n[b, a] -= dt_ba
    for (x, y) in ((a, b), (b, a)):
        v = n[x, y]
        if v < _PRUNE_EPS:
            if v < 0.0:
                if v < -clamp_eps:
                    fault = 1
                clamp_add -= v
            n[x, y] = 0.0

    if new_m3 < 0.0:
        if new_m3 < -clamp_eps:
            fault = 1
        new_m3 = 0.0
    if new_m2 < 0.0:
        if new_m2 < -clamp_eps:
            fault = 1
        new_m2 = 0.0

    out[_A_M2] = new_m2
    out[_A_M3] = new_m3
    out[_A_TADV] = dt_ab + dt_ba + dtf
    out[_A_CLAMP] = clamp_add
    out[_A_DT] = dt
    out[_A_M1] = m1_gen
    return fault


@njit(cache=True)
def _trajectory_chunk(n, state, boxarr, h, delta, clamp_eps, rho_guard,
                      end_mass, mass_floor, tol0, tol_kappa, polarity,
                      pure_sc, rule_sc, use_endgame, t_stop, round0,
                      max_rounds, chunk, stride, samples):
    """Run up to `chunk` rounds in place; returns (status, rounds, nsamples).

    Writes a sample row every `stride` rounds and on termination:
    [round, t, cell_i, cell_j, dt, m2, m3, m1, rho, live, residual].
    """
    metrics = np.zeros(7)
    apply_out = np.zeros(6)
    nsamples = 0
    rounds = 0
    box = int(boxarr[0])
    status = _ST_CHUNK
    for _ in range(chunk):
        rnd = round0 + rounds
        m2 = state[_S_M2]
        m3 = state[_S_M3]
        sigma = 2.0 * m2 + 3.0 * m3
        _round_metrics(n, box, h, mass_floor, pure_sc, rule_sc, metrics)
        live = metrics[_R_LIVE]
        residual = abs(metrics[_R_OCC] - sigma)
        if residual > tol0 + tol_kappa * metrics[_R_TAIL] + 2.0 * h * state[_S_CUMCLAMP]:
            status = _ST_MONITOR_FAULT
            break
        rho = 0.0
        if sigma > 0.0 and m2 > 0.0:
            rho = metrics[_R_V] / sigma * 2.0 * m2 / sigma
        if rho > state[_S_MAXRHO]:
            state[_S_MAXRHO] = rho
        if rho >= 1.0 - rho_guard:
            status = _ST_RHO
            break
        if use_endgame == 1 and live < end_mass and (m2 == 0.0 or m2 < live):
            status = _ST_ENDGAME
            break
        a = int(metrics[_R_A])
        b = int(metrics[_R_B])
        if a < 0 or sigma <= 0.0:
            status = _ST_EXHAUSTED
            break
        if rnd >= max_rounds:
            status = _ST_MAXROUNDS
            break
        fault = _round_apply(n, box, h, m2, m3, a, b, polarity, delta,
                             clamp_eps, sigma, rho, metrics[_R_V],
                             metrics[_R_W], apply_out)
        state[_S_M2] = apply_out[_A_M2]
        state[_S_M3] = apply_out[_A_M3]
        state[_S_T] += apply_out[_A_TADV]
        state[_S_CUMCLAMP] += apply_out[_A_CLAMP]
        rounds += 1
        if fault == 1:
            status = _ST_CLAMP_FAULT
            break
        # shrink the active box while its outermost row+column are empty
        while box > 1:
            empty = True
            for q in range(box + 1):
                if n[box, q] != 0.0 or n[q, box] != 0.0:
                    empty = False
                    break
            if empty:
                box -= 1
            else:
                break
        if rnd % stride == 0 and nsamples < samples.shape[0]:
            samples[nsamples, 0] = rnd
            samples[nsamples, 1] = state[_S_T]
            samples[nsamples, 2] = a
            samples[nsamples, 3] = b
            samples[nsamples, 4] = apply_out[_A_DT]
            samples[nsamples, 5] = state[_S_M2]
            samples[nsamples, 6] = state[_S_M3]
            samples[nsamples, 7] = apply_out[_A_M1]
            samples[nsamples, 8] = rho
            samples[nsamples, 9] = live
            samples[nsamples, 10] = residual
            nsamples += 1
        if t_stop > 0.0 and state[_S_T] >= t_stop:
            status = _ST_TSTOP
            break
    boxarr[0] = box
    return status, rounds, nsamples


def advance_round(
    s: SpectrumState,
    cell: tuple[int, int],
    cfg: OdeConfig,
    polarity: PolarityRule,
) -> tuple[SpectrumState, RoundReport]:
    """Advance one round on the unordered pair {cell}; returns a new state.

    dt = min(cfg.delta, combined pair mass).  Requires rho < 1 - rho_guard
    and positive pair mass; raises NumericFaultError if the update drives
    any density below -clamp_eps.
    """
    a, b = cell
    h = s.h
    if not (0 <= a <= h and 0 <= b <= h):
        raise ValueError(f"cell {cell} outside grid of h={h}")
    if s.n[a, b] + (s.n[b, a] if a != b else 0.0) <= 0.0:
        raise ValueError(f"pair {{{a},{b}}} has no mass")
    sigma = s.sigma()
    if sigma <= 0.0:
        raise ValueError("no live clause mass")
    rho = malthus_rho(s)
    if rho >= 1.0 - cfg.rho_guard:
        raise ValueError(f"rho={rho} beyond guard; round would be invalid")
    residual = s.mass_residual()
    n = s.n.copy()
    clamp_eps = cfg.resolved_clamp_eps()
    metrics = np.zeros(7)
    _round_metrics(n, h, h, cfg.resolved_mass_floor(), *_grids_any(h), metrics)
    apply_out = np.zeros(6)
    fault = _round_apply(
        n, h, h, s.m2, s.m3, a, b, int(polarity), cfg.delta, clamp_eps,
        sigma, rho, metrics[_R_V], metrics[_R_W], apply_out,
    )
    if fault:
        raise NumericFaultError(
            f"density fell below -clamp_eps={-clamp_eps} in round on {cell}"
        )
    new = SpectrumState(n=n, m3=apply_out[_A_M3], m2=apply_out[_A_M2], m1=0.0,
                        t=s.t + apply_out[_A_TADV])
    report = RoundReport(
        round_index=0,
        cell=(a, b),
        dt=float(apply_out[_A_DT]),
        rho=rho,
        m1=float(apply_out[_A_M1]),
        mass_balance_residual=residual,
        t=new.t,
        m2=new.m2,
        m3=new.m3,
        total_var_mass=new.live_mass(),
    )
    return new, report


_GRID_CACHE: dict[tuple[int, SelectionRule], tuple[np.ndarray, np.ndarray]] = {}


def _grids(h: int, rule: SelectionRule) -> tuple[np.ndarray, np.ndarray]:
    key = (h, rule)
    got = _GRID_CACHE.get(key)
    if got is None:
        got = score_grids(h, rule)
        _GRID_CACHE[key] = got
    return got


def _grids_any(h: int) -> tuple[np.ndarray, np.ndarray]:
    return _grids(h, SelectionRule.MAXDIFF_MAXSUM)


def run_trajectory(
    c: float,
    cfg: OdeConfig,
    rule: SelectionRule,
    polarity: PolarityRule,
    sample_stride: int = 4096,
    snapshot_ts: tuple[float, ...] = (),
    chunk: int = 65536,
) -> Trajectory:
    """Evolve the spectrum from the random-formula initial condition.

    Rounds repeat until the endgame predicate holds (EndgameReached), the
    branching factor reaches the guard (RhoBlowup), no selectable mass
    remains (MassExhausted), or the round cap is hit (MaxRounds).  Every
    `sample_stride`-th round is recorded; `snapshot_ts` requests full state
    copies at the first rounds reaching those t values.  Mass-balance and
    clamp violations raise.
    """
    if c <= 0:
        raise ValueError("density must be positive")
    s = init_spectrum(c, cfg.h)
    pure_sc, rule_sc = _grids(cfg.h, rule)
    state = np.zeros(5)
    state[_S_M2] = s.m2
    state[_S_M3] = s.m3
    boxarr = np.array([cfg.h], dtype=np.int64)
    samples_buf = np.zeros((max(4, chunk // sample_stride + 2), 11))
    reports: list[RoundReport] = []
    snapshots: list[tuple[float, SpectrumState]] = []
    pending_ts = sorted(snapshot_ts)
    while pending_ts and pending_ts[0] <= 0.0:
        snapshots.append((0.0, s.copy()))
        pending_ts.pop(0)
    max_rounds = cfg.auto_max_rounds()
    use_default_endgame = 1 if cfg.endgame is None else 0
    rounds = 0
    status = _ST_CHUNK
    clamp_eps = cfg.resolved_clamp_eps()
    mass_floor = cfg.resolved_mass_floor()
    while True:
        t_stop = pending_ts[0] if pending_ts else -1.0
        status, done, nsamp = _trajectory_chunk(
            s.n, state, boxarr, cfg.h, cfg.delta, clamp_eps,
            cfg.rho_guard, cfg.end_mass, mass_floor, cfg.mass_tol0,
            cfg.mass_tol_kappa, int(polarity), pure_sc, rule_sc,
            use_default_endgame, t_stop, rounds, max_rounds, chunk,
            sample_stride, samples_buf,
        )
        rounds += done
        for r in range(nsamp):
            row = samples_buf[r]
            reports.append(
                RoundReport(
                    round_index=int(row[0]), cell=(int(row[2]), int(row[3])),
                    dt=row[4], rho=row[8], m1=row[7],
                    mass_balance_residual=row[10], t=row[1], m2=row[5],
                    m3=row[6], total_var_mass=row[9],
                )
            )
        if status == _ST_TSTOP:
            s.m2, s.m3, s.t = state[_S_M2], state[_S_M3], state[_S_T]
            snapshots.append((s.t, s.copy()))
            pending_ts.pop(0)
            continue
        if status == _ST_CHUNK:
            if cfg.endgame is not None:
                s.m2, s.m3, s.t = state[_S_M2], state[_S_M3], state[_S_T]
                if cfg.endgame(s.live_mass(), s.m2, s.m3, s.t):
                    status = _ST_ENDGAME
                    break
            continue
        break

    s.m2, s.m3, s.t = state[_S_M2], state[_S_M3], state[_S_T]
    if status == _ST_MONITOR_FAULT:
        raise MassBalanceError(
            f"round {rounds}: residual {s.mass_residual():.3e} beyond bound "
            f"(tail {s.tail_mass():.3e})"
        )
    if status == _ST_CLAMP_FAULT:
        raise NumericFaultError(f"round {rounds}: density below -clamp_eps")
    term = _STATUS_NAMES.get(status, TERM_MAX_ROUNDS)
    reports.append(
        RoundReport(
            round_index=rounds, cell=(-1, -1), dt=0.0,
            rho=state[_S_MAXRHO], m1=0.0,
            mass_balance_residual=s.mass_residual(), t=s.t, m2=s.m2, m3=s.m3,
            total_var_mass=s.live_mass(),
        )
    )
    return Trajectory(
        c=c, cfg=cfg, rule=rule, polarity=polarity, termination=term,
        rounds=rounds, max_rho=float(state[_S_MAXRHO]), final_state=s,
        reports=reports, snapshots=snapshots,
    )


def trajectory_csv_lines(traj: Trajectory):
    """Yield the CSV header and one line per sampled round (17 sig. digits)."""
    yield CSV_HEADER
    for r in traj.reports:
        yield (
            f"{r.round_index},{r.t:.17g},{r.cell[0]},{r.cell[1]},"
            f"{r.dt:.17g},{r.m2:.17g},{r.m3:.17g},{r.m1:.17g},{r.rho:.17g},"
            f"{r.total_var_mass:.17g},{r.mass_balance_residual:.17g}"
        )

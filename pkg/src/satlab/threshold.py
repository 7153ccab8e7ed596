"""Bisection search for the largest density the spectrum evolution survives.

A probe runs one trajectory and reads off success (EndgameReached) or
failure.  Probes may run at a coarser step than the configured delta; the
final bracket endpoints are then re-confirmed at the configured delta, and
a confirmation flip aborts with a diagnostic instead of silently reporting
a resolution-dependent number.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .ode import OdeConfig, Trajectory, run_trajectory, TERM_ENDGAME
from .rules import (
    POLARITY_NAMES,
    RULE_NAMES,
    PolarityRule,
    SelectionRule,
)

__all__ = [
    "BracketError",
    "ProbeRecord",
    "ThresholdResult",
    "trajectory_succeeds",
    "bisect_threshold",
    "compare_rules",
    "format_rule_table",
]


class BracketError(RuntimeError):
    """Bracket precondition violated or probe verdicts non-monotone."""


@dataclass
class ProbeRecord:
    c: float
    delta: float
    termination: str
    rounds: int
    max_rho: float

    @property
    def succeeded(self) -> bool:
        return self.termination == TERM_ENDGAME


@dataclass
class ThresholdResult:
    rule: SelectionRule
    polarity: PolarityRule
    c_star: float
    bracket: tuple[float, float]
    tolerance: float
    cfg: OdeConfig
    probes: list[ProbeRecord] = field(default_factory=list)
    confirmed: bool = False

    def to_json_dict(self) -> dict:
        cfg = asdict(self.cfg)
        cfg["endgame"] = None if self.cfg.endgame is None else repr(self.cfg.endgame)
        return {
            "rule": RULE_NAMES[self.rule],
            "polarity": POLARITY_NAMES[self.polarity],
            "c_star": self.c_star,
            "bracket_lo": self.bracket[0],
            "bracket_hi": self.bracket[1],
            "tolerance": self.tolerance,
            "confirmed": self.confirmed,
            "cfg": cfg,
            "probes": [asdict(p) for p in self.probes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def _probe(
    c: float,
    cfg: OdeConfig,
    rule: SelectionRule,
    polarity: PolarityRule,
    delta: float,
) -> ProbeRecord:
    probe_cfg = OdeConfig(
        h=cfg.h, delta=delta, clamp_eps=cfg.clamp_eps, rho_guard=cfg.rho_guard,
        end_mass=cfg.end_mass, endgame=cfg.endgame, mass_floor=cfg.mass_floor,
        mass_tol0=cfg.mass_tol0, mass_tol_kappa=cfg.mass_tol_kappa,
        max_rounds=cfg.max_rounds,
    )
    traj = run_trajectory(c, probe_cfg, rule, polarity, sample_stride=1 << 30)
    return ProbeRecord(
        c=c, delta=delta, termination=traj.termination,
        rounds=traj.rounds, max_rho=traj.max_rho,
    )


def trajectory_succeeds(
    c: float, cfg: OdeConfig, rule: SelectionRule, polarity: PolarityRule
) -> bool:
    """True iff the trajectory at density c reaches the endgame."""
    return _probe(c, cfg, rule, polarity, cfg.delta).succeeded


def bisect_threshold(
    rule: SelectionRule,
    polarity: PolarityRule,
    cfg: OdeConfig,
    lo: float,
    hi: float,
    tol: float,
    probe_delta: float | None = None,
    confirm: bool = True,
) -> ThresholdResult:
    """Bisect [lo, hi] down to width <= tol; lo must succeed and hi fail.

    Interior probes run at `probe_delta` (default: the coarser of cfg.delta
    and 1e-5); with confirm=True the final endpoints are re-probed at
    cfg.delta and a flipped verdict raises BracketError.  c_star is the
    bracket midpoint, so |c_star - threshold| <= tol.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if probe_delta is None:
        probe_delta = max(cfg.delta, 1e-5)
    probes: list[ProbeRecord] = []

    def check(c: float, delta: float) -> bool:
        rec = _probe(c, cfg, rule, polarity, delta)
        probes.append(rec)
        return rec.succeeded

    if not check(lo, probe_delta):
        raise BracketError(f"lower bracket c={lo} already fails")
    if check(hi, probe_delta):
        raise BracketError(f"upper bracket c={hi} already succeeds")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if check(mid, probe_delta):
            lo = mid
        else:
            hi = mid
    confirmed = False
    if confirm and probe_delta != cfg.delta:
        ok_lo = check(lo, cfg.delta)
        ok_hi = check(hi, cfg.delta)
        if not ok_lo or ok_hi:
            raise BracketError(
                f"confirmation at delta={cfg.delta} flipped a verdict "
                f"(lo={lo}:{ok_lo}, hi={hi}:{ok_hi}); probe results are "
                "resolution-dependent near this density"
            )
        confirmed = True
    elif confirm:
        confirmed = True
    return ThresholdResult(
        rule=rule, polarity=polarity, c_star=0.5 * (lo + hi),
        bracket=(lo, hi), tolerance=tol, cfg=cfg, probes=probes,
        confirmed=confirmed,
    )


def compare_rules(
    cfg: OdeConfig,
    polarity: PolarityRule = PolarityRule.MAJORITY,
    lo: float = 3.0,
    hi: float = 4.0,
    tol: float = 0.005,
    probe_delta: float | None = None,
    confirm: bool = True,
    rules: tuple[SelectionRule, ...] = tuple(SelectionRule),
) -> list[ThresholdResult]:
    """Bisect every rule with identical settings; ranked best-first."""
    results = [
        bisect_threshold(rule, polarity, cfg, lo, hi, tol,
                         probe_delta=probe_delta, confirm=confirm)
        for rule in rules
    ]
    results.sort(key=lambda r: r.c_star, reverse=True)
    return results


def format_rule_table(results: list[ThresholdResult]) -> str:
    lines = [f"{'rule':<16} {'c*':>8} {'bracket':>19} {'probes':>7}"]
    for r in results:
        br = f"[{r.bracket[0]:.4f},{r.bracket[1]:.4f}]"
        lines.append(
            f"{RULE_NAMES[r.rule]:<16} {r.c_star:>8.4f} {br:>19} {len(r.probes):>7}"
        )
    return "\n".join(lines)

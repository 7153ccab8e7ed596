"""Bisection mechanics on real (coarse-step) trajectories."""

import json

import pytest

from satlab.ode import OdeConfig
from satlab.rules import PolarityRule, SelectionRule
from satlab.threshold import (
    BracketError,
    bisect_threshold,
    compare_rules,
    format_rule_table,
    trajectory_succeeds,
)

COARSE = OdeConfig(delta=1e-4)
RULE = SelectionRule.MAXDIFF_MAXSUM
MAJ = PolarityRule.MAJORITY


class TestTrajectorySucceeds:
    def test_far_below_any_bound(self):
        assert trajectory_succeeds(1.0, COARSE, RULE, MAJ)

    @pytest.mark.parametrize("rule", list(SelectionRule))
    def test_above_unsatisfiability_bound_fails(self, rule):
        # 4.6 lies above the best known unsatisfiability bound 4.596: no
        # sound success predicate may fire there.
        assert not trajectory_succeeds(4.6, COARSE, rule, MAJ)

    def test_monotone_verdicts_on_grid(self):
        verdicts = [
            trajectory_succeeds(3.0 + 0.1 * k, COARSE, RULE, MAJ)
            for k in range(11)
        ]
        # all successes precede all failures
        flips = sum(1 for a, b in zip(verdicts, verdicts[1:]) if a != b)
        assert flips == 1
        assert verdicts[0] is True and verdicts[-1] is False


class TestBisect:
    def test_coarse_bisection_brackets_threshold(self):
        res = bisect_threshold(RULE, MAJ, COARSE, lo=3.0, hi=4.0, tol=0.05,
                               probe_delta=1e-4)
        assert res.bracket[0] < res.c_star < res.bracket[1]
        assert res.bracket[1] - res.bracket[0] <= 2 * res.tolerance
        assert 3.3 <= res.c_star <= 3.7
        assert res.confirmed

    def test_probes_logged_with_bracket_invariant(self):
        res = bisect_threshold(RULE, MAJ, COARSE, lo=3.0, hi=4.0, tol=0.1,
                               probe_delta=1e-4)
        for p in res.probes:
            if p.c <= res.bracket[0]:
                assert p.succeeded
            if p.c >= res.bracket[1]:
                assert not p.succeeded

    def test_invalid_bracket_low_fails(self):
        with pytest.raises(BracketError, match="already fails"):
            bisect_threshold(RULE, MAJ, COARSE, lo=4.2, hi=4.6, tol=0.1,
                             probe_delta=1e-4)

    def test_invalid_bracket_high_succeeds(self):
        with pytest.raises(BracketError, match="already succeeds"):
            bisect_threshold(RULE, MAJ, COARSE, lo=2.0, hi=2.5, tol=0.1,
                             probe_delta=1e-4)

    def test_confirmation_probes_at_configured_delta(self):
        cfg = OdeConfig(delta=5e-5)
        res = bisect_threshold(RULE, MAJ, cfg, lo=3.0, hi=4.0, tol=0.1,
                               probe_delta=2e-4)
        deltas = {p.delta for p in res.probes}
        assert deltas == {2e-4, 5e-5}
        assert res.confirmed

    def test_json_export(self):
        res = bisect_threshold(RULE, MAJ, COARSE, lo=3.0, hi=4.0, tol=0.2,
                               probe_delta=1e-4)
        d = json.loads(res.to_json())
        assert d["rule"] == "maxdiff-maxsum"
        assert d["bracket_lo"] < d["c_star"] < d["bracket_hi"]
        assert d["cfg"]["h"] == 31
        assert len(d["probes"]) >= 3


class TestCompareRules:
    def test_ranked_output(self):
        results = compare_rules(COARSE, lo=3.0, hi=4.0, tol=0.1,
                                probe_delta=1e-4)
        stars = [r.c_star for r in results]
        assert stars == sorted(stars, reverse=True)
        table = format_rule_table(results)
        assert "maxdiff-maxsum" in table and "maxmax" in table

import numpy as np
import pytest

from cvrptw import datagen, episode, net, solver
from cvrptw.model import check_feasible, parse_solomon, solution_distance


def suite_prep(name):
    return episode.PreparedInstance.build(parse_solomon(datagen.generate_text(name)))


@pytest.fixture(scope="module")
def params():
    return net.init(0)


class TestSolve:
    def test_feasible_across_classes(self, params):
        for name in ("C101", "R201", "RC108"):
            prep = suite_prep(name)
            res = solver.solve(prep, params, solver.SolveConfig(seed=1, kappa=2))
            report = check_feasible(prep.inst, res.solution)
            assert report.ok, (name, report.violations)
            assert res.solution.total_distance == pytest.approx(
                solution_distance(prep.inst, res.solution))

    def test_optimizer_never_loses_to_plain(self, params):
        """Same seed, optimizer on vs off: the portfolio keeps the better one."""
        for name in ("R103", "C205", "RC102"):
            prep = suite_prep(name)
            on = solver.solve(prep, params,
                              solver.SolveConfig(seed=4, kappa=2, use_optimizer=True))
            off = solver.solve(prep, params,
                               solver.SolveConfig(seed=4, kappa=2, use_optimizer=False))
            assert on.solution.total_distance <= off.solution.total_distance + 1e-9

    def test_deterministic(self, params):
        prep = suite_prep("R110")
        cfg = solver.SolveConfig(seed=9, kappa=2)
        a = solver.solve(prep, params, cfg)
        b = solver.solve(prep, params, cfg)
        assert a.solution == b.solution
        assert a.decisions == b.decisions

    def test_optimizer_bookkeeping(self, params):
        prep = suite_prep("C102")
        res = solver.solve(prep, params, solver.SolveConfig(seed=0, kappa=2))
        assert res.optimizer_calls > 0
        assert 0 <= res.optimizer_proven <= res.optimizer_calls
        assert res.vehicles == len(res.solution.routes)
        assert res.wall_time > 0.0

    def test_no_optimizer_skips_optimizer(self, params):
        prep = suite_prep("C102")
        res = solver.solve(prep, params,
                           solver.SolveConfig(seed=0, kappa=2, use_optimizer=False))
        assert res.optimizer_calls == 0
        assert res.construction_distance == pytest.approx(res.solution.total_distance)

    def test_max_subtour_limits_commitment(self, params):
        # committing one customer per outer decision still terminates feasibly
        prep = suite_prep("RC104")
        res = solver.solve(prep, params,
                           solver.SolveConfig(seed=2, kappa=2, max_subtour=1,
                                              use_optimizer=False))
        assert check_feasible(prep.inst, res.solution).ok


class TestPickExtras:
    def test_nearest_first_and_capped(self):
        prep = suite_prep("C103")
        state = episode.EpisodeState(prep)
        committed = (1,)
        extras = solver._pick_extras(state, committed, max_extras=2)
        assert len(extras) <= 2
        ctx = state.ctx
        own = int(ctx.cluster_of[1])
        for c in extras:
            assert int(ctx.cluster_of[c]) == own
            assert not state.served[c]
        cands = [c for c in range(1, ctx.n_customers + 1)
                 if not state.served[c] and c != 1
                 and int(ctx.cluster_of[c]) == own]
        want = sorted(cands, key=lambda c: (float(ctx.d[c, 1]), c))[:2]
        assert sorted(extras) == sorted(want)

    def test_excludes_served_and_committed(self):
        prep = suite_prep("C103")
        state = episode.EpisodeState(prep)
        episode.apply_decision(state, 0, 2)
        extras = solver._pick_extras(state, (1,), max_extras=10)
        assert 1 not in extras
        assert 2 not in extras

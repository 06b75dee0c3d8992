import numpy as np
import pytest

from rydgate.optimizer import (FAMILY_PARAMS, PENALTY, TARGETS,
                               OptimizationProblem, objective, optimize,
                               trace_csv)

from conftest import BERNSTEIN_BETA, BERNSTEIN_DELTA0, SINUSOIDAL_PARAMS

SIN_BOUNDS = ((0.0, 5.0),) * 3 + ((-5.0, 5.0),) * 3
BERN_BOUNDS = ((0.0, 20.0),) * 4 + ((-10.0, 10.0),)


@pytest.fixture
def strict_problem(physics):
    return OptimizationProblem(family="sinusoidal", bounds=SIN_BOUNDS,
                               physics=physics, target="strict_CZ")


@pytest.fixture
def corrected_problem(physics):
    return OptimizationProblem(family="bernstein", bounds=BERN_BOUNDS,
                               physics=physics,
                               target="controlled_PHASE_with_correction")


def toy_problem(physics, **kw):
    kw.setdefault("budget", 400)
    kw.setdefault("seed", 1)
    kw.setdefault("bounds", ((0.2, 2.2),))
    return OptimizationProblem(family="constant_two_level", physics=physics,
                               target="strict_CZ", **kw)


class TestObjective:
    def test_reference_smooth_pulse_scores(self, strict_problem,
                                           corrected_problem):
        e_sin = objective(np.array(SINUSOIDAL_PARAMS), strict_problem)
        assert e_sin == pytest.approx(6.4097e-8, rel=1e-3)
        e_bern = objective(np.array([*BERNSTEIN_BETA, BERNSTEIN_DELTA0]),
                           corrected_problem)
        assert e_bern < 1e-5
        assert e_bern == pytest.approx(1.2679e-7, rel=1e-2)

    def test_zero_drive_gives_identity_error(self, strict_problem):
        assert objective(np.zeros(6), strict_problem) == 0.6

    def test_out_of_bounds_is_flat_penalty(self, strict_problem):
        params = np.array(SINUSOIDAL_PARAMS)
        params[0] = 5.5
        assert objective(params, strict_problem) == PENALTY

    def test_toy_family_analytic_optimum(self, physics):
        prob = toy_problem(physics)
        assert objective(np.array([1.0]), prob) < 1e-15
        assert objective(np.array([0.5]), prob) == pytest.approx(0.25,
                                                                 abs=1e-9)

    def test_correction_target_scores_no_worse(self, physics):
        strict = OptimizationProblem(family="sinusoidal", bounds=SIN_BOUNDS,
                                     physics=physics, target="strict_CZ")
        corr = OptimizationProblem(
            family="sinusoidal", bounds=SIN_BOUNDS, physics=physics,
            target="controlled_PHASE_with_correction")
        x = np.array(SINUSOIDAL_PARAMS) * 1.02
        assert objective(x, corr) <= objective(x, strict) + 1e-15


class TestOptimize:
    def test_toy_converges_to_analytic_optimum(self, physics):
        rep = optimize(toy_problem(physics, stop_below=1e-12))
        assert rep.best_params[0] == pytest.approx(1.0, abs=1e-4)
        assert rep.best_error <= 1e-12
        assert not rep.budget_exhausted
        assert rep.n_evaluations < 400

    def test_exhausts_budget_without_stop_threshold(self, physics):
        rep = optimize(toy_problem(physics, budget=60))
        assert rep.budget_exhausted
        assert rep.n_evaluations == 60

    def test_same_seed_reproducible(self, physics):
        a = optimize(toy_problem(physics, budget=80))
        b = optimize(toy_problem(physics, budget=80))
        assert a == b

    def test_different_seed_changes_search_path(self, physics):
        a = optimize(toy_problem(physics, budget=80, seed=1))
        b = optimize(toy_problem(physics, budget=80, seed=2))
        assert a.trace != b.trace

    def test_trace_is_running_minimum(self, physics):
        rep = optimize(toy_problem(physics, budget=120))
        trace = np.asarray(rep.trace)
        assert trace.shape == (rep.n_evaluations,)
        assert np.all(np.diff(trace) <= 0.0 + 1e-18)
        assert trace[-1] == rep.best_error

    def test_warm_start_never_loses_to_seed_point(self, physics,
                                                  corrected_problem):
        x0 = np.array([*BERNSTEIN_BETA, BERNSTEIN_DELTA0])
        start = objective(x0, corrected_problem)
        prob = OptimizationProblem(
            family="bernstein", bounds=BERN_BOUNDS,
            physics=corrected_problem.physics,
            target="controlled_PHASE_with_correction", budget=40)
        rep = optimize(prob, x0=x0)
        assert rep.best_error <= start + 1e-15

    def test_best_params_within_bounds(self, physics):
        rep = optimize(toy_problem(physics, budget=100))
        assert 0.2 <= rep.best_params[0] <= 2.2


class TestValidation:
    def test_family_parameter_tables_consistent(self):
        assert set(FAMILY_PARAMS) == {"sinusoidal", "bernstein",
                                      "constant_two_level"}
        assert len(TARGETS) == 2

    def test_rejects_unknown_family(self, physics):
        with pytest.raises(ValueError):
            OptimizationProblem(family="chirped", bounds=((0, 1),),
                                physics=physics, target="strict_CZ")

    def test_rejects_unknown_target(self, physics):
        with pytest.raises(ValueError):
            OptimizationProblem(family="sinusoidal", bounds=SIN_BOUNDS,
                                physics=physics, target="SWAP")

    def test_rejects_bounds_arity_mismatch(self, physics):
        with pytest.raises(ValueError):
            OptimizationProblem(family="sinusoidal", bounds=((0, 1),) * 4,
                                physics=physics, target="strict_CZ")

    def test_rejects_inverted_bounds(self, physics):
        with pytest.raises(ValueError):
            toy_problem(physics, bounds=((2.2, 0.2),))

    def test_rejects_nonpositive_budget(self, physics):
        with pytest.raises(ValueError):
            toy_problem(physics, budget=0)


class TestTraceCsv:
    def test_format(self, tmp_path, physics):
        rep = optimize(toy_problem(physics, budget=50))
        path = tmp_path / "trace.csv"
        trace_csv(rep, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "eval,best_error"
        assert len(lines) == 51
        assert lines[1].split(",")[0] == "1"

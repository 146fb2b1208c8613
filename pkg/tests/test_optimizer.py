import itertools

import numpy as np
import pytest

from oracles import decide_by_truth_table
from shapcraft import (
    DataPoint,
    OptimizerConfig,
    TaskSpec,
    decide,
    run_optimization,
    subsample,
    update_replay,
)
from shapcraft.mocks import GOOD_MARKER, scenario_backend, scenario_points
from shapcraft.optimizer import Decision, ReplayBuffer, RunLog

from conftest import batch_of

SMALL = dict(
    n_initial=8, subsample_size=20, n_iterations=10, n_candidates=6, replay_size=5, n_permutations=2
)


def small_task() -> TaskSpec:
    return TaskSpec(
        instruction="Classify the sentence as positive or negative. Answer with the label only.",
        labels=("negative", "positive"),
    )


def small_dataset(n=40):
    return tuple(
        DataPoint(id=str(i + 1), input=r["input"], gold=r["label"])
        for i, r in enumerate(scenario_points(n))
    )


def run_scenario(task=None, dataset=None, **overrides):
    task = task or small_task()
    dataset = dataset if dataset is not None else small_dataset()
    config = OptimizerConfig(**{**SMALL, **overrides})
    backend = scenario_backend(task)
    examples, log = run_optimization(
        config,
        dataset,
        task,
        proposer=backend.proposer,
        improver=backend.improver,
        evaluator=backend.evaluator,
    )
    return examples, log, backend


@pytest.fixture(scope="module")
def default_run():
    return run_scenario()


class TestDecide:
    def test_all_equal_prefers_replace(self):
        assert decide(0.70, 0.70, 0.70, set_size=5) == "replace"

    def test_drop_branch(self):
        assert decide(0.70, 0.80, 0.75, set_size=5) == "drop"

    def test_singleton_never_drops(self):
        assert decide(0.70, 0.80, 0.75, set_size=1) == "keep"

    def test_no_candidates_skips_replace(self):
        assert decide(0.5, 0.6, None, set_size=3) == "drop"
        assert decide(0.6, 0.5, None, set_size=3) == "keep"

    def test_exhaustive_truth_table(self):
        grid = (0.0, 0.5, 1.0)
        for a_base, a_drop, a_best in itertools.product(grid, repeat=3):
            for size in (1, 5):
                expected = decide_by_truth_table(a_base, a_drop, a_best, size)
                assert decide(a_base, a_drop, a_best, size) == expected, (
                    a_base,
                    a_drop,
                    a_best,
                    size,
                )

    def test_bad_size_rejected(self):
        with pytest.raises(ValueError):
            decide(0.1, 0.1, 0.1, set_size=0)


class TestDecisionRecord:
    def test_shape_constraints(self):
        from shapcraft.types import Example

        candidate = Example(id="c", input_text="x", target_text="y")
        Decision("replace", 1, candidate, (0.1, 0.2, 0.3))
        Decision("drop", 1, None, (0.1, 0.2, 0.3))
        Decision("keep", None, None, (0.1, 0.2, None))
        with pytest.raises(ValueError):
            Decision("replace", 1, None)
        with pytest.raises(ValueError):
            Decision("drop", None, None)
        with pytest.raises(ValueError):
            Decision("keep", 2, None)


def _points(n):
    return tuple(DataPoint(id=str(i + 1), input=f"point {i}", gold="positive") for i in range(n))


class TestSubsample:
    def test_small_dataset_clamps(self):
        batch = subsample(_points(3), 70, np.random.default_rng(0))
        assert sorted(batch.ids()) == ["1", "2", "3"]

    def test_full_size_is_permutation_of_dataset(self):
        points = _points(10)
        batch = subsample(points, 10, np.random.default_rng(1))
        assert sorted(batch.ids()) == sorted(p.id for p in points)

    def test_without_replacement_and_deterministic(self):
        points = _points(50)
        a = subsample(points, 20, np.random.default_rng(7))
        b = subsample(points, 20, np.random.default_rng(7))
        assert a.ids() == b.ids()
        assert len(set(a.ids())) == 20

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            subsample((), 5, np.random.default_rng(0))


class TestReplayBuffer:
    def test_sampling_five_from_seventy(self):
        batch = batch_of(_points(70))
        buffer = update_replay(ReplayBuffer(), batch, 5, np.random.default_rng(0))
        assert len(buffer) == 5

    def test_dedup_on_resampling(self):
        batch = batch_of(_points(6))
        rng = np.random.default_rng(0)
        buffer = update_replay(ReplayBuffer(), batch, 6, rng)
        again = update_replay(buffer, batch, 6, rng)
        assert len(again) == 6

    def test_zero_size_is_noop(self):
        batch = batch_of(_points(5))
        buffer = ReplayBuffer(points=batch.points[:2])
        assert update_replay(buffer, batch, 0, np.random.default_rng(0)) is buffer


class TestRunOptimization:
    def test_scenario_reaches_perfect_utility(self, default_run):
        examples, log, _ = default_run
        assert log.final_utility == 1.0
        assert all(GOOD_MARKER in e.input_text for e in examples)
        assert len(log.records) == SMALL["n_iterations"]

    def test_non_regression_every_iteration(self, default_run):
        _, log, _ = default_run
        for record in log.records:
            a_base = record.decision.scores[0]
            assert record.utility_after >= a_base - 1e-12

    def test_logged_utilities_stay_in_unit_interval(self, default_run):
        _, log, _ = default_run
        for record in log.records:
            assert 0.0 <= record.utility_after <= 1.0
            for score in record.decision.scores:
                if score is not None:
                    assert 0.0 <= score <= 1.0

    def test_set_size_bounds(self, default_run):
        examples, log, _ = default_run
        assert 1 <= len(examples) <= SMALL["n_initial"]
        for record in log.records:
            if record.shapley is not None:
                assert 1 <= len(record.shapley.values) <= SMALL["n_initial"]

    def test_batch_ids_stay_within_subsampled_points(self, default_run):
        """Replay points can only come from earlier subsamples."""
        from shapcraft.optimizer import SUBSAMPLE_STREAM, rng_stream

        _, log, _ = default_run
        dataset = small_dataset()
        seen_fresh: set[str] = set()
        for record in log.records:
            fresh = subsample(
                dataset, SMALL["subsample_size"], rng_stream(0, SUBSAMPLE_STREAM, record.iteration)
            )
            seen_fresh |= set(fresh.ids())
            assert set(record.batch_ids) <= seen_fresh

    def test_initial_only_returns_proposer_output_verbatim(self):
        examples, log, backend = run_scenario(initial_only=True)
        assert len(log.records) == 0
        assert log.final_utility is None
        direct = backend.proposer.complete("Create exactly 8 training examples please")
        from shapcraft.generation import parse_examples

        pairs = parse_examples(direct, labels=small_task().labels)
        assert [(e.input_text, e.target_text) for e in examples] == pairs

    def test_full_run_determinism_across_worker_counts(self):
        from shapcraft.io import runlog_lines

        task = small_task()
        dataset = small_dataset()
        lines = []
        for workers in (1, 4):
            backend = scenario_backend(task, evaluator_concurrency=workers)
            _, log = run_optimization(
                OptimizerConfig(**SMALL),
                dataset,
                task,
                proposer=backend.proposer,
                improver=backend.improver,
                evaluator=backend.evaluator,
            )
            lines.append(runlog_lines(log))
        assert lines[0] == lines[1]

    def test_loo_selector_also_converges(self):
        _, log, _ = run_scenario(selector="loo")
        assert log.final_utility == 1.0
        assert all(record.shapley is None for record in log.records)

    def test_in_place_insertion_also_converges(self):
        _, log, _ = run_scenario(insert_position="in_place")
        assert log.final_utility == 1.0
        assert any(r.decision.kind == "replace" for r in log.records)

    def test_record_sink_receives_records_in_order(self):
        task = small_task()
        backend = scenario_backend(task)
        sunk = []
        _, log = run_optimization(
            OptimizerConfig(**{**SMALL, "n_iterations": 3}),
            small_dataset(),
            task,
            proposer=backend.proposer,
            improver=backend.improver,
            evaluator=backend.evaluator,
            record_sink=sunk.append,
        )
        assert sunk == log.records

    def test_empty_dataset_rejected(self):
        task = small_task()
        backend = scenario_backend(task)
        with pytest.raises(ValueError):
            run_optimization(
                OptimizerConfig(),
                (),
                task,
                proposer=backend.proposer,
                improver=backend.improver,
                evaluator=backend.evaluator,
            )


class TestConfig:
    def test_defaults_match_standard_setting(self):
        config = OptimizerConfig()
        assert (
            config.n_initial,
            config.subsample_size,
            config.n_iterations,
            config.n_candidates,
            config.replay_size,
            config.n_permutations,
        ) == (16, 70, 15, 10, 5, 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(n_initial=0)
        with pytest.raises(ValueError):
            OptimizerConfig(replay_size=80, subsample_size=70)
        with pytest.raises(ValueError):
            OptimizerConfig(selector="random")
        with pytest.raises(ValueError):
            OptimizerConfig(seed=-1)


def test_runlog_decision_counts():
    _, log, _ = run_scenario(n_iterations=4)
    counts = log.decision_counts()
    assert sum(counts.values()) == 4
    assert isinstance(log, RunLog)

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from mada.design import (
    Candidate,
    DesignSpace,
    ExternalPolicy,
    NonFiniteObjective,
    PolicyUnavailable,
    StudyConfig,
    StudyDriver,
    lhs_sample,
    load_config,
    rank_candidates,
    replay_trace,
    run_study,
    spline_space,
)
from mada.design.policies import scripted_proposals, trust_region_proposals
from mada.design.trace import read_trace

EXTPOLICY = [sys.executable, str(Path(__file__).with_name("extpolicy.py"))]

BOX = DesignSpace(lower=(0.0, 0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0, 1.0))


def quadratic_evaluator(designs):
    return [sum((v - 0.3) ** 2 for v in d) for d in designs]


def make_config(**overrides):
    base = dict(space=BOX, direction="minimize", rounds=3, samples_per_round=6,
                seed=11, policy="trust_region")
    base.update(overrides)
    return StudyConfig(**base)


class TestSpaceAndConfig:
    def test_space_validation(self):
        with pytest.raises(ValueError):
            DesignSpace(lower=(0.0,), upper=(0.0,))
        with pytest.raises(ValueError):
            DesignSpace(lower=(0.0, 0.0), upper=(1.0,))
        with pytest.raises(ValueError):
            DesignSpace(lower=(), upper=())

    def test_clip_and_contains(self):
        space = DesignSpace(lower=(0.0, -1.0), upper=(1.0, 1.0))
        assert space.clip([2.0, -5.0]) == [1.0, -1.0]
        assert space.contains([0.5, 0.0])
        assert not space.contains([1.5, 0.0])

    def test_config_roundtrip(self, tmp_path):
        config = make_config(approval_required=True)
        path = tmp_path / "study.json"
        config.save(path)
        back = load_config(path)
        assert back.to_dict() == config.to_dict()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            make_config(direction="sideways")
        with pytest.raises(ValueError):
            make_config(policy="oracle")
        with pytest.raises(ValueError):
            make_config(rounds=0)
        with pytest.raises(ValueError):
            make_config(trust_region_shrink=1.0)
        with pytest.raises(ValueError):
            make_config(backend={"kind": "quantum"})
        with pytest.raises(ValueError):
            make_config(policy="external")

    def test_config_rejects_unknown_keys(self):
        obj = make_config().to_dict()
        obj["turbo"] = True
        with pytest.raises(ValueError):
            StudyConfig.from_dict(obj)


class TestLhs:
    def test_stratification_spot(self):
        space = DesignSpace(lower=(0.0, -2.0, 5.0), upper=(1.0, 2.0, 6.0))
        points = lhs_sample(space, 7, seed=3)
        for d in range(3):
            strata = sorted(
                int((p[d] - space.lower[d]) / (space.upper[d] - space.lower[d]) * 7)
                for p in points
            )
            assert strata == list(range(7))

    def test_determinism(self):
        points_a = lhs_sample(BOX, 16, seed=9)
        points_b = lhs_sample(BOX, 16, seed=9)
        assert points_a == points_b
        assert lhs_sample(BOX, 16, seed=10) != points_a

    def test_single_sample_in_bounds(self):
        space = DesignSpace(lower=(3.0,), upper=(4.0,))
        (point,) = lhs_sample(space, 1, seed=0)
        assert 3.0 <= point[0] < 4.0

    def test_bad_n(self):
        with pytest.raises(ValueError):
            lhs_sample(BOX, 0, seed=1)


class TestRanking:
    def mk(self, objective, idx):
        return Candidate(design=[0.0], objective=objective, round=1,
                         eval_index=idx, provenance="lhs")

    def test_minimize_order(self):
        ranked = rank_candidates([self.mk(3.0, 0), self.mk(1.0, 1), self.mk(2.0, 2)],
                                 "minimize")
        assert [c.objective for c in ranked] == [1.0, 2.0, 3.0]

    def test_maximize_order(self):
        ranked = rank_candidates([self.mk(3.0, 0), self.mk(1.0, 1)], "maximize")
        assert ranked[0].objective == 3.0

    def test_ties_break_by_eval_index(self):
        ranked = rank_candidates([self.mk(1.0, 5), self.mk(1.0, 2)], "minimize")
        assert ranked[0].eval_index == 2

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteObjective) as err:
            rank_candidates([self.mk(math.nan, 7)], "minimize")
        assert err.value.eval_index == 7
        with pytest.raises(NonFiniteObjective):
            rank_candidates([self.mk(None, 0)], "minimize")


class TestScriptedPolicy:
    def test_round1_required_patterns(self):
        batch = scripted_proposals(1, 10, spline_space(), None, seed=0)
        assert batch.designs[0] == pytest.approx([-0.22, 0.22, -0.22, 0.22], abs=1e-15)
        assert batch.designs[1] == [0.25, 0.25, 0.25, 0.25]
        assert batch.designs[2] == [0.0, 0.0, 0.0, 0.0]
        assert all(p == "policy" for p in batch.provenances)

    def test_round2_saturated_alternations(self):
        batch = scripted_proposals(2, 8, spline_space(), None, seed=0)
        assert batch.designs[0] == [-0.25, 0.25, -0.25, 0.25]
        assert batch.designs[1] == [0.25, -0.25, 0.25, -0.25]

    def test_round3_perturbs_incumbent(self):
        incumbent = [0.0, 0.0, 0.0, 0.0]
        batch = scripted_proposals(3, 12, spline_space(), incumbent, seed=4)
        assert len(batch.designs) == 12
        for design in batch.designs:
            for v in design:
                assert 0.01 <= abs(v) <= 0.03

    def test_padding_uses_lhs(self):
        batch = scripted_proposals(1, 14, spline_space(), None, seed=2)
        assert len(batch.designs) == 14
        assert batch.provenances[:10] == ["policy"] * 10
        assert batch.provenances[10:] == ["lhs"] * 4

    def test_deterministic(self):
        a = scripted_proposals(3, 9, spline_space(), [0.1, 0.1, -0.1, 0.0], seed=7)
        b = scripted_proposals(3, 9, spline_space(), [0.1, 0.1, -0.1, 0.0], seed=7)
        assert a.designs == b.designs


class TestTrustRegionPolicy:
    def test_round1_full_space(self):
        batch = trust_region_proposals(1, 5, BOX, None, shrink=0.5, seed=3)
        assert batch.provenances == ["lhs"] * 5

    def test_shrinks_around_incumbent(self):
        incumbent = [0.5, 0.5, 0.5, 0.5]
        batch = trust_region_proposals(3, 20, BOX, incumbent, shrink=0.5, seed=3)
        half = 0.5 ** 2 * 0.5
        for design in batch.designs:
            for v in design:
                assert 0.5 - half <= v <= 0.5 + half

    def test_region_clipped_to_bounds(self):
        incumbent = [1.0, 0.0, 1.0, 0.0]
        batch = trust_region_proposals(2, 30, BOX, incumbent, shrink=0.5, seed=8)
        for design in batch.designs:
            assert BOX.contains(design)


class TestExternalPolicy:
    def test_proposals_from_stub_process(self):
        policy = ExternalPolicy(tuple(EXTPOLICY))
        try:
            batch = policy.propose(1, 3, BOX, None, [])
            assert len(batch.designs) == 3
            assert batch.note == "diagonal sweep, round 1"
            assert all(BOX.contains(d) for d in batch.designs)
            again = policy.propose(2, 2, BOX, [0.5] * 4, [{"round": 1}])
            assert len(again.designs) == 2
        finally:
            policy.close()

    def test_missing_binary(self):
        policy = ExternalPolicy(("definitely-not-a-real-policy-binary",))
        with pytest.raises(PolicyUnavailable):
            policy.propose(1, 2, BOX, None, [])

    def test_study_with_external_policy(self, tmp_path):
        config = make_config(policy="external", policy_command=tuple(EXTPOLICY),
                             rounds=2, samples_per_round=4)
        result = run_study(config, quadratic_evaluator, study_name="ext",
                           out_dir=tmp_path)
        assert result.eval_count == 8
        assert result.incumbent is not None


class TestStudyLoop:
    def test_quadratic_improves(self, tmp_path):
        config = make_config(rounds=4, samples_per_round=8)
        result = run_study(config, quadratic_evaluator, study_name="quad",
                           out_dir=tmp_path)
        assert result.eval_count == 32
        assert result.incumbent.objective < 0.05
        bests = [r.incumbent.objective for r in result.rounds]
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))

    def test_incumbent_monotone_under_maximize(self):
        config = make_config(direction="maximize", rounds=3, samples_per_round=5)
        result = run_study(config, quadratic_evaluator, study_name="m")
        bests = [r.incumbent.objective for r in result.rounds]
        assert all(b2 >= b1 for b1, b2 in zip(bests, bests[1:]))

    def test_failed_candidates_counted_but_not_ranked(self):
        def flaky(designs):
            return [math.nan if d[0] > 0.5 else sum(d) for d in designs]

        config = make_config(rounds=1, samples_per_round=12)
        result = run_study(config, flaky, study_name="flaky")
        round1 = result.rounds[0]
        n_failed = sum(1 for c in round1.candidates if c.failed)
        assert n_failed == round1.n_failed
        assert result.eval_count == 12
        assert not result.incumbent.failed
        assert result.incumbent.design[0] <= 0.5
        failed = [c for c in round1.candidates if c.failed]
        assert failed and all(c.objective is None for c in failed)

    def test_evaluator_exception_fails_batch(self):
        def broken(designs):
            raise RuntimeError("backend down")

        config = make_config(rounds=2, samples_per_round=3)
        result = run_study(config, broken, study_name="broken")
        assert result.incumbent is None
        assert result.eval_count == 6
        assert all(c.failed for r in result.rounds for c in r.candidates)
        assert "backend down" in result.rounds[0].candidates[0].error

    def test_convergence_stops_early(self):
        config = make_config(rounds=10, samples_per_round=4, policy="scripted")
        result = run_study(config, lambda ds: [1.0] * len(ds), study_name="flat")
        assert result.stop_reason == "converged"
        assert len(result.rounds) == 3

    def test_approval_flow(self, tmp_path):
        commands = iter([
            {"action": "adjust", "lower": [0.2] * 4, "upper": [0.4] * 4},
            {"action": "stop"},
        ])
        seen = []

        def expert(summary):
            seen.append(summary)
            return next(commands)

        config = make_config(rounds=6, samples_per_round=4, approval_required=True)
        result = run_study(config, quadratic_evaluator, study_name="steered",
                           out_dir=tmp_path, expert=expert)
        assert result.stop_reason == "stopped"
        assert len(result.rounds) == 2
        assert len(seen) == 2
        for design in result.rounds[1].candidates:
            assert all(0.2 <= v <= 0.4 for v in design.design)
        kinds = [e["kind"] for e in result.events]
        assert kinds.count("expert_action") == 2

    def test_approval_requires_expert(self):
        config = make_config(approval_required=True)
        with pytest.raises(ValueError):
            run_study(config, quadratic_evaluator)

    def test_driver_matches_run_study(self):
        config = make_config(rounds=3, samples_per_round=6, seed=21)
        result = run_study(config, quadratic_evaluator, study_name="a")
        driver = StudyDriver(config)
        while not driver.finished():
            batch = driver.next_batch()
            driver.record_results(batch, quadratic_evaluator(batch.designs))
        assert driver.incumbent.design == result.incumbent.design
        assert driver.incumbent.objective == result.incumbent.objective
        assert driver.eval_count == result.eval_count

    def test_driver_guards_batch_protocol(self):
        driver = StudyDriver(make_config())
        batch = driver.next_batch()
        with pytest.raises(RuntimeError):
            driver.next_batch()
        with pytest.raises(ValueError):
            driver.record_results(batch, [1.0])


class TestTraceAndReplay:
    def run_traced(self, tmp_path, name, seed=11):
        config = make_config(rounds=3, samples_per_round=5, seed=seed)
        result = run_study(config, quadratic_evaluator, study_name=name,
                           out_dir=tmp_path)
        return result, tmp_path / f"{name}.trace.jsonl", tmp_path / f"{name}.csv"

    def test_trace_structure(self, tmp_path):
        result, trace_path, csv_path = self.run_traced(tmp_path, "s")
        events = read_trace(trace_path)
        assert events[0]["kind"] == "round_start"
        assert events[-1]["kind"] == "study_end"
        for event in events:
            assert set(event) == {"ts", "round", "kind", "payload"}
        per_round = [e for e in events if e["kind"] == "candidate_evaluated"]
        assert len(per_round) == result.eval_count
        indices = [e["payload"]["eval_index"] for e in per_round]
        assert indices == list(range(result.eval_count))

    def test_replay_reconstructs_result(self, tmp_path):
        result, trace_path, _ = self.run_traced(tmp_path, "r")
        replay = replay_trace(trace_path)
        assert replay.eval_count == result.eval_count
        assert replay.rounds_completed == len(result.rounds)
        assert replay.stop_reason == result.stop_reason
        assert replay.incumbent["design"] == result.incumbent.design
        assert replay.incumbent["objective"] == result.incumbent.objective

    def test_payload_determinism(self, tmp_path):
        _, trace_a, csv_a = self.run_traced(tmp_path / "a", "same")
        _, trace_b, csv_b = self.run_traced(tmp_path / "b", "same")

        def payload_lines(path):
            return [
                json.dumps({k: v for k, v in e.items() if k != "ts"}, sort_keys=True)
                for e in read_trace(path)
            ]

        assert payload_lines(trace_a) == payload_lines(trace_b)
        assert csv_a.read_bytes() == csv_b.read_bytes()

    def test_different_seed_changes_trace(self, tmp_path):
        _, trace_a, _ = self.run_traced(tmp_path / "a", "s", seed=1)
        _, trace_b, _ = self.run_traced(tmp_path / "b", "s", seed=2)
        payloads_a = [e["payload"] for e in read_trace(trace_a)]
        payloads_b = [e["payload"] for e in read_trace(trace_b)]
        assert payloads_a != payloads_b

    def test_csv_columns_and_monotone_best(self, tmp_path):
        result, _, csv_path = self.run_traced(tmp_path, "c")
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "run_id,eval_index,best_objective"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == result.eval_count
        bests = [float(r[2]) for r in rows]
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))
        assert all(r[0] == "c" for r in rows)

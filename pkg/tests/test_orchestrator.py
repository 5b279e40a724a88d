"""Workflow driver, agents, expert commands, and the control API."""

import json
import threading
import time
import urllib.error
import urllib.request

import pytest

from mada.design import StudyConfig, energy_space, run_study, spline_space
from mada.orchestrator import (
    EXPERT,
    LEGAL_PHASE_TRANSITIONS,
    TERMINATE,
    Agent,
    ConversationHistory,
    InvalidBounds,
    MaxTurnsExceeded,
    NoActiveStudy,
    NoEligibleAgent,
    NoPendingApproval,
    Orchestrator,
    ToolSessionDown,
    TurnFailure,
    WorkflowPhase,
    analyze_context,
    default_team,
    run_workflow,
    select_next,
    serve_control_api,
)
from mada.orchestrator.state import TurnResult


def surrogate_config(rounds=2, samples=4, seed=11, policy="trust_region", **kw):
    return StudyConfig(space=spline_space(), direction="minimize",
                       backend={"kind": "surrogate"}, rounds=rounds,
                       samples_per_round=samples, seed=seed, policy=policy, **kw)


def simulation_config(rounds=2, samples=5, seed=3, **kw):
    return StudyConfig(space=energy_space(), direction="maximize",
                       backend={"kind": "simulation", "nodes": 4,
                                "time_limit_s": 30.0},
                       rounds=rounds, samples_per_round=samples, seed=seed,
                       policy="trust_region", **kw)


def legal_step(a: str, b: str) -> bool:
    """Spec transitions plus the failure-escalation edge into AwaitingExpert."""
    if b == WorkflowPhase.AWAITING_EXPERT.value:
        return True
    return WorkflowPhase(b) in LEGAL_PHASE_TRANSITIONS[WorkflowPhase(a)]


# ----------------------------------------------------------------------
# context analyzer


class TestContextAnalyzer:
    CAPS = {"GA": ("interpret_commands",), "JMA": ("get_objective",), "IDA": ()}
    CONFIG = {"rounds": 2, "policy": "scripted"}

    def test_empty_history_pins_config_and_capabilities(self):
        summary = analyze_context(ConversationHistory(), self.CAPS, self.CONFIG)
        assert summary.messages == []
        assert summary.config == self.CONFIG
        assert summary.capabilities["GA"] == ("interpret_commands",)
        text = summary.render()
        assert "rounds" in text and "GA" in text and "IDA" in text

    def test_thirty_messages_keep_twelve_most_recent(self):
        history = ConversationHistory()
        for i in range(30):
            history.broadcast("GA", f"message number {i}")
        summary = analyze_context(history, self.CAPS, self.CONFIG)
        assert len(summary.messages) == 12
        assert [m.turn for m in summary.messages] == list(range(19, 31))
        assert summary.messages[-1].summary == "message number 29"

    def test_char_budget_drops_oldest_first(self):
        history = ConversationHistory()
        for i in range(12):
            history.broadcast("IDA", f"padding {i} " + "x" * 200)
        tight = analyze_context(history, self.CAPS, self.CONFIG, char_budget=900)
        loose = analyze_context(history, self.CAPS, self.CONFIG, char_budget=100000)
        assert len(tight.messages) < len(loose.messages)
        # survivors are the most recent ones
        kept_turns = [m.turn for m in tight.messages]
        assert kept_turns == sorted(kept_turns)
        assert kept_turns[-1] == 12
        assert len(tight) <= 900 or not tight.messages

    def test_incumbent_is_pinned(self):
        incumbent = {"objective": 0.25, "eval_index": 3}
        summary = analyze_context(ConversationHistory(), self.CAPS, self.CONFIG,
                                  incumbent=incumbent)
        assert summary.incumbent == incumbent
        assert "0.25" in summary.render()

    def test_broadcast_caps_message_length(self):
        history = ConversationHistory()
        msg = history.broadcast("JMA", "y" * 2000)
        assert len(msg.summary) == 500
        assert msg.summary.endswith("...")

    def test_turns_strictly_increase(self):
        history = ConversationHistory()
        turns = [history.broadcast("GA", f"m{i}").turn for i in range(5)]
        assert turns == [1, 2, 3, 4, 5]


# ----------------------------------------------------------------------
# next-speaker selection


class TestSelector:
    AGENTS = {"GA": object(), "JMA": object(), "IDA": object()}

    @pytest.mark.parametrize("phase,wanted", [
        (WorkflowPhase.NEED_MESH, "GA"),
        (WorkflowPhase.NEED_PROPOSALS, "IDA"),
        (WorkflowPhase.RUNS_PENDING, "JMA"),
        (WorkflowPhase.RESULTS_READY, "IDA"),
    ])
    def test_rule_map(self, phase, wanted):
        assert select_next(phase, self.AGENTS) == wanted

    def test_done_terminates(self):
        assert select_next(WorkflowPhase.DONE, self.AGENTS) == TERMINATE

    def test_awaiting_expert_yields(self):
        assert select_next(WorkflowPhase.AWAITING_EXPERT, self.AGENTS) == EXPERT

    def test_missing_agent_raises(self):
        with pytest.raises(NoEligibleAgent) as info:
            select_next(WorkflowPhase.RUNS_PENDING, {"GA": object(), "IDA": object()})
        assert info.value.wanted == "JMA"
        assert "RunsPending" in str(info.value)


# ----------------------------------------------------------------------
# full workflow runs


class TestWorkflowRuns:
    def test_surrogate_phase_trace_is_the_legal_path(self, tmp_path):
        orch = Orchestrator(surrogate_config(), study_name="phases", out_dir=tmp_path)
        try:
            orch.run()
        finally:
            orch.close()
        expected = ["NeedMesh", "NeedProposals", "RunsPending", "ResultsReady",
                    "NeedProposals", "RunsPending", "ResultsReady", "Done"]
        assert orch.phase_trace == expected
        for a, b in zip(orch.phase_trace, orch.phase_trace[1:]):
            assert legal_step(a, b), (a, b)

    def test_neutrality_trust_region(self, tmp_path):
        cfg = surrogate_config(rounds=3, samples=6, seed=42)
        direct = run_study(cfg, study_name="direct", out_dir=tmp_path / "a")
        flow = run_workflow(cfg, study_name="flow", out_dir=tmp_path / "b")
        assert flow.eval_count == direct.eval_count
        assert flow.incumbent.design == direct.incumbent.design
        assert flow.incumbent.objective == direct.incumbent.objective
        assert flow.incumbent.eval_index == direct.incumbent.eval_index
        assert flow.stop_reason == direct.stop_reason

    def test_neutrality_scripted(self):
        cfg = surrogate_config(rounds=2, samples=8, seed=1, policy="scripted")
        direct = run_study(cfg, study_name="direct")
        flow = run_workflow(cfg, study_name="flow")
        assert flow.eval_count == direct.eval_count
        assert flow.incumbent.design == direct.incumbent.design
        assert flow.incumbent.objective == direct.incumbent.objective

    def test_mesh_prologue_populates_workspace(self):
        orch = Orchestrator(surrogate_config(rounds=1))
        try:
            orch.run()
        finally:
            orch.close()
        mesh = orch._workspace.mesh
        assert mesh["verified"] is True
        assert mesh["counts"]["surfaces"] == 1
        assert "VERTEX" in mesh["graph"] and "EDGE" in mesh["graph"]
        assert mesh["template"].endswith("_script")

    def test_simulation_workflow_turn_counts(self, tmp_path):
        res = run_workflow(simulation_config(), study_name="sim",
                           out_dir=tmp_path)
        speakers = [e["payload"]["speaker"] for e in res.events
                    if e["kind"] == "agent_turn"]
        assert speakers.count("GA") == 1
        assert speakers.count("JMA") == 2
        assert speakers.count("IDA") == 4
        assert res.eval_count == 10
        evaluated = [e for e in res.events if e["kind"] == "candidate_evaluated"]
        assert all(not ev["payload"]["failed"] for ev in evaluated)
        assert res.incumbent is not None

    def test_every_history_message_fits_cap(self):
        orch = Orchestrator(surrogate_config())
        try:
            orch.run()
        finally:
            orch.close()
        assert len(orch.history) >= 7
        assert all(len(m.summary) <= 500 for m in orch.history)

    def test_broadcast_completeness(self):
        """Each turn's message is visible in the next speaker's context."""
        orch = Orchestrator(surrogate_config())
        seen = []

        def recording_selector(phase, agents, summary):
            seen.append((tuple(orch.history.messages), summary.messages))
            return select_next(phase, agents, summary)

        orch.selector = recording_selector
        try:
            orch.run()
        finally:
            orch.close()
        assert len(seen) >= 7
        for history_snapshot, visible in seen:
            assert list(visible) == list(history_snapshot[-12:])

    def test_agent_turn_events_cover_every_turn(self):
        orch = Orchestrator(surrogate_config())
        try:
            res = orch.run()
        finally:
            orch.close()
        turn_events = [e for e in res.events if e["kind"] == "agent_turn"]
        assert len(turn_events) == len(orch.history)
        for event, message in zip(turn_events, orch.history):
            assert event["payload"]["turn"] == message.turn
            assert event["payload"]["speaker"] == message.speaker
            assert legal_step(event["payload"]["phase_before"],
                              event["payload"]["phase_after"])

    def test_max_turns_exceeded(self):
        class StallingJMA(Agent):
            name = "JMA"
            role_text = "never finishes"

            def take_turn(self, ws):
                raise TurnFailure("JMA: cluster unreachable")

        cfg = surrogate_config()
        team = default_team(cfg)
        team["JMA"].close()
        team["JMA"] = StallingJMA()
        orch = Orchestrator(cfg, agents=team, max_turns=9)
        with pytest.raises(MaxTurnsExceeded):
            orch.run(expert=lambda s: {"action": "continue"})
        orch.close()


class TestFailureHandling:
    def test_single_failure_retries_same_phase(self):
        cfg = surrogate_config(rounds=1)
        team = default_team(cfg)
        inner = team["JMA"]
        fails = {"left": 1}

        class OnceFlaky(Agent):
            name = "JMA"
            role_text = inner.role_text

            def take_turn(self, ws):
                if fails["left"]:
                    fails["left"] -= 1
                    raise TurnFailure("JMA: transient tool fault")
                return inner.take_turn(ws)

        team["JMA"] = OnceFlaky()
        orch = Orchestrator(cfg, agents=team)
        try:
            res = orch.run()
        finally:
            inner.close()
            orch.close()
        assert res.stop_reason == "rounds_exhausted"
        assert res.eval_count == cfg.samples_per_round
        failures = [m for m in orch.history if "turn failed" in m.summary]
        assert len(failures) == 1
        # the phase was retried, not skipped
        assert orch.phase_trace.count("RunsPending") == 1
        jma_turns = [m for m in orch.history if m.speaker == "JMA"]
        assert len(jma_turns) == 2

    def test_double_failure_escalates_and_recovers(self):
        cfg = surrogate_config(rounds=1)
        team = default_team(cfg)
        inner = team["JMA"]
        fails = {"left": 2}

        class TwiceFlaky(Agent):
            name = "JMA"
            role_text = inner.role_text

            def take_turn(self, ws):
                if fails["left"]:
                    fails["left"] -= 1
                    raise TurnFailure("JMA: scheduler down")
                return inner.take_turn(ws)

        team["JMA"] = TwiceFlaky()
        expert_calls = []

        def expert(summary):
            expert_calls.append(summary)
            return {"action": "continue"}

        orch = Orchestrator(cfg, agents=team)
        try:
            res = orch.run(expert=expert)
        finally:
            inner.close()
            orch.close()
        assert "AwaitingExpert" in orch.phase_trace
        assert len(expert_calls) == 1
        assert "failure" in expert_calls[0]
        # round was re-proposed once, results recorded exactly once
        assert res.eval_count == cfg.samples_per_round
        assert res.stop_reason == "rounds_exhausted"

    def test_escalation_with_expert_stop_finalizes_partial(self):
        cfg = surrogate_config()

        class DeadGA(Agent):
            name = "GA"
            role_text = "broken"

            def take_turn(self, ws):
                raise TurnFailure("GA: geometry server gone")

        team = default_team(cfg)
        team["GA"].close()
        team["GA"] = DeadGA()
        res = run_workflow(cfg, agents=team, expert=lambda s: {"action": "stop"})
        assert res.stop_reason == "stopped"
        assert res.eval_count == 0
        assert res.incumbent is None

    def test_headless_escalation_degrades_to_stop(self):
        """No expert callback, nothing interactive: a blocked approval
        point must finalize instead of deadlocking."""
        cfg = surrogate_config(approval_required=True)
        res = run_workflow(cfg, study_name="headless")
        assert res.stop_reason == "stopped"
        assert len(res.rounds) == 1

    def test_closed_session_raises_tool_session_down(self):
        cfg = surrogate_config()
        team = default_team(cfg)
        team["GA"].close()
        with pytest.raises(ToolSessionDown):
            team["GA"].ensure_sessions()
        for agent in team.values():
            agent.close()

    def test_turn_timeout_counts_as_failure(self):
        cfg = surrogate_config(rounds=1)

        class SlowGA(Agent):
            name = "GA"
            role_text = "slow"

            def take_turn(self, ws):
                time.sleep(0.05)
                return TurnResult("mesh ready", WorkflowPhase.NEED_PROPOSALS)

        team = default_team(cfg)
        team["GA"].close()
        team["GA"] = SlowGA()
        orch = Orchestrator(cfg, agents=team, turn_timeout_s=0.01)
        try:
            orch.run(expert=lambda s: {"action": "continue"})
        finally:
            orch.close()
        timeouts = [m for m in orch.history if "turn limit" in m.summary]
        assert len(timeouts) == 2
        assert "AwaitingExpert" in orch.phase_trace


class TestAgentDescriptors:
    def test_default_team_descriptors(self):
        cfg = surrogate_config()
        team = default_team(cfg)
        try:
            descriptors = {name: agent.descriptor() for name, agent in team.items()}
            assert set(descriptors) == {"GA", "JMA", "IDA"}
            assert "interpret_commands" in descriptors["GA"].capabilities
            assert "verify_geometry" in descriptors["GA"].capabilities
            assert "get_objective" in descriptors["JMA"].capabilities
            assert descriptors["IDA"].capabilities == ()
            for d in descriptors.values():
                assert d.role_text
        finally:
            for agent in team.values():
                agent.close()

    def test_simulation_team_has_scheduler_tools(self):
        team = default_team(simulation_config())
        try:
            caps = team["JMA"].capabilities()
            for tool in ("submit_jobs_async", "check_job_status", "cancel_job",
                         "generate_runs", "get_qoi"):
                assert tool in caps
        finally:
            for agent in team.values():
                agent.close()


# ----------------------------------------------------------------------
# expert commands


def start_threaded(cfg, **kw):
    orch = Orchestrator(cfg, **kw)
    orch.start()
    return orch


def wait_for_phase(orch, phase_value, rounds=None, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        snap = orch.study_snapshot()
        at_round = rounds is None or snap["rounds_completed"] >= rounds
        if (snap["phase"] == phase_value and at_round) or snap["finished"]:
            return snap
        time.sleep(0.005)
    raise TimeoutError(f"never reached {phase_value}")


class TestExpertCommands:
    def test_command_before_start_raises(self):
        orch = Orchestrator(surrogate_config())
        with pytest.raises(NoActiveStudy):
            orch.expert_command({"type": "pause"})
        with pytest.raises(NoActiveStudy):
            orch.study_snapshot()
        orch.close()

    def test_unknown_command_type(self):
        orch = Orchestrator(surrogate_config())
        with pytest.raises(ValueError):
            orch.expert_command({"type": "reboot"})
        orch.close()

    def test_approval_flow_with_commands(self):
        cfg = surrogate_config(rounds=3, approval_required=True)
        orch = start_threaded(cfg)
        try:
            for expected_round in (1, 2):
                snap = wait_for_phase(orch, "AwaitingExpert", rounds=expected_round)
                assert snap["rounds_completed"] == expected_round
                orch.expert_command({"type": "approve_round"})
            res = orch.join(timeout=30)
            assert res.stop_reason == "rounds_exhausted"
            assert len(res.rounds) == 3
            actions = [e["payload"]["action"] for e in res.events
                       if e["kind"] == "expert_action"]
            assert actions.count("approve_round") == 2
        finally:
            orch.close()

    def test_approve_round_without_pending_approval(self):
        cfg = surrogate_config(rounds=2, approval_required=True)
        orch = start_threaded(cfg)
        try:
            wait_for_phase(orch, "AwaitingExpert")
            # drive it to Done first
            orch.expert_command({"type": "approve_round"})
            res = orch.join(timeout=30)
            assert res.stop_reason == "rounds_exhausted"
            with pytest.raises(NoActiveStudy):
                orch.expert_command({"type": "approve_round"})
        finally:
            orch.close()

    def test_approve_round_while_running_raises(self):
        cfg = surrogate_config(rounds=2)
        orch = Orchestrator(cfg)
        orch._started = True  # simulate a running, non-blocked study
        with pytest.raises(NoPendingApproval):
            orch.expert_command({"type": "approve_round"})
        orch.close()

    def test_pause_and_resume(self):
        cfg = surrogate_config(rounds=3, approval_required=True)
        orch = start_threaded(cfg)
        try:
            wait_for_phase(orch, "AwaitingExpert")
            orch.expert_command({"type": "pause"})
            assert orch.study_snapshot()["paused"] is True
            orch.expert_command({"type": "approve_round"})
            time.sleep(0.15)  # paused: approval must not advance the study
            assert orch.study_snapshot()["rounds_completed"] == 1
            orch.expert_command({"type": "resume"})
            wait_for_phase(orch, "AwaitingExpert", rounds=2)
            assert orch.study_snapshot()["rounds_completed"] == 2
            orch.expert_command({"type": "stop"})
            res = orch.join(timeout=30)
            assert res.stop_reason == "stopped"
        finally:
            orch.close()

    def test_set_bounds_validation(self):
        cfg = surrogate_config(approval_required=True)
        orch = start_threaded(cfg)
        try:
            wait_for_phase(orch, "AwaitingExpert")
            with pytest.raises(InvalidBounds):
                orch.expert_command({"type": "set_bounds",
                                     "lower": [0.2, 0.2, 0.2, 0.2],
                                     "upper": [0.1, 0.3, 0.3, 0.3]})
            with pytest.raises(InvalidBounds):
                orch.expert_command({"type": "set_bounds",
                                     "lower": [0.0], "upper": [1.0]})
            with pytest.raises(InvalidBounds):
                orch.expert_command({"type": "set_bounds",
                                     "lower": ["a", 0, 0, 0],
                                     "upper": [1, 1, 1, 1]})
            orch.expert_command({"type": "stop"})
            orch.join(timeout=30)
        finally:
            orch.close()

    def test_set_bounds_replaces_design_space(self):
        cfg = surrogate_config(rounds=2, samples=6, approval_required=True)
        orch = start_threaded(cfg)
        try:
            wait_for_phase(orch, "AwaitingExpert")
            lower = [0.05, 0.05, 0.05, 0.05]
            upper = [0.2, 0.2, 0.2, 0.2]
            orch.expert_command({"type": "set_bounds", "lower": lower, "upper": upper})
            orch.expert_command({"type": "approve_round"})
            res = orch.join(timeout=30)
            assert [list(v) for v in (orch._workspace.driver.space.lower,)] == [lower]
            round2 = res.rounds[1]
            for cand in round2.candidates:
                assert all(lo <= v <= hi for v, lo, hi in
                           zip(cand.design, lower, upper))
            actions = [e["payload"]["action"] for e in res.events
                       if e["kind"] == "expert_action"]
            assert "set_bounds" in actions
        finally:
            orch.close()

    def test_stop_mid_study(self):
        cfg = surrogate_config(rounds=4, approval_required=True)
        orch = start_threaded(cfg)
        try:
            wait_for_phase(orch, "AwaitingExpert")
            orch.expert_command({"type": "stop"})
            res = orch.join(timeout=30)
            assert res.stop_reason == "stopped"
            assert len(res.rounds) == 1
            end = res.events[-1]
            assert end["kind"] == "study_end"
            assert end["payload"]["reason"] == "stopped"
        finally:
            orch.close()

    def test_stop_after_finish_is_idempotent(self):
        orch = Orchestrator(surrogate_config(rounds=1))
        orch.run()
        ack = orch.expert_command({"type": "stop"})
        assert ack["ok"] is True and "finished" in ack["note"]
        with pytest.raises(NoActiveStudy):
            orch.expert_command({"type": "pause"})
        orch.close()

    def test_stop_drains_cluster_jobs(self):
        cfg = simulation_config()
        orch = Orchestrator(cfg)
        cluster = orch.agents["JMA"].cluster
        from mada.scheduler import ResourceSpec

        job = cluster.submit_job(ResourceSpec(nodes=1, job_name="straggler",
                                              time_limit_s=60.0),
                                 ["sleep", "30"])
        deadline = time.monotonic() + 5
        while (cluster.check_job_status(job)["state"] == "Pending"
               and time.monotonic() < deadline):
            time.sleep(0.01)
        orch._drain_jobs()
        assert cluster.check_job_status(job)["state"] in ("Cancelled", "Timeout")
        orch.close()


# ----------------------------------------------------------------------
# control API


def http_get(url, path):
    with urllib.request.urlopen(url + path, timeout=10) as response:
        return response.status, json.loads(response.read())


def http_post(url, path, body):
    request = urllib.request.Request(
        url + path, data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"}, method="POST")
    with urllib.request.urlopen(request, timeout=10) as response:
        return response.status, json.loads(response.read())


def http_error(callable_):
    try:
        callable_()
        raise AssertionError("expected HTTPError")
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


@pytest.fixture()
def served():
    cfg = surrogate_config(rounds=3, samples=5, seed=7, approval_required=True)
    orch = Orchestrator(cfg, study_name="served")
    server = serve_control_api(orch)
    yield orch, server.url
    server.stop()
    orch.close()


class TestControlApi:
    def test_study_404_before_start(self, served):
        orch, url = served
        code, body = http_error(lambda: http_get(url, "/study"))
        assert code == 404
        assert body["error"] == "NoActiveStudy"

    def test_snapshot_round_and_trace_endpoints(self, served):
        orch, url = served
        orch.start()
        wait_for_phase(orch, "AwaitingExpert")
        code, study = http_get(url, "/study")
        assert code == 200
        assert study["phase"] == "AwaitingExpert"
        assert study["rounds_completed"] == 1
        assert study["eval_count"] == 5
        assert study["incumbent"]["objective"] is not None
        assert study["direction"] == "minimize"

        code, rounds = http_get(url, "/rounds")
        assert len(rounds["rounds"]) == 1
        assert rounds["rounds"][0]["n_candidates"] == 5

        code, page1 = http_get(url, "/trace?offset=0&limit=4")
        assert page1["total"] >= 8
        assert len(page1["events"]) == 4
        code, page2 = http_get(url, f"/trace?offset={page1['next_offset']}&limit=1000")
        assert page2["offset"] == 4
        kinds = [e["kind"] for e in page1["events"] + page2["events"]]
        assert kinds[0] == "agent_turn"  # GA mesh turn is written first
        assert "round_complete" in kinds

        http_post(url, "/command", {"type": "stop"})
        orch.join(timeout=30)

    def test_trace_pages_concatenate_to_full_trace(self, served):
        orch, url = served
        orch.start()
        wait_for_phase(orch, "AwaitingExpert")
        http_post(url, "/command", {"type": "stop"})
        res = orch.join(timeout=30)
        collected, offset = [], 0
        while True:
            _, page = http_get(url, f"/trace?offset={offset}&limit=3")
            collected.extend(page["events"])
            if page["next_offset"] >= page["total"]:
                break
            offset = page["next_offset"]
        assert [e["kind"] for e in collected] == [e["kind"] for e in res.events]
        assert [e["payload"] for e in collected] == [e["payload"] for e in res.events]

    def test_field_endpoint(self, served):
        orch, url = served
        orch.start()
        wait_for_phase(orch, "AwaitingExpert")
        code, field = http_get(url, "/field?design=0.1,-0.1,0.1,-0.1")
        assert code == 200
        assert field["nx"] > 0 and field["ny"] > 0
        assert len(field["data"]) == field["nx"] * field["ny"]
        assert field["objective"] > 0
        assert field["design"] == [0.1, -0.1, 0.1, -0.1]
        code, body = http_error(lambda: http_get(url, "/field"))
        assert code == 400
        http_post(url, "/command", {"type": "stop"})
        orch.join(timeout=30)

    def test_command_endpoint_errors(self, served):
        orch, url = served
        orch.start()
        wait_for_phase(orch, "AwaitingExpert")
        code, body = http_error(
            lambda: http_post(url, "/command", {"type": "set_bounds",
                                                "lower": [1, 1, 1, 1],
                                                "upper": [0, 2, 2, 2]}))
        assert code == 400 and body["error"] == "InvalidBounds"
        code, body = http_error(
            lambda: http_post(url, "/command", {"type": "reboot"}))
        assert code == 400
        code, ack = http_post(url, "/command", {"type": "approve_round"})
        assert ack["ok"] is True
        wait_for_phase(orch, "AwaitingExpert", rounds=2)
        code, body = http_error(lambda: http_get(url, "/unknown"))
        assert code == 404
        http_post(url, "/command", {"type": "stop"})
        orch.join(timeout=30)

    def test_approve_round_409_when_not_blocked(self):
        cfg = surrogate_config(rounds=1)
        orch = Orchestrator(cfg, study_name="q")
        server = serve_control_api(orch)
        try:
            orch.run()  # approval never required; finishes immediately
            code, body = http_error(
                lambda: http_post(server.url, "/command", {"type": "approve_round"}))
            assert code == 404  # finished study
        finally:
            server.stop()
            orch.close()

    def test_events_stream_replays_then_follows(self, served):
        orch, url = served
        streamed = []
        done = threading.Event()

        def reader():
            request = urllib.request.urlopen(url + "/events", timeout=30)
            for raw in request:
                line = raw.decode().rstrip("\n")
                if line.startswith("data: "):
                    event = json.loads(line[6:])
                    streamed.append(event)
                    if event["kind"] == "study_end":
                        done.set()
                        return

        thread = threading.Thread(target=reader, daemon=True)
        thread.start()
        time.sleep(0.1)
        orch.start()
        wait_for_phase(orch, "AwaitingExpert")
        http_post(url, "/command", {"type": "approve_round"})
        wait_for_phase(orch, "AwaitingExpert", rounds=2)
        http_post(url, "/command", {"type": "stop"})
        res = orch.join(timeout=30)
        assert done.wait(timeout=10)
        assert [e["kind"] for e in streamed] == [e["kind"] for e in res.events]
        assert [e["payload"] for e in streamed] == [e["payload"] for e in res.events]

    def test_late_subscriber_gets_full_replay(self, served):
        orch, url = served
        orch.start()
        wait_for_phase(orch, "AwaitingExpert")
        http_post(url, "/command", {"type": "stop"})
        res = orch.join(timeout=30)
        streamed = []
        with urllib.request.urlopen(url + "/events", timeout=10) as stream:
            for raw in stream:
                line = raw.decode().rstrip("\n")
                if line.startswith("data: "):
                    streamed.append(json.loads(line[6:]))
                    if streamed[-1]["kind"] == "study_end":
                        break
        assert [e["payload"] for e in streamed] == [e["payload"] for e in res.events]

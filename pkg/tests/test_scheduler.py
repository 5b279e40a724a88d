import random
import sys
import threading

import pytest

from mada.scheduler import (
    InvalidSpec,
    JobNotFound,
    ResourceSpec,
    RunDescription,
    Scheduler,
    SimClock,
    UnsatisfiableResources,
)

# Independent statement of the legal state machine.
LEGAL_NEXT = {
    "Submitted": {"Pending"},
    "Pending": {"Running", "Cancelled"},
    "Running": {"Completed", "Failed", "Timeout", "Cancelled"},
    "Completed": set(),
    "Failed": set(),
    "Timeout": set(),
    "Cancelled": set(),
}


def assert_history_legal(record):
    states = [s for _, s in record.history]
    assert states[0] == "Submitted"
    for prev, new in zip(states, states[1:]):
        assert new in LEGAL_NEXT[prev], f"illegal transition {prev} -> {new}"


def audit_events(events, node_count):
    """Replay the instrumented allocator log: capacity and FIFO-among-feasible."""
    usage = 0
    nodes_by_running = {}
    pending = {}  # job_id -> nodes, in submit order
    for ev in events:
        kind = ev["event"]
        if kind == "submit":
            pending[ev["job_id"]] = ev["nodes"]
        elif kind == "skip":
            assert ev["nodes"] > ev["free_before"], "job skipped although it fit"
        elif kind == "start":
            for jid, n in pending.items():
                if jid == ev["job_id"]:
                    break
                assert n > ev["free_before"], (
                    f"{jid} (needs {n} nodes) passed over with "
                    f"{ev['free_before']} free when {ev['job_id']} started")
            usage += ev["nodes"]
            nodes_by_running[ev["job_id"]] = ev["nodes"]
            assert usage <= node_count, "capacity exceeded"
            pending.pop(ev["job_id"])
        elif kind == "finish":
            usage -= nodes_by_running.pop(ev["job_id"], 0)
        elif kind == "cancel":
            pending.pop(ev["job_id"], None)
    assert usage >= 0


def napper(ctx, argv):
    ctx.sleep(float(argv[0]))
    return 0


def writer(ctx, argv):
    ctx.out.write(" ".join(argv) + "\n")
    return 0


def failer(ctx, argv):
    return int(argv[0]) if argv else 1


def make_scheduler(nodes=4, clock=None):
    return Scheduler(node_count=nodes, cores_per_node=8, clock=clock,
                     registry={"napper": napper, "writer": writer, "failer": failer})


def spec(nodes=1, tmp=".", limit=60.0, name="job"):
    return ResourceSpec(nodes=nodes, tasks_per_node=2, time_limit_s=limit,
                        job_name=name, working_dir=str(tmp))


# ----------------------------------------------------------------------
# Single-job lifecycle


def test_submit_and_complete(tmp_path):
    sched = make_scheduler()
    job_id = sched.submit_job(spec(tmp=tmp_path, name="hello"), ["writer", "hi", "there"])
    assert sched.wait([job_id], timeout=10)
    snap = sched.check_job_status(job_id)
    assert snap["state"] == "Completed"
    assert snap["exit_code"] == 0
    assert snap["name"] == "hello"
    assert snap["submit_ts"] <= snap["start_ts"] <= snap["end_ts"]
    with open(snap["stdout_path"]) as fh:
        assert fh.read() == "hi there\n"
    assert_history_legal(sched._jobs[job_id])


def test_tasks_per_node_recorded_not_enforced(tmp_path):
    sched = make_scheduler(nodes=1)
    job_id = sched.submit_job(
        ResourceSpec(nodes=1, tasks_per_node=64, time_limit_s=10, working_dir=str(tmp_path)),
        ["writer", "x"])
    sched.wait([job_id], timeout=10)
    assert sched._jobs[job_id].spec.tasks_per_node == 64
    assert sched.check_job_status(job_id)["state"] == "Completed"


def test_unsatisfiable_resources(tmp_path):
    sched = make_scheduler(nodes=1)
    with pytest.raises(UnsatisfiableResources):
        sched.submit_job(spec(nodes=2, tmp=tmp_path), ["writer", "x"])


def test_invalid_specs(tmp_path):
    sched = make_scheduler()
    with pytest.raises(InvalidSpec):
        sched.submit_job(ResourceSpec(nodes=0, working_dir=str(tmp_path)), ["writer"])
    with pytest.raises(InvalidSpec):
        sched.submit_job(ResourceSpec(nodes=1, time_limit_s=0.0,
                                      working_dir=str(tmp_path)), ["writer"])
    with pytest.raises(InvalidSpec):
        sched.submit_job(spec(tmp=tmp_path), [])


def test_subprocess_payload(tmp_path):
    sched = make_scheduler()
    ok = sched.submit_job(spec(tmp=tmp_path), [sys.executable, "-c", "print('from child')"])
    bad = sched.submit_job(spec(tmp=tmp_path), [sys.executable, "-c", "import sys; sys.exit(3)"])
    assert sched.wait([ok, bad], timeout=30)
    assert sched.check_job_status(ok)["state"] == "Completed"
    with open(sched.check_job_status(ok)["stdout_path"]) as fh:
        assert "from child" in fh.read()
    snap = sched.check_job_status(bad)
    assert snap["state"] == "Failed"
    assert snap["exit_code"] == 3


def test_missing_binary_fails(tmp_path):
    sched = make_scheduler()
    job_id = sched.submit_job(spec(tmp=tmp_path), ["/no/such/binary"])
    sched.wait([job_id], timeout=10)
    snap = sched.check_job_status(job_id)
    assert snap["state"] == "Failed"
    assert snap["exit_code"] == 127


# ----------------------------------------------------------------------
# Timeout under a simulated clock


def test_timeout_is_deterministic_under_sim_clock(tmp_path):
    clock = SimClock()
    sched = make_scheduler(clock=clock)
    job_id = sched.submit_job(spec(tmp=tmp_path, limit=0.05), ["napper", "1.0"])
    clock.advance(0.2)  # past the deadline; the payload still "sleeps"
    assert sched.wait([job_id], timeout=10)
    snap = sched.check_job_status(job_id)
    assert snap["state"] == "Timeout"
    assert_history_legal(sched._jobs[job_id])


def test_no_timeout_when_payload_finishes_in_time(tmp_path):
    import time

    clock = SimClock()
    sched = make_scheduler(clock=clock)
    job_id = sched.submit_job(spec(tmp=tmp_path, limit=5.0), ["napper", "0.5"])
    # Step sim time in small increments, staying well below the limit, until
    # the payload has had a chance to observe a time past its wake point.
    for _ in range(49):
        if sched.check_job_status(job_id)["state"] == "Completed":
            break
        clock.advance(0.1)
        time.sleep(0.02)
    assert sched.wait([job_id], timeout=10)
    assert sched.check_job_status(job_id)["state"] == "Completed"


# ----------------------------------------------------------------------
# Cancellation


def test_cancel_pending_job(tmp_path):
    sched = make_scheduler(nodes=1)
    blocker = sched.submit_job(spec(tmp=tmp_path, limit=60), ["napper", "30"])
    queued = sched.submit_job(spec(tmp=tmp_path), ["writer", "x"])
    assert sched.check_job_status(queued)["state"] == "Pending"
    assert sched.cancel_job(queued) == "Cancelled"
    snap = sched.check_job_status(queued)
    assert snap["state"] == "Cancelled"
    assert snap["start_ts"] is None
    sched.cancel_job(blocker)


def test_cancel_running_job_releases_resources(tmp_path):
    sched = make_scheduler(nodes=1)
    blocker = sched.submit_job(spec(tmp=tmp_path, limit=60), ["napper", "30"])
    follower = sched.submit_job(spec(tmp=tmp_path), ["writer", "done"])
    assert sched.cancel_job(blocker) == "Cancelled"
    assert sched.wait([follower], timeout=10)
    assert sched.check_job_status(follower)["state"] == "Completed"
    audit_events(sched.events, 1)


def test_cancel_terminal_job_is_idempotent(tmp_path):
    sched = make_scheduler()
    job_id = sched.submit_job(spec(tmp=tmp_path), ["writer", "x"])
    sched.wait([job_id], timeout=10)
    assert sched.cancel_job(job_id) == "Completed"
    assert sched.cancel_job(job_id) == "Completed"


def test_cancel_unknown_job(tmp_path):
    sched = make_scheduler()
    with pytest.raises(JobNotFound):
        sched.cancel_job("job-999999")


# ----------------------------------------------------------------------
# Status summaries


def test_status_empty_scheduler():
    sched = make_scheduler()
    assert sched.check_job_status() == {"jobs": []}


def test_status_unknown_id():
    sched = make_scheduler()
    with pytest.raises(JobNotFound):
        sched.check_job_status("job-000042")


def test_status_all_jobs(tmp_path):
    sched = make_scheduler()
    ids = [sched.submit_job(spec(tmp=tmp_path), ["writer", str(i)]) for i in range(3)]
    sched.wait(ids, timeout=10)
    summary = sched.check_job_status()
    assert [j["job_id"] for j in summary["jobs"]] == sorted(ids)
    assert all(j["state"] == "Completed" for j in summary["jobs"])


# ----------------------------------------------------------------------
# Batch submission


def run_desc(i, tmp, command, nodes=1):
    workdir = str(tmp / f"run_{i:04d}")
    return RunDescription(
        run_id=f"run_{i:04d}",
        working_dir=workdir,
        deck_path="",
        resource=ResourceSpec(nodes=nodes, tasks_per_node=1, time_limit_s=30,
                              job_name=f"run_{i:04d}", working_dir=workdir),
        command=command,
    )


def test_submit_jobs_async_returns_all_ids_promptly(tmp_path):
    sched = make_scheduler(nodes=4)
    runs = [run_desc(i, tmp_path, ["napper", "0.01"]) for i in range(40)]
    outcome = sched.submit_jobs_async(runs)
    assert len(outcome["accepted"]) == 40
    assert outcome["rejected"] == []
    # Ids are returned while most of the batch is still queued or running.
    states = [sched.check_job_status(e["job_id"])["state"] for e in outcome["accepted"]]
    assert any(s in ("Pending", "Running") for s in states)
    sched.wait([e["job_id"] for e in outcome["accepted"]], timeout=60)
    audit_events(sched.events, 4)
    final = [sched.check_job_status(e["job_id"])["state"] for e in outcome["accepted"]]
    assert final == ["Completed"] * 40


def test_submit_jobs_async_empty():
    sched = make_scheduler()
    assert sched.submit_jobs_async([]) == {"accepted": [], "rejected": []}


def test_submit_jobs_async_partial_acceptance(tmp_path):
    sched = make_scheduler(nodes=4)
    runs = [run_desc(i, tmp_path, ["writer", "ok"]) for i in range(5)]
    runs.insert(2, run_desc(99, tmp_path, ["writer", "nope"], nodes=9))
    outcome = sched.submit_jobs_async(runs)
    assert len(outcome["accepted"]) == 5
    assert len(outcome["rejected"]) == 1
    assert outcome["rejected"][0]["run_id"] == "run_0099"
    assert "nodes" in outcome["rejected"][0]["reason"]


def test_missing_deck_rejected(tmp_path):
    sched = make_scheduler()
    run = run_desc(0, tmp_path, ["writer", "x"])
    run.deck_path = str(tmp_path / "nowhere" / "deck.json")
    outcome = sched.submit_jobs_async([run])
    assert outcome["accepted"] == []
    assert "deck not found" in outcome["rejected"][0]["reason"]


def test_execute_generated_runs_summary(tmp_path):
    sched = make_scheduler(nodes=2)
    runs = [
        run_desc(0, tmp_path, ["writer", "a"]),
        run_desc(1, tmp_path, ["failer", "1"]),
        run_desc(2, tmp_path, ["writer", "c"]),
    ]
    summary = sched.execute_generated_runs(runs)
    assert summary.count("Completed") == 2
    assert summary.count("Failed") == 1
    assert "nonzero or rejected: 1 of 3" in summary
    assert "run_0001" in summary
    # Every accepted run reached a terminal state before the call returned.
    for job in sched.check_job_status()["jobs"]:
        assert job["state"] in ("Completed", "Failed")


# ----------------------------------------------------------------------
# Concurrency stress


def test_randomized_concurrency_audit(tmp_path):
    rng = random.Random(7)
    sched = make_scheduler(nodes=4)
    ids = []
    errors = []

    def submitter(k):
        try:
            for i in range(25):
                nodes = rng.choice([1, 1, 1, 2, 3])
                job_id = sched.submit_job(
                    ResourceSpec(nodes=min(nodes, 4), tasks_per_node=1, time_limit_s=30,
                                 job_name=f"s{k}-{i}", working_dir=str(tmp_path)),
                    ["napper", "0.002"])
                ids.append(job_id)
                if rng.random() < 0.15:
                    sched.cancel_job(job_id)
                if rng.random() < 0.3:
                    sched.check_job_status()
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=submitter, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert sched.wait(ids, timeout=120)
    audit_events(sched.events, 4)
    for job_id in ids:
        record = sched._jobs[job_id]
        assert_history_legal(record)
        snap = record.snapshot()
        if snap["state"] == "Cancelled" and snap["start_ts"] is None:
            continue
        assert snap["start_ts"] is None or snap["submit_ts"] <= snap["start_ts"]
        if snap["end_ts"] is not None and snap["start_ts"] is not None:
            assert snap["start_ts"] <= snap["end_ts"]
    assert len(set(ids)) == len(ids)


def test_snapshots_never_torn(tmp_path):
    sched = make_scheduler(nodes=2)
    stop = threading.Event()
    bad = []

    def poller():
        while not stop.is_set():
            for job in sched.check_job_status()["jobs"]:
                state = job["state"]
                if state == "Running" and job["start_ts"] is None:
                    bad.append(job)
                if state in ("Completed", "Failed", "Timeout") and job["end_ts"] is None:
                    bad.append(job)
                if state == "Pending" and job["start_ts"] is not None:
                    bad.append(job)
                if state not in ("Completed", "Failed", "Timeout", "Cancelled") \
                        and job["exit_code"] is not None:
                    bad.append(job)

    thread = threading.Thread(target=poller)
    thread.start()
    ids = [sched.submit_job(spec(tmp=tmp_path, limit=30), ["napper", "0.003"])
           for _ in range(30)]
    sched.wait(ids, timeout=60)
    stop.set()
    thread.join()
    assert bad == []

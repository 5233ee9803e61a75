"""Shared builders for hand-constructed telemetry fixtures."""

from datetime import datetime, timedelta, timezone

from runvar.telemetry import DagNode, JobGroup, JobInstance, OperatorDag

T0 = datetime(2021, 6, 1, tzinfo=timezone.utc)

CHAIN_PLAN = OperatorDag(
    (
        DagNode("Output", (1,)),
        DagNode("Aggregate", (2,)),
        DagNode("Extract", ()),
    )
)


def at(hours: float) -> datetime:
    return T0 + timedelta(hours=hours)


def make_instance(
    job_id="J0",
    raw_name="job",
    submit_time=None,
    runtime=100.0,
    plan=CHAIN_PLAN,
    input_bytes=1e9,
    temp_read_bytes=1e8,
    vertex_count=10,
    token_alloc=50.0,
    token_min=10.0,
    token_max=80.0,
    token_avg=40.0,
    spare_token_avg=5.0,
    sku_vertex_fraction=None,
    cpu_util_mean=None,
    cpu_util_std=None,
    cardinality_est=1e6,
    operator_counts=None,
    true_cluster=None,
) -> JobInstance:
    return JobInstance(
        job_id=job_id,
        raw_name=raw_name,
        submit_time=submit_time or T0,
        runtime=runtime,
        plan=plan,
        input_bytes=input_bytes,
        temp_read_bytes=temp_read_bytes,
        vertex_count=vertex_count,
        token_alloc=token_alloc,
        token_min=token_min,
        token_max=token_max,
        token_avg=token_avg,
        spare_token_avg=spare_token_avg,
        sku_vertex_fraction=sku_vertex_fraction if sku_vertex_fraction is not None else {"A": 0.5, "B": 0.5},
        cpu_util_mean=cpu_util_mean if cpu_util_mean is not None else {"A": 0.3, "B": 0.6},
        cpu_util_std=cpu_util_std if cpu_util_std is not None else {"A": 0.05, "B": 0.1},
        cardinality_est=cardinality_est,
        operator_counts=operator_counts if operator_counts is not None else {"Extract": 1.0, "Aggregate": 1.0, "Output": 1.0},
        true_cluster=true_cluster,
    )


def make_group(runtimes, start_hour=0.0, step_hours=1.0, name="job", plan=CHAIN_PLAN, **kw) -> JobGroup:
    instances = tuple(
        make_instance(
            job_id=f"J{i}",
            raw_name=name,
            submit_time=at(start_hour + i * step_hours),
            runtime=r,
            plan=plan,
            **kw,
        )
        for i, r in enumerate(runtimes)
    )
    return JobGroup(instances[0].group_key(), instances)

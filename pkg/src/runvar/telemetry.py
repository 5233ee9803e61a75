"""Job telemetry records, recurrence grouping, and JSONL ingestion.

A recurring job is identified by the pair (normalized job name, plan
signature). Instances sharing that key form a job group; datasets keep
only groups whose support clears a minimum threshold.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import CyclicPlan, IoError, NoHistory, ParseError, SchemaError

# Volatile-substring patterns removed by name normalization, applied in
# order. GUIDs go first so their digit runs are not eaten piecemeal.
_GUID_RE = re.compile(
    r"[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}"
)
_DATE_RE = re.compile(
    r"\d{4}[-/]\d{2}[-/]\d{2}"
    r"(?:[T ]\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?(?:Z|[+-]\d{2}:?\d{2})?)?"
)
_HEX_RE = re.compile(r"[0-9a-fA-F]{16,}")
_EPOCH_RE = re.compile(r"\d{8,}")

PLACEHOLDER = "#"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def normalize_job_name(raw_name: str) -> str:
    """Strip volatile substrings (dates, GUIDs, epochs, hex blobs) to `#`.

    Deterministic and idempotent: the placeholder never re-matches.
    """
    s = raw_name
    for pattern in (_GUID_RE, _DATE_RE, _HEX_RE, _EPOCH_RE):
        s = pattern.sub(PLACEHOLDER, s)
    return s


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class DagNode:
    operator_type: str
    children: tuple[int, ...] = ()


@dataclass(frozen=True)
class OperatorDag:
    """Compiled execution plan: operator nodes with child indices."""

    nodes: tuple[DagNode, ...]

    def __post_init__(self):
        n = len(self.nodes)
        for node in self.nodes:
            for c in node.children:
                if not 0 <= c < n:
                    raise SchemaError("plan", f"child index {c} out of range")

    @staticmethod
    def from_dict(obj: dict) -> "OperatorDag":
        nodes = tuple(
            DagNode(n["operator_type"], tuple(n.get("children", ())))
            for n in obj["nodes"]
        )
        return OperatorDag(nodes)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"operator_type": n.operator_type, "children": list(n.children)}
                for n in self.nodes
            ]
        }


def plan_signature(plan: OperatorDag) -> int:
    """Merkle-style 64-bit FNV hash over the plan structure.

    Leaf hash covers the operator type; internal hashes append the sorted
    child hashes, so child order never matters. Parameters and
    cardinalities are excluded by construction. Multi-root plans hash the
    sorted root hashes.
    """
    n = len(plan.nodes)
    memo: dict[int, int] = {}
    state = [0] * n  # 0 unvisited, 1 in progress, 2 done

    def node_hash(i: int) -> int:
        if state[i] == 1:
            raise CyclicPlan(f"cycle through node {i}")
        if state[i] == 2:
            return memo[i]
        state[i] = 1
        node = plan.nodes[i]
        payload = node.operator_type.encode()
        if node.children:
            child_hashes = sorted(node_hash(c) for c in node.children)
            payload += b"|" + b"".join(h.to_bytes(8, "little") for h in child_hashes)
        h = _fnv1a(payload)
        state[i] = 2
        memo[i] = h
        return h

    referenced = {c for node in plan.nodes for c in node.children}
    roots = [i for i in range(n) if i not in referenced]
    if n and not roots:
        raise CyclicPlan("every node is referenced as a child")
    root_hashes = sorted(node_hash(r) for r in roots)
    return _fnv1a(b"root" + b"".join(h.to_bytes(8, "little") for h in root_hashes))


@dataclass(frozen=True, order=True)
class GroupKey:
    normalized_name: str
    plan_signature: int

    def as_string(self) -> str:
        return f"{self.normalized_name}:{self.plan_signature:016x}"

    @staticmethod
    def from_string(s: str) -> "GroupKey":
        name, _, sig = s.rpartition(":")
        return GroupKey(name, int(sig, 16))


@dataclass(frozen=True)
class JobInstance:
    """One execution record of a recurring job."""

    job_id: str
    raw_name: str
    submit_time: datetime
    runtime: float
    plan: OperatorDag
    input_bytes: float
    temp_read_bytes: float
    vertex_count: int
    token_alloc: float
    token_min: float
    token_max: float
    token_avg: float
    spare_token_avg: float
    sku_vertex_fraction: dict[str, float]
    cpu_util_mean: dict[str, float]
    cpu_util_std: dict[str, float]
    cardinality_est: float
    operator_counts: dict[str, float]
    true_cluster: int | None = None

    def __post_init__(self):
        if self.runtime <= 0:
            raise SchemaError("runtime", "must be > 0")
        if self.sku_vertex_fraction:
            total = sum(self.sku_vertex_fraction.values())
            if abs(total - 1.0) > 1e-6:
                raise SchemaError("sku_vertex_fraction", f"sums to {total}, not 1")
        for name in (
            "input_bytes",
            "temp_read_bytes",
            "vertex_count",
            "token_alloc",
            "token_min",
            "token_max",
            "token_avg",
            "spare_token_avg",
            "cardinality_est",
        ):
            if getattr(self, name) < 0:
                raise SchemaError(name, "must be >= 0")

    def group_key(self) -> GroupKey:
        return GroupKey(normalize_job_name(self.raw_name), plan_signature(self.plan))


@dataclass
class JobGroup:
    """Time-ordered recurrences of one job."""

    key: GroupKey
    instances: tuple[JobInstance, ...]

    @property
    def support(self) -> int:
        return len(self.instances)

    def before(self, as_of: datetime) -> tuple[JobInstance, ...]:
        return tuple(i for i in self.instances if i.submit_time < as_of)

    def within(self, start: datetime, end: datetime) -> tuple[JobInstance, ...]:
        return tuple(i for i in self.instances if start <= i.submit_time < end)


DATASET_ROLES = ("cluster_fit", "train", "test")


@dataclass
class Dataset:
    groups: list[JobGroup]
    role: str = "cluster_fit"
    min_support: int = 1

    def __post_init__(self):
        if self.role not in DATASET_ROLES:
            raise SchemaError("role", f"must be one of {DATASET_ROLES}")
        for g in self.groups:
            if g.support < self.min_support:
                raise SchemaError(
                    "min_support",
                    f"group {g.key.as_string()} has support {g.support}",
                )

    @property
    def n_instances(self) -> int:
        return sum(g.support for g in self.groups)

    def all_instances(self):
        for g in self.groups:
            yield from g.instances

    def time_span(self) -> tuple[datetime, datetime]:
        times = [i.submit_time for i in self.all_instances()]
        return min(times), max(times)


def lower_median(values) -> float:
    """Lower median: element at index (n-1)//2 of the sorted sample."""
    ordered = sorted(values)
    if not ordered:
        raise NoHistory("empty sample")
    return float(ordered[(len(ordered) - 1) // 2])


def group_instances(instances, min_support: int) -> list[JobGroup]:
    """Partition instances by group key, dropping thin groups.

    Instances are sorted by submit time within each group; groups are
    sorted by key so the result is deterministic regardless of input order.
    """
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    buckets: dict[GroupKey, list[JobInstance]] = {}
    for inst in instances:
        buckets.setdefault(inst.group_key(), []).append(inst)
    groups = []
    for key in sorted(buckets):
        members = buckets[key]
        if len(members) < min_support:
            continue
        members.sort(key=lambda i: (i.submit_time, i.job_id))
        groups.append(JobGroup(key, tuple(members)))
    return groups


def historic_median(group: JobGroup, as_of: datetime) -> float:
    """Lower median of runtimes strictly before `as_of`."""
    prior = [i.runtime for i in group.instances if i.submit_time < as_of]
    if not prior:
        raise NoHistory(f"no instance before {as_of.isoformat()}")
    return lower_median(prior)


# --- JSONL wire format ---------------------------------------------------

def parse_rfc3339(value: str) -> datetime:
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError as e:
        raise SchemaError("submit_time", str(e)) from e
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


_REQUIRED_FIELDS = (
    "job_id",
    "raw_name",
    "submit_time",
    "runtime",
    "plan",
    "input_bytes",
    "temp_read_bytes",
    "vertex_count",
    "token_alloc",
    "token_min",
    "token_max",
    "token_avg",
    "spare_token_avg",
    "sku_vertex_fraction",
    "cpu_util_mean",
    "cpu_util_std",
    "cardinality_est",
    "operator_counts",
)


def instance_from_dict(obj: dict, line: int | None = None) -> JobInstance:
    for f in _REQUIRED_FIELDS:
        if f not in obj:
            raise SchemaError(f, "missing", line=line)
    try:
        return JobInstance(
            job_id=str(obj["job_id"]),
            raw_name=str(obj["raw_name"]),
            submit_time=parse_rfc3339(obj["submit_time"]),
            runtime=float(obj["runtime"]),
            plan=OperatorDag.from_dict(obj["plan"]),
            input_bytes=float(obj["input_bytes"]),
            temp_read_bytes=float(obj["temp_read_bytes"]),
            vertex_count=int(obj["vertex_count"]),
            token_alloc=float(obj["token_alloc"]),
            token_min=float(obj["token_min"]),
            token_max=float(obj["token_max"]),
            token_avg=float(obj["token_avg"]),
            spare_token_avg=float(obj["spare_token_avg"]),
            sku_vertex_fraction={str(k): float(v) for k, v in obj["sku_vertex_fraction"].items()},
            cpu_util_mean={str(k): float(v) for k, v in obj["cpu_util_mean"].items()},
            cpu_util_std={str(k): float(v) for k, v in obj["cpu_util_std"].items()},
            cardinality_est=float(obj["cardinality_est"]),
            operator_counts={str(k): float(v) for k, v in obj["operator_counts"].items()},
            true_cluster=obj.get("true_cluster"),
        )
    except SchemaError as e:
        if e.line is None and line is not None:
            raise SchemaError(e.field, e.message, line=line) from e
        raise
    except (TypeError, ValueError, KeyError, AttributeError) as e:
        raise SchemaError("record", str(e), line=line) from e


def instance_to_dict(inst: JobInstance) -> dict:
    obj = {
        "job_id": inst.job_id,
        "raw_name": inst.raw_name,
        "submit_time": format_rfc3339(inst.submit_time),
        "runtime": inst.runtime,
        "plan": inst.plan.to_dict(),
        "input_bytes": inst.input_bytes,
        "temp_read_bytes": inst.temp_read_bytes,
        "vertex_count": inst.vertex_count,
        "token_alloc": inst.token_alloc,
        "token_min": inst.token_min,
        "token_max": inst.token_max,
        "token_avg": inst.token_avg,
        "spare_token_avg": inst.spare_token_avg,
        "sku_vertex_fraction": inst.sku_vertex_fraction,
        "cpu_util_mean": inst.cpu_util_mean,
        "cpu_util_std": inst.cpu_util_std,
        "cardinality_est": inst.cardinality_est,
        "operator_counts": inst.operator_counts,
    }
    if inst.true_cluster is not None:
        obj["true_cluster"] = inst.true_cluster
    return obj


def load_dataset(path, role: str = "cluster_fit", min_support: int = 1) -> Dataset:
    """Read a JSONL telemetry file, group and filter by support."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise IoError(str(e)) from e
    instances = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(lineno, e.msg) from e
        instances.append(instance_from_dict(obj, line=lineno))
    groups = group_instances(instances, min_support)
    return Dataset(groups=groups, role=role, min_support=min_support)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset back to JSONL, one instance per line."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for inst in dataset.all_instances():
                fh.write(json.dumps(instance_to_dict(inst), sort_keys=True))
                fh.write("\n")
    except OSError as e:
        raise IoError(str(e)) from e

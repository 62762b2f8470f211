"""Analytic cost model of one MapReduce job.

Not a discrete-event simulator: every phase is a closed-form cost in
seconds, evaluated per task and multiplied by the number of task waves.
Quantities are in MiB unless a name says otherwise.

Map side, per map task with output ``M``:

* the sort buffer holds ``io.sort.mb``; a fraction ``io.sort.record.percent``
  of it stores 16-byte record metadata, the rest stores data.  A spill
  starts when either region is ``io.sort.spill.percent`` full, so the spill
  size is ``B = spill% * min(data bytes, metadata slots * record size)``;
* ``s = max(1, ceil(M / B))`` spills are written;
* each spill chunk is quick-sorted in memory, cost ``~ chunk * log2(records)``,
  so bigger buffers sort more per chunk;
* spills are merged ``io.sort.factor`` streams at a time, which takes
  ``ceil(log_factor(s))`` passes over ``M``.

Reduce side, per reducer with input ``I = total map output / R``:

* ``R = mapred.reduce.tasks`` reducers run in ``ceil(R / reduce_slots)`` waves;
* fetches cost network time (scaled by map-output compression) plus a
  fixed overhead per map segment; reducers that start before the maps
  finish (``reduce.slowstart.completedmaps``) hide up to 30% of it;
* the in-memory merge triggers at ``shuffle.merge.percent`` of the shuffle
  buffer or after ``inmem.merge.threshold`` segments, whichever is first,
  writing one file per trigger; ``reduce.input.buffer.percent`` of the heap
  may keep data in memory through the reduce instead of going to disk;
* on-disk files are merged ``io.sort.factor`` at a time.  With ``f`` files
  and factor ``k < f`` that is ``ceil(f / k)`` intermediate rounds plus a
  final one (40 files at factor 10 give 5 rounds);
* holding data in memory (retained input, an oversized shuffle buffer)
  adds garbage-collection pressure on the reduce function.

The output is written with HDFS replication, optionally compressed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping

from .errors import DomainError
from .space import ParameterSpace, ParameterSpec, SystemConfig

logger = logging.getLogger(__name__)

MIB = 1024.0 * 1024.0

RECORD_META_BYTES = 16.0
SPILL_SEEK_MB = 0.5        # per-file open/seek overhead, in MiB of I/O
BUFFER_ALLOC_CPU = 0.05    # cpu units per MiB of sort buffer allocated per task
STALL_CPU = 20.0           # map blocks while spilling when the threshold is near full
STALL_POWER = 8
COMPRESS_CPU = 0.5         # cpu units per MiB of map output compressed (fast codec)
OUTPUT_COMPRESS_CPU = 3.0  # cpu units per MiB of job output compressed (block codec)
FETCH_OVERHEAD_S = 0.05    # seconds per map segment fetched by a reducer
MERGE_CPU = 0.2            # cpu units per MiB per log2(segments) of in-memory merge
REDUCE_CPU = 1.0           # cpu units per MiB of reduce input
GC_CPU = 10.0              # cpu units per MiB of reduce input at full memory pressure
SHUFFLE_BUFFER_SAFE = 0.75
OVERLAP_MAX = 0.30

SLOWSTART = "reduce.slowstart.completedmaps"

# (name, kind, min, max, default) for the Hadoop v1 knobs.  The spill
# threshold default of 0.08 is deliberate (stock Hadoop ships 0.80).  Bounds
# are wide enough for aggressive settings such as io.sort.factor=475 or
# inmem.merge.threshold=9513.
DEFAULT_PARAMETERS = (
    ("io.sort.mb", "integer", 16, 2048, 100),
    ("io.sort.spill.percent", "real", 0.05, 0.95, 0.08),
    ("io.sort.factor", "integer", 2, 500, 10),
    ("shuffle.input.buffer.percent", "real", 0.1, 0.95, 0.7),
    ("shuffle.merge.percent", "real", 0.05, 0.95, 0.66),
    ("inmem.merge.threshold", "integer", 10, 10000, 1000),
    ("reduce.input.buffer.percent", "real", 0.0, 0.9, 0.0),
    ("mapred.reduce.tasks", "integer", 1, 100, 1),
    ("io.sort.record.percent", "real", 0.01, 0.5, 0.05),
    ("mapred.compress.map.output", "boolean", 0, 1, 0),
    ("mapred.output.compress", "boolean", 0, 1, 0),
)
DEFAULTS = {name: default for name, _, _, _, default in DEFAULT_PARAMETERS}


def default_space() -> ParameterSpace:
    """The 11 tunable Hadoop v1 parameters with their stock defaults."""
    specs = []
    for name, kind, lo, hi, default in DEFAULT_PARAMETERS:
        if kind == "boolean":
            specs.append(ParameterSpec.boolean(name, bool(default)))
        else:
            specs.append(ParameterSpec(name, kind, lo, hi, default))
    return ParameterSpace(specs)


@dataclass(frozen=True)
class JobProfile:
    """Workload and cluster description.

    Cost weights are seconds per MiB: ``cpu_cost_weight`` per unit of CPU
    work, ``io_cost_weight`` per MiB of local disk traffic and
    ``network_cost_weight`` per MiB fetched by one reducer.
    ``compress_speedup`` is the compressed/uncompressed size ratio.
    """

    input_bytes: float
    map_output_ratio: float = 1.0
    record_size_bytes: float = 100.0
    map_slots: int = 33
    reduce_slots: int = 22
    cpu_cost_weight: float = 0.01
    io_cost_weight: float = 0.02
    network_cost_weight: float = 0.05
    startup_cost_seconds: float = 5.0
    compress_speedup: float = 0.4
    block_size_bytes: float = 128 * MIB
    reduce_memory_bytes: float = 1024 * MIB
    output_ratio: float = 1.0
    replication: int = 2
    slowstart: float = 0.05

    def __post_init__(self):
        for name in ("input_bytes", "map_output_ratio", "record_size_bytes", "block_size_bytes",
                     "reduce_memory_bytes", "output_ratio"):
            if not getattr(self, name) > 0:
                raise DomainError(f"profile.{name} must be positive")
        for name in ("map_slots", "reduce_slots", "replication"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"profile.{name} must be a positive integer")
        weights = ("cpu_cost_weight", "io_cost_weight", "network_cost_weight", "startup_cost_seconds")
        if any(getattr(self, w) < 0 for w in weights) or not any(getattr(self, w) > 0 for w in weights):
            raise DomainError("profile weights must be nonnegative with at least one positive")
        if not 0 < self.compress_speedup <= 1:
            raise DomainError("profile.compress_speedup must lie in (0, 1]")
        if not 0 <= self.slowstart <= 1:
            raise DomainError("profile.slowstart must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "JobProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown profile field(s): {sorted(unknown)}")
        return cls(**d)


def reference_profile() -> JobProfile:
    """64 blocks of input on 11 nodes with 3 map and 2 reduce slots each."""
    return JobProfile(input_bytes=64 * 128 * MIB)


def suggested_partial_input_bytes(map_slots: int, block_size_bytes: float) -> float:
    """Input size giving exactly two full map waves: ``2 * slots * block``."""
    if map_slots < 1 or block_size_bytes <= 0:
        raise DomainError("map_slots must be >= 1 and block_size_bytes positive")
    return 2.0 * map_slots * block_size_bytes


@dataclass(frozen=True)
class SimBreakdown:
    map_sort_cost: float
    map_spill_io: float
    map_merge_io: float
    shuffle_cost: float
    reduce_merge_cost: float
    reduce_io: float
    startup_cost: float

    @property
    def total(self) -> float:
        return (self.map_sort_cost + self.map_spill_io + self.map_merge_io + self.shuffle_cost
                + self.reduce_merge_cost + self.reduce_io + self.startup_cost)

    def to_dict(self) -> dict[str, float]:
        d = asdict(self)
        d["total"] = self.total
        return d


def _ceil_div(a: float, b: float) -> int:
    q = a / b
    r = round(q)
    if abs(q - r) <= 1e-9 * max(1.0, abs(q)):
        return int(r)
    return math.ceil(q)


def map_merge_passes(spills: int, factor: int) -> int:
    """Passes needed to merge ``spills`` files ``factor`` at a time (1 if one suffices)."""
    passes, reach = 1, factor
    while reach < spills:
        reach *= factor
        passes += 1
    return passes


def reduce_merge_rounds(files: int, factor: int) -> int:
    if files <= 0:
        return 0
    if files <= factor:
        return 1
    return _ceil_div(files, factor) + 1


def spill_buffer_mb(sort_mb: float, spill_percent: float, record_percent: float,
                    record_size_bytes: float) -> float:
    data_cap = sort_mb * (1.0 - record_percent)
    meta_cap = sort_mb * record_percent / RECORD_META_BYTES * record_size_bytes
    return spill_percent * min(data_cap, meta_cap)


def _sort_work(chunk_mb: float, record_size_bytes: float) -> float:
    records = chunk_mb * MIB / record_size_bytes
    return chunk_mb * math.log2(1.0 + records)


def _values(config) -> dict[str, Any]:
    if isinstance(config, SystemConfig):
        values = config.as_dict()
    else:
        values = dict(config)
    merged = dict(DEFAULTS)
    merged.update(values)
    return merged


def simulate(profile: JobProfile, config: SystemConfig | Mapping[str, Any]) -> SimBreakdown:
    """Deterministic cost breakdown of one job run under ``config``.

    Parameters missing from ``config`` take their stock defaults;
    ``reduce.slowstart.completedmaps`` falls back to ``profile.slowstart``.
    """
    v = _values(config)
    cpu, io, net = profile.cpu_cost_weight, profile.io_cost_weight, profile.network_cost_weight
    rec = profile.record_size_bytes

    sort_mb = float(v["io.sort.mb"])
    spill_pct = float(v["io.sort.spill.percent"])
    factor = int(v["io.sort.factor"])
    sib = float(v["shuffle.input.buffer.percent"])
    smp = float(v["shuffle.merge.percent"])
    threshold = int(v["inmem.merge.threshold"])
    rib = float(v["reduce.input.buffer.percent"])
    reducers = int(v["mapred.reduce.tasks"])
    record_pct = float(v["io.sort.record.percent"])
    map_compress = bool(v["mapred.compress.map.output"])
    out_compress = bool(v["mapred.output.compress"])
    slowstart = float(v.get(SLOWSTART, profile.slowstart))
    if factor < 2:
        raise DomainError("io.sort.factor must be at least 2")
    if sort_mb <= 0 or not 0 < spill_pct <= 1 or not 0 < record_pct < 1:
        raise DomainError("sort buffer settings must be positive fractions")
    if reducers < 1:
        logger.warning("mapred.reduce.tasks=%d treated as 1", reducers)
        reducers = 1

    comp = profile.compress_speedup if map_compress else 1.0

    # map side
    maps = max(1, _ceil_div(profile.input_bytes, profile.block_size_bytes))
    map_waves = _ceil_div(maps, profile.map_slots)
    map_out = profile.input_bytes * profile.map_output_ratio / maps / MIB
    buf = spill_buffer_mb(sort_mb, spill_pct, record_pct, rec)
    spills = max(1, _ceil_div(map_out, buf))
    if spills == 1:
        sort_work = _sort_work(map_out, rec)
    else:
        last = map_out - (spills - 1) * buf
        sort_work = (spills - 1) * _sort_work(buf, rec) + _sort_work(max(last, 0.0), rec)
    sort_task = cpu * (sort_work
                       + BUFFER_ALLOC_CPU * sort_mb
                       + STALL_CPU * map_out * spill_pct ** STALL_POWER
                       + (COMPRESS_CPU * map_out if map_compress else 0.0))
    spill_task = io * (map_out * comp + spills * SPILL_SEEK_MB)
    passes = map_merge_passes(spills, factor)
    merge_task = io * passes * ((2.0 * map_out * comp if spills > 1 else 0.0) + spills * SPILL_SEEK_MB)

    # reduce side
    reduce_waves = _ceil_div(reducers, profile.reduce_slots)
    total_out = profile.input_bytes * profile.map_output_ratio / MIB
    per_reducer = total_out / reducers
    overlap = OVERLAP_MAX * (1.0 - slowstart)
    shuffle_task = net * per_reducer * comp + FETCH_OVERHEAD_S * maps

    heap = profile.reduce_memory_bytes / MIB
    segment = per_reducer / maps
    trigger = max(min(smp * sib * heap, threshold * segment), 1e-9)
    retained = min(per_reducer, rib * heap, trigger)
    on_disk = max(0.0, per_reducer - retained)
    files = _ceil_div(on_disk, trigger) if on_disk > 0 else 0
    rounds = reduce_merge_rounds(files, factor)
    disk_passes = map_merge_passes(files, factor) if files > 1 else 1
    pressure = rib ** 2 + max(0.0, sib - SHUFFLE_BUFFER_SAFE) ** 2
    reduce_cpu_task = cpu * (MERGE_CPU * per_reducer * math.log2(1 + min(maps, threshold))
                             + REDUCE_CPU * per_reducer
                             + GC_CPU * per_reducer * pressure)
    reduce_merge_task = reduce_cpu_task + io * SPILL_SEEK_MB * files * rounds
    output = per_reducer * profile.output_ratio
    write = io * output * profile.replication * (profile.compress_speedup if out_compress else 1.0)
    if out_compress:
        write += cpu * OUTPUT_COMPRESS_CPU * output
    reduce_io_task = io * 2.0 * on_disk * disk_passes + write

    return SimBreakdown(
        map_sort_cost=map_waves * sort_task,
        map_spill_io=map_waves * spill_task,
        map_merge_io=map_waves * merge_task,
        shuffle_cost=(1.0 - overlap) * reduce_waves * shuffle_task,
        reduce_merge_cost=reduce_waves * reduce_merge_task,
        reduce_io=reduce_waves * reduce_io_task,
        startup_cost=profile.startup_cost_seconds * (map_waves + reduce_waves),
    )

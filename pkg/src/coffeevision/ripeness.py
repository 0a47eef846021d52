"""Ripeness percentages and dated timeline series.

Ripeness is the share of fruit in the configured ripe stages over all fruit,
as a percentage; unripeness is its exact complement (computed as 100 minus
ripeness, which keeps their sum at exactly 100.0 in floating point). The ripe
set defaults to {cherry, raisin, dry}: cherries past full red still belong in
the harvested mass for harvest-timing math, but the set is configurable since
overripe fruit hurts cup quality.

Timeline building is deliberately dumb: parse timestamps, stable-sort, one
output row per sample, no interpolation or smoothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .annotations import DEFAULT_STAGE_NAMES, PredictionFile
from .errors import CoffeeVisionError

DEFAULT_RIPE_STAGES = ["cherry", "raisin", "dry"]
# The premium-quality bar: a harvest should be >= 98% fully ripe.
RIPE_QUALITY_BAR_PERCENT = 98.0

BINARY_STAGES = ["unripe", "ripe"]


class EmptyCounts(CoffeeVisionError):
    """Ripeness is undefined when the total fruit count is zero."""


class UnknownStage(CoffeeVisionError):
    """A stage name (or index) is outside the configured stage list."""


class BadTimestamp(CoffeeVisionError):
    """A sample timestamp does not parse as ISO-8601."""

    def __init__(self, index: int, value):
        self.index = index
        super().__init__(f"sample {index}: bad timestamp {value!r}")


@dataclass
class StageCounts:
    """Per-stage fruit counts, either binary or full multiclass."""

    counts: dict[str, int]
    mode: str = "multiclass"    # "binary" | "multiclass"

    def __post_init__(self):
        if self.mode not in ("binary", "multiclass"):
            raise ValueError(f"bad mode {self.mode!r}")
        for stage, n in self.counts.items():
            if n < 0:
                raise ValueError(f"negative count for {stage!r}")

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class RipenessSample:
    """Dated counts plus their ripeness/unripeness percentages.

    Percentages are None for an empty sample (total 0), where the ratio is
    undefined; otherwise they always sum to exactly 100.0.
    """

    captured_at: str            # ISO-8601
    counts: StageCounts
    ripeness_percent: float | None
    unripeness_percent: float | None

    def __post_init__(self):
        if (self.ripeness_percent is None) != (self.unripeness_percent is None):
            raise ValueError("ripeness and unripeness must both be set or both None")
        if self.ripeness_percent is not None:
            if not 0.0 <= self.ripeness_percent <= 100.0:
                raise ValueError(f"ripeness {self.ripeness_percent} outside [0, 100]")
            if self.ripeness_percent + self.unripeness_percent != 100.0:
                raise ValueError("ripeness + unripeness must equal 100")


def ripeness_percent(counts: StageCounts, ripe_stages) -> tuple[float, float]:
    """(ripeness, unripeness) percentages of a count table.

    Raises EmptyCounts when the total is zero. Unripeness is computed as the
    complement of ripeness, so the pair sums to exactly 100.0.
    """
    total = counts.total
    if total == 0:
        raise EmptyCounts("no fruit counted; ripeness is undefined")
    ripe_set = set(ripe_stages)
    ripe = sum(n for stage, n in counts.counts.items() if stage in ripe_set)
    ripeness = 100.0 * ripe / total
    return ripeness, 100.0 - ripeness


def collapse_binary(counts: StageCounts, ripe_stages,
                    stage_names: list[str] | None = None) -> StageCounts:
    """Fold multiclass counts into {unripe, ripe}; totals are preserved."""
    if counts.mode != "multiclass":
        raise ValueError("collapse_binary expects multiclass counts")
    names = DEFAULT_STAGE_NAMES if stage_names is None else list(stage_names)
    ripe_set = set(ripe_stages)
    folded = {"unripe": 0, "ripe": 0}
    for stage, n in counts.counts.items():
        if stage not in names:
            raise UnknownStage(f"stage {stage!r} not in the configured stages {names}")
        folded["ripe" if stage in ripe_set else "unripe"] += n
    return StageCounts(counts=folded, mode="binary")


def counts_from_predictions(pred: PredictionFile, stage_names: list[str],
                            confidence_threshold: float = 0.0) -> StageCounts:
    """Tally predictions at or above the confidence threshold by stage name."""
    counts = {name: 0 for name in stage_names}
    for entry in pred.entries:
        if entry.confidence < confidence_threshold:
            continue
        idx = entry.box.category_index
        if idx >= len(stage_names):
            raise UnknownStage(f"category index {idx} has no stage name "
                               f"(stages: {stage_names})")
        counts[stage_names[idx]] += 1
    return StageCounts(counts=counts, mode="multiclass")


def make_sample(captured_at: str, counts: StageCounts, ripe_stages) -> RipenessSample:
    """Build a RipenessSample; percentages are None for an empty count table."""
    try:
        ripe, unripe = ripeness_percent(counts, ripe_stages)
    except EmptyCounts:
        ripe = unripe = None
    return RipenessSample(captured_at=captured_at, counts=counts,
                          ripeness_percent=ripe, unripeness_percent=unripe)


# ---------------------------------------------------------------------------
# timeline

@dataclass
class TimelineSeries:
    rows: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        """Canonical JSON; the REST service returns these exact bytes."""
        return json.dumps(self.rows, ensure_ascii=False, separators=(",", ":"))

    def to_csv(self) -> str:
        """One row per (sample, stage), full-precision percentages."""
        lines = ["captured_at,mode,stage,count,ripeness_percent,unripeness_percent"]
        for row in self.rows:
            rp = "" if row["ripeness_percent"] is None else repr(row["ripeness_percent"])
            up = "" if row["unripeness_percent"] is None else repr(row["unripeness_percent"])
            for stage, n in row["counts"].items():
                lines.append(f"{row['captured_at']},{row['mode']},{stage},{n},{rp},{up}")
        return "\n".join(lines) + "\n"


def timeline_from_counts(dated_counts: list[tuple[str, StageCounts]], mode: str,
                         ripe_stages, stage_names: list[str] | None = None) -> TimelineSeries:
    """Build a timeline from dated multiclass count tables.

    Percentages always come from the full multiclass tally; `mode` only
    selects the count granularity of the emitted rows (binary folds stages
    into unripe/ripe). This is the single code path behind both the CLI
    timeline export and the service's /timeline endpoint, so their outputs
    are byte-identical for identical inputs.
    """
    if mode not in ("binary", "multiclass"):
        raise ValueError(f"timeline mode must be binary or multiclass, got {mode!r}")
    samples = []
    for captured_at, counts in dated_counts:
        try:
            rp, up = ripeness_percent(counts, ripe_stages)
        except EmptyCounts:
            rp = up = None
        projected = counts if mode == "multiclass" else \
            collapse_binary(counts, ripe_stages, stage_names)
        samples.append(RipenessSample(captured_at=captured_at, counts=projected,
                                      ripeness_percent=rp, unripeness_percent=up))
    return build_timeline(samples)


def _parse_timestamp(value: str, index: int) -> datetime:
    try:
        dt = datetime.fromisoformat(str(value))
    except (ValueError, TypeError):
        raise BadTimestamp(index, value) from None
    # naive timestamps sort as UTC so mixed inputs stay comparable
    return dt if dt.tzinfo is not None else dt.replace(tzinfo=timezone.utc)


def build_timeline(samples: list[RipenessSample]) -> TimelineSeries:
    """Stable-sort samples by timestamp and emit one row per sample.

    Duplicate timestamps keep insertion order. No interpolation: the series
    is exactly the observations, ready for plotting.
    """
    keyed = [(_parse_timestamp(s.captured_at, i), i, s)
             for i, s in enumerate(samples)]
    keyed.sort(key=lambda t: (t[0], t[1]))
    rows = []
    for _, _, s in keyed:
        rows.append({
            "captured_at": s.captured_at,
            "mode": s.counts.mode,
            "counts": dict(s.counts.counts),
            "ripeness_percent": s.ripeness_percent,
            "unripeness_percent": s.unripeness_percent,
        })
    return TimelineSeries(rows=rows)

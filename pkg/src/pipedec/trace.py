"""Match-rate estimation from per-token prediction logs.

A trace is line-delimited JSON, one record per logged token position:

    {"example_id": str, "position": int, "early_topk": [int, ...],
     "final": int, "layer": int?}

``match_rate`` estimates p_hat, the fraction of positions whose final
token appears among the first k early candidates, with a Wilson score
interval at the 95% level (z = 1.96; chosen over the normal
approximation because it stays well-behaved near 0 and 1).  Records
from different examples are pooled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .analytic import (
    avg_compute_per_time_unit_halfdepth,
    avg_compute_per_token_halfdepth,
    expected_latency,
    expected_total_compute,
    per_token_latency_halfdepth,
)
from .core import DecodingConfig, DomainError, LatencyComputeReport, validate_config
from .rng import Stream

WILSON_Z95 = 1.959963984540054


class ParseError(ValueError):
    """A trace line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateIdError(ValueError):
    """early_topk contained the same token id twice."""


@dataclass(frozen=True)
class TraceRecord:
    example_id: str
    position: int               # 1-based token index within the example
    early_topk: tuple[int, ...]  # ranked early candidates, no duplicates
    final: int
    layer: int | None = None    # optional early-prediction layer tag

    def __post_init__(self) -> None:
        early = self.early_topk
        if type(early) is not tuple or any(type(t) is not int for t in early):
            early = tuple(int(t) for t in early)
            object.__setattr__(self, "early_topk", early)
        if self.position < 1:
            raise DomainError(f"position must be >= 1, got {self.position}")
        if len(set(early)) != len(early):
            raise DuplicateIdError(f"duplicate ids in early_topk: {early}")


@dataclass(frozen=True)
class BucketRow:
    lo: int       # first position of the bucket (inclusive)
    hi: int       # nominal last position of the bucket (inclusive)
    count: int
    matches: int
    p_hat: float


@dataclass(frozen=True)
class MatchRateReport:
    k: int
    total_positions: int
    matches: int
    p_hat: float
    ci95: tuple[float, float]
    buckets: tuple[BucketRow, ...] | None = None


def wilson_interval(matches: int, total: int, z: float = WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total < 1:
        raise DomainError("wilson_interval needs at least one observation")
    p_hat = matches / total
    denom = 1.0 + z * z / total
    center = (p_hat + z * z / (2 * total)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / total + z * z / (4 * total * total)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _record_from_obj(obj: dict, line_no: int) -> TraceRecord:
    try:
        example_id = obj["example_id"]
        position = obj["position"]
        early = obj["early_topk"]
        final = obj["final"]
    except KeyError as exc:
        raise ParseError(line_no, f"missing field {exc.args[0]!r}") from None
    if not isinstance(early, list):
        raise ParseError(line_no, "early_topk must be a list of token ids")
    try:
        return TraceRecord(
            example_id=str(example_id),
            position=int(position),
            early_topk=tuple(int(t) for t in early),
            final=int(final),
            layer=int(obj["layer"]) if obj.get("layer") is not None else None,
        )
    except DuplicateIdError:
        raise
    except (TypeError, ValueError, DomainError) as exc:
        raise ParseError(line_no, str(exc)) from None


def load_traces(source: str | Path | IO[str]) -> list[TraceRecord]:
    """Parse a JSONL trace in file order; blank lines are ignored."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_traces(fh)
    records = []
    for line_no, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise ParseError(line_no, "each line must be a JSON object")
        records.append(_record_from_obj(obj, line_no))
    return records


def save_traces(records: Iterable[TraceRecord], sink: str | Path | IO[str]) -> None:
    """Write records as JSONL; load_traces(save_traces(r)) is the identity."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8") as fh:
            save_traces(records, fh)
            return
    for r in records:
        obj = {
            "example_id": r.example_id,
            "position": r.position,
            "early_topk": list(r.early_topk),
            "final": r.final,
        }
        if r.layer is not None:
            obj["layer"] = r.layer
        sink.write(json.dumps(obj) + "\n")


def _check_k(records: Sequence[TraceRecord], k: int) -> None:
    if not records:
        raise DomainError("cannot estimate a match rate from zero records")
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    shortest = min(len(r.early_topk) for r in records)
    if k > shortest:
        raise DomainError(f"k={k} exceeds the shortest early_topk length {shortest}")


def match_rate(records: Sequence[TraceRecord], k: int) -> MatchRateReport:
    """Fraction of positions whose final token is among the first k candidates."""
    _check_k(records, k)
    matches = sum(1 for r in records if r.final in r.early_topk[:k])
    total = len(records)
    return MatchRateReport(
        k=k,
        total_positions=total,
        matches=matches,
        p_hat=matches / total,
        ci95=wilson_interval(matches, total),
    )


def match_rate_by_bucket(
    records: Sequence[TraceRecord], k: int, bucket_width: int
) -> MatchRateReport:
    """Overall report plus per-position-bucket rates ([1..w], [w+1..2w], ...)."""
    if bucket_width < 1:
        raise DomainError(f"bucket_width must be >= 1, got {bucket_width}")
    overall = match_rate(records, k)
    counts: dict[int, int] = {}
    hits: dict[int, int] = {}
    for r in records:
        b = (r.position - 1) // bucket_width
        counts[b] = counts.get(b, 0) + 1
        hits[b] = hits.get(b, 0) + (1 if r.final in r.early_topk[:k] else 0)
    rows = tuple(
        BucketRow(
            lo=b * bucket_width + 1,
            hi=(b + 1) * bucket_width,
            count=counts[b],
            matches=hits[b],
            p_hat=hits[b] / counts[b],
        )
        for b in sorted(counts)
    )
    return replace(overall, buckets=rows)


@dataclass(frozen=True)
class TraceForecast:
    """Latency/compute forecast from an estimated match rate.

    ``report`` evaluates the exact expectations at p_hat; the *_range
    pairs re-evaluate them at both interval endpoints (latency falls as
    the match rate rises, so ranges are returned low-to-high).
    """

    k: int
    p_hat: float
    ci95: tuple[float, float]
    report: LatencyComputeReport
    latency_range: tuple[float, float]
    compute_range: tuple[float, float]
    latency_per_token_norm: float
    compute_per_time_unit: float
    compute_per_token: float


def forecast_from_trace(
    records: Sequence[TraceRecord], k: int, d: int, d_bar: int, ell: int
) -> TraceForecast:
    """Plug the estimated match rate into the closed-form trade-off formulas."""
    rate = match_rate(records, k)

    def cfg(p: float) -> DecodingConfig:
        return validate_config(DecodingConfig(d, d_bar, k, ell, p), exact_regime=True)

    at_hat = cfg(rate.p_hat)
    lo_p, hi_p = rate.ci95
    return TraceForecast(
        k=k,
        p_hat=rate.p_hat,
        ci95=rate.ci95,
        report=LatencyComputeReport.from_totals(
            expected_latency(at_hat), expected_total_compute(at_hat), ell
        ),
        latency_range=(expected_latency(cfg(hi_p)), expected_latency(cfg(lo_p))),
        compute_range=(expected_total_compute(cfg(hi_p)), expected_total_compute(cfg(lo_p))),
        latency_per_token_norm=per_token_latency_halfdepth(rate.p_hat, d) / d,
        compute_per_time_unit=avg_compute_per_time_unit_halfdepth(rate.p_hat, k),
        compute_per_token=avg_compute_per_token_halfdepth(rate.p_hat, k),
    )


def report_to_json(report: MatchRateReport) -> str:
    payload: dict = {
        "k": report.k,
        "total_positions": report.total_positions,
        "matches": report.matches,
        "p_hat": report.p_hat,
        "ci95": list(report.ci95),
    }
    if report.buckets is not None:
        payload["buckets"] = [
            {"range": f"{b.lo}-{b.hi}", "count": b.count, "matches": b.matches, "p_hat": b.p_hat}
            for b in report.buckets
        ]
    return json.dumps(payload, indent=2) + "\n"


def report_to_csv(report: MatchRateReport) -> str:
    """Bucket table as columns per position range plus a Total column."""
    buckets = report.buckets or ()
    header = ["bucket"] + [f"{b.lo}-{b.hi}" for b in buckets] + ["Total"]
    p_row = ["p_hat"] + [repr(b.p_hat) for b in buckets] + [repr(report.p_hat)]
    count_row = ["count"] + [str(b.count) for b in buckets] + [str(report.total_positions)]
    match_row = ["matches"] + [str(b.matches) for b in buckets] + [str(report.matches)]
    return "\n".join(",".join(row) for row in (header, p_row, count_row, match_row)) + "\n"


def planted_trace(
    p_correct: float,
    n_positions: int,
    k: int,
    seed: int,
    positions_per_example: int = 16,
    vocab: int = 1000,
    layer: int | None = None,
) -> list[TraceRecord]:
    """Synthesize a trace whose per-position match outcomes are Bernoulli(p).

    Match bits come from stream 0 of ``seed`` and record content from
    stream 1, so the planted outcome sequence depends only on the seed.
    Useful for calibration tests and as CLI demo input.
    """
    if not (0.0 <= p_correct <= 1.0):
        raise DomainError(f"p_correct must lie in [0, 1], got {p_correct}")
    if k < 1 or k + 1 > vocab:
        raise DomainError(f"need 1 <= k < vocab, got k={k}, vocab={vocab}")
    bits = (Stream.from_seed(seed, 0).uniforms(n_positions) < p_correct).tolist()
    content = Stream.from_seed(seed, 1).uniforms(3 * n_positions)
    bases = (content[0::3] * (vocab - k - 1)).astype(np.int64).tolist()
    slots = (content[1::3] * k).astype(np.int64).tolist()
    offsets = (content[2::3] * (vocab - k)).astype(np.int64).tolist()
    example_ids = [
        f"ex{e:06d}" for e in range((n_positions + positions_per_example - 1) // positions_per_example)
    ]
    records = []
    for i in range(n_positions):
        base = bases[i]
        topk = tuple(range(base, base + k))  # base < vocab-k-1, so no wraparound
        if bits[i]:
            final = base + slots[i]
        else:
            final = (base + k + offsets[i]) % vocab
        records.append(
            TraceRecord(
                example_id=example_ids[i // positions_per_example],
                position=(i % positions_per_example) + 1,
                early_topk=topk,
                final=final,
                layer=layer,
            )
        )
    return records

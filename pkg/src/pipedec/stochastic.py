"""Sampling and Monte Carlo estimation of the run-length process.

Each token's early prediction matches independently with probability
p_correct, so the ell-1 match bits are i.i.d. Bernoulli(p), interior run
lengths are geometric with success probability 1-p (the last run is
whatever the Bernoulli tail produces, truncated at ell), and the run
count is 1 + Binomial(ell-1, 1-p).  ``monte_carlo`` estimates the
latency/compute expectations by replaying sample -> decompose -> cost
over per-trial counter streams: trial i always consumes the stream
derived from (seed, i), so chunked, serial, and parallel execution give
bit-identical summaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DecodingConfig,
    DomainError,
    LatencyComputeReport,
    MatchSequence,
    RunDecomposition,
    require_p,
    validate_config,
)
from .rng import Stream, counter_uniforms, stream_keys

_CHUNK = 16384  # trials per vectorized block; bounds the counter matrix at ~32 MB


def sample_match_sequence(stream: Stream | int, p_correct: float, ell: int) -> MatchSequence:
    """Draw the ell-1 independent Bernoulli(p) match bits of one generation.

    ``stream`` is either a Stream or a bare seed (meaning stream 0 of
    that seed).  Identical stream and arguments give identical bits.
    """
    p = float(p_correct)
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p_correct must lie in [0, 1], got {p_correct}")
    if ell < 1:
        raise DomainError(f"ell must be >= 1, got {ell}")
    if isinstance(stream, int):
        stream = Stream.from_seed(stream)
    u = stream.uniforms(ell - 1)
    return MatchSequence(tuple(bool(b) for b in (u < p)))


def decompose_runs(matches: MatchSequence) -> RunDecomposition:
    """Split a match sequence into maximal matched streaks, left to right."""
    lengths = [1]
    for bit in matches.bits:
        if bit:
            lengths[-1] += 1
        else:
            lengths.append(1)
    return RunDecomposition(tuple(lengths))


def matches_from_runs(runs: RunDecomposition) -> MatchSequence:
    """Inverse of decompose_runs: rebuild the unique generating match bits."""
    bits: list[bool] = []
    for i, x in enumerate(runs.run_lengths):
        bits.extend([True] * (x - 1))
        if i < runs.n_runs - 1:
            bits.append(False)
    return MatchSequence(tuple(bits))


def cost_of_runs(config: DecodingConfig, runs: RunDecomposition) -> LatencyComputeReport:
    """Exact latency and compute totals realized by a given run decomposition.

    A run of length X occupies the main process for d + (X-1)*d_bar time
    units and costs (d_bar + k*(d-d_bar))*X + (d-d_bar) compute; summed
    over runs the totals depend only on ell and the run count N.
    """
    validate_config(config, exact_regime=True)
    if runs.ell != config.ell:
        raise DomainError(
            f"run lengths sum to {runs.ell} but the config generates {config.ell} tokens"
        )
    d, d_bar, k, ell = config.d, config.d_bar, config.k, config.ell
    n = runs.n_runs
    total_latency = d_bar * ell + (d - d_bar) * n
    total_compute = (d_bar + k * (d - d_bar)) * ell + (d - d_bar) * n
    return LatencyComputeReport.from_totals(total_latency, total_compute, ell)


@dataclass(frozen=True)
class MonteCarloSummary:
    """Means and standard errors over independent seeded trials."""

    config: DecodingConfig
    trials: int
    seed: int
    mean_latency: float
    mean_compute: float
    mean_n_runs: float
    stderr_latency: float
    stderr_compute: float
    stderr_n_runs: float


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.shape[0]
    mean = float(values.mean())
    if n < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(n))


def monte_carlo(config: DecodingConfig, trials: int, seed: int) -> MonteCarloSummary:
    """Estimate expected latency/compute/run-count over ``trials`` generations.

    Trial i samples its match bits from the counter stream keyed by
    (seed, i) and prices them with cost_of_runs' closed forms, so the
    summary is reproducible bit for bit for a given seed.
    """
    validate_config(config, exact_regime=True)
    p = require_p(config)
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    d, d_bar, k, ell = config.d, config.d_bar, config.k, config.ell

    n_runs = np.empty(trials, dtype=np.int64)
    keys = stream_keys(seed, trials)
    for lo in range(0, trials, _CHUNK):
        hi = min(lo + _CHUNK, trials)
        if ell == 1:
            n_runs[lo:hi] = 1
            continue
        u = counter_uniforms(keys[lo:hi], ell - 1)
        failures = (ell - 1) - (u < p).sum(axis=1)
        n_runs[lo:hi] = 1 + failures

    latency = d_bar * ell + (d - d_bar) * n_runs
    compute = latency + k * (d - d_bar) * ell
    mean_lat, se_lat = _mean_stderr(latency.astype(np.float64))
    mean_cmp, se_cmp = _mean_stderr(compute.astype(np.float64))
    mean_n, se_n = _mean_stderr(n_runs.astype(np.float64))
    return MonteCarloSummary(
        config=config,
        trials=trials,
        seed=seed,
        mean_latency=mean_lat,
        mean_compute=mean_cmp,
        mean_n_runs=mean_n,
        stderr_latency=se_lat,
        stderr_compute=se_cmp,
        stderr_n_runs=se_n,
    )


def summary_to_json(summary: MonteCarloSummary) -> str:
    cfg = summary.config
    payload = {
        "config": {
            "d": cfg.d,
            "d_bar": cfg.d_bar,
            "k": cfg.k,
            "ell": cfg.ell,
            "p_correct": cfg.p_correct,
        },
        "trials": summary.trials,
        "seed": summary.seed,
        "mean_latency": summary.mean_latency,
        "mean_compute": summary.mean_compute,
        "mean_n_runs": summary.mean_n_runs,
        "stderr_latency": summary.stderr_latency,
        "stderr_compute": summary.stderr_compute,
        "stderr_n_runs": summary.stderr_n_runs,
    }
    return json.dumps(payload, indent=2) + "\n"

"""Shared domain types for pipelined-decoding analysis.

All types are immutable value objects and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass


class DomainError(ValueError):
    """A value violates one of the model's domain constraints."""


@dataclass(frozen=True)
class DecodingConfig:
    """Parameters of one pipelined-decoding setup.

    The time unit throughout the package is the cost of one layer's
    forward computation, so a full forward pass costs ``d`` time units.
    """

    d: int                            # total layer count
    d_bar: int                       # layer at which the early prediction is read
    k: int                           # speculative sub-processes (k+1 compute units total)
    ell: int                         # tokens to generate
    p_correct: float | None = None   # per-token match probability; None for trace-driven runs

    def __post_init__(self) -> None:
        if self.p_correct is not None:
            p = float(self.p_correct)
            if not (0.0 <= p <= 1.0):
                raise DomainError(f"p_correct must lie in [0, 1], got {self.p_correct}")
            object.__setattr__(self, "p_correct", p)


def validate_config(config: DecodingConfig, exact_regime: bool = False) -> DecodingConfig:
    """Check every config invariant and return the config unchanged.

    With ``exact_regime`` the early layer must additionally sit at or past
    the midpoint of the network (2*d_bar >= d, integer comparison), which
    is the regime in which the exact latency/compute accounting holds.

    Raises DomainError naming the violated constraint.
    """
    if config.d < 1:
        raise DomainError(f"d must be >= 1, got {config.d}")
    if config.d_bar < 1:
        raise DomainError(f"d_bar must be >= 1, got {config.d_bar}")
    if config.d_bar > config.d:
        raise DomainError(f"d_bar must be <= d, got d_bar={config.d_bar} > d={config.d}")
    if config.ell < 1:
        raise DomainError(f"ell must be >= 1, got {config.ell}")
    if config.k < 0:
        raise DomainError(f"k must be >= 0, got {config.k}")
    if config.p_correct is not None and not (0.0 <= config.p_correct <= 1.0):
        raise DomainError(f"p_correct must lie in [0, 1], got {config.p_correct}")
    if exact_regime and 2 * config.d_bar < config.d:
        raise DomainError(
            f"exact accounting requires d_bar >= d/2, got d_bar={config.d_bar}, d={config.d}"
        )
    return config


def require_p(config: DecodingConfig) -> float:
    """Return p_correct, rejecting configs that were built without one."""
    if config.p_correct is None:
        raise DomainError("this operation needs p_correct, but the config has none")
    return config.p_correct


@dataclass(frozen=True)
class MatchSequence:
    """Per-position early-prediction outcomes for an ell-token generation.

    ``bits`` has exactly ell-1 entries; bits[t] is True iff the early
    top-k candidates for (1-based) token t+1 contained its final token,
    in which case token t+2 starts from the handed-off partial state.
    """

    bits: tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))

    @property
    def ell(self) -> int:
        return len(self.bits) + 1

    @classmethod
    def from_string(cls, text: str) -> "MatchSequence":
        """Parse a compact 'TTFT...' form (case-insensitive, 1/0 accepted)."""
        bits = []
        for ch in text.strip():
            if ch in "Tt1":
                bits.append(True)
            elif ch in "Ff0":
                bits.append(False)
            else:
                raise DomainError(f"match string may only contain T/F/1/0, got {ch!r}")
        return cls(tuple(bits))

    def to_string(self) -> str:
        return "".join("T" if b else "F" for b in self.bits)


@dataclass(frozen=True)
class RunDecomposition:
    """Lengths of the maximal streaks of consecutively matched tokens.

    The number of runs is one more than the number of failed matches in
    the source MatchSequence, and the lengths sum to ell.
    """

    run_lengths: tuple[int, ...]

    def __post_init__(self) -> None:
        lengths = tuple(int(x) for x in self.run_lengths)
        if not lengths:
            raise DomainError("a run decomposition needs at least one run")
        if any(x < 1 for x in lengths):
            raise DomainError(f"every run length must be >= 1, got {lengths}")
        object.__setattr__(self, "run_lengths", lengths)

    @property
    def n_runs(self) -> int:
        return len(self.run_lengths)

    @property
    def ell(self) -> int:
        return sum(self.run_lengths)


@dataclass(frozen=True)
class LatencyComputeReport:
    """Totals and derived averages for one generation schedule.

    total_latency is in time units, total_compute in compute-unit x
    time-units; per_token_latency = total_latency / ell and
    avg_compute_per_time_unit = total_compute / total_latency hold by
    construction.
    """

    total_latency: float
    total_compute: float
    per_token_latency: float
    avg_compute_per_time_unit: float
    avg_compute_per_token: float

    @classmethod
    def from_totals(
        cls, total_latency: float, total_compute: float, ell: int
    ) -> "LatencyComputeReport":
        if ell < 1:
            raise DomainError(f"ell must be >= 1, got {ell}")
        return cls(
            total_latency=total_latency,
            total_compute=total_compute,
            per_token_latency=total_latency / ell,
            avg_compute_per_time_unit=total_compute / total_latency,
            avg_compute_per_token=total_compute / ell,
        )

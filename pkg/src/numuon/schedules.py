"""Learning-rate and rank-fraction schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError, InvalidStep


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup followed by cosine decay or by a warmup-stable-decay profile.

    ``wsd`` holds ``base_lr`` for ``stable_fraction`` of the post-warmup steps and
    then decays linearly to ``final_lr_ratio * base_lr`` at the last step.
    """

    kind: str = "cosine"
    base_lr: float = 0.02
    warmup_steps: int = 0
    total_steps: int = 1000
    stable_fraction: float = 0.8
    final_lr_ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cosine", "wsd", "constant"):
            raise ConfigError(f"unknown lr schedule kind {self.kind!r}")
        if not self.base_lr > 0:
            raise ConfigError("base_lr must be positive")
        if self.total_steps < 1 or not 0 <= self.warmup_steps < self.total_steps:
            raise ConfigError("need 0 <= warmup_steps < total_steps")
        if not 0 < self.stable_fraction <= 1:
            raise ConfigError("stable_fraction must lie in (0, 1]")
        if self.final_lr_ratio < 0:
            raise ConfigError("final_lr_ratio must be nonnegative")

    @property
    def decay_start(self) -> int:
        return self.warmup_steps + int(round(self.stable_fraction * (self.total_steps - self.warmup_steps)))


def lr_at(sched: LrSchedule, t: int) -> float:
    if not 0 <= t < sched.total_steps:
        raise InvalidStep(f"step {t} outside [0, {sched.total_steps})")
    base = sched.base_lr
    final = sched.final_lr_ratio * base
    w = sched.warmup_steps
    if t < w:
        # ramp lands on base_lr at t == w without a zero-lr first step
        return base * (t + 1) / (w + 1)
    if sched.kind == "constant":
        return base
    if sched.kind == "cosine":
        span = sched.total_steps - 1 - w
        progress = (t - w) / span if span > 0 else 0.0
        return final + (base - final) * 0.5 * (1.0 + math.cos(math.pi * progress))
    start = sched.decay_start
    if t < start:
        return base
    n_decay = sched.total_steps - start
    return base + (final - base) * (t - start + 1) / n_decay


@dataclass(frozen=True)
class RankSchedule:
    """Fraction-of-full-rank schedule for the top-k update.

    ``cosine_hold`` keeps ``r_start`` for ``hold_steps`` and then follows a half
    cosine to ``r_end`` over ``anneal_steps`` (default ``max(1, T - T_h)``),
    staying at ``r_end`` afterwards.
    """

    kind: str = "cosine_hold"
    r_start: float = 1.0
    r_end: float = 0.25
    hold_steps: int = 0
    total_steps: int = 1000
    anneal_steps: int | None = None
    breakpoints: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("fixed", "piecewise", "cosine_hold"):
            raise ConfigError(f"unknown rank schedule kind {self.kind!r}")
        if self.total_steps < 1 or self.hold_steps < 0:
            raise ConfigError("total_steps must be >= 1 and hold_steps >= 0")
        for r in (self.r_start, self.r_end):
            if not 0 < r <= 1:
                raise ConfigError(f"rank fractions must lie in (0, 1], got {r}")
        if self.kind == "piecewise":
            bp = tuple((int(s), float(f)) for s, f in self.breakpoints)
            if not bp or bp[0][0] != 0:
                raise ConfigError("piecewise breakpoints must start at step 0")
            if any(b[0] <= a[0] for a, b in zip(bp, bp[1:])):
                raise ConfigError("piecewise breakpoints must be strictly increasing")
            if any(not 0 < f <= 1 for _, f in bp):
                raise ConfigError("piecewise fractions must lie in (0, 1]")
            object.__setattr__(self, "breakpoints", bp)
        if self.anneal_steps is not None and self.anneal_steps < 1:
            raise ConfigError("anneal_steps must be >= 1")

    @property
    def decay_steps(self) -> int:
        if self.anneal_steps is not None:
            return self.anneal_steps
        return max(1, self.total_steps - self.hold_steps)


def rank_fraction_at(sched: RankSchedule, t: int) -> float:
    if not 0 <= t < sched.total_steps:
        raise InvalidStep(f"step {t} outside [0, {sched.total_steps})")
    if sched.kind == "fixed":
        return sched.r_start
    if sched.kind == "piecewise":
        frac = sched.breakpoints[0][1]
        for step, f in sched.breakpoints:
            if t >= step:
                frac = f
            else:
                break
        return frac
    if t < sched.hold_steps:
        return sched.r_start
    td = sched.decay_steps
    progress = (t - sched.hold_steps) / td
    if progress >= 1.0:
        return sched.r_end
    # anchored on r_start so the value at t == hold_steps is exact
    return sched.r_start - (sched.r_start - sched.r_end) * (1.0 - math.cos(math.pi * progress)) / 2.0


def rank_at(fraction: float, d_in: int, d_out: int) -> int:
    """``ceil(fraction * min(d_in, d_out))`` in exact arithmetic, clamped to ``[1, min]``."""
    q = min(d_in, d_out)
    k = math.ceil(Fraction(fraction) * q)
    return max(1, min(q, k))

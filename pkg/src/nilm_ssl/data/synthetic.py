"""Seeded synthetic households built from finite-state appliance models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigurationError
from .series import PERIOD, AlignedHousehold, PowerSeries

MINUTES_PER_DAY = 1440
DEFAULT_START = 1388534400  # 2014-01-01T00:00:00Z

TWO_STATE = "two-state"
CYCLIC = "cyclic"


@dataclass(frozen=True)
class SyntheticApplianceSpec:
    """An appliance cycling OFF -> level 1 -> ... -> level k -> OFF.

    ``dwell_minutes[i]`` is the mean time spent in state ``i`` (state 0 is
    OFF).  When ``activation_rate`` (events/day) is set, the OFF dwell is
    derived from it instead.
    """

    name: str
    power_levels: tuple
    dwell_minutes: tuple
    structure: str = TWO_STATE
    activation_rate: Optional[float] = None

    def __post_init__(self):
        levels, dwell = tuple(self.power_levels), tuple(self.dwell_minutes)
        object.__setattr__(self, "power_levels", levels)
        object.__setattr__(self, "dwell_minutes", dwell)
        if len(levels) < 2 or levels[0] != 0:
            raise ConfigurationError(f"{self.name}: need an OFF level of 0 W and at least one ON level")
        if any(p < 0 for p in levels):
            raise ConfigurationError(f"{self.name}: power levels must be non-negative")
        if len(dwell) != len(levels):
            raise ConfigurationError(f"{self.name}: one dwell time per state required")
        if self.structure == TWO_STATE and len(levels) != 2:
            raise ConfigurationError(f"{self.name}: two-state appliance needs exactly 2 levels")
        if self.structure not in (TWO_STATE, CYCLIC):
            raise ConfigurationError(f"{self.name}: unknown structure {self.structure!r}")
        if any(d < 1 for d in self.mean_dwell):
            raise ConfigurationError(f"{self.name}: dwell times must be >= 1 minute")

    @property
    def mean_dwell(self) -> tuple:
        if self.activation_rate is None:
            return self.dwell_minutes
        if self.activation_rate <= 0:
            raise ConfigurationError(f"{self.name}: activation rate must be positive")
        off = MINUTES_PER_DAY / self.activation_rate - sum(self.dwell_minutes[1:])
        return (off,) + self.dwell_minutes[1:]

    @property
    def duty_cycle(self) -> float:
        d = self.mean_dwell
        return sum(d[1:]) / sum(d)

    @property
    def mean_power(self) -> float:
        d = self.mean_dwell
        return sum(p * t for p, t in zip(self.power_levels, d)) / sum(d)


def simulate_appliance(spec: SyntheticApplianceSpec, minutes: int, rng: np.random.Generator) -> np.ndarray:
    """One-minute power trace of ``spec`` started in its stationary regime."""
    dwell = np.asarray(spec.mean_dwell, dtype=np.float64)
    levels = np.asarray(spec.power_levels, dtype=np.float64)
    k = len(levels)
    # geometric dwell times are memoryless, so a state drawn with probability
    # proportional to its mean dwell is already stationary
    state = int(rng.choice(k, p=dwell / dwell.sum()))
    trace = np.empty(minutes)
    t = 0
    while t < minutes:
        d = int(rng.geometric(1.0 / dwell[state]))
        trace[t:t + d] = levels[state]
        t += d
        state = (state + 1) % k
    return trace


def generate_synthetic(
    specs: Sequence[SyntheticApplianceSpec],
    days: int,
    seed: int,
    noise_std: float = 0.0,
    start: int = DEFAULT_START,
    name: str = "synthetic",
) -> AlignedHousehold:
    """Household whose aggregate is the sum of appliance traces plus Gaussian noise.

    The noise-free sum is exact; with noise the aggregate is clamped at 0 W.
    """
    if days < 1:
        raise ConfigurationError("days must be >= 1")
    if noise_std < 0:
        raise ConfigurationError("noise std must be >= 0")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigurationError("appliance names must be unique")
    minutes = int(days) * MINUTES_PER_DAY
    apps = {}
    total = np.zeros(minutes)
    for i, spec in enumerate(specs):
        trace = simulate_appliance(spec, minutes, np.random.default_rng([seed, i]))
        apps[spec.name] = trace
        total = total + trace
    if noise_std > 0:
        noise = np.random.default_rng([seed, 1_000_003]).normal(0.0, noise_std, minutes)
        total = np.maximum(total + noise, 0.0)
    valid = np.ones(minutes, dtype=bool)
    agg = PowerSeries(start, PERIOD, total, valid.copy())
    series = {k: PowerSeries(start, PERIOD, v, valid.copy()) for k, v in apps.items()}
    return AlignedHousehold(agg, series, name)


def desk_appliances() -> list:
    """The three-appliance set used by the bundled desk-scale case."""
    return [
        SyntheticApplianceSpec("fridge", (0, 100), (70, 30)),
        SyntheticApplianceSpec("kettle", (0, 2000), (1, 3), activation_rate=6.0),
        SyntheticApplianceSpec("washer", (0, 500, 1500), (1, 40, 20), CYCLIC, activation_rate=1.0),
    ]

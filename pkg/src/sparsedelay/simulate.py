"""Synthetic daily pairs with a known delay, and parameter fitting.

The generator composes three pieces: a two-state Markov chain for wet/dry
occurrences, exponential wet-day amounts, and a unit plateau carrying the
delay. The first series is the plateau plus the weather process; the second
is the shifted plateau plus small Gaussian noise. Fitting goes the other way:
transition frequencies from consecutive-pair counts and exponential rates by
maximum likelihood.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySupport, NonPositiveAmount, TooShort

# cumulative month ends on a 366-day calendar
_MONTH_CUM = np.array(
    [31, 60, 91, 121, 152, 182, 213, 244, 274, 305, 335, 366]
)

MONTH_NAMES = (
    "jan", "feb", "mar", "apr", "may", "jun",
    "jul", "aug", "sep", "oct", "nov", "dec",
)


def month_of_day(day) -> np.ndarray:
    """Month index 0..11 for 1-based days; days past 366 wrap around."""
    wrapped = (np.asarray(day, dtype=np.int64) - 1) % 366 + 1
    return np.searchsorted(_MONTH_CUM, wrapped, side="left")


@dataclass(frozen=True)
class TransitionMatrix:
    """Two-state daily weather chain; rows are (dry ->, wet ->)."""

    p_dry_wet: float
    p_dry_dry: float
    p_wet_wet: float
    p_wet_dry: float
    defaulted_rows: tuple = field(default=(), compare=False)

    def __post_init__(self):
        entries = (self.p_dry_wet, self.p_dry_dry, self.p_wet_wet, self.p_wet_dry)
        for p in entries:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"transition probability {p} outside [0, 1]")
        if abs(self.p_dry_dry + self.p_dry_wet - 1.0) > 1e-9:
            raise ValueError("dry row does not sum to 1")
        if abs(self.p_wet_wet + self.p_wet_dry - 1.0) > 1e-9:
            raise ValueError("wet row does not sum to 1")

    @classmethod
    def from_rates(cls, p_dry_wet: float, p_wet_dry: float) -> "TransitionMatrix":
        return cls(p_dry_wet, 1.0 - p_dry_wet, 1.0 - p_wet_dry, p_wet_dry)

    @property
    def stationary_wet(self) -> float:
        """Long-run wet-day probability; 0 for the doubly absorbing chain."""
        denom = self.p_dry_wet + self.p_wet_dry
        if denom == 0.0:
            return 0.0
        return self.p_dry_wet / denom


@dataclass(frozen=True)
class AmountModel:
    """Exponential wet-day amounts: one rate per month, or one overall.

    Rates are in 1/mm; the mean amount is 1/rate.
    """

    rates: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if len(rates) not in (1, 12):
            raise ValueError("need exactly 1 or 12 rates")
        if any(r <= 0.0 for r in rates):
            raise NonPositiveAmount("rates must be positive")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def scalar(cls, rate: float) -> "AmountModel":
        return cls((rate,))

    @classmethod
    def monthly(cls, rates) -> "AmountModel":
        rates = tuple(rates)
        if len(rates) != 12:
            raise ValueError(f"need 12 monthly rates, got {len(rates)}")
        return cls(rates)

    def mean_for_day(self, day) -> np.ndarray:
        """Mean amount (1/rate) for 1-based days."""
        rates = np.asarray(self.rates)
        if rates.size == 1:
            return np.full(np.asarray(day).shape, 1.0 / rates[0])
        return 1.0 / rates[month_of_day(day)]


@dataclass(frozen=True)
class ImpulseSpec:
    """Unit plateau on 1-based days [support_start, support_end), delayed copy."""

    tau: int
    n: int = 366
    support_start: int = 110
    support_end: int = 183
    sigma_d: float = 0.0075

    def __post_init__(self):
        if self.n < 2:
            raise TooShort(f"series length {self.n} is too short")
        if not 1 <= self.support_start < self.support_end <= self.n:
            raise ValueError(
                f"support [{self.support_start}, {self.support_end}) must sit "
                f"inside [1, {self.n}]"
            )
        if self.sigma_d < 0.0:
            raise ValueError("noise sd must be nonnegative")


@dataclass(frozen=True)
class SimulatedPair:
    """One synthetic pair with its generating delay and seed on record."""

    x: np.ndarray
    y: np.ndarray
    true_tau: int
    seed: object
    occurrences: np.ndarray


def _as_binary(occurrences) -> np.ndarray:
    occ = np.asarray(occurrences)
    if occ.ndim != 1:
        raise ValueError("occurrence sequence must be one-dimensional")
    occ = occ.astype(np.int64)
    if not np.isin(occ, (0, 1)).all():
        raise ValueError("occurrences must be 0/1")
    return occ


def _from_counts(c_dd, c_dw, c_ww, c_wd) -> TransitionMatrix:
    flagged = []
    dry_total = c_dd + c_dw
    wet_total = c_ww + c_wd
    if dry_total:
        p_dw, p_dd = c_dw / dry_total, c_dd / dry_total
    else:
        p_dw, p_dd = 0.0, 1.0
        flagged.append("dry")
    if wet_total:
        p_ww, p_wd = c_ww / wet_total, c_wd / wet_total
    else:
        p_ww, p_wd = 1.0, 0.0
        flagged.append("wet")
    return TransitionMatrix(p_dw, p_dd, p_ww, p_wd, tuple(flagged))


def estimate_transition_matrix(occurrences) -> TransitionMatrix:
    """Transition frequencies from consecutive pairs of a 0/1 sequence.

    A state that never occurs as a transition origin gets an absorbing row
    (stay put with probability 1), recorded in defaulted_rows.
    """
    occ = _as_binary(occurrences)
    if occ.size < 2:
        raise TooShort("need at least 2 days to count transitions")
    return estimate_transition_matrix_pooled([occ])


def estimate_transition_matrix_pooled(sequences) -> TransitionMatrix:
    """Transition frequencies pooled over several 0/1 sequences.

    Counts never straddle a sequence boundary, so separate pixels or years
    can be pooled without creating phantom transitions.
    """
    counts = np.zeros(4, dtype=np.int64)
    for occurrences in sequences:
        occ = _as_binary(occurrences)
        if occ.size < 2:
            continue
        prev, curr = occ[:-1], occ[1:]
        counts[0] += ((prev == 0) & (curr == 0)).sum()
        counts[1] += ((prev == 0) & (curr == 1)).sum()
        counts[2] += ((prev == 1) & (curr == 1)).sum()
        counts[3] += ((prev == 1) & (curr == 0)).sum()
    if counts.sum() == 0:
        raise TooShort("no consecutive-day pairs to count transitions from")
    return _from_counts(*(int(c) for c in counts))


def fit_exponential_rate(amounts) -> float:
    """Maximum-likelihood exponential rate: 1 over the sample mean."""
    arr = np.asarray(amounts, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise TooShort("need at least one amount")
    if (arr <= 0.0).any():
        raise NonPositiveAmount("amounts must be positive")
    return float(1.0 / arr.mean())


def simulate_occurrences(tm: TransitionMatrix, n: int, seed) -> np.ndarray:
    """Sample the chain for n days, starting from its stationary law.

    Consumes exactly n uniform draws: one for the initial state, one per
    subsequent step.
    """
    if n < 1:
        raise ValueError("need at least one day")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    occ = np.empty(n, dtype=np.int64)
    occ[0] = 1 if u[0] < tm.stationary_wet else 0
    p_dw, p_ww = tm.p_dry_wet, tm.p_wet_wet
    for t in range(1, n):
        if occ[t - 1] == 0:
            occ[t] = 1 if u[t] < p_dw else 0
        else:
            occ[t] = 1 if u[t] < p_ww else 0
    return occ


def impulse(spec: ImpulseSpec) -> tuple[np.ndarray, np.ndarray]:
    """The plateau f and its delayed copy g, truncated at the boundary."""
    f = np.zeros(spec.n)
    f[spec.support_start - 1 : spec.support_end - 1] = 1.0
    lo = max(spec.support_start + spec.tau, 1)
    hi = min(spec.support_end + spec.tau, spec.n + 1)
    if lo >= hi:
        raise EmptySupport(
            f"delay {spec.tau} pushes the whole plateau outside [1, {spec.n}]"
        )
    g = np.zeros(spec.n)
    g[lo - 1 : hi - 1] = 1.0
    return f, g


def simulate_pair(spec: ImpulseSpec, tm: TransitionMatrix, amount_mean, seed) -> SimulatedPair:
    """One synthetic pair: x = plateau + wet-day amounts, y = delayed plateau + noise.

    amount_mean is the mean of the exponential wet-day perturbation, either a
    positive scalar or an AmountModel evaluated per day. Draw order is fixed
    for reproducibility: n uniforms for the chain, one exponential per wet
    day, then n normals for the response noise.
    """
    rng = np.random.default_rng(seed)
    occ = simulate_occurrences(tm, spec.n, rng)
    f, g = impulse(spec)
    wet = occ == 1
    if isinstance(amount_mean, AmountModel):
        days = np.arange(1, spec.n + 1)
        scale = amount_mean.mean_for_day(days)[wet]
    else:
        if amount_mean <= 0.0:
            raise NonPositiveAmount("amount mean must be positive")
        scale = np.full(int(wet.sum()), float(amount_mean))
    x = f.copy()
    x[wet] += rng.exponential(scale)
    y = g + rng.normal(0.0, spec.sigma_d, spec.n)
    recorded = None if isinstance(seed, np.random.Generator) else seed
    return SimulatedPair(x, y, spec.tau, recorded, occ)

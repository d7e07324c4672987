"""Full-duplex decode-and-forward relay powered by time-switching harvesting.

Link 1 is source to relay, link 2 relay to destination, link 3 the relay's
loop-back self-interference channel. The relay harvests for a fraction
``alpha`` of each frame and spends the rest relaying.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .fading import KappaMuParams, sample


class ParameterError(ValueError):
    """A system parameter violates its invariant; ``field`` names it."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SystemParams:
    link1: KappaMuParams = field(default_factory=KappaMuParams)
    link2: KappaMuParams = field(default_factory=KappaMuParams)
    link3: KappaMuParams = field(default_factory=KappaMuParams)
    ps: float = 0.5
    eta: float = 1.0
    alpha: float = 0.06
    d1: float = 4.0
    d2: float = 4.0
    xi1: float = 2.7
    xi2: float = 2.7
    # accepted for completeness; the loop-back link carries no path-loss term
    xi3: float = 2.7
    sigma_d2: float = 0.01
    # accepted for completeness; the relay hop is interference-limited
    sigma_r: float = 0.01
    c_th: float = 0.2

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, KappaMuParams):
                continue
            if not math.isfinite(value):
                raise ParameterError(f.name, f"must be finite, got {value}")
        positive = ("ps", "d1", "d2", "xi1", "xi2", "xi3", "sigma_d2", "sigma_r")
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ParameterError(name, f"must be > 0, got {getattr(self, name)}")
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError("eta", f"must lie in (0, 1], got {self.eta}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha", f"must lie in (0, 1), got {self.alpha}")
        if self.c_th < 0.0:
            raise ParameterError("c_th", f"must be >= 0, got {self.c_th}")

    @property
    def links(self):
        return (self.link1, self.link2, self.link3)

    @property
    def zeta(self) -> float:
        return self.eta * self.alpha / (1.0 - self.alpha)

    @property
    def upsilon(self) -> float:
        """SNR threshold equivalent to the rate threshold c_th."""
        return math.expm1(self.c_th / (1.0 - self.alpha) * math.log(2.0))

    @property
    def a(self) -> float:
        """Destination SNR per unit channel-power product h1^2 h2^2."""
        return self.zeta * self.ps / (self.d1 ** self.xi1 * self.d2 ** self.xi2 * self.sigma_d2)

    @property
    def b(self) -> float:
        return (1.0 - self.alpha) / (self.eta * self.alpha)


def relay_power(sys: SystemParams, h1_sq):
    """Power the relay transmits from one frame's harvested energy."""
    return sys.zeta * sys.ps * h1_sq / sys.d1 ** sys.xi1


def snr_relay(sys: SystemParams, h3_sq):
    """Relay SNR 1/(zeta h3^2); ``inf`` when the loop-back gain is exactly zero."""
    h3_sq = np.asarray(h3_sq, dtype=float)
    denom = sys.zeta * h3_sq
    out = np.divide(1.0, denom, out=np.full_like(denom, np.inf), where=denom > 0.0)
    return float(out) if out.ndim == 0 else out


def snr_dest(sys: SystemParams, h1_sq, h2_sq):
    return sys.a * h1_sq * h2_sq


def capacity(sys: SystemParams, snr):
    """Instantaneous rate in bits/s/Hz over the (1 - alpha) information slot."""
    return (1.0 - sys.alpha) * np.log2(1.0 + snr)


@dataclass(frozen=True)
class MonteCarloReport:
    estimate: float
    stderr: float
    trials: int
    seed: int
    workers: int = 1


def _count_outages(sys: SystemParams, trials: int, seed_seq: np.random.SeedSequence,
                   batch: int) -> int:
    rng = np.random.default_rng(seed_seq)
    outages = 0
    remaining = trials
    while remaining > 0:
        n = min(batch, remaining)
        x = sample(sys.link1, rng, n)
        y = sample(sys.link2, rng, n)
        z = sample(sys.link3, rng, n)
        c_r = capacity(sys, snr_relay(sys, z))
        c_d = capacity(sys, snr_dest(sys, x, y))
        outages += int(np.count_nonzero(np.minimum(c_r, c_d) < sys.c_th))
        remaining -= n
    return outages


def mc_outage(sys: SystemParams, trials: int, seed: int = 0, workers: int = 1,
              batch: int = 1 << 18) -> MonteCarloReport:
    """Monte Carlo estimate of Pr[min(C_r, C_d) < c_th].

    Trials are split across ``workers`` independent sub-streams spawned from
    ``seed``; the estimate depends only on (seed, trials, workers).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    children = np.random.SeedSequence(seed).spawn(workers)
    shares = [trials // workers + (i < trials % workers) for i in range(workers)]
    if workers == 1:
        counts = [_count_outages(sys, shares[0], children[0], batch)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(lambda args: _count_outages(sys, *args, batch),
                                   zip(shares, children)))
    estimate = sum(counts) / trials
    stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
    return MonteCarloReport(estimate, stderr, trials, seed, workers)

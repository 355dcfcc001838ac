"""Message-delay and replica service-time models."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import RngStream


class LatencyModel:
    """Base class for positive integer-microsecond delay distributions."""

    def sample(self, rng: RngStream) -> int:
        raise NotImplementedError

    @staticmethod
    def parse(text: str) -> "LatencyModel":
        """Parse ``const:D``, ``lognormal:MEDIAN:SIGMA`` or ``empirical:A,B,C``."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.lower()
        try:
            if kind in ("const", "constant"):
                return Constant(int(rest))
            if kind == "lognormal":
                median, sigma = rest.split(":")
                return LogNormal(float(median), float(sigma))
            if kind == "empirical":
                return Empirical(tuple(int(x) for x in rest.split(",")))
        except ValueError as exc:
            raise ValueError(f"bad latency model {text!r}: {exc}") from None
        raise ValueError(f"unknown latency model {text!r}")


@dataclass(frozen=True)
class Constant(LatencyModel):
    delay_us: int

    def __post_init__(self):
        if self.delay_us <= 0:
            raise ValueError("constant delay must be positive")

    def sample(self, rng: RngStream) -> int:
        return self.delay_us

    def __str__(self) -> str:
        return f"const:{self.delay_us}"


@dataclass(frozen=True)
class LogNormal(LatencyModel):
    """Log-normal delay parameterized by its median rather than its mean."""

    median_us: float
    sigma: float

    def __post_init__(self):
        if self.median_us <= 0 or self.sigma < 0:
            raise ValueError("lognormal needs median > 0 and sigma >= 0")

    def sample(self, rng: RngStream) -> int:
        return max(1, round(self.median_us * math.exp(self.sigma * rng.gauss())))

    def __str__(self) -> str:
        return f"lognormal:{self.median_us:g}:{self.sigma:g}"


@dataclass(frozen=True)
class Empirical(LatencyModel):
    samples: tuple[int, ...]

    def __post_init__(self):
        if not self.samples or min(self.samples) <= 0:
            raise ValueError("empirical model needs positive samples")

    def sample(self, rng: RngStream) -> int:
        return self.samples[rng.randrange(len(self.samples))]

    def __str__(self) -> str:
        return "empirical:" + ",".join(map(str, self.samples))


@dataclass(frozen=True)
class ServiceModel:
    read: LatencyModel
    write: LatencyModel


@dataclass(frozen=True)
class NetworkModel:
    """All timing knobs of the simulated cluster.

    ``one_way`` applies to every coordinator-replica message, ``local_hop``
    to the client-coordinator hop on a host.
    """

    one_way: LatencyModel
    local_hop: LatencyModel
    service: ServiceModel


# Service sigma is wider than a pure-CPU model would suggest: the heavy tail
# is what separates QUORUM from ONE latency and produces replica lag beyond
# the 2ms noise threshold.
DEFAULT_ONE_WAY = "lognormal:175:0.15"
DEFAULT_READ_SERVICE = "lognormal:600:1.3"
DEFAULT_WRITE_SERVICE = "lognormal:300:1.3"
DEFAULT_LOCAL_HOP = "const:50"


def default_network() -> NetworkModel:
    return NetworkModel(
        one_way=LatencyModel.parse(DEFAULT_ONE_WAY),
        local_hop=LatencyModel.parse(DEFAULT_LOCAL_HOP),
        service=ServiceModel(
            read=LatencyModel.parse(DEFAULT_READ_SERVICE),
            write=LatencyModel.parse(DEFAULT_WRITE_SERVICE),
        ),
    )


def sample_delay(model: LatencyModel, rng: RngStream) -> int:
    return model.sample(rng)

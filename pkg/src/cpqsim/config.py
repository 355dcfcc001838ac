"""Flat ``key = value`` experiment configuration with named profiles."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .core import ConsistencyLevel, config_digest
from .gamma import DEFAULT_THRESHOLD_US
from .metrics import SlaSpec
from .netmodel import (
    DEFAULT_LOCAL_HOP, DEFAULT_ONE_WAY, DEFAULT_READ_SERVICE, DEFAULT_WRITE_SERVICE,
    LatencyModel, NetworkModel, ServiceModel,
)
from .policy import AD, CPQ, Fixed, PolicySpec
from .workload import WorkloadConfig

ENV_CONFIG = "CPQSIM_CONFIG"

DEFAULTS: dict[str, str] = {
    "run.seed": "42",
    "cluster.hosts": "2",
    "store.rf": "3",
    "store.read_repair": "none",
    "net.one_way": DEFAULT_ONE_WAY,
    "svc.read": DEFAULT_READ_SERVICE,
    "svc.write": DEFAULT_WRITE_SERVICE,
    "local.hop": DEFAULT_LOCAL_HOP,
    "wl.read_fraction": "0.8",
    "wl.value_bytes": "128",
    "wl.dist": "latest",
    "wl.keyspace": "auto",
    "wl.theta": "0.99",
    "wl.hot_fraction": "0.2",
    "wl.hot_op_fraction": "0.8",
    "wl.clients": "128",
    "wl.target_kops": "1",
    "wl.duration_s": "10",
    "wl.skew_us": "0",
    "policy.kind": "fixed",
    "policy.read": "ONE",
    "policy.write": "ONE",
    "policy.p": "0",
    "policy.low": "ONE",
    "policy.high": "QUORUM",
    "policy.read_delay_ms": "0",
    "policy.write_delay_ms": "0",
    "gamma.threshold_us": str(DEFAULT_THRESHOLD_US),
    "metrics.p95_mode": "global",
    "sla.L_ms": "",
    "sla.X": "",
    "out.trace": "trace.csv",
    "out.report": "report.json",
}

PROFILES: dict[str, dict[str, str]] = {
    "desk": {},
    "paper": {
        "cluster.hosts": "6",
        "wl.clients": "768",
        "wl.target_kops": "5",
        "wl.duration_s": "60",
    },
}

# Keyspace used when wl.keyspace is "auto".
DEFAULT_KEYSPACE = {"latest": 1000, "hotspot": 10000, "uniform": 1000, "zipfian": 1000}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    """Parse INI-style text; ``[section]`` headers prefix the keys below them."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    values = {}
    for section in parser.sections():
        prefix = "" if section == "__top__" else section + "."
        for key, value in parser.items(section):
            values[prefix + key] = value.strip()
    return values


def parse_assignment(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


@dataclass
class ExperimentConfig:
    values: dict[str, str] = field(default_factory=lambda: dict(DEFAULTS))

    @classmethod
    def build(cls, profile: str = "desk", file_values: dict[str, str] | None = None,
              overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r} (choose from {', '.join(PROFILES)})")
        values = dict(DEFAULTS)
        values.update(PROFILES[profile])
        for source in (file_values or {}, overrides or {}):
            for key, value in source.items():
                if key not in DEFAULTS:
                    raise ConfigError(f"unknown config key {key!r}")
                values[key] = value
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path, profile: str = "desk",
                  overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        text = Path(path).read_text(encoding="utf-8")
        return cls.build(profile, parse_config_text(text), overrides)

    def with_overrides(self, overrides: dict[str, str]) -> "ExperimentConfig":
        for key in overrides:
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
        cfg = ExperimentConfig({**self.values, **overrides})
        cfg.validate()
        return cfg

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    # Typed accessors.

    def _int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self.values[key]!r}") from None

    def _float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.values[key]!r}") from None

    def _level(self, key: str) -> ConsistencyLevel:
        try:
            return ConsistencyLevel.parse(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    def _latency(self, key: str) -> LatencyModel:
        try:
            return LatencyModel.parse(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    @property
    def seed(self) -> int:
        return self._int("run.seed")

    @property
    def hosts(self) -> int:
        return self._int("cluster.hosts")

    @property
    def rf(self) -> int:
        return self._int("store.rf")

    @property
    def read_repair(self) -> str:
        return self.values["store.read_repair"]

    @property
    def threshold_us(self) -> int:
        return self._int("gamma.threshold_us")

    @property
    def per_host_p95(self) -> bool:
        return self.values["metrics.p95_mode"] == "per_host"

    def network(self) -> NetworkModel:
        return NetworkModel(
            one_way=self._latency("net.one_way"),
            local_hop=self._latency("local.hop"),
            service=ServiceModel(read=self._latency("svc.read"), write=self._latency("svc.write")),
        )

    def workload(self) -> WorkloadConfig:
        dist = self.values["wl.dist"]
        keyspace = self.values["wl.keyspace"]
        try:
            return WorkloadConfig(
                read_fraction=self._float("wl.read_fraction"),
                value_size_bytes=self._int("wl.value_bytes"),
                clients=self._int("wl.clients"),
                target_ops_per_host_per_s=self._float("wl.target_kops") * 1000,
                duration_s=self._float("wl.duration_s"),
                distribution=dist,
                keyspace=DEFAULT_KEYSPACE.get(dist, 1000) if keyspace == "auto" else self._int("wl.keyspace"),
                theta=self._float("wl.theta"),
                hot_fraction=self._float("wl.hot_fraction"),
                hot_op_fraction=self._float("wl.hot_op_fraction"),
                clock_skew_bound_us=self._int("wl.skew_us"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def policy(self) -> PolicySpec:
        kind = self.values["policy.kind"]
        try:
            if kind == "fixed":
                return Fixed(self._level("policy.read"), self._level("policy.write"))
            if kind == "cpq":
                return CPQ(self._float("policy.p"), self._level("policy.low"), self._level("policy.high"))
            if kind == "ad":
                return AD(
                    round(self._float("policy.read_delay_ms") * 1000),
                    round(self._float("policy.write_delay_ms") * 1000),
                    self._level("policy.read"), self._level("policy.write"),
                )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        raise ConfigError(f"policy.kind must be fixed, cpq or ad, not {kind!r}")

    def sla(self) -> SlaSpec | None:
        if not self.values["sla.L_ms"] and not self.values["sla.X"]:
            return None
        if not (self.values["sla.L_ms"] and self.values["sla.X"]):
            raise ConfigError("sla.L_ms and sla.X must be set together")
        try:
            return SlaSpec(self._float("sla.L_ms"), self._float("sla.X"))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def digest(self) -> str:
        relevant = {k: v for k, v in self.values.items() if not k.startswith("out.")}
        return config_digest(relevant.items())

    def validate(self) -> None:
        if self.hosts < 1 or self.rf < 1:
            raise ConfigError("cluster.hosts and store.rf must be positive")
        if self.read_repair not in ("none", "async"):
            raise ConfigError("store.read_repair must be none or async")
        if self.values["metrics.p95_mode"] not in ("global", "per_host"):
            raise ConfigError("metrics.p95_mode must be global or per_host")
        if self.values["wl.dist"] not in DEFAULT_KEYSPACE:
            raise ConfigError(f"wl.dist must be one of {', '.join(DEFAULT_KEYSPACE)}")
        if not 0 <= self._float("policy.p") <= 1:
            raise ConfigError("policy.p must lie in [0, 1]")
        if self.threshold_us < 0:
            raise ConfigError("gamma.threshold_us must be non-negative")
        self.seed
        self.network()
        self.workload()
        self.policy()
        self.sla()

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.values.items()))

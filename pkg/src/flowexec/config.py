"""Run configuration: defaults, key-value files, and flag overrides.

Defaults reproduce the six-strategy comparison configuration (constant
timing risk c = 0.1, x0 = 3, y0 = 0, eta = 0.075, kappa = 10, beta = 0.05,
sigma = 0.14, dt = 0.01).  A config file holds ``key = value`` lines;
command-line flags win over the file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .myopic import InventoryRisk
from .ou_flow import FlowParams

__all__ = ["Config", "ConfigError"]


class ConfigError(Exception):
    pass


@dataclass
class Config:
    beta: float = 0.05
    sigma: float = 0.14
    kappa: float = 10.0
    eta: float = 0.075
    risk: str = "constant"
    c: float = 0.1
    x0: float = 3.0
    y0: float = 0.0
    dt: float = 0.01
    paths: int = 20000
    seed: int = 7
    epsilon: float = 1e-3
    rk_step: float = 1e-4
    fd_nx: int = 1000
    fd_ny: int = 160
    outdir: str = "."

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_file(cls, path) -> "Config":
        cfg = cls()
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if key not in types:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    cfg._set(key, value)
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from None
        return cfg

    def _set(self, key: str, value):
        current = getattr(self, key)
        if isinstance(current, bool):
            value = value in ("1", "true", "True", "yes")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(self, key, value)

    def apply_overrides(self, overrides: dict):
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in self.field_names():
                raise ConfigError(f"unknown config field {key!r}")
            setattr(self, key, value)
        return self

    def validate(self):
        try:
            self.flow_params()
            self.inventory_risk()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.x0 <= 0:
            raise ConfigError("x0 must be > 0")
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        return self

    def flow_params(self) -> FlowParams:
        return FlowParams(beta=self.beta, sigma=self.sigma, kappa=self.kappa, eta=self.eta)

    def inventory_risk(self) -> InventoryRisk:
        return InventoryRisk(self.risk, self.c if self.risk != "zero" else 0.0)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

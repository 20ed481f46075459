"""Run configuration: a JSON document validated into typed pieces."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .grid import Grid, build_grid
from .lagrangian import CUSTOM_REGISTRY, LagrangianSpec, make_rochet_chone, make_zero
from .solver import ProblemSetup, make_setup


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class Tolerances:
    newton_tol_scale: float = 1e-10
    convexity_floor_scale: float = 1e-3
    kkt_tol: float = 1e-8
    el_residual_tol: float = 1e-3


@dataclass
class RunConfig:
    grid_n: int
    grid_a: float
    grid_b: float
    phi: list[float]
    preset: str
    eta0: list[float]
    rho_minus: float
    rho_plus: float
    eps_schedule: Union[dict, list[float]]
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: str = "out"

    def to_dict(self) -> dict:
        return {
            "grid": {"n": self.grid_n, "a": self.grid_a, "b": self.grid_b},
            "phi": list(self.phi),
            "lagrangian": {"preset": self.preset, "eta0": list(self.eta0)},
            "rho_minus": self.rho_minus,
            "rho_plus": self.rho_plus,
            "eps_schedule": self.eps_schedule,
            "tolerances": {
                "newton_tol_scale": self.tolerances.newton_tol_scale,
                "convexity_floor_scale": self.tolerances.convexity_floor_scale,
                "kkt_tol": self.tolerances.kkt_tol,
                "el_residual_tol": self.tolerances.el_residual_tol,
            },
            "outputs": self.outputs,
        }

    @staticmethod
    def from_dict(doc: dict) -> "RunConfig":
        try:
            grid = doc["grid"]
            lag = doc["lagrangian"]
            cfg = RunConfig(
                grid_n=int(grid["n"]),
                grid_a=float(grid["a"]),
                grid_b=float(grid["b"]),
                phi=[float(c) for c in doc["phi"]],
                preset=str(lag["preset"]),
                eta0=[float(c) for c in lag.get("eta0", [0.0])],
                rho_minus=float(doc["rho_minus"]),
                rho_plus=float(doc["rho_plus"]),
                eps_schedule=doc["eps_schedule"],
                outputs=str(doc.get("outputs", "out")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"missing or malformed config field: {exc}") from exc
        tols = doc.get("tolerances", {})
        if not isinstance(tols, dict):
            raise ConfigError("tolerances must be a mapping")
        defaults = Tolerances()
        for name in ("newton_tol_scale", "convexity_floor_scale", "kkt_tol", "el_residual_tol"):
            if name in tols:
                setattr(defaults, name, float(tols[name]))
        cfg.tolerances = defaults
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.rho_minus <= 0.0 or self.rho_plus <= 0.0:
            raise ConfigError("boundary data must satisfy rho+- > 0")
        if not (-1.0 < self.grid_a < self.grid_b < 1.0):
            raise ConfigError("window must satisfy -1 < a < b < 1")
        if self.preset not in ("rochet_chone", "zero") and not self.preset.startswith("custom:"):
            raise ConfigError(f"unknown lagrangian preset: {self.preset!r}")
        for eps in self.schedule():
            if not (0.0 < eps < 1.0):
                raise ConfigError(f"eps schedule values must lie in (0, 1), got {eps}")
        sched = self.schedule()
        if any(e2 >= e1 for e1, e2 in zip(sched, sched[1:])):
            raise ConfigError("eps schedule must be strictly decreasing")

    def schedule(self) -> list[float]:
        s = self.eps_schedule
        if isinstance(s, list):
            return [float(e) for e in s]
        if isinstance(s, dict):
            try:
                start, ratio, stages = float(s["start"]), float(s["ratio"]), int(s["stages"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad eps_schedule: {exc}") from exc
            return [start * ratio**k for k in range(stages)]
        raise ConfigError("eps_schedule must be a list or {start, ratio, stages}")

    def build_grid(self) -> Grid:
        try:
            return build_grid(self.grid_n, self.grid_a, self.grid_b)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_lagrangian(self, grid: Grid) -> LagrangianSpec:
        if self.preset == "rochet_chone":
            try:
                return make_rochet_chone(self.eta0, sample_nodes=grid.nodes)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if self.preset == "zero":
            return make_zero()
        key = self.preset.removeprefix("custom:")
        if key not in CUSTOM_REGISTRY:
            raise ConfigError(f"unregistered custom lagrangian: {key!r}")
        return CUSTOM_REGISTRY[key]()

    def build_setup(self, eps: Optional[float] = None) -> ProblemSetup:
        grid = self.build_grid()
        lag = self.build_lagrangian(grid)
        eps = eps if eps is not None else self.schedule()[0]
        try:
            return make_setup(grid, lag, self.phi, self.rho_minus, self.rho_plus, eps)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: Union[str, Path]) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return RunConfig.from_dict(doc)


def save_config(cfg: RunConfig, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")

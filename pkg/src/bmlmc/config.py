"""Run configuration: flat key=value files with typed keys.

The file format is one `key = value` per line, `#` comments, blank lines
ignored.  Unknown keys are rejected by name.  `to_text` emits a canonical
form whose parse is the identity (floats round-trip via repr).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .controller import BmlmcConfig
from .models import (CovSpec, SyntheticProblem, SyntheticSpec, Wave1DProblem,
                     Wave1DSpec)
from .scheduler import Scheduler, SchedulerConfig


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_intlist(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


_PARSERS = {
    "float": float,
    "int": int,
    "str": str.strip,
    "bool": _parse_bool,
    "intlist": _parse_intlist,
}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (type, default)
REGISTRY: dict[str, tuple[str, object]] = {
    "model": ("str", "synthetic"),
    # synthetic model
    "synthetic.q_bar": ("float", 1.0),
    "synthetic.c_alpha": ("float", 1.0),
    "synthetic.alpha": ("float", 2.0),
    "synthetic.c_beta": ("float", 1.0),
    "synthetic.beta": ("float", 4.0),
    "synthetic.c_gamma": ("float", 1.0),
    "synthetic.gamma": ("float", 3.0),
    "synthetic.v0": ("float", 1.0),
    "synthetic.h0": ("float", 0.5),
    "synthetic.cost_jitter": ("float", 0.0),
    # 1d wave model
    "wave.kappa": ("float", 1.0),
    "wave.degree": ("int", 1),
    "wave.c_cfl": ("float", 2.0**-3),
    "wave.final_time": ("float", 1.0),
    "wave.h0": ("float", 2.0**-5),
    "wave.sigma": ("float", 1.0),
    "wave.corr_length": ("float", 0.15),
    "wave.smoothness": ("float", 1.8),
    "wave.ricker_a": ("float", math.pi / 10.0),
    "wave.ricker_amplitude": ("float", 10.0),
    "wave.bump_center": ("float", 0.5),
    "wave.bump_width": ("float", 0.1),
    "wave.qoi_lo": ("float", 0.25),
    "wave.qoi_hi": ("float", 0.75),
    "wave.cost_scale": ("float", 1.0),
    # controller
    "budget": ("float", 0.0),
    "time_budget": ("float", 0.0),
    "theta": ("float", 0.5),
    "eta": ("float", 0.9),
    "init_samples": ("intlist", (2**12, 2**10, 2**7, 2**5)),
    "max_level": ("int", 12),
    "epsilon_min": ("float", 0.0),
    "cost_mode": ("str", "modeled"),
    "seed": ("int", 0),
    "relax_limit": ("int", 25),
    # scheduler
    "p_size": ("int", 4),
    "sigma_eff": ("float", 0.9),
    "accounting": ("str", "samples"),
    "sync_span": ("float", 0.0),
    "exec_mode": ("str", "simulated"),
    "workers": ("int", 1),
    # output
    "trace": ("bool", False),
}

# execution details that must not influence results; kept out of the
# report echo so reports are bit-identical across worker counts
ECHO_EXCLUDE = ("workers",)


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {key: default for key, (_, default) in REGISTRY.items()}
        for key, val in self.values.items():
            if key not in REGISTRY:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = val
        self.values = merged

    def __getitem__(self, key: str):
        if key not in REGISTRY:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def set(self, key: str, raw: str) -> None:
        if key not in REGISTRY:
            raise ConfigError(f"unknown config key {key!r}")
        kind, _ = REGISTRY[key]
        try:
            self.values[key] = _PARSERS[kind](raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cfg = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
            key, raw = body.split("=", 1)
            cfg.set(key.strip(), raw.strip())
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = [f"{key} = {_format(self.values[key])}" for key in REGISTRY]
        return "\n".join(lines) + "\n"

    def apply_overrides(self, pairs: list[str]) -> None:
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"--set expects key=value, got {pair!r}")
            key, raw = pair.split("=", 1)
            self.set(key.strip(), raw.strip())

    def echo_dict(self) -> dict:
        return {key: (list(v) if isinstance(v := self.values[key], tuple) else v)
                for key in REGISTRY if key not in ECHO_EXCLUDE}

    # -- builders ---------------------------------------------------------

    def effective_budget(self) -> float:
        if self["budget"] > 0.0:
            return self["budget"]
        if self["time_budget"] > 0.0:
            return self["p_size"] * self["time_budget"]
        raise ConfigError("either budget or time_budget must be set > 0")

    def build_model(self):
        kind = self["model"]
        measured = self["cost_mode"] == "measured"
        if kind == "synthetic":
            return SyntheticProblem(SyntheticSpec(
                q_bar=self["synthetic.q_bar"],
                c_alpha=self["synthetic.c_alpha"], alpha=self["synthetic.alpha"],
                c_beta=self["synthetic.c_beta"], beta=self["synthetic.beta"],
                c_gamma=self["synthetic.c_gamma"], gamma=self["synthetic.gamma"],
                v0=self["synthetic.v0"], h0=self["synthetic.h0"],
                cost_jitter=self["synthetic.cost_jitter"]),
                measured_cost=measured)
        if kind == "wave1d":
            cov = CovSpec(sigma=self["wave.sigma"],
                          corr_length=self["wave.corr_length"],
                          smoothness=self["wave.smoothness"])
            return Wave1DProblem(Wave1DSpec(
                kappa=self["wave.kappa"], degree=self["wave.degree"],
                c_cfl=self["wave.c_cfl"], final_time=self["wave.final_time"],
                h0=self["wave.h0"], cov=cov,
                ricker_a=self["wave.ricker_a"],
                ricker_amplitude=self["wave.ricker_amplitude"],
                bump_center=self["wave.bump_center"],
                bump_width=self["wave.bump_width"],
                qoi_lo=self["wave.qoi_lo"], qoi_hi=self["wave.qoi_hi"],
                cost_scale=self["wave.cost_scale"]),
                measured_cost=measured)
        raise ConfigError(f"unknown model {kind!r}")

    def build_controller_config(self) -> BmlmcConfig:
        return BmlmcConfig(
            budget=self.effective_budget(), theta=self["theta"],
            eta=self["eta"], init_samples=tuple(self["init_samples"]),
            max_level=self["max_level"], epsilon_min=self["epsilon_min"],
            cost_mode=self["cost_mode"], master_seed=self["seed"],
            relax_limit=self["relax_limit"])

    def build_scheduler(self, trace_sink=None) -> Scheduler:
        cfg = SchedulerConfig(
            p_size=self["p_size"], sigma_eff=self["sigma_eff"],
            accounting=self["accounting"], sync_span=self["sync_span"],
            exec_mode=self["exec_mode"], workers=self["workers"])
        return Scheduler(cfg, trace_sink=trace_sink)

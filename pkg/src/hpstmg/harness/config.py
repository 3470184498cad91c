"""INI run configuration with flat sections and strict key checking."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

__all__ = ["RunConfig", "ConfigError", "load_config", "SCHEMA"]


class ConfigError(ValueError):
    """Unknown section or key, or a value of the wrong type."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_list(s: str) -> list:
    return [int(x) for x in s.replace(",", " ").split()]


# section -> key -> (parser, default)
SCHEMA = {
    "problem": {"dim": (int, 2), "nu": (float, 0.1), "T": (float, 1.0), "N": (int, 0)},
    "discretization": {"r": (int, 2), "k": (int, -1)},
    "mesh": {"base_cells": (int, 1), "refinements": (int, 2), "coarse_level": (int, 0)},
    "mg": {"nu1": (int, 1), "nu2": (int, 1), "omega": (float, 0.8), "smoother": (str, "cell"),
           "coarse_cap": (int, 50_000), "project_pressure": (_bool, True), "mode": (str, "hp")},
    "gmres": {"rtol": (float, 1e-8), "atol": (float, 1e-14), "maxit": (int, 200)},
    "output": {"csv_path": (str, "results.csv"), "figure": (_bool, True)},
}


@dataclass
class RunConfig:
    """Parsed configuration; ``values[section][key]``."""

    values: dict = field(default_factory=lambda: {s: {k: d for k, (_, d) in keys.items()}
                                                   for s, keys in SCHEMA.items()})

    explicit: set = field(default_factory=set)

    def __getitem__(self, section):
        return self.values[section]

    def set(self, section: str, key: str, raw):
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{key}' in section [{section}]")
        parser = SCHEMA[section][key][0]
        self.explicit.add((section, key))
        try:
            if isinstance(raw, str) or parser is not _bool:
                self.values[section][key] = parser(raw)
            else:
                self.values[section][key] = bool(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from exc

    def validate(self):
        p, d, m, mg, g = (self["problem"], self["discretization"], self["mesh"], self["mg"],
                          self["gmres"])
        if p["dim"] != 2:
            raise ConfigError("only dim = 2 is implemented")
        if p["nu"] <= 0 or p["T"] <= 0:
            raise ConfigError("nu and T must be positive")
        if d["r"] < 1:
            raise ConfigError("r must be >= 1")
        if m["refinements"] < 0 or m["base_cells"] < 1:
            raise ConfigError("bad mesh settings")
        if mg["smoother"] not in ("cell", "vertex_star"):
            raise ConfigError("mg.smoother must be cell or vertex_star")
        if mg["mode"] not in ("hp", "h"):
            raise ConfigError("mg.mode must be hp or h")
        if not 0 < mg["omega"] <= 1:
            raise ConfigError("mg.omega must lie in (0, 1]")
        if g["rtol"] <= 0 or g["atol"] <= 0 or g["maxit"] < 1:
            raise ConfigError("bad gmres settings")
        return self

    @property
    def k(self) -> int:
        k = self["discretization"]["k"]
        return self["discretization"]["r"] if k < 0 else k


def load_config(path=None, overrides=None) -> RunConfig:
    """Read an INI file (optional) and apply ``{(section, key): value}`` overrides.

    Raises
    ------
    FileNotFoundError
        If ``path`` is given but does not exist.
    ConfigError
        On unknown sections/keys or unparsable values.
    """
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(str(p))
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keep key case (T, N)
        cp.read(p)
        for section in cp.sections():
            for key, raw in cp.items(section):
                cfg.set(section, key, raw)
    for (section, key), val in (overrides or {}).items():
        if val is not None:
            cfg.set(section, key, val)
    return cfg.validate()

"""Structured text configuration: one INI section per module, strict keys."""

from configparser import ConfigParser
from dataclasses import dataclass
from fractions import Fraction

from .scales import BumpSpec, Grid1D, ScaleSystem


class ConfigError(ValueError):
    pass


SCALES_KEYS = {"m", "j_min", "j_max", "grid_size", "grid_spacing",
               "alpha", "beta", "bump_plateau", "bump_cutoff"}


@dataclass
class ScalesConfig:
    M: float = 2.0
    j_min: int = 0
    j_max: int = 8
    grid_size: int = 4096
    grid_spacing: float = 1.0 / 512
    alpha: float | None = 0.3
    beta: float | None = None
    bump_plateau: float | None = None
    bump_cutoff: float = 1.0

    def system(self):
        return ScaleSystem(M=self.M, j_min=self.j_min, j_max=self.j_max,
                           grid=Grid1D(self.grid_size, self.grid_spacing))

    def bump(self):
        return BumpSpec(plateau=self.bump_plateau, cutoff=self.bump_cutoff)

    def resolved_beta(self):
        """Scale dimension: explicit beta wins, else -alpha (path convention)."""
        if self.beta is not None:
            return self.beta
        if self.alpha is not None:
            return -self.alpha
        raise ConfigError("need either beta or alpha in [scales]")


def load_config(path):
    """Parse the config file; unknown sections or keys are rejected."""
    cp = ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    out = {}
    for section in cp.sections():
        if section == "scales":
            out["scales"] = _parse_scales(cp[section])
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return out


def _parse_scales(section):
    cfg = ScalesConfig()
    for key, raw in section.items():
        if key not in SCALES_KEYS:
            raise ConfigError(f"unknown key {key!r} in [scales] "
                              f"(known: {sorted(SCALES_KEYS)})")
        if key == "m":
            cfg.M = float(Fraction(raw))
        elif key in ("j_min", "j_max", "grid_size"):
            setattr(cfg, key, int(raw))
        else:
            setattr(cfg, key, float(Fraction(raw)))
    return cfg

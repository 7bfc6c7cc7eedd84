"""INI experiment configuration with lossless round-trip."""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from fractions import Fraction

from .params import as_fraction

DEFAULTS = {
    "run": {"seed": "0", "output_dir": ""},
    "params": {"N": "2", "b": "1/2", "alpha": "3"},
    "grid": {"mode": "cartesian2d", "extent": "32", "points": "512", "reg_radius": ""},
    "groundstate": {"tol": "1e-10", "max_iter": "5000"},
    "initial": {"kind": "ground_state", "amplitude": "1/2", "width": "1", "offset": "0"},
    "evolution": {
        "dt": "1e-3", "t_final": "1", "snapshot_stride": "100", "monitor_stride": "10",
        "guard": "true", "guard_tol": "1e-6", "growth_factor": "100",
    },
    "diagnostics": {
        "virial_R": "4", "delta_probe": "1/10", "threshold_band": "1e-6",
        "settle_tol": "1e-3", "decay_factor": "100", "bump_profile": "logistic",
    },
    "certify": {"theta": "1/100", "epsilon": "1/1000"},
    "far_translation": {"theta": "1/2", "offsets": "4,8,16,24", "t_final": "1", "samples": "20"},
    "sweep": {"axis": "amplitude", "values": "", "workers": "0", "evolve": "true"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    parser: configparser.ConfigParser

    @classmethod
    def default(cls):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_dict(DEFAULTS)
        return cls(cp)

    @classmethod
    def from_text(cls, text: str):
        cfg = cls.default()
        try:
            cfg.parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cfg

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def to_text(self) -> str:
        buf = io.StringIO()
        self.parser.write(buf)
        return buf.getvalue()

    def copy(self):
        return ExperimentConfig.from_text(self.to_text())

    def set(self, key: str, value):
        """Set 'section.key' (or a bare key found in exactly one section)."""
        if "." in key:
            section, name = key.split(".", 1)
        else:
            hits = [s for s in self.parser.sections() if key in self.parser[s]]
            if len(hits) != 1:
                raise ConfigError(f"ambiguous or unknown override key {key!r}")
            section, name = hits[0], key
        if not self.parser.has_section(section):
            self.parser.add_section(section)
        self.parser[section][name] = str(value)

    def raw(self, section, key):
        try:
            return self.parser[section][key]
        except KeyError as exc:
            raise ConfigError(f"missing {section}.{key}") from exc

    def get_float(self, section, key) -> float:
        s = self.raw(section, key)
        try:
            return float(as_fraction(s))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{section}.{key}: not a number: {s!r}") from exc

    def get_int(self, section, key) -> int:
        s = self.raw(section, key)
        try:
            return int(s)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: not an integer: {s!r}") from exc

    def get_fraction(self, section, key) -> Fraction:
        s = self.raw(section, key)
        try:
            return as_fraction(s.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{section}.{key}: malformed rational {s!r}") from exc

    def get_bool(self, section, key) -> bool:
        try:
            return self.parser.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: not a boolean") from exc

    def get_list(self, section, key, conv=float):
        s = self.raw(section, key).strip()
        if not s:
            return []
        try:
            return [conv(as_fraction(v.strip())) for v in s.split(",")]
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{section}.{key}: malformed list {s!r}") from exc

    def optional_float(self, section, key):
        s = self.raw(section, key).strip()
        return None if not s else self.get_float(section, key)

    @property
    def seed(self) -> int:
        v = self.get_int("run", "seed")
        if not 0 <= v < 2 ** 64:
            raise ConfigError("run.seed must fit in an unsigned 64-bit integer")
        return v

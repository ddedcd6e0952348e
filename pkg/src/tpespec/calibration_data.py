"""Frozen calibration constants shipped with the package."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

ENV_VAR = "TPESPEC_CALIBRATION"


@dataclass(frozen=True)
class Calibration:
    C_bgr: float  # eV, gap shrinkage at 1e18 cm^-3
    qw_strain_shift: float  # eV, additive shift of the well gap

    def dump(self, path) -> None:
        Path(path).write_text(
            "# bandgap shrinkage coefficient and QW strain shift\n"
            "[calibration]\n"
            f"C_bgr = {self.C_bgr!r}\n"
            f"qw_strain_shift = {self.qw_strain_shift!r}\n"
        )


def read_calibration(path) -> Calibration:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(Path(path).read_text())
    sec = cp["calibration"]
    unknown = set(sec) - {"c_bgr", "qw_strain_shift"}
    if unknown:
        raise ValueError(f"{path}: unknown calibration keys {sorted(unknown)}")
    return Calibration(float(sec["c_bgr"]), float(sec["qw_strain_shift"]))


def shipped_path():
    return resources.files("tpespec") / "data" / "calibration.cfg"


@lru_cache(maxsize=None)
def _load(path: str) -> Calibration:
    return read_calibration(path)


def frozen_calibration() -> Calibration:
    return _load(os.environ.get(ENV_VAR) or str(shipped_path()))

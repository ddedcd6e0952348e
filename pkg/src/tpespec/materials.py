"""Material parameter table, Varshni gaps and refractive-index models."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .constants import M0, E_CHARGE, DomainError

T_MIN, T_MAX = 0.0, 500.0
N_EMIN, N_EMAX = 0.3, 2.5

MATERIAL_KEYS = ("Eg0", "varshni_alpha", "varshni_beta", "m_e", "m_hh", "m_r", "E_p", "n_model")


class MaterialLookupError(LookupError):
    """Unknown material name."""


@dataclass(frozen=True)
class RefractiveIndexModel:
    """Either a constant index or a single-oscillator (Wemple) dispersion fit.

    The fit is n^2 = 1 + E0*Ed / (E0^2 - E^2), valid well below E0.
    """

    kind: str
    params: tuple

    @classmethod
    def parse(cls, text: str) -> "RefractiveIndexModel":
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        try:
            vals = tuple(float(v) for v in rest.split(","))
        except ValueError as exc:
            raise ValueError(f"bad n_model {text!r}") from exc
        if kind == "constant" and len(vals) == 1 and vals[0] >= 1:
            return cls(kind, vals)
        if kind == "wemple" and len(vals) == 2 and all(v > 0 for v in vals):
            return cls(kind, vals)
        raise ValueError(f"bad n_model {text!r}")

    def __str__(self):
        return f"{self.kind}:" + ",".join(repr(v) for v in self.params)

    @property
    def valid_max(self) -> float:
        if self.kind == "constant":
            return N_EMAX
        return min(N_EMAX, 0.8 * self.params[0])

    def evaluate(self, E):
        E = np.asarray(E, dtype=float)
        if self.kind == "constant":
            return np.full_like(E, self.params[0])
        E0, Ed = self.params
        return np.sqrt(1.0 + E0 * Ed / (E0 * E0 - E * E))


@dataclass(frozen=True)
class MaterialParams:
    name: str
    Eg0: float  # eV
    varshni_alpha: float  # eV/K
    varshni_beta: float  # K
    m_e: float  # m0
    m_hh: float  # m0
    E_p: float  # Kane energy, eV
    n_model: RefractiveIndexModel = field(default_factory=lambda: RefractiveIndexModel("constant", (3.4,)))
    m_r: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "m_r", self.m_e * self.m_hh / (self.m_e + self.m_hh))
        if not (0 < self.m_e < self.m_hh):
            raise ValueError(f"{self.name}: need 0 < m_e < m_hh")
        if self.Eg0 <= 0 or self.E_p <= 0:
            raise ValueError(f"{self.name}: Eg0 and E_p must be positive")
        if self.varshni_alpha < 0 or self.varshni_beta <= 0:
            raise ValueError(f"{self.name}: bad Varshni coefficients")

    @property
    def p_cv_sq(self) -> float:
        """Squared momentum matrix element (m0/2) E_p in SI units (kg^2 m^2 s^-2)."""
        return 0.5 * M0 * self.E_p * E_CHARGE

    def to_block(self) -> dict:
        return {
            "Eg0": repr(self.Eg0),
            "varshni_alpha": repr(self.varshni_alpha),
            "varshni_beta": repr(self.varshni_beta),
            "m_e": repr(self.m_e),
            "m_hh": repr(self.m_hh),
            "E_p": repr(self.E_p),
            "n_model": str(self.n_model),
        }


@dataclass(frozen=True)
class QWLayerSpec:
    well_width: float  # Angstrom
    barrier_width: float  # Angstrom
    well_material: str
    barrier_material: str
    conduction_band_offset: float  # eV
    valence_band_offset: float  # eV
    num_periods: int = 1
    strain_shift: float = 0.0  # eV, added to the well gap

    def __post_init__(self):
        if self.well_width <= 0 or self.barrier_width <= 0:
            raise ValueError("QW widths must be positive")
        if self.num_periods < 1:
            raise ValueError("num_periods must be >= 1")


def bandgap(material: MaterialParams, T: float) -> float:
    """Varshni gap in eV at temperature T [K]."""
    if not (T_MIN <= T <= T_MAX):
        raise DomainError(f"temperature {T} K outside [{T_MIN}, {T_MAX}]")
    return material.Eg0 - material.varshni_alpha * T * T / (T + material.varshni_beta)


def refractive_index(material: MaterialParams, E):
    """Refractive index at photon energy E [eV]; raises outside the validity window."""
    Ea = np.asarray(E, dtype=float)
    hi = material.n_model.valid_max
    if np.any(Ea < N_EMIN) or np.any(Ea > hi):
        raise DomainError(f"photon energy {E!r} eV outside refractive-index window [{N_EMIN}, {hi:.3f}]")
    n = material.n_model.evaluate(Ea)
    return float(n) if n.ndim == 0 else n


def refractive_index_clamped(material: MaterialParams, E):
    """Index with the energy clipped into the validity window.

    Used inside rate integrals, where photons with energies outside the
    window (near zero, or above the gap) still carry weight.
    """
    Ea = np.clip(np.asarray(E, dtype=float), N_EMIN, material.n_model.valid_max)
    return material.n_model.evaluate(Ea)


# --------------------------------------------------------------------- table


def _parse_material_block(name: str, block, source: str) -> MaterialParams:
    unknown = set(block) - {k.lower() for k in MATERIAL_KEYS}
    if unknown:
        raise ValueError(f"{source} [{name}]: unknown keys {sorted(unknown)}")
    get = {k.lower(): k for k in MATERIAL_KEYS}
    vals = {}
    for low, key in get.items():
        if low in block and key not in ("n_model", "m_r"):
            vals[key] = float(block[low])
    missing = {"Eg0", "varshni_alpha", "varshni_beta", "m_e", "m_hh", "E_p"} - set(vals)
    if missing:
        raise ValueError(f"{source} [{name}]: missing keys {sorted(missing)}")
    if "n_model" in block:
        vals["n_model"] = RefractiveIndexModel.parse(block["n_model"])
    mat = MaterialParams(name=name, **vals)
    if "m_r" in block and abs(float(block["m_r"]) - mat.m_r) > 1e-9 * mat.m_r:
        raise ValueError(f"{source} [{name}]: m_r inconsistent with m_e, m_hh")
    return mat


def _pairs(text: str):
    out = []
    for item in text.split(","):
        item = item.strip()
        if item:
            k, _, v = item.partition(":")
            out.append((k.strip(), float(v)))
    return out


def interpolate_alloy(name: str, composition, bowing, binaries, n_model=None) -> MaterialParams:
    """Linear interpolation of binary parameters with gap bowing."""
    fracs = dict(composition)
    if abs(sum(fracs.values()) - 1) > 1e-9:
        raise ValueError(f"{name}: composition fractions must sum to 1")
    lin = lambda attr: sum(x * getattr(binaries[b], attr) for b, x in fracs.items())
    Eg0 = lin("Eg0")
    for pair, b in bowing:
        a, _, c = pair.partition("-")
        Eg0 -= b * fracs.get(a, 0.0) * fracs.get(c, 0.0)
    if n_model is None:
        n_model = binaries[max(fracs, key=fracs.get)].n_model
    return MaterialParams(
        name=name,
        Eg0=Eg0,
        varshni_alpha=lin("varshni_alpha"),
        varshni_beta=lin("varshni_beta"),
        m_e=lin("m_e"),
        m_hh=lin("m_hh"),
        E_p=lin("E_p"),
        n_model=n_model,
    )


def load_table(materials_path=None, alloys_path=None) -> dict[str, MaterialParams]:
    """Load the material table; defaults to the shipped data files."""
    data = resources.files("tpespec") / "data"
    mp = Path(materials_path) if materials_path else data / "materials.cfg"
    ap = Path(alloys_path) if alloys_path else data / "alloys.cfg"
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(mp.read_text())
    table = {s: _parse_material_block(s, cp[s], str(mp)) for s in cp.sections()}
    if ap is not None and ap.is_file():
        ca = configparser.ConfigParser(interpolation=None)
        ca.read_string(ap.read_text())
        for s in ca.sections():
            blk = ca[s]
            unknown = set(blk) - {"composition", "gap_bowing", "n_model"}
            if unknown:
                raise ValueError(f"{ap} [{s}]: unknown keys {sorted(unknown)}")
            nm = RefractiveIndexModel.parse(blk["n_model"]) if "n_model" in blk else None
            table[s] = interpolate_alloy(
                s, _pairs(blk["composition"]), _pairs(blk.get("gap_bowing", "")), table, nm
            )
    return table


_DEFAULT_TABLE: dict | None = None


def default_table() -> dict[str, MaterialParams]:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_table()
    return _DEFAULT_TABLE


def lookup(name: str, table: dict | None = None) -> MaterialParams:
    table = default_table() if table is None else table
    try:
        return table[name]
    except KeyError:
        raise MaterialLookupError(
            f"unknown material {name!r}; available: {', '.join(sorted(table))}"
        ) from None


def with_index(material: MaterialParams, n: float) -> MaterialParams:
    """Copy of a material with a constant refractive index."""
    return replace(material, n_model=RefractiveIndexModel("constant", (float(n),)))

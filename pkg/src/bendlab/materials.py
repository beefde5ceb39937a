"""Material records and the undamaged transversely isotropic stiffness.

All stiffness math is done in MPa / mm / N. Voigt ordering is fixed as
(11, 22, 33, 23, 13, 12): index 3 is the 23 shear, 4 the 13 shear and 5 the
12 shear, so C44/C55/C66 keep their customary subscripts.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
import warnings

import numpy as np

# Voigt component labels in the fixed ordering.
VOIGT_ORDER = ("11", "22", "33", "23", "13", "12")

# Default ply density, g/cm^3. The source tables do not list one; this is a
# typical value for an intermediate-modulus carbon / epoxy system and is only
# needed for the explicit solver's mass matrix. Override via EngineeringConstants.
DEFAULT_PLY_DENSITY = 1.57

GPA_TO_MPA = 1.0e3
# g/cm^3 -> tonne/mm^3 (consistent with MPa, mm, N, s)
GCC_TO_TONNE_MM3 = 1.0e-9


class MaterialError(ValueError):
    """Invalid material constants or unknown preset name."""


@dataclass(frozen=True)
class EngineeringConstants:
    """Transversely isotropic ply constants (moduli in GPa, density g/cm^3)."""

    E11: float
    E22: float
    E33: float
    nu12: float
    nu13: float
    nu23: float
    G12: float
    G13: float
    G23: float
    density: float = DEFAULT_PLY_DENSITY
    Vf: float = 0.6

    def __post_init__(self):
        for name in ("E11", "E22", "E33", "G12", "G13", "G23", "density"):
            if getattr(self, name) <= 0.0:
                raise MaterialError(f"{name} must be strictly positive")
        for name in ("nu12", "nu13", "nu23"):
            v = getattr(self, name)
            if not -1.0 < v < 0.5:
                raise MaterialError(f"{name}={v} outside (-1, 0.5)")
        if not 0.0 < self.Vf < 1.0:
            raise MaterialError(f"Vf={self.Vf} outside (0, 1)")

    def compliance(self) -> np.ndarray:
        """6x6 compliance in 1/MPa (moduli converted from GPa)."""
        E11, E22, E33 = (self.E11 * GPA_TO_MPA, self.E22 * GPA_TO_MPA,
                         self.E33 * GPA_TO_MPA)
        S = np.zeros((6, 6))
        S[0, 0] = 1.0 / E11
        S[1, 1] = 1.0 / E22
        S[2, 2] = 1.0 / E33
        S[0, 1] = S[1, 0] = -self.nu12 / E11
        S[0, 2] = S[2, 0] = -self.nu13 / E11
        S[1, 2] = S[2, 1] = -self.nu23 / E22
        S[3, 3] = 1.0 / (self.G23 * GPA_TO_MPA)
        S[4, 4] = 1.0 / (self.G13 * GPA_TO_MPA)
        S[5, 5] = 1.0 / (self.G12 * GPA_TO_MPA)
        return S

    @property
    def density_tonne_mm3(self) -> float:
        return self.density * GCC_TO_TONNE_MM3


@dataclass(frozen=True)
class PlyStrengths:
    """Lamina failure strengths (MPa) and fracture energies (N/mm)."""

    Xt: float
    Xc: float
    Yt: float
    Yc: float
    Zt: float
    Zc: float
    S12: float
    S13: float
    S23: float
    Gf: float
    Gm: float

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0.0:
                raise MaterialError(f"{f.name} must be strictly positive")


@dataclass(frozen=True)
class CohesiveProperties:
    """Zero-thickness interface law constants.

    Stiffness in MPa/mm, strength in MPa, toughness in N/mm (numerically
    identical to MPa*mm). eta is the Benzeggagh-Kenane exponent.
    """

    Kn: float
    Ks1: float
    Ks2: float
    taun: float
    taus1: float
    taus2: float
    GIc: float
    GIIc: float
    GIIIc: float
    eta: float

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0.0:
                raise MaterialError(f"{f.name} must be strictly positive")

    def scaled(self, tau_scale: float = 1.0, GI_scale: float = 1.0,
               GII_scale: float = 1.0, stiffness_scale: float = 1.0
               ) -> "CohesiveProperties":
        """Scaled copy: strengths together, mode-I and shear toughness apart."""
        return replace(
            self,
            Kn=self.Kn * stiffness_scale,
            Ks1=self.Ks1 * stiffness_scale,
            Ks2=self.Ks2 * stiffness_scale,
            taun=self.taun * tau_scale,
            taus1=self.taus1 * tau_scale,
            taus2=self.taus2 * tau_scale,
            GIc=self.GIc * GI_scale,
            GIIc=self.GIIc * GII_scale,
            GIIIc=self.GIIIc * GII_scale,
        )


@dataclass(frozen=True)
class BpFilmProperties:
    """Resin-infused nanotube film solid properties (documentation preset only).

    The film enters the structural model solely through its interface
    properties; these constants are kept for reference and sweeps.
    """

    E: float        # GPa
    nu: float
    sigma_ut: float  # MPa
    tau_s: float     # MPa
    rho: float       # g/cm^3

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0.0:
                raise MaterialError(f"{f.name} must be strictly positive")


# ---------------------------------------------------------------------------
# Presets: the lamina, strength, interface and film property tables.
# ---------------------------------------------------------------------------

IM7_8552_PLY = EngineeringConstants(
    E11=162.1, E22=8.97, E33=8.97,
    nu12=0.32, nu13=0.32, nu23=0.35,
    G12=4.69, G13=4.69, G23=3.92,
    density=DEFAULT_PLY_DENSITY, Vf=0.6,
)

IM7_8552_STRENGTHS = PlyStrengths(
    Xt=2558.0, Xc=1732.0, Yt=64.0, Yc=285.0, Zt=64.0, Zc=285.0,
    S12=91.0, S13=91.0, S23=91.0, Gf=106.0, Gm=0.263,
)

# The shear-stiffness row of the interface table carries a single value for
# both shear directions; eta is listed only for the resin interface and is
# reused for the film interface.
RESIN_CZ = CohesiveProperties(
    Kn=2500.0, Ks1=864.0, Ks2=864.0,
    taun=37.0, taus1=11.0, taus2=11.0,
    GIc=0.24, GIIc=0.775, GIIIc=0.775, eta=2.67,
)

BP_CZ = CohesiveProperties(
    Kn=5800.0, Ks1=2071.0, Ks2=2071.0,
    taun=50.0, taus1=16.0, taus2=16.0,
    GIc=0.32, GIIc=1.18, GIIIc=1.18, eta=2.67,
)

BP_FILM = BpFilmProperties(E=5.8, nu=0.33, sigma_ut=50.8, tau_s=15.0, rho=0.65)

_PRESETS = {
    "IM7_8552_ply": IM7_8552_PLY,
    "IM7_8552_strengths": IM7_8552_STRENGTHS,
    "resin_cz": RESIN_CZ,
    "bp_cz": BP_CZ,
    "bp_film": BP_FILM,
}


def preset(name: str):
    """Return the immutable material record registered under `name`."""
    try:
        return _PRESETS[name]
    except KeyError:
        valid = ", ".join(sorted(_PRESETS))
        raise MaterialError(f"unknown preset '{name}'; valid names: {valid}") from None


# ---------------------------------------------------------------------------
# Stiffness assembly
# ---------------------------------------------------------------------------

def stiffness_from_engineering(c: EngineeringConstants) -> np.ndarray:
    """Invert the orthotropic compliance into a 6x6 stiffness matrix (MPa).

    Rejects constant sets whose compliance is not symmetric positive
    definite (thermodynamic admissibility), naming the offending check.
    """
    S = c.compliance()
    # Cholesky doubles as the SPD check.
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvalsh(S)
        raise MaterialError(
            "compliance matrix is not positive definite "
            f"(min eigenvalue {eigs.min():.3e} 1/MPa); check Poisson ratios"
        ) from None
    C = np.linalg.inv(S)
    return 0.5 * (C + C.T)


def rotation_matrices(angle_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Voigt strain/stress rotations for a ply at `angle_deg` about the z axis.

    Returns (T_eps, T_sig_inv): T_eps maps global engineering strain to the
    material frame; T_sig_inv maps material stress back to the global frame.
    The stiffness transforms as C_glob = T_sig_inv @ C_mat @ T_eps.
    """
    th = np.radians(angle_deg)
    m, n = np.cos(th), np.sin(th)
    T_eps = np.array([
        [m * m, n * n, 0.0, 0.0, 0.0, m * n],
        [n * n, m * m, 0.0, 0.0, 0.0, -m * n],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, m, -n, 0.0],
        [0.0, 0.0, 0.0, n, m, 0.0],
        [-2 * m * n, 2 * m * n, 0.0, 0.0, 0.0, m * m - n * n],
    ])
    T_sig = np.array([
        [m * m, n * n, 0.0, 0.0, 0.0, 2 * m * n],
        [n * n, m * m, 0.0, 0.0, 0.0, -2 * m * n],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, m, -n, 0.0],
        [0.0, 0.0, 0.0, n, m, 0.0],
        [-m * n, m * n, 0.0, 0.0, 0.0, m * m - n * n],
    ])
    # inverse of a rotation = rotation by -angle; build it directly
    T_sig_inv = np.linalg.inv(T_sig)
    return T_eps, T_sig_inv


def rotate_stiffness(C_mat: np.ndarray, angle_deg: float) -> np.ndarray:
    """Ply stiffness expressed in the global frame."""
    T_eps, T_sig_inv = rotation_matrices(angle_deg)
    return T_sig_inv @ C_mat @ T_eps


# ---------------------------------------------------------------------------
# Key/value preset files (one `name = value` per line, '#' comments) so that
# sweeps can perturb material constants without touching code.
# ---------------------------------------------------------------------------

_RECORD_TYPES = {
    "engineering_constants": EngineeringConstants,
    "ply_strengths": PlyStrengths,
    "cohesive_properties": CohesiveProperties,
    "bp_film_properties": BpFilmProperties,
}


def save_material(path, record) -> None:
    """Write a material record as a key/value text file."""
    for tag, cls in _RECORD_TYPES.items():
        if isinstance(record, cls):
            break
    else:
        raise MaterialError(f"unsupported record type {type(record).__name__}")
    lines = [f"type = {tag}"]
    for f in fields(record):
        lines.append(f"{f.name} = {getattr(record, f.name)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_material(path):
    """Parse a key/value material file written by `save_material`."""
    data = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise MaterialError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            data[key] = val
    tag = data.pop("type", None)
    if tag not in _RECORD_TYPES:
        raise MaterialError(f"{path}: missing or unknown 'type' entry: {tag}")
    cls = _RECORD_TYPES[tag]
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise MaterialError(f"{path}: unknown fields {sorted(unknown)}")
    try:
        kwargs = {k: float(v) for k, v in data.items()}
    except ValueError as exc:
        raise MaterialError(f"{path}: non-numeric value ({exc})") from None
    return cls(**kwargs)

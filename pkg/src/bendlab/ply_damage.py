"""Ply-level progressive damage at a material point.

Failure onset uses six strain-based criteria (fiber tension/compression,
in-plane and out-of-plane matrix cracking/crushing), evolution follows an
exponential law regularized by the element characteristic length, and the
stiffness degrades through nine secant factors built from three mode damage
variables (fiber, in-plane matrix, out-of-plane matrix).

The hot math lives in numba kernels shared verbatim with the explicit
solver; the dataclass API wraps the same kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np
from numba import njit

from bendlab.materials import PlyStrengths

# Damage cap keeping the degraded stiffness invertible while removing
# >=99.9% of load-carrying capacity.
D_MAX = 0.999

# flag codes per damage family
FLAG_INTACT = 0
FLAG_TENSION = 1
FLAG_COMPRESSION = -1
FLAG_FAULT = 127


@dataclass(frozen=True)
class FailureIndices:
    """Square-rooted failure indices; initiation is at index = 1."""

    e_ft: float
    e_fc: float
    e_imt: float
    e_imc: float
    e_omt: float
    e_omc: float

    def as_array(self) -> np.ndarray:
        return np.array([self.e_ft, self.e_fc, self.e_imt,
                         self.e_imc, self.e_omt, self.e_omc])


@dataclass(frozen=True)
class DamageState:
    """Per-point damage variables, sub-mode flags and dissipated density (mJ/mm^3)."""

    d_f: float = 0.0
    d_im: float = 0.0
    d_om: float = 0.0
    flag_f: int = FLAG_INTACT
    flag_im: int = FLAG_INTACT
    flag_om: int = FLAG_INTACT
    dissipated: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.d_f, self.d_im, self.d_om])

    @property
    def faulted(self) -> bool:
        return FLAG_FAULT in (self.flag_f, self.flag_im, self.flag_om)


@dataclass(frozen=True)
class PointContext:
    """Everything the point update needs besides state: element length,
    undamaged material-frame stiffness (MPa) and ply strengths."""

    L_c: float
    C: np.ndarray
    strengths: PlyStrengths

    def __post_init__(self):
        if self.L_c <= 0.0:
            raise ValueError("characteristic length must be positive")
        if self.C.shape != (6, 6):
            raise ValueError("stiffness must be 6x6")

    def strengths_array(self) -> np.ndarray:
        s = self.strengths
        return np.array([s.Xt, s.Xc, s.Yt, s.Yc, s.Zt, s.Zc,
                         s.S12, s.S13, s.S23, s.Gf, s.Gm])


# ---------------------------------------------------------------------------
# numba kernels (shared with the solver)
# ---------------------------------------------------------------------------

@njit(cache=True)
def hashin_indices_kernel(eps, C, s, out):
    """Six strain-based failure indices (already square-rooted).

    eps: engineering strain, Voigt (11,22,33,23,13,12), material frame.
    s:   packed strengths [Xt,Xc,Yt,Yc,Zt,Zc,S12,S13,S23,Gf,Gm].
    """
    a1 = C[0, 0] * eps[0]
    a2 = C[1, 1] * eps[1]
    a3 = C[2, 2] * eps[2]
    t12 = C[5, 5] * eps[5] / s[6]
    t13 = C[4, 4] * eps[4] / s[7]
    t23 = C[3, 3] * eps[3] / s[8]
    sh12 = t12 * t12
    sh13 = t13 * t13
    sh23 = t23 * t23

    out[0] = math.sqrt((a1 / s[0]) ** 2 + sh12 + sh13) if eps[0] > 0.0 else 0.0
    out[1] = math.sqrt((a1 / s[1]) ** 2) if eps[0] < 0.0 else 0.0
    out[2] = math.sqrt((a2 / s[2]) ** 2 + sh12 + sh23) if eps[1] > 0.0 else 0.0
    out[3] = math.sqrt((a2 / s[3]) ** 2 + sh12 + sh23) if eps[1] < 0.0 else 0.0
    out[4] = math.sqrt((a3 / s[4]) ** 2 + sh13 + sh23) if eps[2] > 0.0 else 0.0
    out[5] = math.sqrt((a3 / s[5]) ** 2 + sh13 + sh23) if eps[2] < 0.0 else 0.0


@njit(cache=True)
def degraded_stress_kernel(C, eps, d, sig):
    """Secant stress through the nine degradation factors."""
    f1 = 1.0 - d[0]
    f2 = 1.0 - d[1]
    f3 = 1.0 - d[2]
    sig[0] = f1 * f1 * C[0, 0] * eps[0] + f1 * f2 * C[0, 1] * eps[1] + f1 * f3 * C[0, 2] * eps[2]
    sig[1] = f1 * f2 * C[0, 1] * eps[0] + f2 * f2 * C[1, 1] * eps[1] + f2 * f3 * C[1, 2] * eps[2]
    sig[2] = f1 * f3 * C[0, 2] * eps[0] + f2 * f3 * C[1, 2] * eps[1] + f3 * f3 * C[2, 2] * eps[2]
    sig[3] = f2 * f3 * C[3, 3] * eps[3]
    sig[4] = f1 * f3 * C[4, 4] * eps[4]
    sig[5] = f1 * f2 * C[5, 5] * eps[5]


@njit(cache=True)
def evolve_kernel(d, flags, idx, sig_eff, eps, Lc, Gf, Gm, d_max):
    """Advance the three mode damages from the current indices.

    d (3,) and flags (3,) are updated in place; returns 1 if any mode grew.
    sig_eff/eps are the effective (undamaged-basis) stress and strain.
    """
    grew = 0
    for k in range(3):
        et = idx[2 * k]
        ec = idx[2 * k + 1]
        if et > 1.0:
            e = et
            tension = True
        elif ec > 1.0:
            e = ec
            tension = False
        else:
            continue
        Gp = Gf if k == 0 else Gm
        x = sig_eff[k] * eps[k] * (1.0 - e) * Lc / Gp
        if not math.isfinite(x):
            if d[k] < d_max:
                d[k] = d_max
                flags[k] = FLAG_FAULT
                grew = 1
            continue
        cand = 1.0 - math.exp(x) / e
        if cand > d_max:
            cand = d_max
        if cand > d[k]:
            d[k] = cand
            if flags[k] == FLAG_INTACT:
                flags[k] = FLAG_TENSION if tension else FLAG_COMPRESSION
            grew = 1
    return grew


@njit(cache=True)
def point_update_kernel(eps, C, s, Lc, d, flags, idx_buf, sig_buf, sig_old):
    """Full material-point update used by both API and solver.

    Updates d/flags in place; fills sig_buf with the new secant stress and
    returns the dissipation increment 0.5*(sig_old_state - sig_new)*eps.
    """
    hashin_indices_kernel(eps, C, s, idx_buf)
    # effective stress on the undamaged stiffness drives Eq. 7
    e0 = C[0, 0] * eps[0] + C[0, 1] * eps[1] + C[0, 2] * eps[2]
    e1 = C[0, 1] * eps[0] + C[1, 1] * eps[1] + C[1, 2] * eps[2]
    e2 = C[0, 2] * eps[0] + C[1, 2] * eps[1] + C[2, 2] * eps[2]
    sig_eff = sig_buf  # reuse as scratch for the 3 normal components
    sig_eff[0] = e0
    sig_eff[1] = e1
    sig_eff[2] = e2
    degraded_stress_kernel(C, eps, d, sig_old)
    grew = evolve_kernel(d, flags, idx_buf, sig_eff, eps, Lc, s[9], s[10], D_MAX)
    degraded_stress_kernel(C, eps, d, sig_buf)
    dW = 0.0
    if grew == 1:
        for i in range(6):
            dW += 0.5 * (sig_old[i] - sig_buf[i]) * eps[i]
    return dW


# ---------------------------------------------------------------------------
# record-based API
# ---------------------------------------------------------------------------

def failure_indices(strain: np.ndarray, ctx: PointContext) -> FailureIndices:
    """Evaluate the six onset indices for an engineering strain 6-vector."""
    eps = np.asarray(strain, dtype=np.float64)
    out = np.empty(6)
    hashin_indices_kernel(eps, ctx.C, ctx.strengths_array(), out)
    return FailureIndices(*out)


def evolve_damage(prev: DamageState, idx: FailureIndices, stress: np.ndarray,
                  strain: np.ndarray, ctx: PointContext) -> DamageState:
    """Grow damage irreversibly from indices and the effective stress state."""
    d = prev.as_array()
    flags = np.array([prev.flag_f, prev.flag_im, prev.flag_om], dtype=np.int8)
    eps = np.asarray(strain, dtype=np.float64)
    sig = np.asarray(stress, dtype=np.float64)
    sig_old = np.empty(6)
    sig_new = np.empty(6)
    degraded_stress_kernel(ctx.C, eps, d, sig_old)
    s = ctx.strengths_array()
    grew = evolve_kernel(d, flags, idx.as_array(), sig, eps, ctx.L_c,
                         s[9], s[10], D_MAX)
    diss = prev.dissipated
    if grew:
        degraded_stress_kernel(ctx.C, eps, d, sig_new)
        diss += 0.5 * float((sig_old - sig_new) @ eps)
    return DamageState(d[0], d[1], d[2], int(flags[0]), int(flags[1]),
                       int(flags[2]), diss)


def degrade_stiffness(C: np.ndarray, d: DamageState) -> np.ndarray:
    """Apply the nine secant degradation factors; other entries unchanged."""
    f1, f2, f3 = 1.0 - d.d_f, 1.0 - d.d_im, 1.0 - d.d_om
    Cd = np.array(C, dtype=np.float64, copy=True)
    Cd[0, 0] *= f1 * f1
    Cd[1, 1] *= f2 * f2
    Cd[2, 2] *= f3 * f3
    Cd[0, 1] = Cd[1, 0] = C[0, 1] * f1 * f2
    Cd[0, 2] = Cd[2, 0] = C[0, 2] * f1 * f3
    Cd[1, 2] = Cd[2, 1] = C[1, 2] * f2 * f3
    Cd[3, 3] *= f2 * f3
    Cd[4, 4] *= f1 * f3
    Cd[5, 5] *= f1 * f2
    return Cd


def material_point_update(strain: np.ndarray, prev: DamageState,
                          ctx: PointContext
                          ) -> tuple[np.ndarray, DamageState, np.ndarray]:
    """Strain in, secant stress and advanced state out.

    Returns (stress, next_state, secant_stiffness). Deterministic; the
    secant matrix satisfies stress == C_secant @ strain.
    """
    eps = np.asarray(strain, dtype=np.float64)
    d = prev.as_array()
    flags = np.array([prev.flag_f, prev.flag_im, prev.flag_om], dtype=np.int8)
    idx_buf = np.empty(6)
    sig = np.empty(6)
    sig_old = np.empty(6)
    dW = point_update_kernel(eps, ctx.C, ctx.strengths_array(), ctx.L_c,
                             d, flags, idx_buf, sig, sig_old)
    nxt = DamageState(d[0], d[1], d[2], int(flags[0]), int(flags[1]),
                      int(flags[2]), prev.dissipated + dW)
    return sig, nxt, degrade_stiffness(ctx.C, nxt)

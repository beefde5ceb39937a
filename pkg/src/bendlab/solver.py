"""Quasi-static explicit solver for layered bend specimens.

Central-difference time stepping over lumped-mass nodes; 8-node hexahedra
with one-point quadrature, Flanagan-Belytschko style hourglass control and
linear bulk viscosity; zero-thickness cohesive node pairs. The structured
mesh keeps every element a rectangular box, so strain-displacement operators
reduce to sign sums scaled by the box dimensions and hourglass base vectors
are exactly orthogonal to affine fields.

Loading is velocity-driven on the load line (quintic ramp, then constant)
with mass scaling; validity of a run is judged by the energy-balance
residual and the kinetic/internal energy ratio, not by the loading rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import json
import math

import numpy as np
from numba import njit

from bendlab import cohesive as cz
from bendlab import ply_damage as pd
from bendlab.materials import (
    CohesiveProperties,
    EngineeringConstants,
    PlyStrengths,
    preset,
    rotate_stiffness,
    rotation_matrices,
    stiffness_from_engineering,
)
from bendlab.mesh import MeshModel

# Damage level treated as "failed" when locating first-failure events.
FAILURE_THRESHOLD = 0.9

# hourglass base vectors for the standard box node ordering
_GAMMA = np.array([
    [1, 1, -1, -1, -1, -1, 1, 1],
    [1, -1, -1, 1, -1, 1, 1, -1],
    [1, -1, 1, -1, 1, -1, 1, -1],
    [-1, 1, -1, 1, 1, -1, 1, -1],
], dtype=np.float64)

_XI = np.array([-1, 1, 1, -1, -1, 1, 1, -1], dtype=np.float64)
_ETA = np.array([-1, -1, 1, 1, -1, -1, 1, 1], dtype=np.float64)
_ZETA = np.array([-1, -1, -1, -1, 1, 1, 1, 1], dtype=np.float64)


class SolverAbort(RuntimeError):
    """Raised when a run violates its quality gates or goes non-finite."""


@dataclass(frozen=True)
class MaterialSet:
    """Ply constants plus the two interface property records."""

    ply: EngineeringConstants
    strengths: PlyStrengths
    resin: CohesiveProperties
    bp: CohesiveProperties

    @classmethod
    def default(cls) -> "MaterialSet":
        return cls(ply=preset("IM7_8552_ply"),
                   strengths=preset("IM7_8552_strengths"),
                   resin=preset("resin_cz"), bp=preset("bp_cz"))


@dataclass
class SolverConfig:
    """Explicit run controls.

    interface_stiffness_scale multiplies the cohesive penalty stiffness in
    structural runs (strengths and toughness untouched) so the interfaces
    stay elastically stiff relative to the plies; the table values are used
    as-is by the pure interface-law API.
    """

    load_rate: float = 65.0            # mm/s, virtual (accelerated) rate
    total_displacement: float = 3.0    # mm
    mass_scale: float = 100.0
    hourglass_coefficient: float = 0.05
    hourglass_viscosity: float = 0.05
    bulk_damping: float = 0.06         # linear bulk viscosity fraction
    output_interval: float | None = None  # s; default total time / 256
    safety_factor: float = 0.8
    ramp_fraction: float = 0.05        # of total run time, quintic ramp
    interface_stiffness_scale: float = 20.0
    damage_enabled: bool = True
    termination_load_fraction: float = 0.2   # of running peak, post-failure
    min_peak_load: float = 5.0         # N, below which no post-peak check
    ke_ie_floor: float = 0.02          # IE fraction of final IE gated
    energy_tolerance: float = 0.05
    deterministic: bool = True
    field_output: bool = False
    seed_label: str = ""

    def __post_init__(self):
        if self.load_rate <= 0 or self.total_displacement <= 0:
            raise ValueError("load rate and displacement must be positive")
        if self.mass_scale < 1.0:
            raise ValueError("mass_scale must be >= 1")
        if not 0 < self.safety_factor <= 1:
            raise ValueError("safety factor in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        import hashlib
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass
class SimulationResult:
    """Sampled histories plus run metadata; arrays share one length."""

    time: np.ndarray
    displacement: np.ndarray
    load: np.ndarray
    W_ext: np.ndarray
    KE: np.ndarray
    IE: np.ndarray
    D_ply: np.ndarray
    D_coh: np.ndarray
    W_art: np.ndarray                 # hourglass + bulk-viscous portion of IE
    ke_ie: np.ndarray
    ply_d_im: np.ndarray              # (n_samples, n_plies) per-ply maxima
    ply_d_f_t: np.ndarray
    ply_d_f_c: np.ndarray
    interface_D: np.ndarray           # (n_samples, n_interfaces) maxima
    termination: str
    dt: float
    n_steps: int
    energy_residual: float
    max_ke_ie: float
    first_matrix_failure: dict | None
    first_fiber_compression: dict | None
    config: SolverConfig
    damage_field: dict | None = None  # final per-element state, optional

    @property
    def n_samples(self) -> int:
        return len(self.time)

    def summary(self) -> dict:
        peak = float(self.load.max()) if len(self.load) else 0.0
        return {
            "peak_load_N": peak,
            "final_displacement_mm": float(self.displacement[-1]) if len(self.displacement) else 0.0,
            "termination": self.termination,
            "energy_residual": self.energy_residual,
            "max_ke_ie": self.max_ke_ie,
            "n_steps": self.n_steps,
            "dt_s": self.dt,
            "first_matrix_failure": self.first_matrix_failure,
            "first_fiber_compression": self.first_fiber_compression,
        }


def ply_global_frames(angles_deg) -> tuple[np.ndarray, np.ndarray]:
    """Per-ply strain (global->material) and stress (material->global) maps."""
    n = len(angles_deg)
    T_eps = np.empty((n, 6, 6))
    T_sig_inv = np.empty((n, 6, 6))
    for i, a in enumerate(angles_deg):
        te, tsi = rotation_matrices(float(a))
        T_eps[i] = te
        T_sig_inv[i] = tsi
    return T_eps, T_sig_inv


def lumped_mass(mesh: MeshModel, rho_scaled: float) -> np.ndarray:
    m = np.zeros(mesh.n_nodes)
    vol = mesh.elem_dims.prod(axis=1)
    np.add.at(m, mesh.hexes.ravel(),
              np.repeat(vol * rho_scaled / 8.0, 8))
    return m


def stable_dt(mesh: MeshModel, materials: MaterialSet, mass_scale: float = 1.0,
              safety: float = 0.8,
              interface_stiffness_scale: float = 1.0) -> float:
    """Largest stable step: per-direction CFL over every box element plus the
    cohesive penalty-spring limit, from undamaged stiffness and scaled density."""
    rho = materials.ply.density_tonne_mm3 * mass_scale
    C_mat = stiffness_from_engineering(materials.ply)
    dt = math.inf
    for a in np.unique(mesh.ply_angles):
        Cg = rotate_stiffness(C_mat, float(a))
        speeds = np.sqrt(np.array([Cg[0, 0], Cg[1, 1], Cg[2, 2]]) / rho)
        plies = np.nonzero(mesh.ply_angles == a)[0]
        dims = mesh.elem_dims[np.isin(mesh.elem_ply, plies)]
        if len(dims):
            dt = min(dt, float((dims / speeds).min()))
    if len(mesh.pairs):
        m = lumped_mass(mesh, rho)
        K = np.where(mesh.pair_prop == 1,
                     max(materials.bp.Kn, materials.bp.Ks1, materials.bp.Ks2),
                     max(materials.resin.Kn, materials.resin.Ks1, materials.resin.Ks2))
        K = K * interface_stiffness_scale * mesh.pair_area
        minv = 1.0 / m[mesh.pairs[:, 0]] + 1.0 / m[mesh.pairs[:, 1]]
        omega = np.sqrt(K * minv)
        dt = min(dt, float((2.0 / omega).min()))
    return safety * dt


# ---------------------------------------------------------------------------
# time-stepping kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ramp_velocity(t, rate, t_ramp):
    if t >= t_ramp:
        return rate
    tau = t / t_ramp
    s = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
    return rate * s


@njit(cache=True)
def _assemble_forces(dt, conn, inv4d, vol, Lc, ply_of, khg, cvisc, cbulk,
                     T_eps, T_sig_inv, C, s_pack,
                     d, flags, elem_diss, hg, eps_out, sig_out,
                     pairs, pair_area, pair_prop, cz_props, cz_state,
                     u, v, f, damage_on, store_fields, acc):
    """One force assembly over hexes and cohesive pairs into f (internal
    sign convention: m*a = -f). Advances damage and hourglass state by dt;
    acc collects [W_ext, W_damp, W_hg, P_sum, n_P, D_ply_total, t]."""
    nn = u.shape[0]
    ne = conn.shape[0]
    npair = pairs.shape[0]

    eps_g = np.empty(6)
    eps_m = np.empty(6)
    sig_m = np.empty(6)
    sig_g = np.empty(6)
    sig_old = np.empty(6)
    idx_buf = np.empty(6)
    trac = np.empty(3)
    qdot = np.empty((4, 3))
    uel = np.empty((8, 3))
    vel = np.empty((8, 3))

    gamma = _GAMMA
    xi = _XI
    eta = _ETA
    zeta = _ZETA

    for i in range(nn):
        f[i, 0] = 0.0
        f[i, 1] = 0.0
        f[i, 2] = 0.0

    for e in range(ne):
        for a in range(8):
            node = conn[e, a]
            uel[a, 0] = u[node, 0]
            uel[a, 1] = u[node, 1]
            uel[a, 2] = u[node, 2]
            vel[a, 0] = v[node, 0]
            vel[a, 1] = v[node, 1]
            vel[a, 2] = v[node, 2]
        bx = inv4d[e, 0]
        by = inv4d[e, 1]
        bz = inv4d[e, 2]

        sxx = 0.0; sxy = 0.0; sxz = 0.0
        syx = 0.0; syy = 0.0; syz = 0.0
        szx = 0.0; szy = 0.0; szz = 0.0
        rxx = 0.0; ryy = 0.0; rzz = 0.0
        for a in range(8):
            sxx += xi[a] * uel[a, 0]
            syx += eta[a] * uel[a, 0]
            szx += zeta[a] * uel[a, 0]
            sxy += xi[a] * uel[a, 1]
            syy += eta[a] * uel[a, 1]
            szy += zeta[a] * uel[a, 1]
            sxz += xi[a] * uel[a, 2]
            syz += eta[a] * uel[a, 2]
            szz += zeta[a] * uel[a, 2]
            rxx += xi[a] * vel[a, 0]
            ryy += eta[a] * vel[a, 1]
            rzz += zeta[a] * vel[a, 2]

        eps_g[0] = sxx * bx
        eps_g[1] = syy * by
        eps_g[2] = szz * bz
        eps_g[3] = szy * bz + syz * by     # gamma_yz
        eps_g[4] = szx * bz + sxz * bx     # gamma_xz
        eps_g[5] = syx * by + sxy * bx     # gamma_xy

        p = ply_of[e]
        for i in range(6):
            acc_v = 0.0
            for j in range(6):
                acc_v += T_eps[p, i, j] * eps_g[j]
            eps_m[i] = acc_v

        if damage_on == 1:
            dW = pd.point_update_kernel(eps_m, C, s_pack, Lc[e],
                                        d[e], flags[e], idx_buf, sig_m, sig_old)
            if dW != 0.0:
                elem_diss[e] += dW
                acc[5] += dW * vol[e]
        else:
            pd.degraded_stress_kernel(C, eps_m, d[e], sig_m)

        for i in range(6):
            acc_v = 0.0
            for j in range(6):
                acc_v += T_sig_inv[p, i, j] * sig_m[j]
            sig_g[i] = acc_v

        # linear bulk viscosity on the volumetric strain rate
        trd = rxx * bx + ryy * by + rzz * bz
        q = cbulk[e] * trd
        sig_g[0] += q
        sig_g[1] += q
        sig_g[2] += q
        acc[1] += q * trd * vol[e] * dt

        if store_fields == 1:
            for i in range(6):
                eps_out[e, i] = eps_g[i]
                sig_out[e, i] = sig_g[i] - (q if i < 3 else 0.0)

        Ve = vol[e]
        fx0 = sig_g[0] * bx * Ve
        fy0 = sig_g[1] * by * Ve
        fz0 = sig_g[2] * bz * Ve
        fyz = sig_g[3] * Ve
        fxz = sig_g[4] * Ve
        fxy = sig_g[5] * Ve
        for a in range(8):
            node = conn[e, a]
            f[node, 0] += xi[a] * fx0 + (eta[a] * by) * fxy + (zeta[a] * bz) * fxz
            f[node, 1] += eta[a] * fy0 + (xi[a] * bx) * fxy + (zeta[a] * bz) * fyz
            f[node, 2] += zeta[a] * fz0 + (xi[a] * bx) * fxz + (eta[a] * by) * fyz

        # hourglass control: integrate modal stiffness forces, add viscosity
        for g in range(4):
            qd0 = 0.0; qd1 = 0.0; qd2 = 0.0
            for a in range(8):
                qd0 += gamma[g, a] * vel[a, 0]
                qd1 += gamma[g, a] * vel[a, 1]
                qd2 += gamma[g, a] * vel[a, 2]
            qdot[g, 0] = qd0
            qdot[g, 1] = qd1
            qdot[g, 2] = qd2
        k = khg[e]
        c = cvisc[e]
        for g in range(4):
            for i in range(3):
                hg[e, g, i] += k * qdot[g, i] * dt
                fhg = hg[e, g, i] + c * qdot[g, i]
                acc[2] += fhg * qdot[g, i] * dt
                for a in range(8):
                    node = conn[e, a]
                    f[node, i] += gamma[g, a] * fhg

    for pidx in range(npair):
        nb = pairs[pidx, 0]
        na = pairs[pidx, 1]
        ds1 = u[na, 0] - u[nb, 0]
        ds2 = u[na, 1] - u[nb, 1]
        dn = u[na, 2] - u[nb, 2]
        if damage_on == 1:
            cz.traction_update_kernel(dn, ds1, ds2, cz_state[pidx],
                                      cz_props[pair_prop[pidx]], trac)
        else:
            D = cz_state[pidx, 0]
            pr = cz_props[pair_prop[pidx]]
            trac[0] = pr[0] * dn if dn <= 0.0 else (1.0 - D) * pr[0] * dn
            trac[1] = (1.0 - D) * pr[1] * ds1
            trac[2] = (1.0 - D) * pr[2] * ds2
        A = pair_area[pidx]
        f[na, 0] += trac[1] * A
        f[na, 1] += trac[2] * A
        f[na, 2] += trac[0] * A
        f[nb, 0] -= trac[1] * A
        f[nb, 1] -= trac[2] * A
        f[nb, 2] -= trac[0] * A


@njit(cache=True)
def _step_chunk(n_sub, t0, dt, rate, t_ramp,
                conn, inv4d, vol, Lc, ply_of, khg, cvisc, cbulk,
                T_eps, T_sig_inv, C, s_pack,
                d, flags, elem_diss, hg, eps_out, sig_out,
                pairs, pair_area, pair_prop, cz_props, cz_state,
                u, v, f, mass,
                support_nodes, load_nodes,
                damage_on, acc):
    """Advance n_sub central-difference steps; accumulators in `acc`:
    [W_ext, W_damp, W_hg, P_sum, n_P, D_ply_total, t].
    Returns 0 on success, 1 on non-finite state.
    """
    nn = u.shape[0]
    t = t0

    for sub in range(n_sub):
        store = 1 if sub == n_sub - 1 else 0
        _assemble_forces(dt, conn, inv4d, vol, Lc, ply_of, khg, cvisc, cbulk,
                         T_eps, T_sig_inv, C, s_pack,
                         d, flags, elem_diss, hg, eps_out, sig_out,
                         pairs, pair_area, pair_prop, cz_props, cz_state,
                         u, v, f, damage_on, store, acc)

        # --- integrate
        t_half = t + 0.5 * dt
        vz = -_ramp_velocity(t_half, rate, t_ramp)
        for i in range(nn):
            mi = mass[i]
            v[i, 0] += dt * (-f[i, 0]) / mi
            v[i, 1] += dt * (-f[i, 1]) / mi
            v[i, 2] += dt * (-f[i, 2]) / mi
        for si in range(support_nodes.shape[0]):
            node = support_nodes[si]
            v[node, 2] = 0.0
        P = 0.0
        for li in range(load_nodes.shape[0]):
            node = load_nodes[li]
            v[node, 0] = 0.0
            v[node, 1] = 0.0
            # constraint reaction: R = m * (v_prescribed - v_free) / dt
            R = mass[node] * (vz - v[node, 2]) / dt
            v[node, 2] = vz
            P += R
            acc[0] += R * vz * dt
        acc[3] += -P
        acc[4] += 1.0
        for i in range(nn):
            u[i, 0] += dt * v[i, 0]
            u[i, 1] += dt * v[i, 1]
            u[i, 2] += dt * v[i, 2]
        t += dt

    acc[6] = t
    # finiteness check on a cheap aggregate
    chk = 0.0
    for i in range(nn):
        chk += u[i, 0] + u[i, 1] + u[i, 2] + v[i, 0] + v[i, 1] + v[i, 2]
    if not math.isfinite(chk):
        return 1
    return 0


@njit(cache=True)
def _stored_energy(conn, vol, eps_out, sig_out,
                   pairs, pair_area, pair_prop, cz_props, cz_state, u):
    """Recoverable elastic energy: secant element energy + interface springs."""
    E = 0.0
    ne = conn.shape[0]
    for e in range(ne):
        w = 0.0
        for i in range(6):
            w += sig_out[e, i] * eps_out[e, i]
        E += 0.5 * w * vol[e]
    for pidx in range(pairs.shape[0]):
        nb = pairs[pidx, 0]
        na = pairs[pidx, 1]
        ds1 = u[na, 0] - u[nb, 0]
        ds2 = u[na, 1] - u[nb, 1]
        dn = u[na, 2] - u[nb, 2]
        pr = cz_props[pair_prop[pidx]]
        D = cz_state[pidx, 0]
        tn = pr[0] * dn if dn <= 0.0 else (1.0 - D) * pr[0] * dn
        E += 0.5 * (tn * dn + (1.0 - D) * (pr[1] * ds1 * ds1 + pr[2] * ds2 * ds2)) \
            * pair_area[pidx]
    return E


def assemble_internal_forces(mesh: MeshModel, materials: MaterialSet,
                             u: np.ndarray, v: np.ndarray | None = None,
                             config: SolverConfig | None = None,
                             damage: bool = False
                             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single static force assembly for a given displacement field.

    Returns (f, eps, sig): nodal internal forces (the solver accelerates
    nodes with m*a = -f) and per-element global-frame strain and stress.
    Hourglass and damage state start from zero; intended for verification.
    """
    config = config or SolverConfig()
    if v is None:
        v = np.zeros_like(u)
    resin, _ = cz.validate(materials.resin)
    bp, _ = cz.validate(materials.bp)
    scale = config.interface_stiffness_scale
    cz_props = np.stack([
        cz.props_array(resin.scaled(stiffness_scale=scale)),
        cz.props_array(bp.scaled(stiffness_scale=scale)),
    ])
    C_mat = stiffness_from_engineering(materials.ply)
    st = materials.strengths
    s_pack = np.array([st.Xt, st.Xc, st.Yt, st.Yc, st.Zt, st.Zc,
                       st.S12, st.S13, st.S23, st.Gf, st.Gm])
    T_eps, T_sig_inv = ply_global_frames(mesh.ply_angles)
    ne = mesh.n_elements
    vol = mesh.elem_dims.prod(axis=1)
    inv4d = 1.0 / (4.0 * mesh.elem_dims)
    khg = config.hourglass_coefficient * C_mat[0, 0] * np.cbrt(vol)
    rho_s = materials.ply.density_tonne_mm3 * config.mass_scale
    cvisc = config.hourglass_viscosity * math.sqrt(rho_s * C_mat[2, 2]) \
        * np.cbrt(vol) ** 2
    cbulk = config.bulk_damping * rho_s * np.sqrt(C_mat[2, 2] / rho_s) \
        * mesh.elem_dims.min(axis=1)
    f = np.zeros((mesh.n_nodes, 3))
    d = np.zeros((ne, 3))
    flags = np.zeros((ne, 3), dtype=np.int8)
    elem_diss = np.zeros(ne)
    hg = np.zeros((ne, 4, 3))
    eps_out = np.zeros((ne, 6))
    sig_out = np.zeros((ne, 6))
    cz_state = np.zeros((len(mesh.pairs), 4))
    acc = np.zeros(7)
    dt = stable_dt(mesh, materials, config.mass_scale, config.safety_factor, scale)
    _assemble_forces(dt, mesh.hexes, inv4d, vol, mesh.elem_Lc,
                     mesh.elem_ply.astype(np.int64), khg, cvisc, cbulk,
                     T_eps, T_sig_inv, C_mat, s_pack,
                     d, flags, elem_diss, hg, eps_out, sig_out,
                     mesh.pairs, mesh.pair_area, mesh.pair_prop, cz_props,
                     cz_state, np.asarray(u, dtype=np.float64),
                     np.asarray(v, dtype=np.float64), f,
                     1 if damage else 0, 1, acc)
    return f, eps_out, sig_out


def run(mesh: MeshModel, materials: MaterialSet, config: SolverConfig
        ) -> SimulationResult:
    """Drive the bend test and sample the response.

    Cohesive properties are validated (and the structural stiffness scale
    applied) before stepping; the run aborts on an energy-balance violation
    or non-finite state.
    """
    resin, resin_msgs = cz.validate(materials.resin)
    bp, bp_msgs = cz.validate(materials.bp)
    scale = config.interface_stiffness_scale
    cz_props = np.stack([
        cz.props_array(resin.scaled(stiffness_scale=scale)),
        cz.props_array(bp.scaled(stiffness_scale=scale)),
    ])

    C_mat = stiffness_from_engineering(materials.ply)
    s_pack = np.array([materials.strengths.Xt, materials.strengths.Xc,
                       materials.strengths.Yt, materials.strengths.Yc,
                       materials.strengths.Zt, materials.strengths.Zc,
                       materials.strengths.S12, materials.strengths.S13,
                       materials.strengths.S23, materials.strengths.Gf,
                       materials.strengths.Gm])
    T_eps, T_sig_inv = ply_global_frames(mesh.ply_angles)

    rho_s = materials.ply.density_tonne_mm3 * config.mass_scale
    dt = stable_dt(mesh, materials, config.mass_scale, config.safety_factor,
                   scale)
    total_time = config.total_displacement / config.load_rate
    t_ramp = config.ramp_fraction * total_time
    # constant-rate phase only covers half the ramp distance; extend
    total_time += 0.5 * t_ramp
    out_dt = config.output_interval or total_time / 256.0
    n_sub = max(1, int(round(out_dt / dt)))
    n_chunks = int(math.ceil(total_time / (n_sub * dt)))

    ne = mesh.n_elements
    vol = mesh.elem_dims.prod(axis=1)
    inv4d = 1.0 / (4.0 * mesh.elem_dims)
    khg = config.hourglass_coefficient * C_mat[0, 0] * np.cbrt(vol)
    cvisc = config.hourglass_viscosity * math.sqrt(rho_s * C_mat[2, 2]) \
        * np.cbrt(vol) ** 2
    cbulk = config.bulk_damping * rho_s * np.sqrt(C_mat[2, 2] / rho_s) \
        * mesh.elem_dims.min(axis=1)

    u = np.zeros((mesh.n_nodes, 3))
    v = np.zeros((mesh.n_nodes, 3))
    f = np.zeros((mesh.n_nodes, 3))
    mass = lumped_mass(mesh, rho_s)
    d = np.zeros((ne, 3))
    flags = np.zeros((ne, 3), dtype=np.int8)
    elem_diss = np.zeros(ne)
    hg = np.zeros((ne, 4, 3))
    eps_out = np.zeros((ne, 6))
    sig_out = np.zeros((ne, 6))
    cz_state = np.zeros((len(mesh.pairs), 4))
    acc = np.zeros(7)

    supports = np.concatenate([mesh.left_support, mesh.right_support]).astype(np.int64)
    load_nodes = mesh.load_line.astype(np.int64)
    n_plies = mesh.spec.n_plies
    n_if = max(1, n_plies - 1)

    samples = {k: [] for k in ("t", "disp", "P", "Wext", "KE", "IE",
                               "Dply", "Dcoh", "Wart", "keie")}
    ply_d_im, ply_d_f_t, ply_d_f_c, iface_D = [], [], [], []
    first_matrix = None
    first_fiber_c = None
    termination = "completed"
    peak_load = 0.0
    n_steps = 0

    ply_ids = mesh.elem_ply.astype(np.int64)
    pair_if = mesh.pair_interface.astype(np.int64)

    for _ in range(n_chunks):
        status = _step_chunk(
            n_sub, acc[6], dt, config.load_rate, t_ramp,
            mesh.hexes, inv4d, vol, mesh.elem_Lc, ply_ids, khg, cvisc, cbulk,
            T_eps, T_sig_inv, C_mat, s_pack,
            d, flags, elem_diss, hg, eps_out, sig_out,
            mesh.pairs, mesh.pair_area, mesh.pair_prop, cz_props, cz_state,
            u, v, f, mass, supports, load_nodes,
            1 if config.damage_enabled else 0, acc)
        n_steps += n_sub
        if status != 0:
            termination = "non_finite_abort"
            break

        t_now = acc[6]
        disp = -u[load_nodes[0], 2]
        P_mean = acc[3] / max(acc[4], 1.0)
        acc[3] = 0.0
        acc[4] = 0.0
        KE = 0.5 * float(np.sum(mass[:, None] * v * v))
        stored = _stored_energy(mesh.hexes, vol, eps_out, sig_out,
                                mesh.pairs, mesh.pair_area, mesh.pair_prop,
                                cz_props, cz_state, u)
        D_coh = float(np.sum(cz_state[:, 3] * mesh.pair_area)) if len(cz_state) else 0.0
        W_art = acc[2] + acc[1]
        IE = stored + W_art
        D_ply = acc[5]
        W_ext = acc[0]

        samples["t"].append(t_now)
        samples["disp"].append(disp)
        samples["P"].append(P_mean)
        samples["Wext"].append(W_ext)
        samples["KE"].append(KE)
        samples["IE"].append(IE)
        samples["Dply"].append(D_ply)
        samples["Dcoh"].append(D_coh)
        samples["Wart"].append(W_art)
        samples["keie"].append(KE / IE if IE > 0 else 0.0)

        im = np.zeros(n_plies)
        ft = np.zeros(n_plies)
        fc = np.zeros(n_plies)
        np.maximum.at(im, ply_ids, d[:, 1])
        np.maximum.at(ft, ply_ids, np.where(flags[:, 0] == pd.FLAG_TENSION, d[:, 0], 0.0))
        np.maximum.at(fc, ply_ids, np.where(flags[:, 0] == pd.FLAG_COMPRESSION, d[:, 0], 0.0))
        ply_d_im.append(im)
        ply_d_f_t.append(ft)
        ply_d_f_c.append(fc)
        ifD = np.zeros(n_if)
        if len(cz_state):
            np.maximum.at(ifD, pair_if, cz_state[:, 0])
        iface_D.append(ifD)

        if first_matrix is None and im.max() >= FAILURE_THRESHOLD:
            ply = int(np.argmax(im))
            sel = (ply_ids == ply) & (d[:, 1] >= FAILURE_THRESHOLD)
            xs = 0.5 * (mesh.nodes[mesh.hexes[sel, 0], 0]
                        + mesh.nodes[mesh.hexes[sel, 1], 0])
            e_best = int(np.argmax(d[sel, 1]))
            mode = int(flags[sel, 1][e_best])
            first_matrix = {"ply": ply, "time_s": float(t_now),
                            "displacement_mm": float(disp),
                            "x_mm": float(xs[e_best]),
                            "mode_flag": mode}
        if first_fiber_c is None and fc.max() >= FAILURE_THRESHOLD:
            ply = int(np.argmax(fc))
            first_fiber_c = {"ply": ply, "time_s": float(t_now),
                             "displacement_mm": float(disp)}

        # quality gate: energy residual
        balance = W_ext - (KE + IE + D_ply + D_coh)
        if W_ext > 1.0 and abs(balance) > config.energy_tolerance * W_ext:
            termination = "energy_balance_abort"
            break

        peak_load = max(peak_load, P_mean)
        if (peak_load > config.min_peak_load and t_now > 2 * t_ramp
                and P_mean < config.termination_load_fraction * peak_load):
            termination = "post_peak"
            break
        if disp >= config.total_displacement:
            termination = "completed"
            break

    res_arrays = {k: np.asarray(vals) for k, vals in samples.items()}
    W_ext_f = res_arrays["Wext"][-1] if len(res_arrays["Wext"]) else 0.0
    bal_f = abs(W_ext_f - (res_arrays["KE"][-1] + res_arrays["IE"][-1]
                           + res_arrays["Dply"][-1] + res_arrays["Dcoh"][-1])) \
        if len(res_arrays["Wext"]) else 0.0
    residual = bal_f / max(W_ext_f, 1e-12)

    ie_arr = res_arrays["IE"]
    keie = res_arrays["keie"]
    if len(ie_arr):
        floor = config.ke_ie_floor * ie_arr.max()
        gated = keie[ie_arr >= floor]
        max_keie = float(gated.max()) if len(gated) else 0.0
    else:
        max_keie = 0.0

    field = None
    if config.field_output:
        field = {"d": d.copy(), "flags": flags.copy(),
                 "elem_diss": elem_diss.copy(), "cz_D": cz_state[:, 0].copy()}

    result = SimulationResult(
        time=res_arrays["t"], displacement=res_arrays["disp"],
        load=res_arrays["P"], W_ext=res_arrays["Wext"], KE=res_arrays["KE"],
        IE=res_arrays["IE"], D_ply=res_arrays["Dply"], D_coh=res_arrays["Dcoh"],
        W_art=res_arrays["Wart"], ke_ie=keie,
        ply_d_im=np.asarray(ply_d_im).reshape(-1, n_plies),
        ply_d_f_t=np.asarray(ply_d_f_t).reshape(-1, n_plies),
        ply_d_f_c=np.asarray(ply_d_f_c).reshape(-1, n_plies),
        interface_D=np.asarray(iface_D).reshape(-1, n_if),
        termination=termination, dt=dt, n_steps=n_steps,
        energy_residual=float(residual), max_ke_ie=max_keie,
        first_matrix_failure=first_matrix,
        first_fiber_compression=first_fiber_c,
        config=config, damage_field=field,
    )
    if termination in ("energy_balance_abort", "non_finite_abort"):
        raise SolverAbort(
            f"run aborted: {termination} (residual {residual:.3%}, "
            f"step {n_steps})", result)
    return result


def energy_audit(result: SimulationResult) -> dict:
    """Residual fraction of the energy balance plus the kinetic ratio gate."""
    return {"residual": result.energy_residual,
            "max_ke_ie": result.max_ke_ie,
            "termination": result.termination}

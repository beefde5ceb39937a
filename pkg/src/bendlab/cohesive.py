"""Zero-thickness interface law: penalty elasticity, quadratic stress
initiation, bilinear softening in an effective-separation measure with
Benzeggagh-Kenane mixed-mode toughness.

Compressive normal separation is penalized at full stiffness and never
damages the interface. The mode mix is re-evaluated from the instantaneous
separation components every update.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from numba import njit

from bendlab.materials import CohesiveProperties, MaterialError

_TINY = 1.0e-14


class CohesiveConfigError(ValueError):
    """Interface constants that cannot form a well-posed bilinear law."""


@dataclass(frozen=True)
class CohesiveState:
    """History of one interface point."""

    D: float = 0.0
    delta_m_max: float = 0.0
    mode_mix: float = 0.0
    dissipated: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.D, self.delta_m_max, self.mode_mix, self.dissipated])


def initiation_index(traction, props: CohesiveProperties) -> float:
    """Quadratic nominal stress measure; >= 1 means onset. Compressive
    normal traction is excluded through the Macaulay bracket."""
    tn, ts1, ts2 = traction
    tn_pos = max(tn, 0.0)
    return math.sqrt((tn_pos / props.taun) ** 2 + (ts1 / props.taus1) ** 2
                     + (ts2 / props.taus2) ** 2)


def mixed_mode_toughness(GI: float, GII: float, GIII: float,
                         props: CohesiveProperties) -> float:
    """Benzeggagh-Kenane interpolation between mode-I and shear toughness."""
    if GI < 0.0 or GII < 0.0 or GIII < 0.0:
        raise ValueError("energy release rates must be non-negative")
    Gshear = GII + GIII
    GT = GI + Gshear
    if GT <= 0.0:
        raise ValueError("total energy release rate must be positive")
    return props.GIc + (props.GIIc - props.GIc) * (Gshear / GT) ** props.eta


def validate(props: CohesiveProperties) -> tuple[CohesiveProperties, list[str]]:
    """Enforce K >= tau^2 / (2 G) per pure mode.

    Below that stiffness the elastic energy at onset already exceeds the
    toughness and bilinear softening is ill-posed, so the offending penalty
    stiffness is raised to 1.02 * tau^2 / (2 G) with a warning.
    """
    adjusted = {}
    messages = []
    for mode, K_name, tau, G in (
        ("mode I", "Kn", props.taun, props.GIc),
        ("shear 1", "Ks1", props.taus1, props.GIIc),
        ("shear 2", "Ks2", props.taus2, props.GIIIc),
    ):
        K = getattr(props, K_name)
        K_min = tau * tau / (2.0 * G)
        if K < K_min:
            new_K = 1.02 * K_min
            adjusted[K_name] = new_K
            messages.append(
                f"{mode}: {K_name}={K:g} MPa/mm below tau^2/(2G)={K_min:g}; "
                f"raised to {new_K:g}"
            )
    if not adjusted:
        return props, messages
    from dataclasses import replace
    return replace(props, **adjusted), messages


def props_array(props: CohesiveProperties) -> np.ndarray:
    """Packed constants for the numba kernel."""
    return np.array([props.Kn, props.Ks1, props.Ks2,
                     props.taun, props.taus1, props.taus2,
                     props.GIc, props.GIIc, props.GIIIc, props.eta])


@njit(cache=True)
def traction_update_kernel(dn, ds1, ds2, state, p, trac):
    """Advance one interface point.

    state: (4,) [D, delta_m_max, mode_mix, dissipated], updated in place.
    p:     packed constants (see props_array).
    trac:  (3,) output traction (tn, ts1, ts2), MPa.
    """
    Kn, Ks1, Ks2 = p[0], p[1], p[2]
    dn_pos = dn if dn > 0.0 else 0.0
    dm = math.sqrt(dn_pos * dn_pos + ds1 * ds1 + ds2 * ds2)

    if dm > _TINY:
        # instantaneous mode mix from the elastic energy split
        gI = 0.5 * Kn * dn_pos * dn_pos
        gS = 0.5 * (Ks1 * ds1 * ds1 + Ks2 * ds2 * ds2)
        mix = gS / (gI + gS)
        Gc = p[6] + (p[7] - p[6]) * mix ** p[9]

        cn = dn_pos / dm
        c1 = ds1 / dm
        c2 = ds2 / dm
        q = ((Kn * cn / p[3]) ** 2 + (Ks1 * c1 / p[4]) ** 2
             + (Ks2 * c2 / p[5]) ** 2)
        delta0 = 1.0 / math.sqrt(q)
        Keff = Kn * cn * cn + Ks1 * c1 * c1 + Ks2 * c2 * c2
        deltaf = 2.0 * Gc / (Keff * delta0)

        dm_max = state[1] if state[1] > dm else dm
        if dm_max <= delta0:
            D_cand = 0.0
        elif dm_max >= deltaf:
            D_cand = 1.0
        else:
            D_cand = deltaf * (dm_max - delta0) / (dm_max * (deltaf - delta0))
        D = state[0] if state[0] > D_cand else D_cand
        if D > 1.0:
            D = 1.0
        dD = D - state[0]
        if dD > 0.0:
            state[3] += (gI + gS) * dD
        state[0] = D
        state[1] = dm_max
        state[2] = mix
    else:
        D = state[0]

    trac[0] = Kn * dn if dn <= 0.0 else (1.0 - D) * Kn * dn
    trac[1] = (1.0 - D) * Ks1 * ds1
    trac[2] = (1.0 - D) * Ks2 * ds2


def traction_update(separation, prev: CohesiveState, props: CohesiveProperties
                    ) -> tuple[np.ndarray, CohesiveState]:
    """Record-based wrapper over the kernel (props must be pre-validated)."""
    checked, msgs = validate(props)
    if msgs:
        raise CohesiveConfigError(
            "cohesive constants fail the K >= tau^2/(2G) check; "
            "run validate() at setup: " + "; ".join(msgs)
        )
    dn, ds1, ds2 = (float(s) for s in separation)
    state = prev.as_array()
    trac = np.empty(3)
    traction_update_kernel(dn, ds1, ds2, state, props_array(props), trac)
    return trac, CohesiveState(state[0], state[1], state[2], state[3])

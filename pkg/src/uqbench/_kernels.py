"""Compiled inner loops of the finite-volume transport solver.

Scalar constitutive expressions here mirror ``physics`` exactly; the
vectorised functions there are the reference implementations the tests
compare against.  Saturations are clamped to [0, 1] only where they enter
a constitutive law, never in the evolved state.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def frac_flow(s, om2, mu_n, mu_w):
    s = min(max(s, 0.0), 1.0)
    mob_n = s ** om2 / mu_n
    mob_w = (1.0 - s) ** om2 / mu_w
    total = mob_n + mob_w
    if total <= 0.0:
        return 0.0
    return mob_n / total


@njit(cache=True)
def dfrac_flow(s, om2, mu_n, mu_w):
    s = min(max(s, 0.0), 1.0)
    mob_n = s ** om2 / mu_n
    mob_w = (1.0 - s) ** om2 / mu_w
    if s == 0.0 and om2 < 1.0:
        dmob_n = 0.0
    else:
        dmob_n = om2 * s ** (om2 - 1.0) / mu_n
    if s == 1.0 and om2 < 1.0:
        dmob_w = 0.0
    else:
        dmob_w = -om2 * (1.0 - s) ** (om2 - 1.0) / mu_w
    total = mob_n + mob_w
    return (dmob_n * mob_w - mob_n * dmob_w) / (total * total)


@njit(cache=True)
def central_upwind_flux(sm, sp, om2, mu_n, mu_w):
    """Central-upwind numerical flux with one-sided local speeds."""
    dm = dfrac_flow(sm, om2, mu_n, mu_w)
    dp = dfrac_flow(sp, om2, mu_n, mu_w)
    a_plus = max(max(dm, dp), 0.0)
    a_minus = min(min(dm, dp), 0.0)
    spread = a_plus - a_minus
    if spread <= 0.0:
        return frac_flow(sm, om2, mu_n, mu_w)
    fm = frac_flow(sm, om2, mu_n, mu_w)
    fp = frac_flow(sp, om2, mu_n, mu_w)
    return (a_plus * fm - a_minus * fp) / spread + a_plus * a_minus / spread * (sp - sm)


@njit(cache=True)
def minmod3(a, b, c):
    if a > 0.0 and b > 0.0 and c > 0.0:
        return min(min(a, b), c)
    if a < 0.0 and b < 0.0 and c < 0.0:
        return max(max(a, b), c)
    return 0.0


@njit(cache=True)
def reconstruct_faces(S, theta, ghost_left, ghost_right, S_minus, S_plus):
    """One-sided states at the n+1 faces from generalized-minmod slopes.

    ``S_minus[j]``/``S_plus[j]`` are the left/right states at face j.  The
    ghost cells carry the boundary policy; the outermost minus/plus states
    are the ghost values themselves (first-order at the boundary).
    """
    n = S.shape[0]
    for j in range(n):
        left = ghost_left if j == 0 else S[j - 1]
        right = ghost_right if j == n - 1 else S[j + 1]
        dl = S[j] - left
        dr = right - S[j]
        d = minmod3(theta * dl, 0.5 * (dl + dr), theta * dr)
        S_plus[j] = S[j] - 0.5 * d
        S_minus[j + 1] = S[j] + 0.5 * d
    S_minus[0] = ghost_left
    S_plus[n] = ghost_right


@njit(cache=True)
def rhs_row(S, u, om2, phi, r_centers, dr, theta, s_left, mu_n, mu_w, source, tend):
    """Semi-discrete tendency of one saturation row.

    Returns the boundary fluxes (F_0, F_n) for the conservation ledger.
    """
    n = S.shape[0]
    S_minus = np.empty(n + 1)
    S_plus = np.empty(n + 1)
    reconstruct_faces(S, theta, s_left, S[n - 1], S_minus, S_plus)
    flux_prev = central_upwind_flux(S_minus[0], S_plus[0], om2, mu_n, mu_w)
    f0 = flux_prev
    for j in range(n):
        flux_next = central_upwind_flux(S_minus[j + 1], S_plus[j + 1], om2, mu_n, mu_w)
        tend[j] = -(u / (phi * r_centers[j])) * (flux_next - flux_prev) / dr + source / phi
        flux_prev = flux_next
    return f0, flux_prev


@njit(cache=True)
def rhs_batch(S, u, om2, phi, r_centers, dr, theta, s_left, mu_n, mu_w, source, tend):
    for m in range(S.shape[0]):
        rhs_row(S[m], u[m], om2[m], phi[m], r_centers, dr, theta, s_left,
                mu_n, mu_w, source, tend[m])


@njit(cache=True)
def heun_step_row(S, dt, u, om2, phi, r_centers, dr, theta, s_left, mu_n, mu_w, source):
    """One Heun (RK2) step; returns (S_new, mass_in, mass_out) where the
    mass terms are the stage-averaged boundary flux integrals u*F*dt."""
    n = S.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    f0_1, fn_1 = rhs_row(S, u, om2, phi, r_centers, dr, theta, s_left,
                         mu_n, mu_w, source, k1)
    S1 = S + dt * k1
    f0_2, fn_2 = rhs_row(S1, u, om2, phi, r_centers, dr, theta, s_left,
                         mu_n, mu_w, source, k2)
    S_new = 0.5 * (S + S1 + dt * k2)
    mass_in = dt * 0.5 * u * (f0_1 + f0_2)
    mass_out = dt * 0.5 * u * (fn_1 + fn_2)
    return S_new, mass_in, mass_out


@njit(cache=True)
def run_fixed(S0, n_steps, dt, u, om2, phi, r_centers, dr, theta, s_left,
              mu_n, mu_w, source):
    """March n_steps Heun steps of size dt; returns the final row."""
    S = S0.copy()
    for _ in range(n_steps):
        S, _, _ = heun_step_row(S, dt, u, om2, phi, r_centers, dr, theta,
                                s_left, mu_n, mu_w, source)
    return S

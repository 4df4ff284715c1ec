"""Compiled inner loops: linkage closure, subsystem dynamics, strip aerodynamics,
and the fixed-step episode integrator.

Everything here operates on packed float64 parameter vectors so the whole step
can run under numba. The index maps below are the single source of truth for
the packing; the config layer builds the vectors and the API modules wrap the
kernels with friendly types.

Coordinate conventions
----------------------
Linkage plane (one wing, wing-root frame): x spanwise outboard, y flap
direction. The generalized coordinate vector of the massless chain is

    qk = [th1, th2, th4, th9, th10, th12, th13, th14, l3b, l3c, l8b, l10b]

where th1/th9 are the two crank angles (gear-coupled), th2/th4 close the
humerus four-bar, th10/th12 close the first radius loop, th13/th14 close the
second, and the four lengths are the prismatic FDC coordinates. Inputs are
u = [u_g, u_3b, u_3c, u_8b, u_10b] (crank and FDC accelerations).

Body frame: x forward, y left, z up; inertial frame z up, gravity along -z.
R (row-major 3x3) maps body to inertial. Pitch is extracted as
atan2(-R[2,0], hypot(R[0,0], R[1,0])); with z-up frames a nose-up attitude
gives a negative pitch value.

Dynamic state velocity ordering: vd = [pdot (3), phi_dot (4), omega_body (3)]
with phi = [left humerus flap, left elbow (relative), right humerus flap,
right elbow].
"""

import numpy as np
from numba import njit

# --- mech parameter indices -------------------------------------------------
M_A1X, M_A1Y = 0, 1          # crank-1 pivot (j1)
M_A4X, M_A4Y = 2, 3          # humerus rocker pivot (j4)
M_A9X, M_A9Y = 4, 5          # crank-2 pivot (j9)
M_A12X, M_A12Y = 6, 7        # radius rocker pivot (j12)
M_L1 = 8                     # crank-1 arm length
M_L2 = 9                     # humerus coupler
M_L3A = 10                   # humerus rocker base segment
M_B1 = 11                    # bend after l3a (rad)
M_B2 = 12                    # bend after l3b (rad)
M_L6 = 13                    # crank-2 arm length
M_L7 = 14                    # radius coupler
M_EO = 15                    # elbow mount offset beyond the l3b segment (j14)
M_L8A = 16                   # radius rocker base segment
M_L9E = 17                   # slider extension beyond j11 to j8 (B2)
M_L10A = 18                  # forearm base segment
M_L16E = 19                  # extension beyond j17 to the j16 output
M_L12 = 20                   # binary link (j17 to j8)
M_GR = 21                    # gear ratio th9/th1
M_GPH = 22                   # gear phase (rad)
M_BRH = 23                   # assembly branch sign, humerus loop
M_BR1 = 24                   # assembly branch sign, radius loop 1
M_BR2 = 25                   # assembly branch sign, radius loop 2
N_MECH = 26

# qk component indices
IQ_TH1, IQ_TH2, IQ_TH4, IQ_TH9 = 0, 1, 2, 3
IQ_TH10, IQ_TH12, IQ_TH13, IQ_TH14 = 4, 5, 6, 7
IQ_L3B, IQ_L3C, IQ_L8B, IQ_L10B = 8, 9, 10, 11

# --- dyn parameter indices ---------------------------------------------------
D_MBODY = 0
D_JX, D_JY, D_JZ = 1, 2, 3   # body inertia diagonal
D_GRAV = 4                   # gravity magnitude
D_WX, D_WY, D_WZ = 5, 6, 7   # wing-root offset of the linkage frame, body coords
D_MH, D_CH, D_ICH, D_LH = 8, 9, 10, 11    # humerus link: mass, com, I_perp(com), length
D_MR, D_CR, D_ICR, D_LR = 12, 13, 14, 15  # radius link
D_KH, D_CDH, D_R0H, D_RATTH = 16, 17, 18, 19  # humerus coupling: k, c, rest, attach radius
D_KR, D_CDR, D_R0R, D_RATTR = 20, 21, 22, 23  # radius coupling
D_GRAV_ON, D_DAMP_ON, D_AERO_ON = 24, 25, 26
N_DYN = 27

# --- aero parameter indices --------------------------------------------------
A_RHO = 0
A_CL0, A_CL1, A_CL2, A_CL3 = 1, 2, 3, 4
A_CD0, A_CD1, A_CD2, A_CD3 = 5, 6, 7, 8
A_WINDX, A_WINDY, A_WINDZ = 9, 10, 11
# per segment block: chord, span, root offset, n strips, incidence, x offset, spar fraction
A_SEG_H = 12
A_SEG_R = 19
N_AERO = 26
SEG_CHORD, SEG_SPAN, SEG_R0, SEG_NS, SEG_INC, SEG_XOFF, SEG_SPAR = 0, 1, 2, 3, 4, 5, 6

# --- controller parameter indices ---------------------------------------------
C_KD1, C_WREF, C_KP2, C_KD2 = 0, 1, 2, 3
C_LZP = 4        # 4 entries
C_KC = 8         # 4 entries (meters per radian)
C_THREF = 12
C_LMIN = 13      # 4 entries
C_LMAX = 17      # 4 entries
C_FLAP_ON, C_FDC_ON, C_PITCH_ON = 21, 22, 23
N_CTRL = 24

# --- packed state layout -------------------------------------------------------
Y_QK = 0          # 12
Y_QKD = 12        # 12
Y_P = 24          # 3
Y_PHI = 27        # 4: [LH flap, LE elbow, RH flap, RE elbow]
Y_VD = 31         # 10: [pdot 3, phid 4, omega 3]
Y_R = 41          # 9 row-major
Y_WORK = 50       # 3: [drive, damper, aero] cumulative work
N_Y = 53

# --- episode log columns ---------------------------------------------------------
# t, qk, qkd, p, phi, vd, R, works, ug, up, lref, theta_y, Pi, Ekin, Uspr, Ugrav,
# per-segment aero force (LH, LR, RH, RR), p5, v5, p16, v16
L_T = 0
L_QK = 1
L_QKD = 13
L_P = 25
L_PHI = 28
L_VD = 32
L_R = 42
L_WORK = 51
L_UG = 54
L_UP = 55
L_LREF = 59
L_THY = 63
L_PI = 64
L_EKIN = 67
L_USPR = 68
L_UGRAV = 69
L_FAERO = 70      # 12
L_P5 = 82         # 2
L_V5 = 84         # 2
L_P16 = 86        # 2
L_V16 = 88        # 2
N_LOG = 90

STATUS_OK = 0
STATUS_NO_ASSEMBLY = 1
STATUS_BRANCH_JUMP = 2
STATUS_DIVERGED = 3


# =============================================================================
# massless linkage chain
# =============================================================================

@njit(cache=True)
def _wrap_pi(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


@njit(cache=True)
def _circle_intersect(c1x, c1y, r1, c2x, c2y, r2, sign):
    """Intersection of two circles, picking the branch given by sign.

    Returns (ok, px, py). Fails when the circles do not meet or are concentric.
    """
    dx = c2x - c1x
    dy = c2y - c1y
    d2 = dx * dx + dy * dy
    d = np.sqrt(d2)
    if d < 1e-14:
        return False, 0.0, 0.0
    a = (d2 + r1 * r1 - r2 * r2) / (2.0 * d)
    h2 = r1 * r1 - a * a
    if h2 < 0.0:
        # tolerate grazing contact at machine precision
        if h2 > -1e-18 * max(r1 * r1, 1e-30):
            h2 = 0.0
        else:
            return False, 0.0, 0.0
    h = np.sqrt(h2)
    ux = dx / d
    uy = dy / d
    px = c1x + a * ux - sign * h * uy
    py = c1y + a * uy + sign * h * ux
    return True, px, py


@njit(cache=True)
def _solve_loop(c1x, c1y, r1, c2x, c2y, r2, use_seed, seed_a, seed_b):
    """Two-circle loop closure for link pair (c1->P length r1, c2->P length r2).

    With use_seed, picks the intersection whose angles are closest to the seed
    pair and reports the angular jump; otherwise sign +1 is taken and
    branch selection is up to the caller.

    Returns (ok, ang1, ang2, jump) where ang1 = atan2(P-c1), ang2 = atan2(P-c2).
    """
    ok_p, pxp, pyp = _circle_intersect(c1x, c1y, r1, c2x, c2y, r2, 1.0)
    if not ok_p:
        return False, 0.0, 0.0, 0.0
    a1p = np.arctan2(pyp - c1y, pxp - c1x)
    a2p = np.arctan2(pyp - c2y, pxp - c2x)
    if not use_seed:
        return True, a1p, a2p, 0.0
    okm, pxm, pym = _circle_intersect(c1x, c1y, r1, c2x, c2y, r2, -1.0)
    a1m = np.arctan2(pym - c1y, pxm - c1x)
    a2m = np.arctan2(pym - c2y, pxm - c2x)
    dp = abs(_wrap_pi(a1p - seed_a)) + abs(_wrap_pi(a2p - seed_b))
    dm = abs(_wrap_pi(a1m - seed_a)) + abs(_wrap_pi(a2m - seed_b))
    if dp <= dm:
        return True, a1p, a2p, dp
    return True, a1m, a2m, dm


@njit(cache=True)
def kin_solve(mech, th1, lengths, seed, use_seed, jump_tol):
    """Solve the three loop closures for a crank angle and FDC lengths.

    seed is a full qk vector (used for branch continuity when use_seed).
    Returns (status, qk) with zero velocities implied; the caller fills rates.
    """
    qk = np.zeros(12)
    qk[IQ_TH1] = th1
    qk[IQ_L3B] = lengths[0]
    qk[IQ_L3C] = lengths[1]
    qk[IQ_L8B] = lengths[2]
    qk[IQ_L10B] = lengths[3]
    th9 = mech[M_GR] * th1 + mech[M_GPH]
    qk[IQ_TH9] = th9

    jump = 0.0

    # humerus four-bar: j2 = A1 + L1 e(th1); unknown j3 ties coupler and rocker.
    j2x = mech[M_A1X] + mech[M_L1] * np.cos(th1)
    j2y = mech[M_A1Y] + mech[M_L1] * np.sin(th1)
    if use_seed:
        ok, th2, th4, dj = _solve_loop(j2x, j2y, mech[M_L2],
                                       mech[M_A4X], mech[M_A4Y], mech[M_L3A],
                                       True, seed[IQ_TH2], seed[IQ_TH4])
    else:
        ok, th2p, th4p, dj = _solve_loop(j2x, j2y, mech[M_L2],
                                         mech[M_A4X], mech[M_A4Y], mech[M_L3A],
                                         False, 0.0, 0.0)
        if ok and mech[M_BRH] < 0.0:
            ok2, pxm, pym = _circle_intersect(j2x, j2y, mech[M_L2],
                                              mech[M_A4X], mech[M_A4Y],
                                              mech[M_L3A], -1.0)
            th2p = np.arctan2(pym - j2y, pxm - j2x)
            th4p = np.arctan2(pym - mech[M_A4Y], pxm - mech[M_A4X])
        th2, th4 = th2p, th4p
    if not ok:
        return STATUS_NO_ASSEMBLY, qk
    if dj > jump:
        jump = dj
    qk[IQ_TH2] = th2
    qk[IQ_TH4] = th4

    # radius loop 1: p10 = A9 + L6 e(th9); rocker radius L8a + l8b.
    p10x = mech[M_A9X] + mech[M_L6] * np.cos(th9)
    p10y = mech[M_A9Y] + mech[M_L6] * np.sin(th9)
    r8 = mech[M_L8A] + qk[IQ_L8B]
    if use_seed:
        ok, th10, th12, dj = _solve_loop(p10x, p10y, mech[M_L7],
                                         mech[M_A12X], mech[M_A12Y], r8,
                                         True, seed[IQ_TH10], seed[IQ_TH12])
    else:
        ok, th10, th12, dj = _solve_loop(p10x, p10y, mech[M_L7],
                                         mech[M_A12X], mech[M_A12Y], r8,
                                         False, 0.0, 0.0)
        if ok and mech[M_BR1] < 0.0:
            ok2, pxm, pym = _circle_intersect(p10x, p10y, mech[M_L7],
                                              mech[M_A12X], mech[M_A12Y], r8, -1.0)
            th10 = np.arctan2(pym - p10y, pxm - p10x)
            th12 = np.arctan2(pym - mech[M_A12Y], pxm - mech[M_A12X])
    if not ok:
        return STATUS_NO_ASSEMBLY, qk
    if dj > jump:
        jump = dj
    qk[IQ_TH10] = th10
    qk[IQ_TH12] = th12

    # radius loop 2: the forearm pivots at B1 on the humerus output arm (the
    # massless elbow) and is steered by the binary link from B2 on the rocker
    # slider extension.
    a1b = th4 + mech[M_B1]
    a2b = a1b + mech[M_B2]
    b1x = (mech[M_A4X] + mech[M_L3A] * np.cos(th4)
           + qk[IQ_L3B] * np.cos(a1b) + mech[M_EO] * np.cos(a2b))
    b1y = (mech[M_A4Y] + mech[M_L3A] * np.sin(th4)
           + qk[IQ_L3B] * np.sin(a1b) + mech[M_EO] * np.sin(a2b))
    rb2 = mech[M_L8A] + qk[IQ_L8B] + mech[M_L9E]
    b2x = mech[M_A12X] + rb2 * np.cos(th12)
    b2y = mech[M_A12Y] + rb2 * np.sin(th12)
    r10 = mech[M_L10A] + qk[IQ_L10B]
    if use_seed:
        ok, th13, th14, dj = _solve_loop(b1x, b1y, r10, b2x, b2y, mech[M_L12],
                                         True, seed[IQ_TH13], seed[IQ_TH14])
    else:
        ok, th13, th14, dj = _solve_loop(b1x, b1y, r10, b2x, b2y, mech[M_L12],
                                         False, 0.0, 0.0)
        if ok and mech[M_BR2] < 0.0:
            ok2, pxm, pym = _circle_intersect(b1x, b1y, r10, b2x, b2y,
                                              mech[M_L12], -1.0)
            th13 = np.arctan2(pym - b1y, pxm - b1x)
            th14 = np.arctan2(pym - b2y, pxm - b2x)
    if not ok:
        return STATUS_NO_ASSEMBLY, qk
    if dj > jump:
        jump = dj
    qk[IQ_TH13] = th13
    qk[IQ_TH14] = th14

    if use_seed and jump > jump_tol:
        return STATUS_BRANCH_JUMP, qk
    return STATUS_OK, qk


@njit(cache=True)
def kin_residual(mech, qk):
    """Stacked closure residual: [gear, humerus loop xy, radius-1 xy, radius-2 xy]."""
    r = np.zeros(7)
    th1, th2, th4 = qk[IQ_TH1], qk[IQ_TH2], qk[IQ_TH4]
    th9, th10, th12 = qk[IQ_TH9], qk[IQ_TH10], qk[IQ_TH12]
    th13, th14 = qk[IQ_TH13], qk[IQ_TH14]
    r[0] = th9 - mech[M_GR] * th1 - mech[M_GPH]
    r[1] = (mech[M_A1X] + mech[M_L1] * np.cos(th1) + mech[M_L2] * np.cos(th2)
            - mech[M_A4X] - mech[M_L3A] * np.cos(th4))
    r[2] = (mech[M_A1Y] + mech[M_L1] * np.sin(th1) + mech[M_L2] * np.sin(th2)
            - mech[M_A4Y] - mech[M_L3A] * np.sin(th4))
    r8 = mech[M_L8A] + qk[IQ_L8B]
    r[3] = (mech[M_A9X] + mech[M_L6] * np.cos(th9) + mech[M_L7] * np.cos(th10)
            - mech[M_A12X] - r8 * np.cos(th12))
    r[4] = (mech[M_A9Y] + mech[M_L6] * np.sin(th9) + mech[M_L7] * np.sin(th10)
            - mech[M_A12Y] - r8 * np.sin(th12))
    rb2 = r8 + mech[M_L9E]
    r10 = mech[M_L10A] + qk[IQ_L10B]
    a1b = th4 + mech[M_B1]
    a2b = a1b + mech[M_B2]
    r[5] = (mech[M_A4X] + mech[M_L3A] * np.cos(th4) + qk[IQ_L3B] * np.cos(a1b)
            + mech[M_EO] * np.cos(a2b) + r10 * np.cos(th13)
            - mech[M_L12] * np.cos(th14)
            - mech[M_A12X] - rb2 * np.cos(th12))
    r[6] = (mech[M_A4Y] + mech[M_L3A] * np.sin(th4) + qk[IQ_L3B] * np.sin(a1b)
            + mech[M_EO] * np.sin(a2b) + r10 * np.sin(th13)
            - mech[M_L12] * np.sin(th14)
            - mech[M_A12Y] - rb2 * np.sin(th12))
    return r


@njit(cache=True)
def kin_jacobian(mech, qk):
    """d(residual)/d(qk), 7x12."""
    A = np.zeros((7, 12))
    s1, c1 = np.sin(qk[IQ_TH1]), np.cos(qk[IQ_TH1])
    s2, c2 = np.sin(qk[IQ_TH2]), np.cos(qk[IQ_TH2])
    s4, c4 = np.sin(qk[IQ_TH4]), np.cos(qk[IQ_TH4])
    s9, c9 = np.sin(qk[IQ_TH9]), np.cos(qk[IQ_TH9])
    s10, c10 = np.sin(qk[IQ_TH10]), np.cos(qk[IQ_TH10])
    s12, c12 = np.sin(qk[IQ_TH12]), np.cos(qk[IQ_TH12])
    s13, c13 = np.sin(qk[IQ_TH13]), np.cos(qk[IQ_TH13])
    s14, c14 = np.sin(qk[IQ_TH14]), np.cos(qk[IQ_TH14])
    r8 = mech[M_L8A] + qk[IQ_L8B]
    rb2 = r8 + mech[M_L9E]
    r10 = mech[M_L10A] + qk[IQ_L10B]
    a1b = qk[IQ_TH4] + mech[M_B1]
    a2b = a1b + mech[M_B2]
    s1b, c1b = np.sin(a1b), np.cos(a1b)
    s2b, c2b = np.sin(a2b), np.cos(a2b)

    A[0, IQ_TH9] = 1.0
    A[0, IQ_TH1] = -mech[M_GR]

    A[1, IQ_TH1] = -mech[M_L1] * s1
    A[2, IQ_TH1] = mech[M_L1] * c1
    A[1, IQ_TH2] = -mech[M_L2] * s2
    A[2, IQ_TH2] = mech[M_L2] * c2
    A[1, IQ_TH4] = mech[M_L3A] * s4
    A[2, IQ_TH4] = -mech[M_L3A] * c4

    A[3, IQ_TH9] = -mech[M_L6] * s9
    A[4, IQ_TH9] = mech[M_L6] * c9
    A[3, IQ_TH10] = -mech[M_L7] * s10
    A[4, IQ_TH10] = mech[M_L7] * c10
    A[3, IQ_TH12] = r8 * s12
    A[4, IQ_TH12] = -r8 * c12
    A[3, IQ_L8B] = -c12
    A[4, IQ_L8B] = -s12

    A[5, IQ_TH4] = (-mech[M_L3A] * s4 - qk[IQ_L3B] * s1b - mech[M_EO] * s2b)
    A[6, IQ_TH4] = (mech[M_L3A] * c4 + qk[IQ_L3B] * c1b + mech[M_EO] * c2b)
    A[5, IQ_L3B] = c1b
    A[6, IQ_L3B] = s1b
    A[5, IQ_TH13] = -r10 * s13
    A[6, IQ_TH13] = r10 * c13
    A[5, IQ_TH14] = mech[M_L12] * s14
    A[6, IQ_TH14] = -mech[M_L12] * c14
    A[5, IQ_TH12] = rb2 * s12
    A[6, IQ_TH12] = -rb2 * c12
    A[5, IQ_L8B] = -c12
    A[6, IQ_L8B] = -s12
    A[5, IQ_L10B] = c13
    A[6, IQ_L10B] = s13
    return A


@njit(cache=True)
def kin_bias(mech, qk, qkd):
    """Velocity-product terms: d/dt(A) qkd (residual second derivative at qkdd=0)."""
    b = np.zeros(7)
    w1, w2, w4 = qkd[IQ_TH1], qkd[IQ_TH2], qkd[IQ_TH4]
    w9, w10, w12 = qkd[IQ_TH9], qkd[IQ_TH10], qkd[IQ_TH12]
    w13, w14 = qkd[IQ_TH13], qkd[IQ_TH14]
    dl8, dl10 = qkd[IQ_L8B], qkd[IQ_L10B]
    s1, c1 = np.sin(qk[IQ_TH1]), np.cos(qk[IQ_TH1])
    s2, c2 = np.sin(qk[IQ_TH2]), np.cos(qk[IQ_TH2])
    s4, c4 = np.sin(qk[IQ_TH4]), np.cos(qk[IQ_TH4])
    s9, c9 = np.sin(qk[IQ_TH9]), np.cos(qk[IQ_TH9])
    s10, c10 = np.sin(qk[IQ_TH10]), np.cos(qk[IQ_TH10])
    s12, c12 = np.sin(qk[IQ_TH12]), np.cos(qk[IQ_TH12])
    s13, c13 = np.sin(qk[IQ_TH13]), np.cos(qk[IQ_TH13])
    s14, c14 = np.sin(qk[IQ_TH14]), np.cos(qk[IQ_TH14])
    r8 = mech[M_L8A] + qk[IQ_L8B]
    rb2 = r8 + mech[M_L9E]
    r10 = mech[M_L10A] + qk[IQ_L10B]
    a1b = qk[IQ_TH4] + mech[M_B1]
    a2b = a1b + mech[M_B2]
    s1b, c1b = np.sin(a1b), np.cos(a1b)
    s2b, c2b = np.sin(a2b), np.cos(a2b)
    dl3b = qkd[IQ_L3B]

    b[1] = (-mech[M_L1] * c1 * w1 * w1 - mech[M_L2] * c2 * w2 * w2
            + mech[M_L3A] * c4 * w4 * w4)
    b[2] = (-mech[M_L1] * s1 * w1 * w1 - mech[M_L2] * s2 * w2 * w2
            + mech[M_L3A] * s4 * w4 * w4)

    b[3] = (-mech[M_L6] * c9 * w9 * w9 - mech[M_L7] * c10 * w10 * w10
            + r8 * c12 * w12 * w12 + 2.0 * dl8 * w12 * s12)
    b[4] = (-mech[M_L6] * s9 * w9 * w9 - mech[M_L7] * s10 * w10 * w10
            + r8 * s12 * w12 * w12 - 2.0 * dl8 * w12 * c12)

    b[5] = (-(mech[M_L3A] * c4 + qk[IQ_L3B] * c1b + mech[M_EO] * c2b) * w4 * w4
            - 2.0 * dl3b * w4 * s1b
            - r10 * c13 * w13 * w13 - 2.0 * dl10 * w13 * s13
            + mech[M_L12] * c14 * w14 * w14
            + rb2 * c12 * w12 * w12 + 2.0 * dl8 * w12 * s12)
    b[6] = (-(mech[M_L3A] * s4 + qk[IQ_L3B] * s1b + mech[M_EO] * s2b) * w4 * w4
            + 2.0 * dl3b * w4 * c1b
            - r10 * s13 * w13 * w13 + 2.0 * dl10 * w13 * c13
            + mech[M_L12] * s14 * w14 * w14
            + rb2 * s12 * w12 * w12 - 2.0 * dl8 * w12 * c12)
    return b


@njit(cache=True)
def _solve22(a11, a12, a21, a22, b1, b2):
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-300:
        return False, 0.0, 0.0
    return True, (b1 * a22 - b2 * a12) / det, (a11 * b2 - a21 * b1) / det


@njit(cache=True)
def kin_dep_rates(mech, qk, th1_dot, ldot):
    """Dependent coordinate rates from the actuated rates (velocity projection)."""
    qkd = np.zeros(12)
    qkd[IQ_TH1] = th1_dot
    qkd[IQ_L3B] = ldot[0]
    qkd[IQ_L3C] = ldot[1]
    qkd[IQ_L8B] = ldot[2]
    qkd[IQ_L10B] = ldot[3]
    qkd[IQ_TH9] = mech[M_GR] * th1_dot
    A = kin_jacobian(mech, qk)
    # humerus loop rows 1,2: unknowns th2, th4
    ok, x, y = _solve22(A[1, IQ_TH2], A[1, IQ_TH4], A[2, IQ_TH2], A[2, IQ_TH4],
                        -A[1, IQ_TH1] * th1_dot, -A[2, IQ_TH1] * th1_dot)
    qkd[IQ_TH2] = x
    qkd[IQ_TH4] = y
    # radius loop 1 rows 3,4: unknowns th10, th12
    b1 = -A[3, IQ_TH9] * qkd[IQ_TH9] - A[3, IQ_L8B] * ldot[2]
    b2 = -A[4, IQ_TH9] * qkd[IQ_TH9] - A[4, IQ_L8B] * ldot[2]
    ok, x, y = _solve22(A[3, IQ_TH10], A[3, IQ_TH12], A[4, IQ_TH10], A[4, IQ_TH12],
                        b1, b2)
    qkd[IQ_TH10] = x
    qkd[IQ_TH12] = y
    # radius loop 2 rows 5,6: unknowns th13, th14
    b1 = (-A[5, IQ_TH4] * qkd[IQ_TH4] - A[5, IQ_L3B] * ldot[0]
          - A[5, IQ_TH12] * qkd[IQ_TH12] - A[5, IQ_L8B] * ldot[2]
          - A[5, IQ_L10B] * ldot[3])
    b2 = (-A[6, IQ_TH4] * qkd[IQ_TH4] - A[6, IQ_L3B] * ldot[0]
          - A[6, IQ_TH12] * qkd[IQ_TH12] - A[6, IQ_L8B] * ldot[2]
          - A[6, IQ_L10B] * ldot[3])
    ok, x, y = _solve22(A[5, IQ_TH13], A[5, IQ_TH14], A[6, IQ_TH13], A[6, IQ_TH14],
                        b1, b2)
    qkd[IQ_TH13] = x
    qkd[IQ_TH14] = y
    return qkd


@njit(cache=True)
def kin_accel(mech, qk, qkd, u):
    """Coordinate accelerations for input u = [u_g, u_3b, u_3c, u_8b, u_10b].

    Equivalent to solving the stacked selection/gear/loop system; the block
    triangular structure is exploited directly.
    """
    qkdd = np.zeros(12)
    qkdd[IQ_TH1] = u[0]
    qkdd[IQ_L3B] = u[1]
    qkdd[IQ_L3C] = u[2]
    qkdd[IQ_L8B] = u[3]
    qkdd[IQ_L10B] = u[4]
    qkdd[IQ_TH9] = mech[M_GR] * u[0]
    A = kin_jacobian(mech, qk)
    b = kin_bias(mech, qk, qkd)
    # each loop: A_dep qdd_dep = -bias - A_known qdd_known
    b1 = -b[1] - A[1, IQ_TH1] * qkdd[IQ_TH1]
    b2 = -b[2] - A[2, IQ_TH1] * qkdd[IQ_TH1]
    ok, x, y = _solve22(A[1, IQ_TH2], A[1, IQ_TH4], A[2, IQ_TH2], A[2, IQ_TH4],
                        b1, b2)
    if not ok:
        qkdd[0] = np.nan
        return qkdd
    qkdd[IQ_TH2] = x
    qkdd[IQ_TH4] = y
    b1 = -b[3] - A[3, IQ_TH9] * qkdd[IQ_TH9] - A[3, IQ_L8B] * qkdd[IQ_L8B]
    b2 = -b[4] - A[4, IQ_TH9] * qkdd[IQ_TH9] - A[4, IQ_L8B] * qkdd[IQ_L8B]
    ok, x, y = _solve22(A[3, IQ_TH10], A[3, IQ_TH12], A[4, IQ_TH10], A[4, IQ_TH12],
                        b1, b2)
    if not ok:
        qkdd[0] = np.nan
        return qkdd
    qkdd[IQ_TH10] = x
    qkdd[IQ_TH12] = y
    b1 = (-b[5] - A[5, IQ_TH4] * qkdd[IQ_TH4] - A[5, IQ_L3B] * qkdd[IQ_L3B]
          - A[5, IQ_TH12] * qkdd[IQ_TH12] - A[5, IQ_L8B] * qkdd[IQ_L8B]
          - A[5, IQ_L10B] * qkdd[IQ_L10B])
    b2 = (-b[6] - A[6, IQ_TH4] * qkdd[IQ_TH4] - A[6, IQ_L3B] * qkdd[IQ_L3B]
          - A[6, IQ_TH12] * qkdd[IQ_TH12] - A[6, IQ_L8B] * qkdd[IQ_L8B]
          - A[6, IQ_L10B] * qkdd[IQ_L10B])
    ok, x, y = _solve22(A[5, IQ_TH13], A[5, IQ_TH14], A[6, IQ_TH13], A[6, IQ_TH14],
                        b1, b2)
    if not ok:
        qkdd[0] = np.nan
        return qkdd
    qkdd[IQ_TH13] = x
    qkdd[IQ_TH14] = y
    return qkdd


@njit(cache=True)
def kin_outputs(mech, qk, qkd, qkdd):
    """Planar position/velocity/acceleration of the driven joints j5 and j16.

    Returns a 12-vector [p5, v5, a5, p16, v16, a16] (2 each).
    """
    out = np.zeros(12)
    th4, w4, a4 = qk[IQ_TH4], qkd[IQ_TH4], qkdd[IQ_TH4]
    b1a = th4 + mech[M_B1]
    b2a = b1a + mech[M_B2]
    l3b, dl3b, ddl3b = qk[IQ_L3B], qkd[IQ_L3B], qkdd[IQ_L3B]
    l3c, dl3c, ddl3c = qk[IQ_L3C], qkd[IQ_L3C], qkdd[IQ_L3C]

    # chain of three segments rigidly phased to th4; FDC lengths vary
    ex0, ey0 = np.cos(th4), np.sin(th4)
    ex1, ey1 = np.cos(b1a), np.sin(b1a)
    ex2, ey2 = np.cos(b2a), np.sin(b2a)
    l3a = mech[M_L3A]
    out[0] = mech[M_A4X] + l3a * ex0 + l3b * ex1 + l3c * ex2
    out[1] = mech[M_A4Y] + l3a * ey0 + l3b * ey1 + l3c * ey2
    # e'(t) = (-sin, cos)
    out[2] = (-l3a * ey0 * w4 + dl3b * ex1 - l3b * ey1 * w4
              + dl3c * ex2 - l3c * ey2 * w4)
    out[3] = (l3a * ex0 * w4 + dl3b * ey1 + l3b * ex1 * w4
              + dl3c * ey2 + l3c * ex2 * w4)
    out[4] = (l3a * (-ey0 * a4 - ex0 * w4 * w4)
              + ddl3b * ex1 - 2.0 * dl3b * ey1 * w4
              + l3b * (-ey1 * a4 - ex1 * w4 * w4)
              + ddl3c * ex2 - 2.0 * dl3c * ey2 * w4
              + l3c * (-ey2 * a4 - ex2 * w4 * w4))
    out[5] = (l3a * (ex0 * a4 - ey0 * w4 * w4)
              + ddl3b * ey1 + 2.0 * dl3b * ex1 * w4
              + l3b * (ex1 * a4 - ey1 * w4 * w4)
              + ddl3c * ey2 + 2.0 * dl3c * ex2 * w4
              + l3c * (ex2 * a4 - ey2 * w4 * w4))

    # j16 rides the massless elbow B1 (on the humerus arm) plus the forearm
    th13, w13, a13 = qk[IQ_TH13], qkd[IQ_TH13], qkdd[IQ_TH13]
    l10b, dl10b, ddl10b = qk[IQ_L10B], qkd[IQ_L10B], qkdd[IQ_L10B]
    eo = mech[M_EO]
    r16 = mech[M_L10A] + l10b + mech[M_L16E]
    exb, eyb = np.cos(th13), np.sin(th13)
    b1px = mech[M_A4X] + l3a * ex0 + l3b * ex1 + eo * ex2
    b1py = mech[M_A4Y] + l3a * ey0 + l3b * ey1 + eo * ey2
    b1vx = -(l3a * ey0 + l3b * ey1 + eo * ey2) * w4 + dl3b * ex1
    b1vy = (l3a * ex0 + l3b * ex1 + eo * ex2) * w4 + dl3b * ey1
    b1ax = (-(l3a * ey0 + l3b * ey1 + eo * ey2) * a4
            - (l3a * ex0 + l3b * ex1 + eo * ex2) * w4 * w4
            + ddl3b * ex1 - 2.0 * dl3b * ey1 * w4)
    b1ay = ((l3a * ex0 + l3b * ex1 + eo * ex2) * a4
            - (l3a * ey0 + l3b * ey1 + eo * ey2) * w4 * w4
            + ddl3b * ey1 + 2.0 * dl3b * ex1 * w4)
    out[6] = b1px + r16 * exb
    out[7] = b1py + r16 * eyb
    out[8] = b1vx + dl10b * exb - r16 * eyb * w13
    out[9] = b1vy + dl10b * eyb + r16 * exb * w13
    out[10] = (b1ax + ddl10b * exb - 2.0 * dl10b * eyb * w13
               + r16 * (-eyb * a13 - exb * w13 * w13))
    out[11] = (b1ay + ddl10b * eyb + 2.0 * dl10b * exb * w13
               + r16 * (exb * a13 - eyb * w13 * w13))
    return out


# =============================================================================
# massed subsystem + aerodynamics + full derivative
# =============================================================================

@njit(cache=True)
def _cross(ax, ay, az, bx, by, bz):
    return ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx


@njit(cache=True)
def pitch_of(R):
    """Z-Y-X Tait-Bryan pitch of a flat row-major body-to-inertial rotation."""
    return np.arctan2(-R[6], np.sqrt(R[0] * R[0] + R[3] * R[3]))


@njit(cache=True)
def controller_eval(ctrl, qk, qkd, R):
    """Flap-rate, FDC-length, and pitch control laws. Returns (u5, lref4)."""
    u = np.zeros(5)
    lref = np.zeros(4)
    thy = pitch_of(R)
    for i in range(4):
        if ctrl[C_PITCH_ON] > 0.5:
            v = ctrl[C_LZP + i] + ctrl[C_KC + i] * (ctrl[C_THREF] - thy)
        else:
            v = ctrl[C_LZP + i]
        lo = ctrl[C_LMIN + i]
        hi = ctrl[C_LMAX + i]
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        lref[i] = v
    if ctrl[C_FLAP_ON] > 0.5:
        u[0] = ctrl[C_KD1] * (ctrl[C_WREF] - qkd[IQ_TH1])
    if ctrl[C_FDC_ON] > 0.5:
        for i in range(4):
            li = qk[8 + i]
            ldi = qkd[8 + i]
            u[1 + i] = ctrl[C_KP2] * (lref[i] - li) - ctrl[C_KD2] * ldi
    return u, lref


@njit(cache=True)
def _body_points(dyn, mech, phi, side):
    """Shoulder position, link directions and their flap-angle derivatives
    for one wing side (0 = left, 1 = right)."""
    sgn = 1.0 if side == 0 else -1.0
    sx = dyn[D_WX]
    sy = sgn * (dyn[D_WY] + mech[M_A4X])
    sz = dyn[D_WZ] + mech[M_A4Y]
    ph = phi[2 * side]
    pe = phi[2 * side + 1]
    psi = ph + pe
    dh = np.array([0.0, sgn * np.cos(ph), np.sin(ph)])
    dhp = np.array([0.0, -sgn * np.sin(ph), np.cos(ph)])
    dr = np.array([0.0, sgn * np.cos(psi), np.sin(psi)])
    drp = np.array([0.0, -sgn * np.sin(psi), np.cos(psi)])
    return sgn, sx, sy, sz, dh, dhp, dr, drp


@njit(cache=True)
def lift_drag(aero, alpha):
    cl = aero[A_CL0] + aero[A_CL1] * np.sin(aero[A_CL2] * alpha + aero[A_CL3])
    cd = aero[A_CD0] - aero[A_CD1] * np.cos(aero[A_CD2] * alpha + aero[A_CD3])
    return cl, cd


@njit(cache=True)
def dyn_terms(mech, dyn, aero, qk, qkd, p, phi, vd, R, gravity_on, damping_on,
              aero_on, coupling_on):
    """Mass matrix, bias vector, applied generalized force, and bookkeeping.

    Returns (M 10x10, h 10, Q 10, power 3 [drive, damper, aero],
             faero 12 per-segment inertial force, energies 3 [Ekin, Uspr, Ugrav]).

    The bias h contains velocity products plus gravity (so M vdot = Q - h).
    Q carries the coupling and aerodynamic generalized forces.
    """
    M = np.zeros((10, 10))
    h = np.zeros(10)
    Q = np.zeros(10)
    power = np.zeros(3)
    faero = np.zeros(12)
    energies = np.zeros(3)

    mB = dyn[D_MBODY]
    g = dyn[D_GRAV] if gravity_on else 0.0

    # body translational and rotational inertia
    for i in range(3):
        M[i, i] += mB
    M[7, 7] += dyn[D_JX]
    M[8, 8] += dyn[D_JY]
    M[9, 9] += dyn[D_JZ]

    om = vd[7:10]
    pd = vd[0:3]

    # Rt * zhat, used by gravity projections
    rz = np.array([R[6], R[7], R[8]])

    # body gravity (com at frame origin) and Euler term
    h[2] += mB * g
    Jw = np.array([dyn[D_JX] * om[0], dyn[D_JY] * om[1], dyn[D_JZ] * om[2]])
    cx, cy, cz = _cross(om[0], om[1], om[2], Jw[0], Jw[1], Jw[2])
    h[7] += cx
    h[8] += cy
    h[9] += cz

    ekin = 0.5 * mB * (pd[0] ** 2 + pd[1] ** 2 + pd[2] ** 2)
    ekin += 0.5 * (dyn[D_JX] * om[0] ** 2 + dyn[D_JY] * om[1] ** 2
                   + dyn[D_JZ] * om[2] ** 2)
    ugrav = mB * g * p[2]
    uspr = 0.0

    # driven joint outputs (planar), shared by both wings
    zero12 = np.zeros(12)
    outs = kin_outputs(mech, qk, qkd, zero12)
    p5x, p5y = outs[0], outs[1]
    v5x, v5y = outs[2], outs[3]
    p16x, p16y = outs[6], outs[7]
    v16x, v16y = outs[8], outs[9]

    for side in range(2):
        sgn, sx, sy, sz, dh, dhp, dr, drp = _body_points(dyn, mech, phi, side)
        iph = 3 + 2 * side        # vd index of the humerus flap rate
        ipe = 4 + 2 * side        # vd index of the elbow rate
        wh = vd[iph]
        we = vd[ipe]

        for link in range(2):
            if link == 0:
                m = dyn[D_MH]
                c = dyn[D_CH]
                ic = dyn[D_ICH]
                # com and partials
                r = np.array([sx, sy, sz]) + c * dh
                g0 = c * dhp          # dr/dphi_h
                g1 = np.zeros(3)      # dr/dphi_e
                d = dh
                dd = dhp * wh         # body-frame rate of the link direction
                wrel = wh
                rpp = -c * dh * wh * wh
            else:
                m = dyn[D_MR]
                c = dyn[D_CR]
                ic = dyn[D_ICR]
                lh = dyn[D_LH]
                r = np.array([sx, sy, sz]) + lh * dh + c * dr
                g0 = lh * dhp + c * drp
                g1 = c * drp
                d = dr
                dd = drp * (wh + we)
                wrel = wh + we
                rpp = (-lh * dh * wh * wh
                       - c * dr * (wh + we) * (wh + we))

            # inertial com velocity pieces (body coordinates for the relative part)
            # xdot = pd + R (om x r + g0*wh + g1*we)
            vrel = np.empty(3)
            ox, oy, oz = _cross(om[0], om[1], om[2], r[0], r[1], r[2])
            vrel[0] = ox + g0[0] * wh + g1[0] * we
            vrel[1] = oy + g0[1] * wh + g1[1] * we
            vrel[2] = oz + g1[2] * we + g0[2] * wh
            vI = np.empty(3)
            for i in range(3):
                vI[i] = pd[i] + R[3 * i] * vrel[0] + R[3 * i + 1] * vrel[1] + R[3 * i + 2] * vrel[2]

            # link angular velocity in body coords: om + sgn*(rate)*xhat
            wl = np.array([om[0] + sgn * wrel, om[1], om[2]])
            # thin-rod inertia about com: ic*(I - d d^T)
            Jwl = np.empty(3)
            ddot = d[0] * wl[0] + d[1] * wl[1] + d[2] * wl[2]
            for i in range(3):
                Jwl[i] = ic * (wl[i] - d[i] * ddot)

            ekin += 0.5 * m * (vI[0] ** 2 + vI[1] ** 2 + vI[2] ** 2)
            ekin += 0.5 * (wl[0] * Jwl[0] + wl[1] * Jwl[1] + wl[2] * Jwl[2])
            # com height: p_z + (R r)_z
            ugrav += m * g * (p[2] + R[6] * r[0] + R[7] * r[1] + R[8] * r[2])

            # --- mass matrix assembly ---
            # translation-translation
            for i in range(3):
                M[i, i] += m
            # translation-phi: columns are R*g0, R*g1
            Rg0 = np.empty(3)
            Rg1 = np.empty(3)
            for i in range(3):
                Rg0[i] = R[3 * i] * g0[0] + R[3 * i + 1] * g0[1] + R[3 * i + 2] * g0[2]
                Rg1[i] = R[3 * i] * g1[0] + R[3 * i + 1] * g1[1] + R[3 * i + 2] * g1[2]
            for i in range(3):
                M[i, iph] += m * Rg0[i]
                M[iph, i] += m * Rg0[i]
                M[i, ipe] += m * Rg1[i]
                M[ipe, i] += m * Rg1[i]
            # translation-omega: -R [r]x  (columns j: -R (e_j x r)... use -[r]x = [..])
            for jcol in range(3):
                ex = 1.0 if jcol == 0 else 0.0
                ey = 1.0 if jcol == 1 else 0.0
                ez = 1.0 if jcol == 2 else 0.0
                crx, cry, crz = _cross(ex, ey, ez, r[0], r[1], r[2])
                for i in range(3):
                    val = m * (R[3 * i] * crx + R[3 * i + 1] * cry + R[3 * i + 2] * crz)
                    M[i, 7 + jcol] += val
                    M[7 + jcol, i] += val
            # phi-phi; the humerus link does not rotate with the elbow joint,
            # so its rod inertia only enters the flap row
            jrod = ic * (1.0 - d[0] ** 2)
            M[iph, iph] += m * (g0[0] ** 2 + g0[1] ** 2 + g0[2] ** 2) + jrod
            M[ipe, ipe] += m * (g1[0] ** 2 + g1[1] ** 2 + g1[2] ** 2)
            cval = m * (g0[0] * g1[0] + g0[1] * g1[1] + g0[2] * g1[2])
            if link == 1:
                M[ipe, ipe] += jrod
                cval += jrod
            M[iph, ipe] += cval
            M[ipe, iph] += cval
            # phi-omega: translational coupling plus H^T J columns (H col = sgn*xhat)
            for jcol in range(3):
                ex = 1.0 if jcol == 0 else 0.0
                ey = 1.0 if jcol == 1 else 0.0
                ez = 1.0 if jcol == 2 else 0.0
                crx, cry, crz = _cross(ex, ey, ez, r[0], r[1], r[2])
                v0 = m * (g0[0] * crx + g0[1] * cry + g0[2] * crz)
                v1 = m * (g1[0] * crx + g1[1] * cry + g1[2] * crz)
                jx = ic * ((1.0 if jcol == 0 else 0.0) - d[0] * d[jcol])
                v0 += sgn * jx
                if link == 1:
                    v1 += sgn * jx
                M[iph, 7 + jcol] += v0
                M[7 + jcol, iph] += v0
                M[ipe, 7 + jcol] += v1
                M[7 + jcol, ipe] += v1
            # omega-omega: [r]x^T [r]x * m + J
            rxx, rxy, rxz = r[0], r[1], r[2]
            r2 = rxx * rxx + rxy * rxy + rxz * rxz
            for i in range(3):
                for jcol in range(3):
                    val = m * ((r2 if i == jcol else 0.0) - r[i] * r[jcol])
                    val += ic * ((1.0 if i == jcol else 0.0) - d[i] * d[jcol])
                    M[7 + i, 7 + jcol] += val

            # --- bias: velocity products ---
            # com acceleration with vdot = 0 (body coords):
            # om x (om x r) + 2 om x rdot_rel + rpp-terms
            rdrel = np.array([g0[0] * wh + g1[0] * we,
                              g0[1] * wh + g1[1] * we,
                              g0[2] * wh + g1[2] * we])
            w_x_r = np.array([ox, oy, oz])
            a1x, a1y, a1z = _cross(om[0], om[1], om[2], w_x_r[0], w_x_r[1], w_x_r[2])
            a2x, a2y, a2z = _cross(om[0], om[1], om[2], rdrel[0], rdrel[1], rdrel[2])
            abx = a1x + 2.0 * a2x + rpp[0]
            aby = a1y + 2.0 * a2y + rpp[1]
            abz = a1z + 2.0 * a2z + rpp[2]
            # translational rows: m * R * abias
            for i in range(3):
                h[i] += m * (R[3 * i] * abx + R[3 * i + 1] * aby + R[3 * i + 2] * abz)
            # phi rows: m * g^T abias
            h[iph] += m * (g0[0] * abx + g0[1] * aby + g0[2] * abz)
            h[ipe] += m * (g1[0] * abx + g1[1] * aby + g1[2] * abz)
            # omega rows: m * r x abias
            hx, hy, hz = _cross(r[0], r[1], r[2], abx, aby, abz)
            h[7] += m * hx
            h[8] += m * hy
            h[9] += m * hz
            # rotational bias: om x (J wl) + Jdot wl, projected by B^T
            t1x, t1y, t1z = _cross(om[0], om[1], om[2], Jwl[0], Jwl[1], Jwl[2])
            # Jdot wl = -ic*(dd d^T + d dd^T) wl
            dwl = d[0] * wl[0] + d[1] * wl[1] + d[2] * wl[2]
            ddwl = dd[0] * wl[0] + dd[1] * wl[1] + dd[2] * wl[2]
            t2x = -ic * (dd[0] * dwl + d[0] * ddwl)
            t2y = -ic * (dd[1] * dwl + d[1] * ddwl)
            t2z = -ic * (dd[2] * dwl + d[2] * ddwl)
            tx, ty, tz = t1x + t2x, t1y + t2y, t1z + t2z
            h[7] += tx
            h[8] += ty
            h[9] += tz
            h[iph] += sgn * tx
            if link == 1:
                h[ipe] += sgn * tx
            # gravity: force -m g zhat at com -> h += A^T (m g zhat)
            h[2] += m * g
            h[iph] += m * g * Rg0[2]
            h[ipe] += m * g * Rg1[2]
            gx, gy, gz = _cross(r[0], r[1], r[2], rz[0], rz[1], rz[2])
            h[7] += m * g * gx
            h[8] += m * g * gy
            h[9] += m * g * gz

        # --- coupling (spring-damper) forces, both sites of this wing ---
        if coupling_on:
            for site in range(2):
                if site == 0:
                    k = dyn[D_KH]
                    cd = dyn[D_CDH] if damping_on else 0.0
                    L0 = dyn[D_R0H]
                    ratt = dyn[D_RATTH]
                    attB = np.array([sx, sy, sz]) + ratt * dh
                    attG0 = ratt * dhp
                    attG1 = np.zeros(3)
                    anchB = np.array([dyn[D_WX],
                                      sgn * (dyn[D_WY] + p5x),
                                      dyn[D_WZ] + p5y])
                    anchVrel = np.array([0.0, sgn * v5x, v5y])
                else:
                    k = dyn[D_KR]
                    cd = dyn[D_CDR] if damping_on else 0.0
                    L0 = dyn[D_R0R]
                    ratt = dyn[D_RATTR]
                    lh = dyn[D_LH]
                    attB = np.array([sx, sy, sz]) + lh * dh + ratt * dr
                    attG0 = lh * dhp + ratt * drp
                    attG1 = ratt * drp
                    anchB = np.array([dyn[D_WX],
                                      sgn * (dyn[D_WY] + p16x),
                                      dyn[D_WZ] + p16y])
                    anchVrel = np.array([0.0, sgn * v16x, v16y])

                dlt = attB - anchB
                dmag = np.sqrt(dlt[0] ** 2 + dlt[1] ** 2 + dlt[2] ** 2)
                # spring along the site axis with rest length L0
                if dmag > 1e-12:
                    fs = -k * (1.0 - L0 / dmag)
                else:
                    fs = -k if L0 == 0.0 else 0.0
                fB = fs * dlt
                # damper on the full inertial relative velocity (passive)
                attVrel = attG0 * wh + attG1 * we
                dvB = np.empty(3)
                ox, oy, oz = _cross(om[0], om[1], om[2], dlt[0], dlt[1], dlt[2])
                dvB[0] = ox + attVrel[0] - anchVrel[0]
                dvB[1] = oy + attVrel[1] - anchVrel[1]
                dvB[2] = oz + attVrel[2] - anchVrel[2]
                fB = fB - cd * dvB

                # generalized force: net translation cancels (internal pair);
                # omega rows get dlt x f; phi rows get attachment Jacobian dot f
                tqx, tqy, tqz = _cross(dlt[0], dlt[1], dlt[2], fB[0], fB[1], fB[2])
                Q[7] += tqx
                Q[8] += tqy
                Q[9] += tqz
                Q[iph] += attG0[0] * fB[0] + attG0[1] * fB[1] + attG0[2] * fB[2]
                Q[ipe] += attG1[0] * fB[0] + attG1[1] * fB[1] + attG1[2] * fB[2]

                uspr += 0.5 * k * (dmag - L0) ** 2
                # port powers: damper dissipation and mechanism drive
                power[1] += -cd * (dvB[0] ** 2 + dvB[1] ** 2 + dvB[2] ** 2)
                power[0] += fB[0] * anchVrel[0] + fB[1] * anchVrel[1] + fB[2] * anchVrel[2]

        # --- aerodynamics: two segments per side ---
        if aero_on:
            for seg in range(2):
                base = A_SEG_H if seg == 0 else A_SEG_R
                chord = aero[base + SEG_CHORD]
                span = aero[base + SEG_SPAN]
                r0 = aero[base + SEG_R0]
                ns = int(aero[base + SEG_NS])
                inc = aero[base + SEG_INC]
                xoff = aero[base + SEG_XOFF]
                spar = aero[base + SEG_SPAR]
                if seg == 0:
                    origin = np.array([sx, sy, sz])
                    d = dh
                    dp_ = dhp
                    og0 = np.zeros(3)  # d origin / d phi_h handled via d terms
                    lhseg = 0.0
                else:
                    lh = dyn[D_LH]
                    origin = np.array([sx, sy, sz]) + lh * dh
                    d = dr
                    dp_ = drp
                    og0 = lh * dhp
                    lhseg = lh

                # chord triad (body frame): e_dn = sgn*(d x xhat), c = -cos(i) x + sin(i) e_dn
                ednx, edny, ednz = _cross(d[0], d[1], d[2], 1.0, 0.0, 0.0)
                ednx *= sgn
                edny *= sgn
                ednz *= sgn
                # d(e_dn)/dphi chain uses dp_
                pednx, pedny, pednz = _cross(dp_[0], dp_[1], dp_[2], 1.0, 0.0, 0.0)
                pednx *= sgn
                pedny *= sgn
                pednz *= sgn
                ci = np.cos(inc)
                si = np.sin(inc)
                cvx = -ci + si * ednx
                cvy = si * edny
                cvz = si * ednz
                pcvx = si * pednx
                pcvy = si * pedny
                pcvz = si * pednz
                # down-normal: sgn * (c x d)
                nx, ny, nz = _cross(cvx, cvy, cvz, d[0], d[1], d[2])
                nx *= sgn
                ny *= sgn
                nz *= sgn

                ca = (0.25 - spar) * chord   # quarter-chord offset from the spar
                cm = (0.50 - spar) * chord   # mid-chord offset
                ds = span / ns
                rho = aero[A_RHO]
                # body-frame velocity of the base flow: Rt*(pdot - wind)
                ux0 = np.empty(3)
                for i in range(3):
                    ux0[i] = (R[i] * (pd[0] - aero[A_WINDX])
                              + R[3 + i] * (pd[1] - aero[A_WINDY])
                              + R[6 + i] * (pd[2] - aero[A_WINDZ]))

                fsegx = fsegy = fsegz = 0.0
                for kstrip in range(ns):
                    eta = r0 + (kstrip + 0.5) * ds
                    # mid-chord point and its phi partials
                    pmx = origin[0] + eta * d[0] + xoff + cm * cvx
                    pmy = origin[1] + eta * d[1] + cm * cvy
                    pmz = origin[2] + eta * d[2] + cm * cvz
                    # d pm / d phi_h and phi_e
                    if seg == 0:
                        g0x = eta * dp_[0] + cm * pcvx
                        g0y = eta * dp_[1] + cm * pcvy
                        g0z = eta * dp_[2] + cm * pcvz
                        g1x = g1y = g1z = 0.0
                    else:
                        g0x = og0[0] + eta * dp_[0] + cm * pcvx
                        g0y = og0[1] + eta * dp_[1] + cm * pcvy
                        g0z = og0[2] + eta * dp_[2] + cm * pcvz
                        g1x = eta * dp_[0] + cm * pcvx
                        g1y = eta * dp_[1] + cm * pcvy
                        g1z = eta * dp_[2] + cm * pcvz
                    # velocity through air at pm (body coords)
                    wx, wy, wz = _cross(om[0], om[1], om[2], pmx, pmy, pmz)
                    uvx = ux0[0] + wx + g0x * wh + g1x * we
                    uvy = ux0[1] + wy + g0y * wh + g1y * we
                    uvz = ux0[2] + wz + g1z * we + g0z * wh
                    # remove span component
                    uds = uvx * d[0] + uvy * d[1] + uvz * d[2]
                    upx = uvx - uds * d[0]
                    upy = uvy - uds * d[1]
                    upz = uvz - uds * d[2]
                    vr2 = upx * upx + upy * upy + upz * upz
                    vr = np.sqrt(vr2)
                    if vr < 1e-9:
                        continue
                    un = upx * nx + upy * ny + upz * nz
                    uc = upx * cvx + upy * cvy + upz * cvz
                    alpha = np.arctan2(un, -uc)
                    cl, cdg = lift_drag(aero, alpha)
                    qd = 0.5 * rho * vr2 * chord * ds
                    Lf = qd * cl
                    Df = qd * cdg
                    # drag along -u_p, lift = (sgn*d) x Dhat
                    dhx = -upx / vr
                    dhy = -upy / vr
                    dhz = -upz / vr
                    lhx, lhy, lhz = _cross(sgn * d[0], sgn * d[1], sgn * d[2],
                                           dhx, dhy, dhz)
                    fbx = Lf * lhx + Df * dhx
                    fby = Lf * lhy + Df * dhy
                    fbz = Lf * lhz + Df * dhz
                    # application point: quarter chord
                    pax = pmx + (ca - cm) * cvx
                    pay = pmy + (ca - cm) * cvy
                    paz = pmz + (ca - cm) * cvz
                    if seg == 0:
                        a0x = g0x + (ca - cm) * pcvx
                        a0y = g0y + (ca - cm) * pcvy
                        a0z = g0z + (ca - cm) * pcvz
                        a1x = a1y = a1z = 0.0
                    else:
                        a0x = g0x + (ca - cm) * pcvx
                        a0y = g0y + (ca - cm) * pcvy
                        a0z = g0z + (ca - cm) * pcvz
                        a1x = g1x + (ca - cm) * pcvx
                        a1y = g1y + (ca - cm) * pcvy
                        a1z = g1z + (ca - cm) * pcvz
                    # generalized force rows
                    for i in range(3):
                        Q[i] += (R[3 * i] * fbx + R[3 * i + 1] * fby
                                 + R[3 * i + 2] * fbz)
                    Q[iph] += a0x * fbx + a0y * fby + a0z * fbz
                    Q[ipe] += a1x * fbx + a1y * fby + a1z * fbz
                    tqx, tqy, tqz = _cross(pax, pay, paz, fbx, fby, fbz)
                    Q[7] += tqx
                    Q[8] += tqy
                    Q[9] += tqz
                    # aero power at the application point; ux0 has the wind
                    # removed, so add it back to get the true point velocity
                    wx, wy, wz = _cross(om[0], om[1], om[2], pax, pay, paz)
                    vax = (ux0[0] + wx + a0x * wh + a1x * we
                           + R[0] * aero[A_WINDX] + R[3] * aero[A_WINDY]
                           + R[6] * aero[A_WINDZ])
                    vay = (ux0[1] + wy + a0y * wh + a1y * we
                           + R[1] * aero[A_WINDX] + R[4] * aero[A_WINDY]
                           + R[7] * aero[A_WINDZ])
                    vaz = (ux0[2] + wz + a0z * wh + a1z * we
                           + R[2] * aero[A_WINDX] + R[5] * aero[A_WINDY]
                           + R[8] * aero[A_WINDZ])
                    power[2] += fbx * vax + fby * vay + fbz * vaz
                    fsegx += fbx
                    fsegy += fby
                    fsegz += fbz

                segslot = side * 2 + seg
                # store the inertial-frame segment force
                faero[3 * segslot + 0] = (R[0] * fsegx + R[1] * fsegy + R[2] * fsegz)
                faero[3 * segslot + 1] = (R[3] * fsegx + R[4] * fsegy + R[5] * fsegz)
                faero[3 * segslot + 2] = (R[6] * fsegx + R[7] * fsegy + R[8] * fsegz)

    energies[0] = ekin
    energies[1] = uspr
    energies[2] = ugrav
    return M, h, Q, power, faero, energies


@njit(cache=True)
def aero_strip_table(mech, dyn, aero, qk, qkd, p, phi, vd, R):
    """Per-strip flow/force table for debugging exports.

    Rows: [side, segment, strip index, alpha, v_r, lift, drag] with the same
    flow model as the force assembly (validated against it by tests).
    """
    ns_h = int(aero[A_SEG_H + SEG_NS])
    ns_r = int(aero[A_SEG_R + SEG_NS])
    total = 2 * (ns_h + ns_r)
    out = np.zeros((total, 7))
    om = vd[7:10]
    pd = vd[0:3]
    row = 0
    for side in range(2):
        sgn, sx, sy, sz, dh, dhp, dr, drp = _body_points(dyn, mech, phi, side)
        wh = vd[3 + 2 * side]
        we = vd[4 + 2 * side]
        for seg in range(2):
            base = A_SEG_H if seg == 0 else A_SEG_R
            chord = aero[base + SEG_CHORD]
            span = aero[base + SEG_SPAN]
            r0 = aero[base + SEG_R0]
            ns = int(aero[base + SEG_NS])
            inc = aero[base + SEG_INC]
            xoff = aero[base + SEG_XOFF]
            spar = aero[base + SEG_SPAR]
            if seg == 0:
                origin = np.array([sx, sy, sz])
                d = dh
                dp_ = dhp
                og0 = np.zeros(3)
            else:
                lh = dyn[D_LH]
                origin = np.array([sx, sy, sz]) + lh * dh
                d = dr
                dp_ = drp
                og0 = lh * dhp
            ednx, edny, ednz = _cross(d[0], d[1], d[2], 1.0, 0.0, 0.0)
            ednx *= sgn
            edny *= sgn
            ednz *= sgn
            pednx, pedny, pednz = _cross(dp_[0], dp_[1], dp_[2], 1.0, 0.0, 0.0)
            pednx *= sgn
            pedny *= sgn
            pednz *= sgn
            ci = np.cos(inc)
            si = np.sin(inc)
            cvx = -ci + si * ednx
            cvy = si * edny
            cvz = si * ednz
            pcvx = si * pednx
            pcvy = si * pedny
            pcvz = si * pednz
            nx, ny, nz = _cross(cvx, cvy, cvz, d[0], d[1], d[2])
            nx *= sgn
            ny *= sgn
            nz *= sgn
            cm = (0.50 - spar) * chord
            ds = span / ns
            rho = aero[A_RHO]
            ux0 = np.empty(3)
            for i in range(3):
                ux0[i] = (R[i] * (pd[0] - aero[A_WINDX])
                          + R[3 + i] * (pd[1] - aero[A_WINDY])
                          + R[6 + i] * (pd[2] - aero[A_WINDZ]))
            for kstrip in range(ns):
                eta = r0 + (kstrip + 0.5) * ds
                pmx = origin[0] + eta * d[0] + xoff + cm * cvx
                pmy = origin[1] + eta * d[1] + cm * cvy
                pmz = origin[2] + eta * d[2] + cm * cvz
                if seg == 0:
                    g0x = eta * dp_[0] + cm * pcvx
                    g0y = eta * dp_[1] + cm * pcvy
                    g0z = eta * dp_[2] + cm * pcvz
                    g1x = g1y = g1z = 0.0
                else:
                    g0x = og0[0] + eta * dp_[0] + cm * pcvx
                    g0y = og0[1] + eta * dp_[1] + cm * pcvy
                    g0z = og0[2] + eta * dp_[2] + cm * pcvz
                    g1x = eta * dp_[0] + cm * pcvx
                    g1y = eta * dp_[1] + cm * pcvy
                    g1z = eta * dp_[2] + cm * pcvz
                wx, wy, wz = _cross(om[0], om[1], om[2], pmx, pmy, pmz)
                uvx = ux0[0] + wx + g0x * wh + g1x * we
                uvy = ux0[1] + wy + g0y * wh + g1y * we
                uvz = ux0[2] + wz + g0z * wh + g1z * we
                uds = uvx * d[0] + uvy * d[1] + uvz * d[2]
                upx = uvx - uds * d[0]
                upy = uvy - uds * d[1]
                upz = uvz - uds * d[2]
                vr2 = upx * upx + upy * upy + upz * upz
                vr = np.sqrt(vr2)
                out[row, 0] = side
                out[row, 1] = seg
                out[row, 2] = kstrip
                if vr >= 1e-9:
                    un = upx * nx + upy * ny + upz * nz
                    uc = upx * cvx + upy * cvy + upz * cvz
                    alpha = np.arctan2(un, -uc)
                    cl, cdg = lift_drag(aero, alpha)
                    qd = 0.5 * rho * vr2 * chord * ds
                    out[row, 3] = alpha
                    out[row, 4] = vr
                    out[row, 5] = qd * cl
                    out[row, 6] = qd * cdg
                row += 1
    return out


@njit(cache=True)
def angular_momentum(mech, dyn, qk, qkd, p, phi, vd, R):
    """Total angular momentum of body plus links about the vehicle COM (inertial)."""
    om = vd[7:10]
    pd = vd[0:3]
    mB = dyn[D_MBODY]
    mtot = mB
    # accumulate masses, inertial com positions and velocities
    xs = np.zeros((5, 3))
    vs = np.zeros((5, 3))
    ms = np.zeros(5)
    ms[0] = mB
    for i in range(3):
        xs[0, i] = p[i]
        vs[0, i] = pd[i]
    idx = 1
    for side in range(2):
        sgn, sx, sy, sz, dh, dhp, dr, drp = _body_points(dyn, mech, phi, side)
        wh = vd[3 + 2 * side]
        we = vd[4 + 2 * side]
        for link in range(2):
            if link == 0:
                m = dyn[D_MH]
                r = np.array([sx, sy, sz]) + dyn[D_CH] * dh
                rd = dyn[D_CH] * dhp * wh
            else:
                m = dyn[D_MR]
                lh = dyn[D_LH]
                r = np.array([sx, sy, sz]) + lh * dh + dyn[D_CR] * dr
                rd = lh * dhp * wh + dyn[D_CR] * drp * (wh + we)
            ox, oy, oz = _cross(om[0], om[1], om[2], r[0], r[1], r[2])
            relx = ox + rd[0]
            rely = oy + rd[1]
            relz = oz + rd[2]
            ms[idx] = m
            for i in range(3):
                xs[idx, i] = p[i] + R[3 * i] * r[0] + R[3 * i + 1] * r[1] + R[3 * i + 2] * r[2]
                vs[idx, i] = pd[i] + R[3 * i] * relx + R[3 * i + 1] * rely + R[3 * i + 2] * relz
            mtot += m
            idx += 1

    com = np.zeros(3)
    for b in range(5):
        for i in range(3):
            com[i] += ms[b] * xs[b, i]
    for i in range(3):
        com[i] /= mtot

    Pi = np.zeros(3)
    for b in range(5):
        rx = xs[b, 0] - com[0]
        ry = xs[b, 1] - com[1]
        rz_ = xs[b, 2] - com[2]
        cx, cy, cz = _cross(rx, ry, rz_, vs[b, 0], vs[b, 1], vs[b, 2])
        Pi[0] += ms[b] * cx
        Pi[1] += ms[b] * cy
        Pi[2] += ms[b] * cz

    # spin terms: body inertia and thin-rod link inertias, rotated to inertial
    lb = np.array([dyn[D_JX] * om[0], dyn[D_JY] * om[1], dyn[D_JZ] * om[2]])
    for side in range(2):
        sgn, sx, sy, sz, dh, dhp, dr, drp = _body_points(dyn, mech, phi, side)
        wh = vd[3 + 2 * side]
        we = vd[4 + 2 * side]
        for link in range(2):
            if link == 0:
                ic = dyn[D_ICH]
                d = dh
                wrel = wh
            else:
                ic = dyn[D_ICR]
                d = dr
                wrel = wh + we
            wl = np.array([om[0] + sgn * wrel, om[1], om[2]])
            ddot = d[0] * wl[0] + d[1] * wl[1] + d[2] * wl[2]
            for i in range(3):
                lb[i] += ic * (wl[i] - d[i] * ddot)
    for i in range(3):
        Pi[i] += R[3 * i] * lb[0] + R[3 * i + 1] * lb[1] + R[3 * i + 2] * lb[2]
    return Pi


@njit(cache=True)
def derivative(mech, dyn, aero, ctrl, Y, toggles):
    """Full state derivative with the controllers evaluated at the current
    state (continuous-control approximation, so RK4 keeps its order).
    toggles = (gravity, damping, aero, coupling) as 0/1."""
    dY = np.zeros(N_Y)
    qk = Y[Y_QK:Y_QK + 12]
    qkd = Y[Y_QKD:Y_QKD + 12]
    p = Y[Y_P:Y_P + 3]
    phi = Y[Y_PHI:Y_PHI + 4]
    vd = Y[Y_VD:Y_VD + 10]
    R = Y[Y_R:Y_R + 9]

    u5, _lref = controller_eval(ctrl, qk, qkd, R)
    qkdd = kin_accel(mech, qk, qkd, u5)
    for i in range(12):
        dY[Y_QK + i] = qkd[i]
        dY[Y_QKD + i] = qkdd[i]

    gravity_on = toggles[0] > 0.5
    damping_on = toggles[1] > 0.5
    aero_on = toggles[2] > 0.5
    coupling_on = toggles[3] > 0.5
    M, h, Q, power, faero, energies = dyn_terms(
        mech, dyn, aero, qk, qkd, p, phi, vd, R,
        gravity_on, damping_on, aero_on, coupling_on)
    rhs = np.empty(10)
    for i in range(10):
        rhs[i] = Q[i] - h[i]
    acc = np.linalg.solve(M, rhs)
    for i in range(3):
        dY[Y_P + i] = vd[i]
    for i in range(4):
        dY[Y_PHI + i] = vd[3 + i]
    for i in range(10):
        dY[Y_VD + i] = acc[i]

    # Rdot = R [omega]x
    om = vd[7:10]
    Wm = np.array([0.0, -om[2], om[1],
                   om[2], 0.0, -om[0],
                   -om[1], om[0], 0.0])
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += R[3 * i + k] * Wm[3 * k + j]
            dY[Y_R + 3 * i + j] = s

    dY[Y_WORK + 0] = power[0]
    dY[Y_WORK + 1] = power[1]
    dY[Y_WORK + 2] = power[2]
    return dY


@njit(cache=True)
def _orthonormalize(R):
    """Two Newton iterations of R <- R(3I - R^T R)/2 (drift is tiny per step)."""
    for _ in range(2):
        # G = R^T R
        G = np.empty(9)
        for i in range(3):
            for j in range(3):
                s = 0.0
                for k in range(3):
                    s += R[3 * k + i] * R[3 * k + j]
                G[3 * i + j] = s
        # S = (3I - G)/2
        for i in range(3):
            G[4 * i] = (3.0 - G[4 * i]) / 2.0
        for i in range(3):
            for j in range(3):
                if i != j:
                    G[3 * i + j] = -G[3 * i + j] / 2.0
        Rn = np.empty(9)
        for i in range(3):
            for j in range(3):
                s = 0.0
                for k in range(3):
                    s += R[3 * i + k] * G[3 * k + j]
                Rn[3 * i + j] = s
        for i in range(9):
            R[i] = Rn[i]
    return R


@njit(cache=True)
def project_closure(mech, Y, jump_tol):
    """Re-solve the loop closure from the current branch and re-derive dependent
    rates, eliminating integration drift off the constraint manifold."""
    qk = Y[Y_QK:Y_QK + 12].copy()
    qkd = Y[Y_QKD:Y_QKD + 12]
    lengths = np.array([qk[IQ_L3B], qk[IQ_L3C], qk[IQ_L8B], qk[IQ_L10B]])
    status, qknew = kin_solve(mech, qk[IQ_TH1], lengths, qk, True, jump_tol)
    if status != STATUS_OK:
        return status
    ldot = np.array([qkd[IQ_L3B], qkd[IQ_L3C], qkd[IQ_L8B], qkd[IQ_L10B]])
    qkdnew = kin_dep_rates(mech, qknew, qkd[IQ_TH1], ldot)
    for i in range(12):
        Y[Y_QK + i] = qknew[i]
        Y[Y_QKD + i] = qkdnew[i]
    return STATUS_OK


@njit(cache=True)
def rk4_step(mech, dyn, aero, ctrl, Y, dt, toggles, jump_tol):
    """One fixed RK4 step, then attitude and closure manifold projection."""
    k1 = derivative(mech, dyn, aero, ctrl, Y, toggles)
    Y2 = Y + 0.5 * dt * k1
    k2 = derivative(mech, dyn, aero, ctrl, Y2, toggles)
    Y3 = Y + 0.5 * dt * k2
    k3 = derivative(mech, dyn, aero, ctrl, Y3, toggles)
    Y4 = Y + dt * k3
    k4 = derivative(mech, dyn, aero, ctrl, Y4, toggles)
    Yn = Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    R = Yn[Y_R:Y_R + 9]
    _orthonormalize(R)
    status = project_closure(mech, Yn, jump_tol)
    return status, Yn


@njit(cache=True)
def _fill_log_row(row, t, mech, dyn, aero, Y, u5, lref, faero, energies):
    row[L_T] = t
    for i in range(12):
        row[L_QK + i] = Y[Y_QK + i]
        row[L_QKD + i] = Y[Y_QKD + i]
    for i in range(3):
        row[L_P + i] = Y[Y_P + i]
    for i in range(4):
        row[L_PHI + i] = Y[Y_PHI + i]
    for i in range(10):
        row[L_VD + i] = Y[Y_VD + i]
    for i in range(9):
        row[L_R + i] = Y[Y_R + i]
    for i in range(3):
        row[L_WORK + i] = Y[Y_WORK + i]
    row[L_UG] = u5[0]
    for i in range(4):
        row[L_UP + i] = u5[1 + i]
        row[L_LREF + i] = lref[i]
    R = Y[Y_R:Y_R + 9]
    row[L_THY] = pitch_of(R)
    qk = Y[Y_QK:Y_QK + 12]
    qkd = Y[Y_QKD:Y_QKD + 12]
    p = Y[Y_P:Y_P + 3]
    phi = Y[Y_PHI:Y_PHI + 4]
    vd = Y[Y_VD:Y_VD + 10]
    Pi = angular_momentum(mech, dyn, qk, qkd, p, phi, vd, R)
    for i in range(3):
        row[L_PI + i] = Pi[i]
    row[L_EKIN] = energies[0]
    row[L_USPR] = energies[1]
    row[L_UGRAV] = energies[2]
    for i in range(12):
        row[L_FAERO + i] = faero[i]
    zero12 = np.zeros(12)
    outs = kin_outputs(mech, qk, qkd, zero12)
    row[L_P5 + 0] = outs[0]
    row[L_P5 + 1] = outs[1]
    row[L_V5 + 0] = outs[2]
    row[L_V5 + 1] = outs[3]
    row[L_P16 + 0] = outs[6]
    row[L_P16 + 1] = outs[7]
    row[L_V16 + 0] = outs[8]
    row[L_V16 + 1] = outs[9]


@njit(cache=True)
def run_core(mech, dyn, aero, ctrl, Y0, dt, n_steps, log_every, max_speed,
             max_rate, toggles, cost, jump_tol):
    """Integrate one episode.

    cost = [enabled, w1, w2, w3, stride_steps, warmup_steps].
    Returns (status, steps_done, Yfinal, log, n_log_rows, J).
    """
    n_logs = n_steps // log_every + 2
    log = np.zeros((n_logs, N_LOG))
    Y = Y0.copy()
    J = 0.0
    cost_on = cost[0] > 0.5
    stride = int(cost[4])
    warmup = int(cost[5])

    # initial log entry
    qk = Y[Y_QK:Y_QK + 12]
    qkd = Y[Y_QKD:Y_QKD + 12]
    R = Y[Y_R:Y_R + 9]
    u5, lref = controller_eval(ctrl, qk, qkd, R)
    _m, _h, _q, _pw, faero, energies = dyn_terms(
        mech, dyn, aero, qk, qkd, Y[Y_P:Y_P + 3], Y[Y_PHI:Y_PHI + 4],
        Y[Y_VD:Y_VD + 10], R,
        toggles[0] > 0.5, toggles[1] > 0.5, toggles[2] > 0.5, toggles[3] > 0.5)
    _fill_log_row(log[0], 0.0, mech, dyn, aero, Y, u5, lref, faero, energies)
    n_rows = 1

    status = STATUS_OK
    step = 0
    while step < n_steps:
        st, Yn = rk4_step(mech, dyn, aero, ctrl, Y, dt, toggles, jump_tol)
        if st != STATUS_OK:
            status = st
            break
        # divergence guard
        bad = False
        sp2 = Yn[Y_VD] ** 2 + Yn[Y_VD + 1] ** 2 + Yn[Y_VD + 2] ** 2
        if not np.isfinite(sp2) or sp2 > max_speed * max_speed:
            bad = True
        for i in range(7):
            v = Yn[Y_VD + 3 + i]
            if not np.isfinite(v) or abs(v) > max_rate:
                bad = True
        for i in range(12):
            v = Yn[Y_QKD + i]
            if not np.isfinite(v) or abs(v) > max_rate:
                bad = True
        if bad:
            status = STATUS_DIVERGED
            break
        Y = Yn
        step += 1
        t = step * dt

        if cost_on and step > warmup and ((step - warmup) % stride == 0):
            Rc = Y[Y_R:Y_R + 9]
            thy = pitch_of(Rc)
            Pi = angular_momentum(mech, dyn, Y[Y_QK:Y_QK + 12],
                                  Y[Y_QKD:Y_QKD + 12], Y[Y_P:Y_P + 3],
                                  Y[Y_PHI:Y_PHI + 4], Y[Y_VD:Y_VD + 10], Rc)
            vb2 = (Y[Y_VD] ** 2 + Y[Y_VD + 1] ** 2 + Y[Y_VD + 2] ** 2)
            perr = ctrl[C_THREF] - thy
            J += (cost[1] * (Pi[0] ** 2 + Pi[1] ** 2 + Pi[2] ** 2)
                  + cost[2] * vb2
                  + cost[3] * perr * perr) * (stride * dt)

        if step % log_every == 0 or step == n_steps:
            qk = Y[Y_QK:Y_QK + 12]
            qkd = Y[Y_QKD:Y_QKD + 12]
            R = Y[Y_R:Y_R + 9]
            u5l, lrefl = controller_eval(ctrl, qk, qkd, R)
            _m, _h, _q, _pw, faero, energies = dyn_terms(
                mech, dyn, aero, qk, qkd, Y[Y_P:Y_P + 3], Y[Y_PHI:Y_PHI + 4],
                Y[Y_VD:Y_VD + 10], R,
                toggles[0] > 0.5, toggles[1] > 0.5, toggles[2] > 0.5,
                toggles[3] > 0.5)
            _fill_log_row(log[n_rows], t, mech, dyn, aero, Y, u5l, lrefl,
                          faero, energies)
            n_rows += 1

    return status, step, Y, log, n_rows, J

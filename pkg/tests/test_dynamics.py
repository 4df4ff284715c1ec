"""Massed-subsystem tests: mass matrix and bias against independent
finite-difference constructions, coupling forces against the potential
gradient, attitude stepping against the exponential map, and the
conservation invariants."""

import numpy as np
import pytest

from conftest import random_rotation, rot_y
from morphwing import _core
from morphwing.config import Config
from morphwing.control import ControllerConfig
from morphwing.dynamics import (DynamicState, MassProperties, bias_forces,
                                coupling_forces, dynamics_accel,
                                kinetic_energy, mass_matrix, step_attitude)
from morphwing.engine import energy_audit, initial_state, run_episode
from morphwing.errors import NonPositiveDefinite

GRAV = 9.81


def _random_state(rng, scale_v=1.0):
    q = np.concatenate((rng.normal(scale=0.5, size=3),
                        rng.normal(scale=0.6, size=4)))
    qd = rng.normal(scale=scale_v, size=7)
    R = random_rotation(rng)
    om = rng.normal(scale=scale_v, size=3)
    return DynamicState(q, qd, R, om)


# ---------------------------------------------------------------------------
# independent per-body kinematics used by the oracles
# ---------------------------------------------------------------------------

def _body_geometry(cfg):
    """Returns per-body (mass, I_perp) and functions com(q, R), dir(q, R)
    for the four links, mirroring the documented geometry conventions."""
    d = cfg.dyn
    mech = cfg.mech
    W = np.array([d[_core.D_WX], d[_core.D_WY], d[_core.D_WZ]])
    a4 = np.array([mech[_core.M_A4X], mech[_core.M_A4Y]])
    bodies = []
    for side, sgn in ((0, 1.0), (1, -1.0)):
        S = np.array([W[0], sgn * (W[1] + a4[0]), W[2] + a4[1]])
        for link in (0, 1):
            if link == 0:
                m, c, icom = d[_core.D_MH], d[_core.D_CH], d[_core.D_ICH]
            else:
                m, c, icom = d[_core.D_MR], d[_core.D_CR], d[_core.D_ICR]

            def com(q, R, side=side, sgn=sgn, S=S, link=link, c=c):
                ph = q[3 + 2 * side]
                pe = q[4 + 2 * side]
                dh = np.array([0.0, sgn * np.cos(ph), np.sin(ph)])
                if link == 0:
                    r = S + c * dh
                else:
                    dr = np.array([0.0, sgn * np.cos(ph + pe), np.sin(ph + pe)])
                    r = S + cfg.dyn[_core.D_LH] * dh + c * dr
                return q[:3] + R @ r

            def direction(q, R, side=side, sgn=sgn, link=link):
                ph = q[3 + 2 * side]
                pe = q[4 + 2 * side]
                ang = ph if link == 0 else ph + pe
                return R @ np.array([0.0, sgn * np.cos(ang), np.sin(ang)])

            bodies.append({"m": m, "icom": icom, "com": com, "dir": direction})
    return bodies


def _flow_eps(state, eps):
    """State displaced by eps along its own velocity (positions only)."""
    q = state.q + eps * np.concatenate((state.qd[:3], state.qd[3:]))
    w = state.omega
    nw = np.linalg.norm(w)
    if nw > 0:
        ax = w / nw
        K = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]],
                      [-ax[1], ax[0], 0]])
        Rd = (np.eye(3) + np.sin(eps * nw) * K
              + (1 - np.cos(eps * nw)) * (K @ K))
        R = state.R @ Rd
    else:
        R = state.R
    return q, R


def independent_kinetic_energy(cfg, state, eps=1e-5):
    """Per-body energy sum with velocities from finite differences of the
    body positions along the state's own flow (independent of the mass
    matrix assembly)."""
    bodies = _body_geometry(cfg)
    qp, Rp = _flow_eps(state, eps)
    qm, Rm = _flow_eps(state, -eps)
    T = 0.5 * cfg.dyn[_core.D_MBODY] * np.dot(state.qd[:3], state.qd[:3])
    J = np.array([cfg.dyn[_core.D_JX], cfg.dyn[_core.D_JY], cfg.dyn[_core.D_JZ]])
    T += 0.5 * float(state.omega @ (J * state.omega))
    for b in bodies:
        v = (b["com"](qp, Rp) - b["com"](qm, Rm)) / (2 * eps)
        dd = (b["dir"](qp, Rp) - b["dir"](qm, Rm)) / (2 * eps)
        # thin rod: T_rot = 1/2 I |d(dhat)/dt|^2
        T += 0.5 * b["m"] * float(v @ v) + 0.5 * b["icom"] * float(dd @ dd)
    return T


def independent_potential(cfg, state, gravity_on=True):
    bodies = _body_geometry(cfg)
    if not gravity_on:
        return 0.0
    g = cfg.dyn[_core.D_GRAV]
    U = cfg.dyn[_core.D_MBODY] * g * state.q[2]
    for b in bodies:
        U += b["m"] * g * b["com"](state.q, state.R)[2]
    return U


# ---------------------------------------------------------------------------
# mass matrix
# ---------------------------------------------------------------------------

def test_mass_matrix_symmetric(cfg):
    rng = np.random.default_rng(0)
    for _ in range(5):
        M = mass_matrix(cfg, _random_state(rng))
        assert np.max(np.abs(M - M.T)) < 1e-12


def test_mass_matrix_positive_definite(cfg):
    rng = np.random.default_rng(1)
    M = mass_matrix(cfg, _random_state(rng))
    assert np.min(np.linalg.eigvalsh(M)) > 0


def test_mass_matrix_massless_wings_block_diagonal():
    over = {"links": {"humerus": {"mass_kg": 1e-12, "inertia_joint_kgm2": 1e-13},
                      "radius": {"mass_kg": 1e-12, "inertia_joint_kgm2": 1e-13}},
            "coupling": {"humerus": {"attach_radius_m": 0.03},
                         "radius": {"attach_radius_m": 0.045}}}
    cfg = Config.from_dict(over)
    rng = np.random.default_rng(2)
    st = _random_state(rng)
    M = _core.dyn_terms(cfg.mech, cfg.dyn, cfg.aero, np.zeros(12), np.zeros(12),
                        st.position, st.wing_angles, st.generalized_velocity(),
                        st.R.reshape(-1), False, False, False, False)[0]
    body = cfg.data["body"]
    assert np.max(np.abs(M[:3, :3] - body["mass_kg"] * np.eye(3))) < 1e-9
    assert np.max(np.abs(M[7:, 7:] - np.diag(body["inertia_kgm2"]))) < 1e-9
    assert np.max(np.abs(M[:3, 7:])) < 1e-9


def test_kinetic_energy_matches_per_body_oracle(cfg):
    rng = np.random.default_rng(3)
    for _ in range(6):
        st = _random_state(rng)
        T_impl = kinetic_energy(cfg, st)
        T_ind = independent_kinetic_energy(cfg, st)
        assert abs(T_impl - T_ind) < 1e-9 * max(1.0, T_impl)


def test_mass_properties_validation():
    with pytest.raises(NonPositiveDefinite):
        MassProperties(body_mass=-1.0, body_inertia=[1, 1, 1],
                       humerus_mass=1e-3, humerus_com=0.01,
                       humerus_inertia_joint=1e-6, humerus_length=0.03,
                       radius_mass=1e-3, radius_com=0.01,
                       radius_inertia_joint=1e-6, radius_length=0.05)


# ---------------------------------------------------------------------------
# bias vector
# ---------------------------------------------------------------------------

def test_bias_zero_at_rest_no_gravity(cfg):
    rng = np.random.default_rng(4)
    st = _random_state(rng, scale_v=0.0)
    h = bias_forces(cfg, st, gravity=False)
    assert np.max(np.abs(h)) < 1e-14


def test_bias_gravity_statics(cfg):
    rng = np.random.default_rng(5)
    st = _random_state(rng, scale_v=0.0)
    h = bias_forces(cfg, st, gravity=True)
    props = MassProperties.from_config(cfg)
    assert abs(h[2] - props.total_mass() * GRAV) < 1e-12


def test_bias_matches_euler_poincare_fd(cfg):
    """The implemented flow satisfies the mixed Euler-Lagrange equations:
    momentum rates from finite differences along the flow match the
    configuration gradients of the Lagrangian (attitude terms through the
    rotation kinematics)."""
    rng = np.random.default_rng(6)
    st = _random_state(rng, scale_v=0.8)

    def lagrangian(q, qd, R, om):
        s = DynamicState(q, qd, R, om)
        return (independent_kinetic_energy(cfg, s)
                - independent_potential(cfg, s, gravity_on=True))

    # momenta by FD over velocities; the kinetic energy is exactly
    # quadratic in the rates, so a large step carries no truncation error
    def momenta(q, qd, R, om):
        ev = 1e-3
        p = np.zeros(10)
        for i in range(7):
            dp = np.zeros(7)
            dp[i] = ev
            p[i] = (lagrangian(q, qd + dp, R, om)
                    - lagrangian(q, qd - dp, R, om)) / (2 * ev)
        for i in range(3):
            do = np.zeros(3)
            do[i] = ev
            p[7 + i] = (lagrangian(q, qd, R, om + do)
                        - lagrangian(q, qd, R, om - do)) / (2 * ev)
        return p

    # implemented acceleration with gravity only (no applied forces)
    h = bias_forces(cfg, st, gravity=True)
    M = mass_matrix(cfg, st)
    acc = np.linalg.solve(M, -h)

    # states slightly before/after along the implemented flow
    dt = 1e-4

    def advance(sign):
        q = st.q + sign * dt * st.qd + 0.5 * dt * dt * acc[:7] * sign ** 2
        qd = st.qd + sign * dt * acc[:7]
        om = st.omega + sign * dt * acc[7:]
        w = st.omega + 0.5 * sign * dt * acc[7:]
        ax = sign * dt * w
        n = np.linalg.norm(ax)
        if n > 0:
            k = ax / n
            K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]],
                          [-k[1], k[0], 0]])
            Rd = np.eye(3) + np.sin(n) * K + (1 - np.cos(n)) * (K @ K)
        else:
            Rd = np.eye(3)
        return q, qd, st.R @ Rd, om

    qp, qdp, Rp, omp = advance(+1.0)
    qm, qdm, Rm, omm = advance(-1.0)
    pdot = (momenta(qp, qdp, Rp, omp) - momenta(qm, qdm, Rm, omm)) / (2 * dt)

    # configuration gradients
    eq = 1e-6
    dLdq = np.zeros(7)
    for i in range(7):
        dq = np.zeros(7)
        dq[i] = eq
        dLdq[i] = (lagrangian(st.q + dq, st.qd, st.R, st.omega)
                   - lagrangian(st.q - dq, st.qd, st.R, st.omega)) / (2 * eq)
    tau_R = np.zeros(3)
    for i in range(3):
        k = np.zeros(3)
        k[i] = 1.0
        K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        Rp_ = st.R @ (np.eye(3) + np.sin(eq) * K + (1 - np.cos(eq)) * (K @ K))
        Rm_ = st.R @ (np.eye(3) - np.sin(eq) * K + (1 - np.cos(eq)) * (K @ K))
        tau_R[i] = (lagrangian(st.q, st.qd, Rp_, st.omega)
                    - lagrangian(st.q, st.qd, Rm_, st.omega)) / (2 * eq)

    mu = momenta(st.q, st.qd, st.R, st.omega)[7:]
    residual = np.concatenate((
        pdot[:7] - dLdq,                                   # EL rows
        pdot[7:] + np.cross(st.omega, mu) - tau_R))        # EP attitude rows
    scale = max(1.0, np.max(np.abs(pdot)))
    assert np.max(np.abs(residual)) < 1e-5 * scale


# ---------------------------------------------------------------------------
# coupling forces
# ---------------------------------------------------------------------------

def _tracking_state(cfg):
    """Wing angles matching the driven joints at the reference pose."""
    Y = initial_state(cfg)
    q = np.concatenate((Y[_core.Y_P:_core.Y_P + 3],
                        Y[_core.Y_PHI:_core.Y_PHI + 4]))
    return (DynamicState(q, np.zeros(7), np.eye(3), np.zeros(3)),
            Y[_core.Y_QK:_core.Y_QK + 12].copy())


def test_coupling_zero_at_tracking_pose(cfg):
    st, qk = _tracking_state(cfg)
    Q, forces = coupling_forces(cfg, st, qk, np.zeros(12))
    # humerus anchors coincide exactly at the reference pose; the radius
    # attach radius is a cycle average, leaving a small residual there
    assert np.linalg.norm(forces[0]) < 1e-6 * cfg.dyn[_core.D_KH]


def test_coupling_pure_stretch_hooke(cfg):
    st, qk = _tracking_state(cfg)
    # rotate the left humerus away from its anchor: stretch ~ k * displacement
    q2 = st.q.copy()
    q2[3] += 1e-4 / cfg.dyn[_core.D_RATTH]  # arc displacement of 0.1 mm
    st2 = DynamicState(q2, np.zeros(7), np.eye(3), np.zeros(3))
    _, forces = coupling_forces(cfg, st2, qk, np.zeros(12), damping=False)
    f0 = np.linalg.norm(forces[0])
    assert abs(f0 - cfg.dyn[_core.D_KH] * 1e-4) < 0.02 * cfg.dyn[_core.D_KH] * 1e-4


def test_coupling_matches_potential_gradient(cfg):
    """Conservative part equals minus the gradient of the spring potential
    with respect to every generalized coordinate (attitude included)."""
    rng = np.random.default_rng(8)
    st, qk = _tracking_state(cfg)
    q = st.q + rng.normal(scale=0.03, size=7)
    R = random_rotation(rng)
    st = DynamicState(q, np.zeros(7), R, np.zeros(3))

    def potential(q, R):
        s = DynamicState(q, np.zeros(7), R, np.zeros(3))
        out = _core.dyn_terms(cfg.mech, cfg.dyn, cfg.aero, qk, np.zeros(12),
                              s.position, s.wing_angles,
                              s.generalized_velocity(), s.R.reshape(-1),
                              False, False, False, True)
        return float(out[5][1])  # spring energy

    Q, _ = coupling_forces(cfg, st, qk, np.zeros(12), damping=False)
    eps = 1e-7
    grad = np.zeros(10)
    for i in range(7):
        dq = np.zeros(7)
        dq[i] = eps
        grad[i] = (potential(q + dq, R) - potential(q - dq, R)) / (2 * eps)
    for i in range(3):
        k = np.zeros(3)
        k[i] = 1.0
        K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        Rp = R @ (np.eye(3) + np.sin(eps) * K + (1 - np.cos(eps)) * (K @ K))
        Rm = R @ (np.eye(3) - np.sin(eps) * K + (1 - np.cos(eps)) * (K @ K))
        grad[7 + i] = (potential(q, Rp) - potential(q, Rm)) / (2 * eps)
    scale = max(1.0, np.max(np.abs(Q)))
    assert np.max(np.abs(Q + grad)) < 1e-6 * scale


# ---------------------------------------------------------------------------
# attitude stepping
# ---------------------------------------------------------------------------

def test_step_attitude_zero_rate(cfg):
    rng = np.random.default_rng(9)
    R = random_rotation(rng)
    R2 = step_attitude(R, np.zeros(3), 1e-3)
    assert np.max(np.abs(R2 - R)) < 1e-15


def test_step_attitude_full_revolution():
    R = np.eye(3)
    om = np.array([0.0, 2 * np.pi, 0.0])
    dt = 1e-4
    for _ in range(10000):
        R = step_attitude(R, om, dt)
    assert np.max(np.abs(R - np.eye(3))) < 1e-6


def test_step_attitude_matches_exponential_map():
    rng = np.random.default_rng(10)
    for _ in range(3):
        om = rng.normal(scale=3.0, size=3)
        R = random_rotation(rng)
        dt = 1e-4
        steps = 3000  # t = 0.3 s
        Rn = R.copy()
        for _ in range(steps):
            Rn = step_attitude(Rn, om, dt)
        t = steps * dt
        n = np.linalg.norm(om)
        k = om / n
        K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        Rexact = R @ (np.eye(3) + np.sin(n * t) * K
                      + (1 - np.cos(n * t)) * (K @ K))
        assert np.linalg.norm(Rn - Rexact) < 1e-8


# ---------------------------------------------------------------------------
# dynamics_accel
# ---------------------------------------------------------------------------

def test_accel_zero_everything(cfg):
    rng = np.random.default_rng(11)
    st = _random_state(rng, scale_v=0.0)
    h = bias_forces(cfg, st, gravity=False)
    acc = np.linalg.solve(mass_matrix(cfg, st), -h)
    assert np.max(np.abs(acc)) < 1e-12


def test_accel_pure_torque_principal_axis():
    over = {"links": {"humerus": {"mass_kg": 1e-12, "inertia_joint_kgm2": 1e-13},
                      "radius": {"mass_kg": 1e-12, "inertia_joint_kgm2": 1e-13}},
            "coupling": {"humerus": {"attach_radius_m": 0.03},
                         "radius": {"attach_radius_m": 0.045}},
            "sim": {"gravity_on": False}}
    cfg = Config.from_dict(over)
    st = DynamicState(np.zeros(7), np.zeros(7), np.eye(3), np.zeros(3))
    tau = 1e-4
    Q = np.zeros(10)
    Q[8] = tau
    acc = dynamics_accel(cfg, st, Q)
    Jy = cfg.data["body"]["inertia_kgm2"][1]
    assert abs(acc[8] - tau / Jy) < 1e-6 * (tau / Jy)


def test_torque_free_body_follows_euler_equations():
    """Symmetric torque-free body: spin component, energy, and inertial
    momentum all conserved over 1000 manual steps."""
    over = {"body": {"inertia_kgm2": [1.0e-5, 2.0e-5, 1.0e-5]},
            "links": {"humerus": {"mass_kg": 1e-12, "inertia_joint_kgm2": 1e-13},
                      "radius": {"mass_kg": 1e-12, "inertia_joint_kgm2": 1e-13}},
            "coupling": {"humerus": {"attach_radius_m": 0.03},
                         "radius": {"attach_radius_m": 0.045}}}
    cfg = Config.from_dict(over)
    J = np.array(cfg.data["body"]["inertia_kgm2"])
    om = np.array([3.0, 7.0, 1.5])
    R = np.eye(3)
    dt = 1e-4

    def omdot(om):
        st = DynamicState(np.zeros(7), np.zeros(7), np.eye(3), om)
        h = bias_forces(cfg, st, gravity=False)
        return np.linalg.solve(mass_matrix(cfg, st), -h)[7:]

    E0 = 0.5 * float(om @ (J * om))
    L0 = R @ (J * om)
    spin0 = om[1]
    for _ in range(1000):
        k1 = omdot(om)
        k2 = omdot(om + 0.5 * dt * k1)
        k3 = omdot(om + 0.5 * dt * k2)
        k4 = omdot(om + dt * k3)
        om_new = om + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        R = step_attitude(R, 0.5 * (om + om_new), dt)
        om = om_new
    E1 = 0.5 * float(om @ (J * om))
    L1 = R @ (J * om)
    assert abs(E1 - E0) / E0 < 1e-8
    assert np.linalg.norm(L1 - L0) / np.linalg.norm(L0) < 1e-6
    assert abs(om[1] - spin0) / abs(spin0) < 1e-8


# ---------------------------------------------------------------------------
# conservation invariants through the full engine
# ---------------------------------------------------------------------------

def _quiet_controls():
    return {"flap_control_on": False, "fdc_control_on": False,
            "pitch_control_on": False}


def test_energy_conserved_conservative_setup():
    """Crank parked, dampers off, aero off, gravity on, springs active,
    wings kicked off their tracking pose: drift < 1e-6 per wingbeat period."""
    over = {"control": _quiet_controls(),
            "sim": {"aero_on": False, "damping_on": False,
                    "initial": {"wing_angle_offset_rad": [0.15, -0.1, 0.15, -0.1],
                                "wing_rate_rad_per_s": [2.0, -1.0, 2.0, -1.0]}}}
    cfg = Config.from_dict(over)
    traj, _ = run_episode(cfg, duration=0.1)
    assert traj.status == "ok"
    audit = energy_audit(traj)
    assert audit.max_closure_error < 1e-6


def test_free_body_momentum_conserved():
    """Everything off: linear and inertial angular momentum drift < 1e-8
    relative per 1000 steps while the wings coast."""
    over = {"control": _quiet_controls(),
            "sim": {"aero_on": False, "damping_on": False, "gravity_on": False,
                    "coupling_on": False,
                    "initial": {"wing_rate_rad_per_s": [3.0, -2.0, -1.0, 2.5],
                                "omega_rad_per_s": [1.0, 2.0, -0.5],
                                "velocity_mps": [0.3, -0.2, 0.1]}}}
    cfg = Config.from_dict(over)
    traj, _ = run_episode(cfg, duration=0.1)  # 1000 steps at default dt
    assert traj.status == "ok"

    def momenta(i):
        row = traj.data[i]
        st = DynamicState(
            np.concatenate((row[_core.L_P:_core.L_P + 3],
                            row[_core.L_PHI:_core.L_PHI + 4])),
            row[_core.L_VD:_core.L_VD + 7],
            row[_core.L_R:_core.L_R + 9].reshape(3, 3),
            row[_core.L_VD + 7:_core.L_VD + 10])
        qk = row[_core.L_QK:_core.L_QK + 12]
        qkd = row[_core.L_QKD:_core.L_QKD + 12]
        Pi = _core.angular_momentum(cfg.mech, cfg.dyn, qk, qkd, st.position,
                                    st.wing_angles, st.generalized_velocity(),
                                    st.R.reshape(-1))
        # linear momentum from the kinetic-energy gradient in pdot
        M = _core.dyn_terms(cfg.mech, cfg.dyn, cfg.aero, qk, qkd, st.position,
                            st.wing_angles, st.generalized_velocity(),
                            st.R.reshape(-1), False, False, False, False)[0]
        P = (M @ st.generalized_velocity())[:3]
        return P, Pi

    P0, Pi0 = momenta(0)
    P1, Pi1 = momenta(len(traj) - 1)
    assert np.linalg.norm(P1 - P0) / max(np.linalg.norm(P0), 1e-12) < 1e-8
    assert np.linalg.norm(Pi1 - Pi0) / max(np.linalg.norm(Pi0), 1e-12) < 1e-8


def test_orthonormality_over_long_episode():
    over = {"sim": {"duration_s": 10.0}}
    cfg = Config.from_dict(over)
    traj, _ = run_episode(cfg)
    assert traj.status == "ok"
    worst = 0.0
    for R in traj.rotations():
        worst = max(worst, np.max(np.abs(R.T @ R - np.eye(3))))
    assert worst < 1e-9


def test_left_right_symmetry(cfg):
    """Symmetric configuration and inputs excite no roll, yaw, or sideslip."""
    traj, _ = run_episode(cfg, duration=0.5)
    assert traj.status == "ok"
    assert np.max(np.abs(traj.col("vy"))) < 1e-9
    assert np.max(np.abs(traj.col("wx"))) < 1e-9
    assert np.max(np.abs(traj.col("wz"))) < 1e-9
    assert np.max(np.abs(traj.col("phi_lh") - traj.col("phi_rh"))) < 1e-12
    for R in traj.rotations():
        assert abs(R[0, 1]) < 1e-9 and abs(R[2, 1]) < 1e-9


def test_mirrored_initial_conditions_mirror_the_trajectory():
    """An antisymmetric kick produces the mirrored trajectory of the opposite
    kick (left/right exchange plus lateral sign flips)."""
    kick = [0.08, -0.05, 0.02, 0.01]
    mirrored = [kick[2], kick[3], kick[0], kick[1]]
    base = {"control": _quiet_controls(),
            "sim": {"aero_on": False,
                    "initial": {"wing_angle_offset_rad": kick}}}
    other = {"control": _quiet_controls(),
             "sim": {"aero_on": False,
                     "initial": {"wing_angle_offset_rad": mirrored}}}
    ta, _ = run_episode(Config.from_dict(base), duration=0.05)
    tb, _ = run_episode(Config.from_dict(other), duration=0.05)
    assert np.max(np.abs(ta.col("phi_lh") - tb.col("phi_rh"))) < 1e-9
    assert np.max(np.abs(ta.col("phi_rh") - tb.col("phi_lh"))) < 1e-9
    assert np.max(np.abs(ta.col("py") + tb.col("py"))) < 1e-9
    assert np.max(np.abs(ta.col("pz") - tb.col("pz"))) < 1e-9
    assert np.max(np.abs(ta.col("wx") + tb.col("wx"))) < 1e-9

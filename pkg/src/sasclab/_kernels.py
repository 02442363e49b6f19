"""Numba kernels for the 60 Hz control loop.

Everything here operates on packed float64 arrays so the hot path (physics
step, nearest-obstacle query, model rollout, adjoint sweep, action search)
stays allocation-light and JIT-compiled.  The public modules wrap these
kernels behind the documented API; the packing conventions are:

``phys`` (11,): dt, gravity, mass, inertia, main_thrust_max, side_thrust_max,
    side_force_max, lander_radius, max_impact_speed, max_landing_tilt, ground_y

``cost`` (9,): w3, w4, w5, w6, barrier_scale, barrier_eps, p_half,
    terminal_weight, ascending_flag

``circles`` (nc, 3): cx, cy, r           static circular obstacles
``rects``   (nr, 4): x0, y0, x1, y1      static axis-aligned walls
``dyn``     (nd, 6): cy, r, speed, x_enter, span, phase   scripted crossers

Fastmath stays off: replays must be bit-exact across runs.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# phys indices
P_DT, P_G, P_MASS, P_INERTIA, P_TMAX, P_TORQUE, P_SIDEF, P_RADIUS, \
    P_VIMPACT, P_TILT, P_GROUND = range(11)

# cost indices
C_W3, C_W4, C_W5, C_W6, C_BSCALE, C_BEPS, C_PHALF, C_TWEIGHT, C_ASC = range(9)


@njit(cache=True)
def clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def phys_step(x, u, phys):
    """One semi-implicit Euler step; resolves soft ground contact.

    Thrust acts along body-up (sin x3, cos x3); the rotational jet applies a
    pure torque plus a small force along body-right (cos x3, -sin x3).  A
    penetrating ground contact clamps the lander onto the surface and, when
    the contact is survivable (slow and upright), zeroes the descent rate;
    hard contacts keep their velocity so the outcome classifier sees them.
    """
    dt = phys[P_DT]
    u1 = clamp(u[0], -1.0, 1.0)
    u2 = clamp(u[1], -1.0, 1.0)
    thrust = phys[P_TMAX] * u1 if u1 > 0.0 else 0.0

    s3 = math.sin(x[2])
    c3 = math.cos(x[2])
    fx = thrust * s3 + phys[P_SIDEF] * u2 * c3
    fy = thrust * c3 - phys[P_SIDEF] * u2 * s3
    ax = fx / phys[P_MASS]
    ay = fy / phys[P_MASS] - phys[P_G]
    aw = phys[P_TORQUE] * u2 / phys[P_INERTIA]

    vx = x[3] + ax * dt
    vy = x[4] + ay * dt
    w = x[5] + aw * dt
    px = x[0] + vx * dt
    py = x[1] + vy * dt
    heading = x[2] + w * dt

    floor = phys[P_GROUND] + phys[P_RADIUS]
    if py < floor:
        py = floor
        if vy < 0.0:
            speed = math.hypot(vx, vy)
            if speed <= phys[P_VIMPACT] and abs(heading) <= phys[P_TILT]:
                vy = 0.0

    out = np.empty(6)
    out[0] = px
    out[1] = py
    out[2] = heading
    out[3] = vx
    out[4] = vy
    out[5] = w
    return out


@njit(cache=True)
def dyn_center_x(t, speed, x_enter, span, phase):
    return x_enter + (phase + speed * t) % span


@njit(cache=True)
def nearest_obstacle(px, py, t, circles, rects, dyn, ground_y, radius):
    """Minimum clearance from the bounding circle to every surface.

    Returns (clearance, o1, o2, obstacle_clearance, ground_clearance).
    ``clearance`` may be negative when penetrating; callers clamp for the
    public query.  Ties keep the earliest candidate: static circles, then
    walls, then scripted obstacles, then the ground (last).  (o1, o2) is the
    circle center for round obstacles, the nearest surface point for walls,
    and the foot-point below the lander for the ground.
    """
    best = np.inf
    o1 = px
    o2 = ground_y
    obst_best = np.inf

    for i in range(circles.shape[0]):
        d = math.hypot(px - circles[i, 0], py - circles[i, 1]) \
            - circles[i, 2] - radius
        if d < best:
            best = d
            o1 = circles[i, 0]
            o2 = circles[i, 1]
        if d < obst_best:
            obst_best = d

    for i in range(rects.shape[0]):
        qx = clamp(px, rects[i, 0], rects[i, 2])
        qy = clamp(py, rects[i, 1], rects[i, 3])
        d = math.hypot(px - qx, py - qy) - radius
        if d < best:
            best = d
            o1 = qx
            o2 = qy
        if d < obst_best:
            obst_best = d

    for i in range(dyn.shape[0]):
        cx = dyn_center_x(t, dyn[i, 2], dyn[i, 3], dyn[i, 4], dyn[i, 5])
        d = math.hypot(px - cx, py - dyn[i, 0]) - dyn[i, 1] - radius
        if d < best:
            best = d
            o1 = cx
            o2 = dyn[i, 0]
        if d < obst_best:
            obst_best = d

    ground_clear = py - ground_y - radius
    if ground_clear < best:
        best = ground_clear
        o1 = px
        o2 = ground_y

    return best, o1, o2, obst_best, ground_clear


# ---------------------------------------------------------------------------
# Koopman model plumbing.  The 25-element basis, in published order:
#   [1, x1..x6, u1, u2, u1*x1..u1*x6, u2*x1..u2*x6,
#    u1*cos x3, u1*sin x3, u2*cos x3, u2*sin x3]
# ``Ks`` is the 6x25 block of operator rows that recover the state.
# ---------------------------------------------------------------------------


@njit(cache=True)
def phi_fill(phi, x, u):
    phi[0] = 1.0
    for i in range(6):
        phi[1 + i] = x[i]
    phi[7] = u[0]
    phi[8] = u[1]
    for i in range(6):
        phi[9 + i] = u[0] * x[i]
        phi[15 + i] = u[1] * x[i]
    c3 = math.cos(x[2])
    s3 = math.sin(x[2])
    phi[21] = u[0] * c3
    phi[22] = u[0] * s3
    phi[23] = u[1] * c3
    phi[24] = u[1] * s3


@njit(cache=True)
def model_step(Ks, x, u, out):
    phi = np.empty(25)
    phi_fill(phi, x, u)
    for i in range(6):
        s = 0.0
        for j in range(25):
            s += Ks[i, j] * phi[j]
        out[i] = s


@njit(cache=True)
def model_jac(Ks, x, u, A, B):
    """Exact Jacobians of the lifted one-step map w.r.t. state and control."""
    c3 = math.cos(x[2])
    s3 = math.sin(x[2])
    for i in range(6):
        for j in range(6):
            A[i, j] = Ks[i, 1 + j] + u[0] * Ks[i, 9 + j] + u[1] * Ks[i, 15 + j]
        A[i, 2] += (-u[0] * s3) * Ks[i, 21] + (u[0] * c3) * Ks[i, 22] \
            + (-u[1] * s3) * Ks[i, 23] + (u[1] * c3) * Ks[i, 24]
        b0 = Ks[i, 7] + c3 * Ks[i, 21] + s3 * Ks[i, 22]
        b1 = Ks[i, 8] + c3 * Ks[i, 23] + s3 * Ks[i, 24]
        for j in range(6):
            b0 += x[j] * Ks[i, 9 + j]
            b1 += x[j] * Ks[i, 15 + j]
        B[i, 0] = b0
        B[i, 1] = b1


# ---------------------------------------------------------------------------
# Safety objective.
# ---------------------------------------------------------------------------


@njit(cache=True)
def running_cost_val(x, o1, o2, cost):
    a = cost[C_W3] * x[2]
    b = cost[C_W4] * x[3]
    c = cost[C_W5] * x[4]
    d = cost[C_W6] * x[5]
    stab = a * a + b * b + c * c + d * d
    dx = x[0] - o1
    dy = x[1] - o2
    if cost[C_ASC] > 0.5:
        p = int(2.0 * cost[C_PHALF])
        bar = cost[C_BSCALE] * (dx ** p + dy ** p)
    else:
        d2 = dx * dx + dy * dy
        bar = cost[C_BSCALE] / (cost[C_BEPS] + d2) ** int(cost[C_PHALF])
    return stab + bar


@njit(cache=True)
def running_cost_grad(x, o1, o2, cost, out):
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 2.0 * cost[C_W3] * cost[C_W3] * x[2]
    out[3] = 2.0 * cost[C_W4] * cost[C_W4] * x[3]
    out[4] = 2.0 * cost[C_W5] * cost[C_W5] * x[4]
    out[5] = 2.0 * cost[C_W6] * cost[C_W6] * x[5]
    dx = x[0] - o1
    dy = x[1] - o2
    if cost[C_ASC] > 0.5:
        p = int(2.0 * cost[C_PHALF])
        out[0] += cost[C_BSCALE] * p * dx ** (p - 1)
        out[1] += cost[C_BSCALE] * p * dy ** (p - 1)
    else:
        d2 = dx * dx + dy * dy
        ph = int(cost[C_PHALF])
        common = -cost[C_BSCALE] * ph * (cost[C_BEPS] + d2) ** (-ph - 1) * 2.0
        out[0] += common * dx
        out[1] += common * dy


@njit(cache=True)
def ground_penetration_cost(x2, ground_y, radius, cost):
    """Rollout prior: below-ground model states are not free space.

    The barrier references the ground by its foot-point, so an imagined
    trajectory that punches through the surface would see its obstacle
    distance grow again.  This term keeps the cost rising with penetration
    depth (slope at least the barrier's saturation value), so the action
    search can never prefer an underground escape.  It is identically zero
    for every physically reachable state.
    """
    pen = (ground_y + radius) - x2
    if pen <= 0.0:
        return 0.0
    cap = cost[C_BSCALE] / cost[C_BEPS] ** int(cost[C_PHALF])
    return cap * (pen + pen * pen)


@njit(cache=True)
def ground_penetration_grad(x2, ground_y, radius, cost):
    pen = (ground_y + radius) - x2
    if pen <= 0.0:
        return 0.0
    cap = cost[C_BSCALE] / cost[C_BEPS] ** int(cost[C_PHALF])
    return -cap * (1.0 + 2.0 * pen)


@njit(cache=True)
def terminal_cost_val(x, cost):
    a = cost[C_W3] * x[2]
    b = cost[C_W4] * x[3]
    c = cost[C_W5] * x[4]
    d = cost[C_W6] * x[5]
    return cost[C_TWEIGHT] * (a * a + b * b + c * c + d * d)


@njit(cache=True)
def terminal_cost_grad(x, cost, out):
    tw = cost[C_TWEIGHT]
    out[0] = 0.0
    out[1] = 0.0
    out[2] = tw * 2.0 * cost[C_W3] * cost[C_W3] * x[2]
    out[3] = tw * 2.0 * cost[C_W4] * cost[C_W4] * x[3]
    out[4] = tw * 2.0 * cost[C_W5] * cost[C_W5] * x[4]
    out[5] = tw * 2.0 * cost[C_W6] * cost[C_W6] * x[5]


@njit(cache=True)
def rollout_cost(Ks, x0, t0, dt, schedule,
                 circles, rects, dyn, ground_y, radius, cost):
    """Discrete cost of rolling the model under a control schedule.

    J = sum_k l(x_k) dt + l_tf(x_L) with L = len(schedule).  Returns +inf if
    the rollout leaves the finite range.
    """
    x = np.empty(6)
    nxt = np.empty(6)
    for i in range(6):
        x[i] = x0[i]
    total = 0.0
    for k in range(schedule.shape[0]):
        t = t0 + k * dt
        _, o1, o2, _, _ = nearest_obstacle(x[0], x[1], t, circles, rects,
                                           dyn, ground_y, radius)
        total += (running_cost_val(x, o1, o2, cost)
                  + ground_penetration_cost(x[1], ground_y, radius, cost)) * dt
        model_step(Ks, x, schedule[k], nxt)
        for i in range(6):
            x[i] = nxt[i]
        if not (math.isfinite(x[0]) and math.isfinite(x[1])
                and math.isfinite(x[2]) and math.isfinite(x[3])
                and math.isfinite(x[4]) and math.isfinite(x[5])):
            return np.inf
    total += terminal_cost_val(x, cost) \
        + ground_penetration_cost(x[1], ground_y, radius, cost)
    if not math.isfinite(total):
        return np.inf
    return total


@njit(cache=True)
def _drift_tail_cost(dc, dm, x1, t1, dt, steps,
                     circles, rects, dyn, ground_y, radius, cost):
    """Running + terminal cost of drifting (u = 0) from x1 for ``steps``.

    Under zero control every u-dependent feature vanishes, so one model step
    is the affine map x' = dc + dm x with dc = Ks[:, 0] and dm = Ks[:, 1:7].
    Evaluating it this way is bit-identical to the full lifted step (the
    skipped terms each add exactly 0.0) at a quarter of the flops.
    """
    x = np.empty(6)
    nxt = np.empty(6)
    for i in range(6):
        x[i] = x1[i]
    total = 0.0
    for k in range(steps):
        t = t1 + k * dt
        _, o1, o2, _, _ = nearest_obstacle(x[0], x[1], t, circles, rects,
                                           dyn, ground_y, radius)
        total += (running_cost_val(x, o1, o2, cost)
                  + ground_penetration_cost(x[1], ground_y, radius, cost)) * dt
        for i in range(6):
            s = dc[i]
            for j in range(6):
                s += dm[i, j] * x[j]
            nxt[i] = s
        for i in range(6):
            x[i] = nxt[i]
        if not (math.isfinite(x[0]) and math.isfinite(x[2])
                and math.isfinite(x[4])):
            return np.inf
    total += terminal_cost_val(x, cost) \
        + ground_penetration_cost(x[1], ground_y, radius, cost)
    if not math.isfinite(total):
        return np.inf
    return total


@njit(cache=True)
def _first_action_cost(Ks, dc, dm, x0, t0, dt, n, u0, u1,
                       circles, rects, dyn, ground_y, radius, cost):
    """Cost of applying (u0, u1) for one step, then drifting (u = 0)."""
    _, o1, o2, _, _ = nearest_obstacle(x0[0], x0[1], t0, circles, rects,
                                       dyn, ground_y, radius)
    u = np.empty(2)
    u[0] = u0
    u[1] = u1
    x1 = np.empty(6)
    model_step(Ks, x0, u, x1)
    head = (running_cost_val(x0, o1, o2, cost)
            + ground_penetration_cost(x0[1], ground_y, radius, cost)) * dt
    tail = _drift_tail_cost(dc, dm, x1, t0 + dt, dt, n - 1, circles, rects,
                            dyn, ground_y, radius, cost)
    return head + tail


@njit(cache=True)
def sac_core(Ks, x0, t0, dt, n, cost, r_mat, rinv, threshold,
             circles, rects, dyn, ground_y, radius, n_candidates):
    """Single-action synthesis along a zero-control nominal rollout.

    Forward pass rolls the learned model under u = 0 and accumulates the
    nominal cost.  The backward pass propagates the exact discrete costate
    rho_k = dt * dl/dx(x_k) + A_k^T rho_{k+1} and forms the improving action
    u*_k = -R^-1 B_k^T rho_{k+1} / dt, clamped to the control box.  The nodes
    with the most negative insertion gradient rho^T B u* become candidates
    (the first and last nodes always included); each is verified by an
    explicit rollout (held one step, then drift) and an action is preferred
    over drifting only when it beats the nominal cost by more than its own
    control-effort penalty u^T R u dt / 2 plus an absolute threshold, the
    Hamiltonian trade-off that keeps a stabilized hover quiescent under
    gravity drift.

    Returns (u1, u2, status, j_nominal, j_best, node) with status 0 when an
    improving action was found, 1 when none exists (zero action returned)
    and 2 when the nominal rollout left the finite range (caller falls back).
    j_best is the raw (unpenalized) predicted cost of the returned schedule.
    """
    # drift dynamics: at u = 0 the lifted step is the affine map dc + dm x
    dc = np.empty(6)
    dm = np.empty((6, 6))
    for i in range(6):
        dc[i] = Ks[i, 0]
        for j in range(6):
            dm[i, j] = Ks[i, 1 + j]

    xs = np.empty((n + 1, 6))
    for i in range(6):
        xs[0, i] = x0[i]
    j_nom = 0.0
    ok = True
    for k in range(n):
        t = t0 + k * dt
        _, o1, o2, _, _ = nearest_obstacle(xs[k, 0], xs[k, 1], t, circles,
                                           rects, dyn, ground_y, radius)
        j_nom += (running_cost_val(xs[k], o1, o2, cost)
                  + ground_penetration_cost(xs[k, 1], ground_y, radius, cost)) * dt
        for i in range(6):
            s = dc[i]
            for j in range(6):
                s += dm[i, j] * xs[k, j]
            xs[k + 1, i] = s
        for i in range(6):
            if not math.isfinite(xs[k + 1, i]):
                ok = False
        if not ok:
            break
    if not ok or not math.isfinite(j_nom):
        return 0.0, 0.0, 2, np.inf, np.inf, -1
    j_nom += terminal_cost_val(xs[n], cost) \
        + ground_penetration_cost(xs[n, 1], ground_y, radius, cost)

    rho = np.empty(6)
    terminal_cost_grad(xs[n], cost, rho)
    rho[1] += ground_penetration_grad(xs[n, 1], ground_y, radius, cost)
    B = np.empty((6, 2))
    lx = np.empty(6)
    newrho = np.empty(6)
    us = np.empty((n, 2))
    gains = np.empty(n)
    for k in range(n - 1, -1, -1):
        # B at u = 0; A is the constant drift matrix dm
        c3 = math.cos(xs[k, 2])
        s3 = math.sin(xs[k, 2])
        for i in range(6):
            b0 = Ks[i, 7] + c3 * Ks[i, 21] + s3 * Ks[i, 22]
            b1 = Ks[i, 8] + c3 * Ks[i, 23] + s3 * Ks[i, 24]
            for j in range(6):
                b0 += xs[k, j] * Ks[i, 9 + j]
                b1 += xs[k, j] * Ks[i, 15 + j]
            B[i, 0] = b0
            B[i, 1] = b1
        btr0 = B[0, 0] * rho[0] + B[1, 0] * rho[1] + B[2, 0] * rho[2] \
            + B[3, 0] * rho[3] + B[4, 0] * rho[4] + B[5, 0] * rho[5]
        btr1 = B[0, 1] * rho[0] + B[1, 1] * rho[1] + B[2, 1] * rho[2] \
            + B[3, 1] * rho[3] + B[4, 1] * rho[4] + B[5, 1] * rho[5]
        ua = -(rinv[0, 0] * btr0 + rinv[0, 1] * btr1) / dt
        ub = -(rinv[1, 0] * btr0 + rinv[1, 1] * btr1) / dt
        ua = clamp(ua, -1.0, 1.0)
        ub = clamp(ub, -1.0, 1.0)
        us[k, 0] = ua
        us[k, 1] = ub
        gains[k] = btr0 * ua + btr1 * ub

        t = t0 + k * dt
        _, o1, o2, _, _ = nearest_obstacle(xs[k, 0], xs[k, 1], t, circles,
                                           rects, dyn, ground_y, radius)
        running_cost_grad(xs[k], o1, o2, cost, lx)
        lx[1] += ground_penetration_grad(xs[k, 1], ground_y, radius, cost)
        for i in range(6):
            s = dt * lx[i]
            for j in range(6):
                s += dm[j, i] * rho[j]
            newrho[i] = s
        for i in range(6):
            rho[i] = newrho[i]

    # candidate nodes: most negative insertion gradients, plus the endpoints;
    # non-descent nodes are never worth a verification rollout
    m = n_candidates if n_candidates < n else n
    order = np.argsort(gains)
    chosen = np.empty(m + 2, dtype=np.int64)
    n_chosen = 0
    for c in range(m):
        k = order[c]
        if gains[k] >= 0.0:
            break
        chosen[n_chosen] = k
        n_chosen += 1
    for extra in (0, n - 1):
        if gains[extra] >= 0.0:
            continue
        seen = False
        for i in range(n_chosen):
            if chosen[i] == extra:
                seen = True
        if not seen:
            chosen[n_chosen] = extra
            n_chosen += 1

    j_best = np.inf        # raw predicted cost of the best candidate
    h_best = np.inf        # with the control-effort penalty added
    best_k = -1
    bu0 = 0.0
    bu1 = 0.0
    for c in range(n_chosen):
        k = chosen[c]
        ua = us[k, 0]
        ub = us[k, 1]
        jc = _first_action_cost(Ks, dc, dm, x0, t0, dt, n, ua, ub,
                                circles, rects, dyn, ground_y, radius, cost)
        penalty = 0.5 * dt * (ua * (r_mat[0, 0] * ua + r_mat[0, 1] * ub)
                              + ub * (r_mat[1, 0] * ua + r_mat[1, 1] * ub))
        hc = jc + penalty
        if hc < h_best:
            h_best = hc
            j_best = jc
            best_k = k
            bu0 = ua
            bu1 = ub

    if h_best < j_nom - threshold:
        return bu0, bu1, 0, j_nom, j_best, best_k
    return 0.0, 0.0, 1, j_nom, j_nom, -1

"""Compiled stencil kernels and the fused explicit time loop.

All arrays are ``(ny, nx)`` float64.  The consumption term is selected by
``law``: LAW_POWER (max(s,0)**beta), LAW_ZERO, or LAW_CUSTOM, in which case the
compiled scalar function ``f(s, beta)`` is called per cell.

``prm`` packs ``[hx, hy, chi, coef, gamma, beta, v_floor]`` with
``coef = chi * v0_max**(1 - gamma)``.

Reassociation is enabled so reductions vectorize; the flux differences that
carry mass conservation telescope exactly regardless of summation order.
"""
import math

import numpy as np
from numba import cfunc, njit, types

ORIGINAL = 0
TRANSFORMED = 1
HEUN = 0
EULER = 1

LAW_POWER = 0
LAW_ZERO = 1
LAW_CUSTOM = 2

OK = 0
DT_TOO_SMALL = 1
RETRIES_EXHAUSTED = 2
CAP_EXCEEDED = 3

SPEED_EPS = 1e-30

# consumption laws are cfuncs of this signature; as arguments they get a
# stable FunctionType, which keeps the on-disk cache valid across processes
LAW_SIG = types.float64(types.float64, types.float64)

_FM = {"reassoc", "nsz"}
_jit = njit(cache=True, error_model="numpy", fastmath=_FM)


@cfunc(LAW_SIG, cache=True)
def power_law(s, beta):
    if s > 0.0:
        if beta == 0.5:
            return math.sqrt(s)
        if beta == 1.0:
            return s
        return s**beta
    return 0.0


@cfunc(LAW_SIG, cache=True)
def zero_law(s, beta):
    return 0.0


@_jit
def _consumption(u, law, f, beta, out):
    """out = f(u) cellwise."""
    ny, nx = u.shape
    if law == LAW_ZERO:
        out[:, :] = 0.0
    elif law == LAW_POWER and beta == 0.5:
        for j in range(ny):
            for i in range(nx):
                out[j, i] = math.sqrt(max(u[j, i], 0.0))
    elif law == LAW_POWER and beta == 1.0:
        for j in range(ny):
            for i in range(nx):
                out[j, i] = max(u[j, i], 0.0)
    elif law == LAW_POWER:
        for j in range(ny):
            for i in range(nx):
                out[j, i] = max(u[j, i], 0.0) ** beta
    else:
        for j in range(ny):
            for i in range(nx):
                out[j, i] = f(u[j, i], beta)


@_jit
def _consume_original(u, v, law, f, beta, dv):
    """dv -= f(u)·v."""
    ny, nx = u.shape
    if law == LAW_ZERO:
        return
    if law == LAW_POWER and beta == 0.5:
        for j in range(ny):
            for i in range(nx):
                dv[j, i] -= math.sqrt(max(u[j, i], 0.0)) * v[j, i]
    elif law == LAW_POWER and beta == 1.0:
        for j in range(ny):
            for i in range(nx):
                dv[j, i] -= max(u[j, i], 0.0) * v[j, i]
    else:
        fu = np.empty_like(u)
        _consumption(u, law, f, beta, fu)
        for j in range(ny):
            for i in range(nx):
                dv[j, i] -= fu[j, i] * v[j, i]


@_jit
def workspace(ny, nx):
    """Scratch (vel_x, vel_y, gx, gy, E) for the RHS kernels; face arrays start at zero
    and their boundary entries are never written."""
    return (np.zeros((ny, nx + 1)), np.zeros((ny + 1, nx)),
            np.zeros((ny, nx + 1)), np.zeros((ny + 1, nx)), np.empty((ny, nx)))


@_jit
def _diffuse(c, out, ihx2, ihy2):
    """out = 5-point Laplacian of c with mirrored ghost cells."""
    ny, nx = c.shape
    for j in range(ny):
        jm = j - 1 if j > 0 else 0
        jp = j + 1 if j < ny - 1 else ny - 1
        out[j, 0] = (c[j, 1] - c[j, 0]) * ihx2
        for i in range(1, nx - 1):
            out[j, i] = (c[j, i + 1] - 2.0 * c[j, i] + c[j, i - 1]) * ihx2
        out[j, nx - 1] = (c[j, nx - 2] - c[j, nx - 1]) * ihx2
        for i in range(nx):
            out[j, i] += (c[jp, i] - 2.0 * c[j, i] + c[jm, i]) * ihy2


@_jit
def _transport(u, vel_x, vel_y, ihx, ihy, du):
    """du = div(grad u − û·vel), û upwinded on the face speed; boundary faces carry no flux."""
    ny, nx = u.shape
    F = np.empty(nx + 1)
    F[0] = 0.0
    F[nx] = 0.0
    for j in range(ny):
        for i in range(1, nx):
            vel = vel_x[j, i]
            F[i] = (u[j, i] - u[j, i - 1]) * ihx - (max(vel, 0.0) * u[j, i - 1] + min(vel, 0.0) * u[j, i])
        for i in range(nx):
            du[j, i] = (F[i + 1] - F[i]) * ihx
    G = np.empty(nx)
    for j in range(1, ny):
        for i in range(nx):
            vel = vel_y[j, i]
            G[i] = ((u[j, i] - u[j - 1, i]) * ihy
                    - (max(vel, 0.0) * u[j - 1, i] + min(vel, 0.0) * u[j, i])) * ihy
        for i in range(nx):
            du[j - 1, i] += G[i]
            du[j, i] -= G[i]


@_jit
def _face_speeds(v, chi, gamma, v_floor, ih, di, dj, vel, oi, oj, sqrt_path):
    """Speeds on interior faces between cells (j-dj, i-di) and (j, i), written to
    ``vel[j + oj, i + oi]``; returns (max |speed|, clamp events)."""
    ny, nx = v.shape
    sp = 0.0
    clamps = 0
    if sqrt_path:
        for j in range(dj, ny):
            for i in range(di, nx):
                a = v[j - dj, i - di]
                b = v[j, i]
                vf = 0.5 * (a + b)
                clamps += vf < v_floor
                x = chi / math.sqrt(max(vf, v_floor)) * ((b - a) * ih)
                vel[j + oj, i + oi] = x
                sp = max(sp, abs(x))
    else:
        for j in range(dj, ny):
            for i in range(di, nx):
                a = v[j - dj, i - di]
                b = v[j, i]
                vf = 0.5 * (a + b)
                clamps += vf < v_floor
                x = chi / max(vf, v_floor) ** gamma * ((b - a) * ih)
                vel[j + oj, i + oi] = x
                sp = max(sp, abs(x))
    return sp, clamps


@_jit
def _speeds_original(v, chi, gamma, v_floor, ihx, ihy, vel_x, vel_y):
    """Face speeds chi·grad v / max(v_face, floor)^gamma; returns (max |speed|, clamps).

    Only interior faces are written; boundary entries of ``vel_*`` are left alone.
    """
    sq = gamma == 0.5
    sx, cx = _face_speeds(v, chi, gamma, v_floor, ihx, 1, 0, vel_x, 0, 0, sq)
    sy, cy = _face_speeds(v, chi, gamma, v_floor, ihy, 0, 1, vel_y, 0, 0, sq)
    return max(sx, sy), cx + cy


@_jit
def rhs_original_ws(u, v, law, f, hx, hy, chi, gamma, beta, v_floor, du, dv, ws):
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    vel_x, vel_y = ws[0], ws[1]
    sp, clamps = _speeds_original(v, chi, gamma, v_floor, ihx, ihy, vel_x, vel_y)
    _transport(u, vel_x, vel_y, ihx, ihy, du)
    _diffuse(v, dv, ihx * ihx, ihy * ihy)
    _consume_original(u, v, law, f, beta, dv)
    return sp, clamps


@_jit
def rhs_transformed_ws(u, w, law, f, hx, hy, coef, gamma, beta, du, dw, ws):
    ny, nx = u.shape
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    vel_x, vel_y, gx, gy, E = ws
    k = 0.5 * (1.0 - gamma)
    for j in range(ny):
        for i in range(nx):
            E[j, i] = math.exp(-k * w[j, i])
    sp = 0.0
    for j in range(ny):
        for i in range(1, nx):
            g = (w[j, i] - w[j, i - 1]) * ihx
            gx[j, i] = g
            x = -coef * (E[j, i] * E[j, i - 1]) * g
            vel_x[j, i] = x
            sp = max(sp, abs(x))
    for j in range(1, ny):
        for i in range(nx):
            g = (w[j, i] - w[j - 1, i]) * ihy
            gy[j, i] = g
            x = -coef * (E[j, i] * E[j - 1, i]) * g
            vel_y[j, i] = x
            sp = max(sp, abs(x))
    _transport(u, vel_x, vel_y, ihx, ihy, du)
    _diffuse(w, dw, ihx * ihx, ihy * ihy)
    # E is free again; reuse it for f(u)
    _consumption(u, law, f, beta, E)
    for j in range(ny):
        for i in range(nx):
            cx = 0.5 * (gx[j, i] + gx[j, i + 1])
            cy = 0.5 * (gy[j, i] + gy[j + 1, i])
            dw[j, i] += E[j, i] - (cx * cx + cy * cy)
    return sp, 0


@_jit
def rhs_original(u, v, law, f, hx, hy, chi, gamma, beta, v_floor, du, dv):
    """Original system: du = div(grad u − û·chi·v_face^{-gamma}·grad v), dv = Δv − f(u)v.

    Returns (max face speed, clamp events).
    """
    ny, nx = u.shape
    return rhs_original_ws(u, v, law, f, hx, hy, chi, gamma, beta, v_floor, du, dv, workspace(ny, nx))


@_jit
def rhs_transformed(u, w, law, f, hx, hy, coef, gamma, beta, du, dw):
    """Transformed system: face speed −coef·exp(−(1−gamma)·w_face)·grad w,
    dw = Δw − |∇w|²_center + f(u).

    exp(−k·(a+b)/2) is evaluated as exp(−k·a/2)·exp(−k·b/2) from per-cell factors.
    """
    ny, nx = u.shape
    return rhs_transformed_ws(u, w, law, f, hx, hy, coef, gamma, beta, du, dw, workspace(ny, nx))


@_jit
def rhs_ws(form, u, c, law, f, prm, du, dc, ws):
    if form == ORIGINAL:
        return rhs_original_ws(u, c, law, f, prm[0], prm[1], prm[2], prm[4], prm[5], prm[6], du, dc, ws)
    return rhs_transformed_ws(u, c, law, f, prm[0], prm[1], prm[3], prm[4], prm[5], du, dc, ws)


@_jit
def rhs(form, u, c, law, f, prm, du, dc):
    ny, nx = u.shape
    return rhs_ws(form, u, c, law, f, prm, du, dc, workspace(ny, nx))


@_jit
def fisher_and_u2(u, hx, hy, floor):
    """Return (∫|∇u|²_center / max(u, floor), ∫u², floor hits)."""
    ny, nx = u.shape
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    fis = 0.0
    u2 = 0.0
    hits = 0
    for j in range(ny):
        jm = j - 1 if j > 0 else 0
        jp = j + 1 if j < ny - 1 else ny - 1
        # wall faces carry zero gradient, so the mirrored centered difference
        # equals the average of the two face gradients
        for i in range(nx):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < nx - 1 else nx - 1
            c = u[j, i]
            gx = 0.5 * (u[j, ip] - u[j, im]) * ihx
            gy = 0.5 * (u[jp, i] - u[jm, i]) * ihy
            hits += c < floor
            fis += (gx * gx + gy * gy) / max(c, floor)
            u2 += c * c
    dA = hx * hy
    return fis * dA, u2 * dA, hits


@_jit
def _combine(u, c, du1, dc1, du2, dc2, a, b, un, cn, form):
    """un = u + a·du1 + b·du2 (same for c); returns (admissible, max |un|)."""
    ny, nx = u.shape
    umin = np.inf
    umax = 0.0
    cmin = np.inf
    cmax = 0.0
    s = 0.0
    for j in range(ny):
        for i in range(nx):
            x = u[j, i] + (a * du1[j, i] + b * du2[j, i])
            y = c[j, i] + (a * dc1[j, i] + b * dc2[j, i])
            un[j, i] = x
            cn[j, i] = y
            s += x + y
            umin = min(umin, x)
            umax = max(umax, abs(x))
            cmin = min(cmin, y)
            cmax = max(cmax, abs(y))
    if not math.isfinite(s):
        # non-finite states are left to the blow-up monitor
        return True, np.inf
    if umin < -1e-10 * umax:
        return False, umax
    if form == ORIGINAL:
        return cmin > 0.0, umax
    return cmin >= -1e-10 * (1.0 + cmax), umax


@_jit
def try_step(form, scheme, u, c, law, f, prm, dt, du1, dc1, un, cn, du2, dc2, ws):
    """Candidate update into ``un``/``cn`` from stage-one slopes ``du1``/``dc1``.

    Returns (admissible, max |un|, stage-two clamp events).
    """
    if scheme == EULER:
        ok, umax = _combine(u, c, du1, dc1, du1, dc1, dt, 0.0, un, cn, form)
        return ok, umax, 0
    ny, nx = u.shape
    for j in range(ny):
        for i in range(nx):
            un[j, i] = u[j, i] + dt * du1[j, i]
            cn[j, i] = c[j, i] + dt * dc1[j, i]
    _, clamps = rhs_ws(form, un, cn, law, f, prm, du2, dc2, ws)
    h = 0.5 * dt
    ok, umax = _combine(u, c, du1, dc1, du2, dc2, h, h, un, cn, form)
    return ok, umax, clamps


@_jit
def step_with_retries(form, scheme, u, c, law, f, prm, dt, retry_limit, du1, dc1, un, cn, du2, dc2, ws):
    """Return (dt used, max |u_new|, clamp events, accepted), halving dt after each rejection."""
    clamps = 0
    umax = 0.0
    for _ in range(retry_limit + 1):
        ok, umax, cl = try_step(form, scheme, u, c, law, f, prm, dt, du1, dc1, un, cn, du2, dc2, ws)
        clamps += cl
        if ok:
            return dt, umax, clamps, True
        dt *= 0.5
    return dt, umax, clamps, False


@_jit
def advance_block(form, scheme, u, c, law, f, prm, sigma, dt_min, dt_max, retry_limit,
                  t, t_end, ucap, fisher_floor, acc):
    """Integrate ``(u, c)`` in place from ``t`` to exactly ``t_end``.

    ``acc`` = [fisher(t), fisher_cum, u2(t), u2_cum, clamp_events, floor_hits]
    is updated in place; time integrals use the trapezoid rule over accepted
    steps.  Returns (t, status, steps, last dt).
    """
    ny, nx = u.shape
    hx = prm[0]
    hy = prm[1]
    dt_diff = 0.25 / (1.0 / (hx * hx) + 1.0 / (hy * hy))
    hmin = min(hx, hy)
    ws = workspace(ny, nx)
    du1 = np.empty_like(u)
    dc1 = np.empty_like(u)
    du2 = np.empty_like(u)
    dc2 = np.empty_like(u)
    # the new state is written to (un, cn) and the buffers are swapped on acceptance
    uc = u
    cc = c
    un = np.empty_like(u)
    cn = np.empty_like(u)
    steps = 0
    dt = 0.0
    status = OK
    swapped = False
    while t < t_end:
        speed, cl = rhs_ws(form, uc, cc, law, f, prm, du1, dc1, ws)
        acc[4] += cl
        dt = sigma * min(dt_diff, hmin / (SPEED_EPS + speed), dt_max)
        if dt < dt_min:
            status = DT_TOO_SMALL
            break
        landing = dt >= t_end - t
        if landing:
            dt = t_end - t
        dt_used, umax, cl, ok = step_with_retries(form, scheme, uc, cc, law, f, prm, dt, retry_limit,
                                                  du1, dc1, un, cn, du2, dc2, ws)
        acc[4] += cl
        if not ok:
            dt = dt_used
            status = RETRIES_EXHAUSTED
            break
        uc, un = un, uc
        cc, cn = cn, cc
        swapped = not swapped
        fis, u2, hits = fisher_and_u2(uc, hx, hy, fisher_floor)
        acc[1] += 0.5 * dt_used * (acc[0] + fis)
        acc[3] += 0.5 * dt_used * (acc[2] + u2)
        acc[0] = fis
        acc[2] = u2
        acc[5] += hits
        if landing and dt_used == dt:
            t = t_end
        else:
            t += dt_used
        steps += 1
        if not (umax <= ucap):
            status = CAP_EXCEEDED
            break
    if swapped:
        u[:, :] = uc
        c[:, :] = cc
    return t, status, steps, dt

"""Pure-Python Dormand-Prince 5(4) tracer; mirrors the compiled kernel."""
from __future__ import annotations

import math

import numpy as np

KIND_ABC, KIND_LUTZ, KIND_POLY, KIND_CALLBACK = 0, 1, 2, 3

STATUS_DONE = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2
STATUS_STOP_POINT = 3
STATUS_OUT_OF_BOUNDS = 4
STATUS_HITS = 5

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


def make_rhs(kind, params, pexp, pcoef, pcomp, callback, normalize, direction):
    if kind == KIND_ABC:
        A, B, C = params[0], params[1], params[2]

        def raw(y):
            return (A * math.sin(y[2]) + C * math.cos(y[1]),
                    B * math.sin(y[0]) + A * math.cos(y[2]),
                    C * math.sin(y[1]) + B * math.cos(y[0]))
    elif kind == KIND_LUTZ:
        s, t = params[0], params[1]

        def raw(y):
            f = s - 0.5 * math.cos(y[2])
            fp = 0.5 * math.sin(y[2])
            return (t * y[0] * (2.0 - fp), -t * y[1] * (fp + 2.0), 2.0 * t * f)
    elif kind == KIND_POLY:
        terms = [(int(e[0]), int(e[1]), int(e[2]), float(c), int(k))
                 for e, c, k in zip(pexp, pcoef, pcomp)]

        def raw(y):
            out = [0.0, 0.0, 0.0]
            x0, x1, x2 = y
            for a, b, c, coef, k in terms:
                out[k] += coef * x0 ** a * x1 ** b * x2 ** c
            return out
    elif kind == KIND_CALLBACK:
        def raw(y):
            v = callback(np.asarray(y, dtype=float))
            return (float(v[0]), float(v[1]), float(v[2]))
    else:
        raise ValueError(f"unknown kernel kind {kind}")

    def rhs(y):
        v = raw(y)
        if normalize:
            n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            if n > 1e-8:
                return (direction * v[0] / n, direction * v[1] / n, direction * v[2] / n)
        return (direction * v[0], direction * v[1], direction * v[2])

    return rhs


def _axpy(y, h, coefs, ks):
    out = list(y)
    for c, k in zip(coefs, ks):
        if c:
            hc = h * c
            out[0] += hc * k[0]
            out[1] += hc * k[1]
            out[2] += hc * k[2]
    return out


def _dp_step(rhs, y, k1, h):
    k2 = rhs(_axpy(y, h, (A21,), (k1,)))
    k3 = rhs(_axpy(y, h, (A31, A32), (k1, k2)))
    k4 = rhs(_axpy(y, h, (A41, A42, A43), (k1, k2, k3)))
    k5 = rhs(_axpy(y, h, (A51, A52, A53, A54), (k1, k2, k3, k4)))
    k6 = rhs(_axpy(y, h, (A61, A62, A63, A64, A65), (k1, k2, k3, k4, k5)))
    ynew = _axpy(y, h, (B1, B3, B4, B5, B6), (k1, k3, k4, k5, k6))
    k7 = rhs(ynew)
    err = [h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
           for i in range(3)]
    return ynew, k7, err


def _wrapdiff(d, periods):
    out = list(d)
    for i in range(3):
        p = periods[i]
        if p > 0:
            out[i] = d[i] - p * math.floor(d[i] / p + 0.5)
    return out


def _section_g(y, sec_p, sec_n, periods):
    d = _wrapdiff([y[0] - sec_p[0], y[1] - sec_p[1], y[2] - sec_p[2]], periods)
    return d[0] * sec_n[0] + d[1] * sec_n[1] + d[2] * sec_n[2], d


def trace(kind, params, pexp, pcoef, pcomp, y0, t_max, rtol, atol, h0, h_min, max_steps,
          direction, periods, bound_kind, bound, stop_pts, stop_radius, normalize, fixed_h,
          sec_on, sec_p, sec_n, sec_radius, sec_tmin, max_hits, callback=None, max_store=200000):
    rhs = make_rhs(kind, params, pexp, pcoef, pcomp, callback, normalize, direction)
    y = [float(v) for v in y0]
    periods = [float(p) for p in periods]
    stop_pts = np.asarray(stop_pts, dtype=float).reshape(-1, 3)
    n_stop = len(stop_pts)
    min_d = [math.inf] * n_stop
    t = 0.0
    h = fixed_h if fixed_h > 0 else h0
    k1 = rhs(y)
    ts = [0.0]
    ys = [list(y)]
    hits_t, hits_y = [], []
    status = STATUS_DONE
    stop_index = -1
    n_acc = n_rej = 0
    g_prev = _section_g(y, sec_p, sec_n, periods)[0] if sec_on else 0.0

    def check_points(yy):
        for j in range(n_stop):
            d = _wrapdiff([yy[0] - stop_pts[j, 0], yy[1] - stop_pts[j, 1], yy[2] - stop_pts[j, 2]], periods)
            dist = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
            if dist < min_d[j]:
                min_d[j] = dist
            if dist < stop_radius:
                return j
        return -1

    check_points(y)
    while t < t_max:
        if n_acc + n_rej >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if t + h > t_max:
            h = t_max - t
        ynew, k7, err = _dp_step(rhs, y, k1, h)
        if fixed_h > 0:
            accept = True
            fac = 1.0
        else:
            s = 0.0
            for i in range(3):
                sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                s += (err[i] / sc) ** 2
            e = math.sqrt(s / 3.0)
            accept = e <= 1.0
            fac = 5.0 if e == 0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
            if not all(math.isfinite(v) for v in ynew):
                accept = False
                fac = 0.2
        if not accept:
            n_rej += 1
            h *= fac
            if h < h_min:
                status = STATUS_UNDERFLOW
                break
            continue
        n_acc += 1
        if sec_on:
            g_new, dvec = _section_g(ynew, sec_p, sec_n, periods)
            near = math.sqrt(sum(dvec[i] ** 2 for i in range(3) if periods[i] > 0)) < sec_radius
            if g_prev < 0.0 <= g_new and near and t + h > sec_tmin:
                # secant / bisection on the step length, re-stepping from y each time
                lo, hi = 0.0, h
                glo, ghi = g_prev, g_new
                ys_star = ynew
                hs = h
                for _ in range(60):
                    hs = hi - ghi * (hi - lo) / (ghi - glo) if ghi != glo else 0.5 * (lo + hi)
                    if not (lo < hs < hi):
                        hs = 0.5 * (lo + hi)
                    ys_star = _dp_step(rhs, y, k1, hs)[0]
                    gs = _section_g(ys_star, sec_p, sec_n, periods)[0]
                    if abs(gs) < 1e-14 or hi - lo < 1e-15:
                        break
                    if gs < 0:
                        lo, glo = hs, gs
                    else:
                        hi, ghi = hs, gs
                if t + hs > sec_tmin:
                    hits_t.append(t + hs)
                    hits_y.append(list(ys_star))
            g_prev = g_new
        t += h
        y = ynew
        k1 = k7
        if len(ts) < max_store:
            ts.append(t)
            ys.append(list(y))
        j = check_points(y)
        if j >= 0:
            status = STATUS_STOP_POINT
            stop_index = j
            break
        if bound_kind == 1 and y[0] ** 2 + y[1] ** 2 + y[2] ** 2 > bound * bound:
            status = STATUS_OUT_OF_BOUNDS
            break
        if bound_kind == 2 and y[0] ** 2 + y[1] ** 2 > bound * bound:
            status = STATUS_OUT_OF_BOUNDS
            break
        if sec_on and max_hits > 0 and len(hits_t) >= max_hits:
            status = STATUS_HITS
            break
        if fixed_h <= 0:
            h *= fac
            if h < h_min:
                status = STATUS_UNDERFLOW
                break
    return {
        "t": np.asarray(ts),
        "y": np.asarray(ys),
        "status": status,
        "stop_index": stop_index,
        "hits_t": np.asarray(hits_t),
        "hits_y": np.asarray(hits_y).reshape(-1, 3),
        "n_accepted": n_acc,
        "n_rejected": n_rej,
        "min_dist": np.asarray(min_d),
    }

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) tracer for the closed-form field kinds."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, floor, fabs, pow, INFINITY, isfinite

cnp.import_array()

cdef enum:
    KIND_ABC = 0
    KIND_LUTZ = 1
    KIND_POLY = 2

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Field:
    int kind
    double p0, p1, p2
    int nterms
    long *ex
    double *coef
    long *comp
    int normalize
    double direction


cdef inline double ipow(double x, long n) nogil:
    cdef double r = 1.0
    cdef long i
    for i in range(n):
        r *= x
    return r


cdef void rhs(Field *f, double *y, double *out) nogil:
    cdef double fz, fp, n
    cdef int i
    if f.kind == KIND_ABC:
        out[0] = f.p0 * sin(y[2]) + f.p2 * cos(y[1])
        out[1] = f.p1 * sin(y[0]) + f.p0 * cos(y[2])
        out[2] = f.p2 * sin(y[1]) + f.p1 * cos(y[0])
    elif f.kind == KIND_LUTZ:
        fz = f.p0 - 0.5 * cos(y[2])
        fp = 0.5 * sin(y[2])
        out[0] = f.p1 * y[0] * (2.0 - fp)
        out[1] = -f.p1 * y[1] * (fp + 2.0)
        out[2] = 2.0 * f.p1 * fz
    else:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = 0.0
        for i in range(f.nterms):
            out[f.comp[i]] += f.coef[i] * ipow(y[0], f.ex[3 * i]) * ipow(y[1], f.ex[3 * i + 1]) * ipow(y[2], f.ex[3 * i + 2])
    if f.normalize:
        n = sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2])
        if n > 1e-8:
            out[0] /= n
            out[1] /= n
            out[2] /= n
    out[0] *= f.direction
    out[1] *= f.direction
    out[2] *= f.direction


cdef void dp_step(Field *f, double *y, double *k1, double h, double *ynew, double *k7, double *err) nogil:
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double k5[3]
    cdef double k6[3]
    cdef double tmp[3]
    cdef int i
    for i in range(3):
        tmp[i] = y[i] + h * A21 * k1[i]
    rhs(f, tmp, k2)
    for i in range(3):
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    rhs(f, tmp, k3)
    for i in range(3):
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    rhs(f, tmp, k4)
    for i in range(3):
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs(f, tmp, k5)
    for i in range(3):
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    rhs(f, tmp, k6)
    for i in range(3):
        ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    rhs(f, ynew, k7)
    for i in range(3):
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])


cdef inline double wrap1(double d, double p) nogil:
    if p > 0:
        return d - p * floor(d / p + 0.5)
    return d


cdef double section_g(double *y, double *sp, double *sn, double *per, double *dvec) nogil:
    cdef int i
    cdef double g = 0.0
    for i in range(3):
        dvec[i] = wrap1(y[i] - sp[i], per[i])
        g += dvec[i] * sn[i]
    return g


def trace(int kind, double[::1] params, long[:, ::1] pexp, double[::1] pcoef, long[::1] pcomp,
          double[::1] y0, double t_max, double rtol, double atol, double h0, double h_min,
          long max_steps, double direction, double[::1] periods, int bound_kind, double bound,
          double[:, ::1] stop_pts, double stop_radius, int normalize, double fixed_h,
          int sec_on, double[::1] sec_p, double[::1] sec_n, double sec_radius, double sec_tmin,
          long max_hits, callback=None, long max_store=200000):
    if kind not in (KIND_ABC, KIND_LUTZ, KIND_POLY):
        raise ValueError("compiled kernel supports abc, lutz and poly fields only")
    cdef Field f
    f.kind = kind
    f.p0 = params[0] if params.shape[0] > 0 else 0.0
    f.p1 = params[1] if params.shape[0] > 1 else 0.0
    f.p2 = params[2] if params.shape[0] > 2 else 0.0
    f.nterms = pcoef.shape[0]
    f.ex = &pexp[0, 0] if f.nterms > 0 else NULL
    f.coef = &pcoef[0] if f.nterms > 0 else NULL
    f.comp = &pcomp[0] if f.nterms > 0 else NULL
    f.normalize = normalize
    f.direction = direction

    cdef double y[3]
    cdef double k1[3]
    cdef double ynew[3]
    cdef double k7[3]
    cdef double err[3]
    cdef double ystar[3]
    cdef double kd[3]
    cdef double ed[3]
    cdef double dvec[3]
    cdef double per[3]
    cdef double sp[3]
    cdef double sn[3]
    cdef int i, j, status = 0, stop_index = -1, accept, it
    cdef long n_acc = 0, n_rej = 0, n_store = 1, n_hits = 0
    cdef double t = 0.0, h, s, sc, e, fac, g_prev = 0.0, g_new, dist
    cdef double lo, hi, glo, ghi, hs, gs
    cdef int n_stop = stop_pts.shape[0]
    cdef int near

    for i in range(3):
        y[i] = y0[i]
        per[i] = periods[i]
        sp[i] = sec_p[i]
        sn[i] = sec_n[i]

    ts_np = np.empty(min(max_store, max_steps + 1))
    ys_np = np.empty((min(max_store, max_steps + 1), 3))
    cdef double[::1] ts = ts_np
    cdef double[:, ::1] ys = ys_np
    hits_t = []
    hits_y = []
    min_np = np.full(n_stop, np.inf)
    cdef double[::1] min_d = min_np
    cdef long cap = ts.shape[0]

    h = fixed_h if fixed_h > 0 else h0
    rhs(&f, y, k1)
    ts[0] = 0.0
    for i in range(3):
        ys[0, i] = y[i]
    if sec_on:
        g_prev = section_g(y, sp, sn, per, dvec)
    for j in range(n_stop):
        dist = 0.0
        for i in range(3):
            dist += wrap1(y[i] - stop_pts[j, i], per[i]) ** 2
        min_d[j] = sqrt(dist)

    while t < t_max:
        if n_acc + n_rej >= max_steps:
            status = 2
            break
        if t + h > t_max:
            h = t_max - t
        dp_step(&f, y, k1, h, ynew, k7, err)
        if fixed_h > 0:
            accept = 1
            fac = 1.0
        else:
            s = 0.0
            for i in range(3):
                sc = atol + rtol * max(fabs(y[i]), fabs(ynew[i]))
                s += (err[i] / sc) * (err[i] / sc)
            e = sqrt(s / 3.0)
            accept = e <= 1.0
            if e == 0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * pow(e, -0.2)))
            if not (isfinite(ynew[0]) and isfinite(ynew[1]) and isfinite(ynew[2])):
                accept = 0
                fac = 0.2
        if not accept:
            n_rej += 1
            h *= fac
            if h < h_min:
                status = 1
                break
            continue
        n_acc += 1
        if sec_on:
            g_new = section_g(ynew, sp, sn, per, dvec)
            dist = 0.0
            for i in range(3):
                if per[i] > 0:
                    dist += dvec[i] * dvec[i]
            near = sqrt(dist) < sec_radius
            if g_prev < 0.0 and g_new >= 0.0 and near and t + h > sec_tmin:
                lo = 0.0
                hi = h
                glo = g_prev
                ghi = g_new
                for i in range(3):
                    ystar[i] = ynew[i]
                hs = h
                for it in range(60):
                    if ghi != glo:
                        hs = hi - ghi * (hi - lo) / (ghi - glo)
                    else:
                        hs = 0.5 * (lo + hi)
                    if not (lo < hs < hi):
                        hs = 0.5 * (lo + hi)
                    dp_step(&f, y, k1, hs, ystar, kd, ed)
                    gs = section_g(ystar, sp, sn, per, dvec)
                    if fabs(gs) < 1e-14 or hi - lo < 1e-15:
                        break
                    if gs < 0:
                        lo = hs
                        glo = gs
                    else:
                        hi = hs
                        ghi = gs
                if t + hs > sec_tmin:
                    hits_t.append(t + hs)
                    hits_y.append((ystar[0], ystar[1], ystar[2]))
                    n_hits += 1
            g_prev = g_new
        t += h
        for i in range(3):
            y[i] = ynew[i]
            k1[i] = k7[i]
        if n_store < cap:
            ts[n_store] = t
            for i in range(3):
                ys[n_store, i] = y[i]
            n_store += 1
        for j in range(n_stop):
            dist = 0.0
            for i in range(3):
                dist += wrap1(y[i] - stop_pts[j, i], per[i]) ** 2
            dist = sqrt(dist)
            if dist < min_d[j]:
                min_d[j] = dist
            if dist < stop_radius:
                stop_index = j
                break
        if stop_index >= 0:
            status = 3
            break
        if bound_kind == 1 and y[0] * y[0] + y[1] * y[1] + y[2] * y[2] > bound * bound:
            status = 4
            break
        if bound_kind == 2 and y[0] * y[0] + y[1] * y[1] > bound * bound:
            status = 4
            break
        if sec_on and max_hits > 0 and n_hits >= max_hits:
            status = 5
            break
        if fixed_h <= 0:
            h *= fac
            if h < h_min:
                status = 1
                break
    return {
        "t": ts_np[:n_store].copy(),
        "y": ys_np[:n_store].copy(),
        "status": status,
        "stop_index": stop_index,
        "hits_t": np.asarray(hits_t, dtype=float),
        "hits_y": np.asarray(hits_y, dtype=float).reshape(-1, 3),
        "n_accepted": n_acc,
        "n_rejected": n_rej,
        "min_dist": min_np,
    }

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled feature-extraction kernel; mirrors _kernel_py statement for
statement so outputs are bit-identical with the pure-Python fallback."""


cdef inline double _clamp(double x) nogil:
    if x < -1.0:
        return -1.0
    if x > 2.0:
        return 2.0
    return x


def extract_batch(double[:, ::1] d, double speed, double capacity,
                  double[::1] demand, double[::1] tw_open, double[::1] tw_close,
                  double[::1] service, int[::1] cluster_of,
                  int[::1] member_start, int[::1] members,
                  int[::1] cluster_size, double[::1] nearest_nonmember,
                  double[::1] remote, double rho, double tau,
                  double d_norm, double t_norm,
                  unsigned char[::1] served, int[::1] pair_v, int[::1] pair_c,
                  int[::1] veh_loc, double[::1] veh_clock, double[::1] veh_load,
                  int[:, ::1] veh_cluster_served, double[:, ::1] out):
    cdef Py_ssize_t npairs = pair_v.shape[0]
    cdef Py_ssize_t p, k
    cdef int vi, c, loc, cl_c, cl_loc, size_c, m, hops_count
    cdef double now, load, dist_lc, arrival, open_c, close_c, start_c, gap
    cdef double depart_c, f_d, f_bd, f_t, f_bt, f_ngb, f_nond
    cdef double f_cleft, f_dfar, f_dcls, f_dlong, all_far, all_cls, all_long
    cdef double f_served, unserved_demand, all_reach, start_m, arr2, start2
    cdef double arr3, start3, f_clsdem, f_hops, f_clstim, f_urgt, load_frac
    cdef double f_dfrac, f_remote

    with nogil:
        for p in range(npairs):
            vi = pair_v[p]
            c = pair_c[p]
            loc = veh_loc[vi]
            now = veh_clock[vi]
            load = veh_load[vi]

            dist_lc = d[loc, c]
            arrival = now + dist_lc / speed
            open_c = tw_open[c]
            close_c = tw_close[c]
            start_c = arrival if arrival > open_c else open_c
            gap = start_c - now
            depart_c = start_c + service[c]

            cl_c = cluster_of[c]
            cl_loc = cluster_of[loc]
            size_c = cluster_size[cl_c]

            f_d = _clamp(dist_lc / d_norm)
            f_bd = 1.0 if dist_lc < rho else 0.0
            f_t = _clamp(gap / t_norm)
            f_bt = 1.0 if gap < tau else 0.0
            f_ngb = 1.0 if (loc != 0 and cl_loc == cl_c) else 0.0
            f_nond = _clamp(nearest_nonmember[c] / d_norm) if f_ngb == 1.0 else 0.0

            f_cleft = 0.0
            f_dfar = 0.0
            f_dcls = 0.0
            f_dlong = 0.0
            if f_ngb == 0.0 and loc != 0:
                all_far = 1.0
                all_cls = 1.0
                all_long = 1.0
                for k in range(member_start[cl_loc], member_start[cl_loc + 1]):
                    m = members[k]
                    if served[m]:
                        continue
                    f_cleft = 1.0
                    if d[0, m] <= d[0, loc]:
                        all_far = 0.0
                    if d[loc, m] > rho:
                        all_cls = 0.0
                    if nearest_nonmember[m] <= d[loc, m]:
                        all_long = 0.0
                if f_cleft == 1.0:
                    f_dfar = all_far
                    f_dcls = all_cls
                    f_dlong = all_long

            f_served = _clamp(veh_cluster_served[vi, cl_c] / <double>size_c)

            unserved_demand = 0.0
            hops_count = 0
            all_reach = 1.0
            for k in range(member_start[cl_c], member_start[cl_c + 1]):
                m = members[k]
                if served[m] or m == c:
                    continue
                unserved_demand += demand[m]
                start_m = now + d[loc, m] / speed
                if start_m < tw_open[m]:
                    start_m = tw_open[m]
                if start_m <= tw_close[m]:
                    arr2 = start_m + service[m] + d[m, c] / speed
                    start2 = arr2 if arr2 > open_c else open_c
                    if start2 <= close_c:
                        hops_count += 1
                arr3 = depart_c + d[c, m] / speed
                start3 = arr3 if arr3 > tw_open[m] else tw_open[m]
                if start3 > tw_close[m]:
                    all_reach = 0.0
            unserved_demand += demand[c]

            f_clsdem = 1.0 if capacity - load >= unserved_demand else 0.0
            f_hops = _clamp(hops_count / <double>size_c)
            f_clstim = all_reach
            f_urgt = _clamp((close_c - arrival) / t_norm)

            load_frac = demand[c] / capacity
            if load_frac < 1e-6:
                load_frac = 1e-6
            f_dfrac = ((gap + service[c]) / t_norm) / load_frac
            f_remote = remote[c] / d_norm

            out[p, 0] = f_d
            out[p, 1] = f_bd
            out[p, 2] = f_t
            out[p, 3] = f_bt
            out[p, 4] = f_ngb
            out[p, 5] = f_nond
            out[p, 6] = f_cleft
            out[p, 7] = f_dfar
            out[p, 8] = f_dcls
            out[p, 9] = f_dlong
            out[p, 10] = f_served
            out[p, 11] = f_clsdem
            out[p, 12] = f_hops
            out[p, 13] = f_clstim
            out[p, 14] = f_urgt
            out[p, 15] = f_dfrac
            out[p, 16] = f_remote

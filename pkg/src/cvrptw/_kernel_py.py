"""Pure-Python reference implementation of the feature-extraction kernel.

The compiled extension (_speedups) mirrors this loop statement for statement;
both perform the same double-precision operations in the same order, so their
outputs are bit-identical. Keep the two in sync.
"""

from __future__ import annotations


def _clamp(x: float) -> float:
    if x < -1.0:
        return -1.0
    if x > 2.0:
        return 2.0
    return x


def extract_batch(d, speed, capacity, demand, tw_open, tw_close, service,
                  cluster_of, member_start, members, cluster_size,
                  nearest_nonmember, remote, rho, tau, d_norm, t_norm,
                  served, pair_v, pair_c, veh_loc, veh_clock, veh_load,
                  veh_cluster_served, out):
    npairs = len(pair_v)
    for p in range(npairs):
        vi = pair_v[p]
        c = pair_c[p]
        loc = int(veh_loc[vi])
        now = float(veh_clock[vi])
        load = float(veh_load[vi])

        dist_lc = float(d[loc, c])
        arrival = now + dist_lc / speed
        open_c = float(tw_open[c])
        close_c = float(tw_close[c])
        start_c = arrival if arrival > open_c else open_c
        gap = start_c - now
        depart_c = start_c + float(service[c])

        cl_c = int(cluster_of[c])
        cl_loc = int(cluster_of[loc])  # -1 at depot
        size_c = int(cluster_size[cl_c])

        f_d = _clamp(dist_lc / d_norm)
        f_bd = 1.0 if dist_lc < rho else 0.0
        f_t = _clamp(gap / t_norm)
        f_bt = 1.0 if gap < tau else 0.0
        f_ngb = 1.0 if (loc != 0 and cl_loc == cl_c) else 0.0
        f_nond = _clamp(float(nearest_nonmember[c]) / d_norm) if f_ngb == 1.0 else 0.0

        # Dropped customers: unserved members of the current location's cluster,
        # relevant only when moving out of that cluster.
        f_cleft = 0.0
        f_dfar = 0.0
        f_dcls = 0.0
        f_dlong = 0.0
        if f_ngb == 0.0 and loc != 0:
            all_far = 1.0
            all_cls = 1.0
            all_long = 1.0
            for k in range(int(member_start[cl_loc]), int(member_start[cl_loc + 1])):
                m = int(members[k])
                if served[m]:
                    continue
                f_cleft = 1.0
                if float(d[0, m]) <= float(d[0, loc]):
                    all_far = 0.0
                if float(d[loc, m]) > rho:
                    all_cls = 0.0
                if float(nearest_nonmember[m]) <= float(d[loc, m]):
                    all_long = 0.0
            if f_cleft == 1.0:
                f_dfar = all_far
                f_dcls = all_cls
                f_dlong = all_long

        f_served = _clamp(float(veh_cluster_served[vi, cl_c]) / size_c)

        unserved_demand = 0.0
        hops_count = 0
        all_reach = 1.0
        for k in range(int(member_start[cl_c]), int(member_start[cl_c + 1])):
            m = int(members[k])
            if served[m] or m == c:
                continue
            unserved_demand += float(demand[m])
            # m individually servable before c, still meeting c's window
            start_m = now + float(d[loc, m]) / speed
            if start_m < float(tw_open[m]):
                start_m = float(tw_open[m])
            if start_m <= float(tw_close[m]):
                arr2 = start_m + float(service[m]) + float(d[m, c]) / speed
                start2 = arr2 if arr2 > open_c else open_c
                if start2 <= close_c:
                    hops_count += 1
            # m individually reachable within its window after serving c
            arr3 = depart_c + float(d[c, m]) / speed
            start3 = arr3 if arr3 > float(tw_open[m]) else float(tw_open[m])
            if start3 > float(tw_close[m]):
                all_reach = 0.0
        unserved_demand += float(demand[c])

        f_clsdem = 1.0 if capacity - load >= unserved_demand else 0.0
        f_hops = _clamp(hops_count / size_c)
        f_clstim = all_reach
        f_urgt = _clamp((close_c - arrival) / t_norm)

        load_frac = float(demand[c]) / capacity
        if load_frac < 1e-6:
            load_frac = 1e-6
        f_dfrac = ((gap + float(service[c])) / t_norm) / load_frac
        f_remote = float(remote[c]) / d_norm

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

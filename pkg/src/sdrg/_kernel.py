"""Compiled decimation loop over an array-backed chain.

Site ids 0..n-1 are the original sites; trio merges allocate fresh ids from n
upwards. The strongest bond is tracked with a binary max-heap of
(strength, left position, left id, version) entries; an entry is stale once
the version stored for its left site has moved on.

Constituent sets are kept as singly linked lists over original indices.
Merging concatenates the children's lists, so any id's members can still be
read back afterwards by walking ``msize[id]`` steps from ``mhead[id]``.
"""

import numba as nb
import numpy as np

SINGLET = 0
TRIO = 1

FLAG_EDGE = 1
FLAG_ABOVE_OMEGA = 2

ST_DONE = 0
ST_NEED_TRIO = 1
ST_PAUSED = 2
ST_NONMONOTONE = 3
ST_TRIO_FAIL = 4

# meta slots
M_HSIZE, M_ACTIVE, M_NEXT_ID, M_EVENTS, M_HEAD, M_KEY, M_OMEGA_UP = range(7)
N_META = 7

RATIO_QUANTUM = 1e-6


@nb.njit(cache=True, inline="always")
def _above(hj, hp, hi, hv, x, y):
    """True if heap entry x outranks y."""
    if hj[x] != hj[y]:
        return hj[x] > hj[y]
    if hp[x] != hp[y]:
        return hp[x] < hp[y]
    if hi[x] != hi[y]:
        return hi[x] < hi[y]
    return hv[x] > hv[y]


@nb.njit(cache=True)
def _swap(hj, hp, hi, hv, x, y):
    hj[x], hj[y] = hj[y], hj[x]
    hp[x], hp[y] = hp[y], hp[x]
    hi[x], hi[y] = hi[y], hi[x]
    hv[x], hv[y] = hv[y], hv[x]


@nb.njit(cache=True)
def heap_push(hj, hp, hi, hv, meta, strength, position, ident, version):
    k = meta[M_HSIZE]
    hj[k] = strength
    hp[k] = position
    hi[k] = ident
    hv[k] = version
    meta[M_HSIZE] = k + 1
    while k > 0:
        parent = (k - 1) >> 1
        if _above(hj, hp, hi, hv, k, parent):
            _swap(hj, hp, hi, hv, k, parent)
            k = parent
        else:
            break


@nb.njit(cache=True)
def heap_pop(hj, hp, hi, hv, meta):
    size = meta[M_HSIZE] - 1
    meta[M_HSIZE] = size
    if size == 0:
        return
    _swap(hj, hp, hi, hv, 0, size)
    k = 0
    while True:
        lc = 2 * k + 1
        if lc >= size:
            break
        best = lc
        rc = lc + 1
        if rc < size and _above(hj, hp, hi, hv, rc, lc):
            best = rc
        if _above(hj, hp, hi, hv, best, k):
            _swap(hj, hp, hi, hv, best, k)
            k = best
        else:
            break


@nb.njit(cache=True)
def peek_strongest(hj, hp, hi, hv, meta, right, ver, alive):
    """Discard stale heap entries; return the left id of the strongest live bond or -1."""
    while meta[M_HSIZE] > 0:
        i = hi[0]
        if alive[i] and right[i] >= 0 and ver[i] == hv[0]:
            return i
        heap_pop(hj, hp, hi, hv, meta)
    return -1


@nb.njit(cache=True)
def _median_member(mhead, mnext, msize, ident):
    m = msize[ident]
    buf = np.empty(m, np.int64)
    x = mhead[ident]
    for k in range(m):
        buf[k] = x
        x = mnext[x]
    buf.sort()
    return buf[m // 2]


@nb.njit(cache=True)
def trio_coefficients(ratio, half_s, a_hw, b_hw, z1, z3, a_up, b_up, a_lo, b_lo):
    """Projection coefficients of the trio ratio*S1.S2 + S2.S3 from its Sz blocks.

    The ground multiplet has spin S iff the Sz=S block reaches the global
    minimum (found in the lowest-|Sz| block), non-degenerately, while the
    Sz=S+1 block stays strictly above it. Then <S1z>/S and <S3z>/S in the
    highest-weight state are the Wigner-Eckart coefficients.
    """
    w, v = np.linalg.eigh(ratio * a_hw + b_hw)
    e_up = np.linalg.eigvalsh(ratio * a_up + b_up)[0]
    e_lo = np.linalg.eigvalsh(ratio * a_lo + b_lo)[0]
    tol = 1e-9 * (1.0 + abs(w[0]))
    ok = abs(w[0] - e_lo) <= tol and e_up > w[0] + tol
    if w.size > 1 and w[1] - w[0] <= tol:
        ok = False
    g = v[:, 0]
    c1 = 0.0
    c3 = 0.0
    for k in range(g.size):
        c1 += g[k] * g[k] * z1[k]
        c3 += g[k] * g[k] * z3[k]
    return ok, c1 / half_s, c3 / half_s


@nb.njit(cache=True)
def _set_bond(hj, hp, hi, hv, meta, bond, ver, pos, i, strength):
    bond[i] = strength
    ver[i] += 1
    heap_push(hj, hp, hi, hv, meta, strength, pos[i], i, ver[i])


@nb.njit(cache=True)
def run(left, right, bond, ver, pos, alive, mhead, mtail, mnext, msize,
        hj, hp, hi, hv, meta,
        ev_kind, ev_a, ev_b, ev_c, ev_new, ev_omega, ev_coupling, ev_flag,
        factor, threshold, coef_left, coef_right, max_events,
        half_s, a_hw, b_hw, z1, z3, a_up, b_up, a_lo, b_lo):
    """Decimate until the chain is empty, ``max_events`` events were applied,
    or a step fails.

    ``coef_left``/``coef_right`` memoize, per quantized j1/omega ratio, the
    projection coefficients of the j1-side and far-side trio edge spins;
    misses are solved in place from the Sz-block operators.
    """
    done = 0
    while done < max_events:
        l = peek_strongest(hj, hp, hi, hv, meta, right, ver, alive)
        if l < 0:
            return ST_DONE
        r = right[l]
        omega = bond[l]
        ll = left[l]
        rr = right[r]
        jl = bond[ll] if ll >= 0 else 0.0
        jr = bond[r] if rr >= 0 else 0.0
        j1 = jl if jl >= jr else jr
        e = meta[M_EVENTS]
        if e > 0 and omega > ev_omega[e - 1]:
            meta[M_OMEGA_UP] += 1

        if j1 > 0.0 and j1 >= threshold * omega:
            key = np.int64(np.floor(j1 / omega / RATIO_QUANTUM + 0.5))
            if key not in coef_left:
                ok, c1, c3 = trio_coefficients(key * RATIO_QUANTUM, half_s, a_hw, b_hw, z1, z3,
                                               a_up, b_up, a_lo, b_lo)
                if not ok:
                    meta[M_KEY] = key
                    return ST_TRIO_FAIL
                coef_left[key] = c1
                coef_right[key] = c3
            c_near = coef_left[key]
            c_far = coef_right[key]
            heap_pop(hj, hp, hi, hv, meta)
            # chain order a-b-c; the j1 bond is a-b on the left side, b-c on the right
            if jl >= jr:
                a, b, c = ll, l, r
            else:
                a, b, c = l, r, rr
            outer_l = left[a]
            outer_r = right[c]
            new = meta[M_NEXT_ID]
            meta[M_NEXT_ID] = new + 1
            alive[a] = False
            alive[b] = False
            alive[c] = False
            alive[new] = True
            mhead[new] = mhead[a]
            mnext[mtail[a]] = mhead[b]
            mnext[mtail[b]] = mhead[c]
            mtail[new] = mtail[c]
            msize[new] = msize[a] + msize[b] + msize[c]
            pos[new] = _median_member(mhead, mnext, msize, new)
            left[new] = outer_l
            right[new] = outer_r
            flag = 0
            if outer_l < 0 or outer_r < 0:
                flag |= FLAG_EDGE
            if jl >= jr:
                cl, cr = c_near, c_far
            else:
                cl, cr = c_far, c_near
            if outer_l >= 0:
                nj = cl * bond[outer_l]
                if nj > omega:
                    flag |= FLAG_ABOVE_OMEGA
                right[outer_l] = new
                _set_bond(hj, hp, hi, hv, meta, bond, ver, pos, outer_l, nj)
            else:
                meta[M_HEAD] = new
            if outer_r >= 0:
                nj = cr * bond[c]
                if nj > omega:
                    flag |= FLAG_ABOVE_OMEGA
                left[outer_r] = new
                _set_bond(hj, hp, hi, hv, meta, bond, ver, pos, new, nj)
            ev_kind[e] = TRIO
            ev_a[e] = a
            ev_b[e] = b
            ev_c[e] = c
            ev_new[e] = new
            ev_coupling[e] = j1
        else:
            nj = 0.0
            if ll >= 0 and rr >= 0:
                nj = factor * jl * jr / omega
                if not nj < omega:
                    meta[M_KEY] = e
                    return ST_NONMONOTONE
            heap_pop(hj, hp, hi, hv, meta)
            alive[l] = False
            alive[r] = False
            flag = 0
            if ll >= 0 and rr >= 0:
                right[ll] = rr
                left[rr] = ll
                _set_bond(hj, hp, hi, hv, meta, bond, ver, pos, ll, nj)
            elif ll >= 0:
                right[ll] = -1
                ver[ll] += 1
            elif rr >= 0:
                left[rr] = -1
                meta[M_HEAD] = rr
            else:
                meta[M_HEAD] = -1
            ev_kind[e] = SINGLET
            ev_a[e] = l
            ev_b[e] = r
            ev_c[e] = -1
            ev_new[e] = -1
            ev_coupling[e] = nj
        ev_omega[e] = omega
        ev_flag[e] = flag
        meta[M_EVENTS] = e + 1
        meta[M_ACTIVE] -= 2
        done += 1
    return ST_PAUSED


@nb.njit(cache=True)
def partner_members(ev_kind, ev_a, ev_b, n_events, mhead, mnext, msize, n_sites):
    """Flatten the constituent sets of every singlet partner.

    Returns (flat, offsets, sizes) with partners ordered (A0, B0, A1, B1, ...)
    over singlet events; flat holds 0-based original indices.
    """
    n_singlets = 0
    for e in range(n_events):
        if ev_kind[e] == SINGLET:
            n_singlets += 1
    flat = np.empty(n_sites, np.int64)
    offsets = np.empty(2 * n_singlets, np.int64)
    sizes = np.empty(2 * n_singlets, np.int64)
    k = 0
    p = 0
    for e in range(n_events):
        if ev_kind[e] != SINGLET:
            continue
        for ident in (ev_a[e], ev_b[e]):
            offsets[p] = k
            m = msize[ident]
            sizes[p] = m
            x = mhead[ident]
            for _ in range(m):
                flat[k] = x
                k += 1
                x = mnext[x]
            p += 1
    return flat[:k], offsets, sizes

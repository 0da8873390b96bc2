"""Slow, obviously-correct decimation used as an oracle for the compiled loop.

Every step rescans the whole chain for its strongest bond, so histories of
small chains can be compared event by event with the heap-driven engine.
Trio coefficients come from the dense full-space projection rather than the
Sz-block solver the compiled loop uses.
"""

from __future__ import annotations

import math

from sdrg.engine import SingletEvent, TrioEvent
from sdrg.exact import quantize_ratio, solve_trio
from sdrg.spin_model import ModelKind, SpinMagnitude, renormalization_factor, trio_threshold

QUANTUM = 1e-6


def strongest(bonds):
    """Index of the largest bond, first one in chain order on ties."""
    best = 0
    for k in range(1, len(bonds)):
        if bonds[k] > bonds[best]:
            best = k
    return best


def reference_decimate(couplings, model: ModelKind, spin: SpinMagnitude):
    sites = [(i + 1,) for i in range(len(couplings) + 1)]
    bonds = [float(j) for j in couplings]
    next_id = len(sites)
    factor = renormalization_factor(model, spin)
    threshold = trio_threshold(model, spin)
    events = []
    while bonds:
        k = strongest(bonds)
        omega = bonds[k]
        jl = bonds[k - 1] if k > 0 else 0.0
        jr = bonds[k + 1] if k + 1 < len(bonds) else 0.0
        j1 = max(jl, jr)
        if j1 > 0.0 and j1 >= threshold * omega:
            sol = solve_trio(spin, quantize_ratio(j1 / omega) * QUANTUM)
            a = k - 1 if jl >= jr else k
            if jl >= jr:
                cl, cr = sol.c_left, sol.c_right
            else:
                cl, cr = sol.c_right, sol.c_left
            members = tuple(sites[a:a + 3])
            merged = tuple(sorted(x for m in members for x in m))
            edge = a == 0 or a + 3 == len(sites)
            new_bonds = bonds[:max(a - 1, 0)]
            if a > 0:
                new_bonds.append(cl * bonds[a - 1])
            if a + 3 < len(sites):
                new_bonds.append(cr * bonds[a + 2])
            new_bonds += bonds[a + 3:]
            events.append(TrioEvent(members, next_id, j1, omega, edge))
            sites[a:a + 3] = [merged]
            next_id += 1
            bonds = new_bonds
        else:
            nj = factor * jl * jr / omega if (k > 0 and k + 1 < len(bonds)) else 0.0
            events.append(SingletEvent(sites[k], sites[k + 1], spin, omega, nj))
            if k > 0 and k + 1 < len(bonds):
                bonds[k - 1:k + 2] = [nj]
            elif k > 0:
                bonds[k - 1:] = []
            else:
                bonds[:k + 2] = []
            del sites[k:k + 2]
    assert not sites, "sites left without bonds"
    return events


def events_match(got, want, rel=1e-12) -> bool:
    if len(got) != len(want):
        return False
    for g, w in zip(got, want):
        if type(g) is not type(w):
            return False
        if isinstance(g, SingletEvent):
            if (g.a, g.b) != (w.a, w.b) or not math.isclose(g.omega, w.omega, rel_tol=rel, abs_tol=0.0):
                return False
            if not math.isclose(g.new_coupling, w.new_coupling, rel_tol=rel, abs_tol=0.0):
                return False
        else:
            if g.members != w.members or g.edge != w.edge or g.new_site != w.new_site:
                return False
            if not (math.isclose(g.omega, w.omega, rel_tol=rel) and math.isclose(g.j1, w.j1, rel_tol=rel)):
                return False
    return True

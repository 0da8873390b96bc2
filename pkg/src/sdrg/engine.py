"""Strongest-bond decimation of a random spin chain, with trio merges for S >= 1.

The chain state lives in flat numpy arrays so that the compiled loop in
``_kernel`` can drive it; :class:`ActiveChain` is the Python face of that
state. Original sites are reported with 1-based indices throughout.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np
from numba import types
from numba.typed import Dict

from . import _kernel as K
from .exact import SolverError, solve_trio, trio_sector_operators
from .spin_model import (
    CouplingDistribution,
    ModelKind,
    SpinMagnitude,
    renormalization_factor,
    trio_threshold,
)

log = logging.getLogger(__name__)


class DecimationError(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")


@dataclass(frozen=True)
class BondRef:
    left: int
    right: int
    strength: float
    version: int


@dataclass(frozen=True)
class ActiveSite:
    id: int
    spin: SpinMagnitude
    constituents: tuple[int, ...]
    position: int


@dataclass(frozen=True)
class SingletEvent:
    a: tuple[int, ...]
    b: tuple[int, ...]
    spin: SpinMagnitude
    omega: float
    new_coupling: float = 0.0  # 0 when the pair sat at a chain end


@dataclass(frozen=True)
class TrioEvent:
    members: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]
    new_site: int
    j1: float
    omega: float
    edge: bool = False


Event = Union[SingletEvent, TrioEvent]

_coef_tables: dict[int, tuple] = {}


def _coefficient_tables(spin: SpinMagnitude):
    """Per-process typed dicts mirroring the memoized trio solutions."""
    if spin.twice_s not in _coef_tables:
        _coef_tables[spin.twice_s] = (
            Dict.empty(key_type=types.int64, value_type=types.float64),
            Dict.empty(key_type=types.int64, value_type=types.float64),
        )
    return _coef_tables[spin.twice_s]


class ActiveChain:
    """Open chain of (effective) spins with a lazily invalidated bond heap."""

    def __init__(self, couplings, model: ModelKind, spin: SpinMagnitude):
        couplings = np.asarray(couplings, dtype=float)
        n = couplings.size + 1
        if n < 2 or n % 2:
            raise ValueError(f"number of sites must be even and >= 2, got {n}")
        if not np.all(couplings > 0.0):
            raise ValueError("all couplings must be positive")
        model.check_spin(spin)
        self.model = model
        self.spin = spin
        self.n_sites = n
        self.factor = renormalization_factor(model, spin)
        self.threshold = trio_threshold(model, spin)

        cap = n + n // 2 + 1
        idx = np.arange(n, dtype=np.int64)
        self.left = np.full(cap, -1, np.int64)
        self.right = np.full(cap, -1, np.int64)
        self.left[1:n] = idx[:-1]
        self.right[: n - 1] = idx[1:]
        self.bond = np.zeros(cap)
        self.bond[: n - 1] = couplings
        self.ver = np.zeros(cap, np.int64)
        self.pos = np.zeros(cap, np.int64)
        self.pos[:n] = idx
        self.alive = np.zeros(cap, np.bool_)
        self.alive[:n] = True
        self.mhead = np.zeros(cap, np.int64)
        self.mhead[:n] = idx
        self.mtail = self.mhead.copy()
        self.mnext = np.full(n, -1, np.int64)
        self.msize = np.zeros(cap, np.int64)
        self.msize[:n] = 1

        hcap = 2 * n + 2
        self.hj = np.zeros(hcap)
        self.hp = np.zeros(hcap, np.int64)
        self.hi = np.zeros(hcap, np.int64)
        self.hv = np.zeros(hcap, np.int64)
        # a fully sorted array already satisfies the heap property
        order = np.lexsort((idx[:-1], -couplings))
        self.hj[: n - 1] = couplings[order]
        self.hp[: n - 1] = order
        self.hi[: n - 1] = order

        self.meta = np.zeros(K.N_META, np.int64)
        self.meta[K.M_HSIZE] = n - 1
        self.meta[K.M_ACTIVE] = n
        self.meta[K.M_NEXT_ID] = n
        self.meta[K.M_HEAD] = 0

        n_ev = n // 2
        self.ev_kind = np.zeros(n_ev, np.int8)
        self.ev_a = np.zeros(n_ev, np.int64)
        self.ev_b = np.zeros(n_ev, np.int64)
        self.ev_c = np.zeros(n_ev, np.int64)
        self.ev_new = np.zeros(n_ev, np.int64)
        self.ev_omega = np.zeros(n_ev)
        self.ev_coupling = np.zeros(n_ev)
        self.ev_flag = np.zeros(n_ev, np.int8)

    # -- inspection ---------------------------------------------------------

    @property
    def n_active(self) -> int:
        return int(self.meta[K.M_ACTIVE])

    @property
    def n_events(self) -> int:
        return int(self.meta[K.M_EVENTS])

    def site_ids(self) -> list[int]:
        out = []
        i = int(self.meta[K.M_HEAD]) if self.n_active else -1
        while i >= 0:
            out.append(i)
            i = int(self.right[i])
        return out

    def members(self, ident: int) -> tuple[int, ...]:
        """Sorted 1-based original indices merged into site ``ident``."""
        out = []
        x = int(self.mhead[ident])
        for _ in range(int(self.msize[ident])):
            out.append(x + 1)
            x = int(self.mnext[x])
        return tuple(sorted(out))

    @property
    def sites(self) -> list[ActiveSite]:
        return [ActiveSite(i, self.spin, self.members(i), int(self.pos[i]) + 1) for i in self.site_ids()]

    @property
    def bonds(self) -> list[BondRef]:
        ids = self.site_ids()
        return [BondRef(a, b, float(self.bond[a]), int(self.ver[a])) for a, b in zip(ids, ids[1:])]

    # -- decimation ---------------------------------------------------------

    def find_strongest_bond(self) -> BondRef:
        i = K.peek_strongest(self.hj, self.hp, self.hi, self.hv, self.meta, self.right, self.ver, self.alive)
        if i < 0:
            raise DecimationError("chain has no bonds left")
        return BondRef(int(i), int(self.right[i]), float(self.bond[i]), int(self.ver[i]))

    def _advance(self, max_events: int) -> int:
        """Apply up to ``max_events`` events; return the count applied."""
        start = self.n_events
        cl, cr = _coefficient_tables(self.spin)
        status = K.run(
            self.left, self.right, self.bond, self.ver, self.pos, self.alive,
            self.mhead, self.mtail, self.mnext, self.msize,
            self.hj, self.hp, self.hi, self.hv, self.meta,
            self.ev_kind, self.ev_a, self.ev_b, self.ev_c, self.ev_new,
            self.ev_omega, self.ev_coupling, self.ev_flag,
            self.factor, self.threshold, cl, cr, max_events,
            self.spin.value, *trio_sector_operators(self.spin.twice_s),
        )
        if status == K.ST_TRIO_FAIL:
            ratio = int(self.meta[K.M_KEY]) * K.RATIO_QUANTUM
            try:
                # the dense solver reports the offending multiplet spin
                solve_trio(self.spin, ratio)
            except SolverError as exc:
                raise DecimationError(str(exc), step=self.n_events) from exc
            raise DecimationError(f"trio block solver failed at j1/omega={ratio!r}", step=self.n_events)
        if status == K.ST_NONMONOTONE:
            raise DecimationError("renormalized coupling not below the decimated bond", step=self.n_events)
        return self.n_events - start

    def step(self) -> Event:
        if self.n_active < 2:
            raise DecimationError("fewer than two active sites")
        self._advance(1)
        return self._event(self.n_events - 1)

    def run_to_completion(self) -> "DecimationHistory":
        self._advance(self.n_sites)
        if self.n_active:
            raise DecimationError(f"{self.n_active} sites left after decimation", step=self.n_events)
        hist = self.history()
        if hist.omega_increases:
            log.warning("decimated energy scale rose %d times (%d trio events)",
                        hist.omega_increases, hist.n_trios)
        if hist.above_omega_trios:
            log.warning("%d trio events produced couplings above the decimated scale", hist.above_omega_trios)
        if hist.edge_trios:
            log.debug("%d trio events at a chain end", hist.edge_trios)
        return hist

    def _event(self, e: int) -> Event:
        if self.ev_kind[e] == K.SINGLET:
            return SingletEvent(self.members(self.ev_a[e]), self.members(self.ev_b[e]), self.spin,
                                float(self.ev_omega[e]), float(self.ev_coupling[e]))
        return TrioEvent(
            (self.members(self.ev_a[e]), self.members(self.ev_b[e]), self.members(self.ev_c[e])),
            int(self.ev_new[e]), float(self.ev_coupling[e]), float(self.ev_omega[e]),
            bool(self.ev_flag[e] & K.FLAG_EDGE),
        )

    def history(self) -> "DecimationHistory":
        m = self.n_events
        flat, offsets, sizes = K.partner_members(self.ev_kind, self.ev_a, self.ev_b, m,
                                                 self.mhead, self.mnext, self.msize, self.n_sites)
        return DecimationHistory(
            n_sites=self.n_sites, model=self.model, spin=self.spin,
            kinds=self.ev_kind[:m].copy(), omegas=self.ev_omega[:m].copy(), flags=self.ev_flag[:m].copy(),
            partner_flat=flat + 1, partner_offsets=offsets, partner_sizes=sizes,
            omega_increases=int(self.meta[K.M_OMEGA_UP]),
            event_source=lambda: [self._event(e) for e in range(m)],
        )


def init_chain(n_sites: int, model: ModelKind, spin: SpinMagnitude, dist: CouplingDistribution,
               rng: np.random.Generator | None = None) -> ActiveChain:
    if n_sites < 2 or n_sites % 2:
        raise ValueError(f"number of sites must be even and >= 2, got {n_sites}")
    return ActiveChain(dist.sample(rng, n_sites - 1), model, spin)


def decimate(couplings, model: ModelKind, spin: SpinMagnitude) -> "DecimationHistory":
    return ActiveChain(couplings, model, spin).run_to_completion()


class DecimationHistory:
    """Completed decimation record.

    Singlet partners are stored flattened: partner p owns original sites
    ``partner_flat[offsets[p]:offsets[p] + sizes[p]]`` and partners come in
    pairs (A, B) per singlet event, in decimation order.
    """

    def __init__(self, n_sites, model, spin, kinds, omegas, flags, partner_flat, partner_offsets,
                 partner_sizes, omega_increases=0, events=None, event_source=None):
        self.n_sites = int(n_sites)
        self.model = model
        self.spin = spin
        self.kinds = kinds
        self.omegas = omegas
        self.flags = flags
        self.partner_flat = partner_flat
        self.partner_offsets = partner_offsets
        self.partner_sizes = partner_sizes
        self.omega_increases = omega_increases
        self._events = events
        self._event_source = event_source

    @classmethod
    def from_events(cls, n_sites: int, model: ModelKind, spin: SpinMagnitude,
                    events: Iterable[Event]) -> "DecimationHistory":
        events = list(events)
        kinds = np.array([K.SINGLET if isinstance(e, SingletEvent) else K.TRIO for e in events], np.int8)
        omegas = np.array([e.omega for e in events], float)
        flags = np.array([K.FLAG_EDGE if isinstance(e, TrioEvent) and e.edge else 0 for e in events], np.int8)
        parts = [p for e in events if isinstance(e, SingletEvent) for p in (e.a, e.b)]
        sizes = np.array([len(p) for p in parts], np.int64)
        offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64) if parts else sizes
        flat = np.array([i for p in parts for i in p], np.int64)
        ups = int(np.sum(omegas[1:] > omegas[:-1])) if omegas.size else 0
        return cls(n_sites, model, spin, kinds, omegas, flags, flat, offsets, sizes, ups, events=events)

    @property
    def events(self) -> list[Event]:
        if self._events is None:
            self._events = self._event_source()
        return self._events

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def n_trios(self) -> int:
        return int(np.count_nonzero(self.kinds == K.TRIO))

    @property
    def n_singlets(self) -> int:
        return int(np.count_nonzero(self.kinds == K.SINGLET))

    @property
    def edge_trios(self) -> int:
        return int(np.count_nonzero((self.kinds == K.TRIO) & (self.flags & K.FLAG_EDGE != 0)))

    @property
    def above_omega_trios(self) -> int:
        return int(np.count_nonzero(self.flags & K.FLAG_ABOVE_OMEGA))

    @property
    def singlet_omegas(self) -> np.ndarray:
        return self.omegas[self.kinds == K.SINGLET]

    def pairs(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        """Constituent sets of each singlet's two partners."""
        f, o, s = self.partner_flat, self.partner_offsets, self.partner_sizes
        parts = [tuple(sorted(int(x) for x in f[o[p]:o[p] + s[p]])) for p in range(len(s))]
        return list(zip(parts[0::2], parts[1::2]))

    # -- JSON lines ---------------------------------------------------------

    def write_jsonl(self, fh) -> None:
        header = {"type": "chain", "n_sites": self.n_sites, "model": self.model.value,
                  "twice_s": self.spin.twice_s}
        fh.write(json.dumps(header) + "\n")
        for ev in self.events:
            if isinstance(ev, SingletEvent):
                rec = {"type": "singlet", "a": list(ev.a), "b": list(ev.b), "omega": ev.omega,
                       "new_coupling": ev.new_coupling}
            else:
                rec = {"type": "trio", "members": [list(m) for m in ev.members], "new_site": ev.new_site,
                       "j1": ev.j1, "omega": ev.omega, "edge": ev.edge}
            fh.write(json.dumps(rec) + "\n")

    @classmethod
    def read_jsonl(cls, fh) -> "DecimationHistory":
        lines = (json.loads(line) for line in fh if line.strip())
        header = next(lines)
        if header.get("type") != "chain":
            raise ValueError("history log must start with a chain header")
        spin = SpinMagnitude(header["twice_s"])
        events: list[Event] = []
        for rec in lines:
            if rec["type"] == "singlet":
                events.append(SingletEvent(tuple(rec["a"]), tuple(rec["b"]), spin, rec["omega"],
                                           rec["new_coupling"]))
            elif rec["type"] == "trio":
                events.append(TrioEvent(tuple(tuple(m) for m in rec["members"]), rec["new_site"],
                                        rec["j1"], rec["omega"], rec["edge"]))
            else:
                raise ValueError(f"unknown event type {rec['type']!r}")
        return cls.from_events(header["n_sites"], ModelKind(header["model"]), spin, events)

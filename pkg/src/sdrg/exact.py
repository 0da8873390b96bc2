"""Dense exact diagonalization: spin operators, chain Hamiltonians, trio projection, entropies.

Everything here works on the full product basis, so it is only meant for
small systems (trios and oracle chains of a dozen spin-1/2 sites).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .spin_model import ModelKind, SpinMagnitude, trio_threshold

DIMENSION_CAP = 20_000
RATIO_QUANTUM = 1e-6
PROJECTION_TOL = 1e-8


class SolverError(RuntimeError):
    pass


class TrioSpinError(SolverError):
    """The trio ground multiplet does not carry total spin S."""

    def __init__(self, spin: SpinMagnitude, twice_s_eff: int, ratio: float):
        self.spin = spin
        self.twice_s_eff = twice_s_eff
        self.ratio = ratio
        super().__init__(
            f"trio ground multiplet has S_eff={twice_s_eff}/2, expected S={spin} (j1/omega={ratio!r})"
        )


@functools.lru_cache(maxsize=None)
def _ladder(twice_s: int):
    s = twice_s / 2
    m = s - np.arange(twice_s + 1)  # basis ordered m = S, S-1, ..., -S
    sp = np.zeros((twice_s + 1, twice_s + 1))
    for k in range(1, twice_s + 1):
        sp[k - 1, k] = math.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sz = np.diag(m)
    return sp, sz


def spin_matrices(spin: SpinMagnitude):
    """Return (Sx, Sy, Sz) in the basis m = S, S-1, ..., -S."""
    sp, sz = _ladder(spin.twice_s)
    sx = (sp + sp.T) / 2
    sy = (sp - sp.T) / 2j
    return sx, sy, sz.copy()


def site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Embed a single-site operator at ``site`` (0-based) of an n-site chain."""
    d = op.shape[0]
    left = np.eye(d ** site)
    right = np.eye(d ** (n_sites - site - 1))
    return np.kron(np.kron(left, op), right)


def _check_dim(spin: SpinMagnitude, n_sites: int, cap: int) -> int:
    dim = spin.dim ** n_sites
    if dim > cap:
        raise SolverError(f"Hilbert space dimension {dim} exceeds cap {cap}")
    return dim


@functools.lru_cache(maxsize=None)
def _pair_dot(twice_s: int) -> np.ndarray:
    """S_1 . S_2 on two spins, built from Sz and the ladder operators."""
    sp, sz = _ladder(twice_s)
    return np.kron(sz, sz) + 0.5 * (np.kron(sp, sp.T) + np.kron(sp.T, sp))


def _bond_dot(spin: SpinMagnitude, i: int, n_sites: int, power: int = 1) -> np.ndarray:
    """(S_i . S_{i+1})**power embedded in an n-site chain."""
    h2 = _pair_dot(spin.twice_s)
    if power == 2:
        h2 = h2 @ h2
    d = spin.dim
    return np.kron(np.kron(np.eye(d ** i), h2), np.eye(d ** (n_sites - i - 2)))


def build_hamiltonian(model: ModelKind, spin: SpinMagnitude, couplings, cap: int = DIMENSION_CAP) -> np.ndarray:
    """Open-chain Hamiltonian sum_i J_i h(S_i, S_{i+1}) with h = S.S or (S.S)**2."""
    couplings = [float(c) for c in couplings]
    model.check_spin(spin)
    n = len(couplings) + 1
    dim = _check_dim(spin, n, cap)
    power = 2 if model is ModelKind.BIQUADRATIC else 1
    h = np.zeros((dim, dim))
    for i, j in enumerate(couplings):
        h += j * _bond_dot(spin, i, n, power)
    return h


def total_sz(spin: SpinMagnitude, n_sites: int) -> np.ndarray:
    _, sz = _ladder(spin.twice_s)
    return sum(site_operator(sz, i, n_sites) for i in range(n_sites))


@dataclass(frozen=True)
class GroundSpace:
    energy: float
    basis: np.ndarray  # columns are orthonormal ground states

    @property
    def degeneracy(self) -> int:
        return self.basis.shape[1]


def ground_space(h: np.ndarray, degeneracy_tol: float | None = None) -> GroundSpace:
    """Lowest eigenvalue of a Hermitian matrix and every eigenvector within tolerance of it."""
    try:
        evals, evecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigensolver failed: {exc}") from exc
    if degeneracy_tol is None:
        spread = evals[-1] - evals[0]
        degeneracy_tol = 1e-9 * max(spread, 1.0)
    deg = int(np.searchsorted(evals, evals[0] + degeneracy_tol, side="right"))
    return GroundSpace(energy=float(evals[0]), basis=evecs[:, :deg])


@dataclass(frozen=True)
class TrioSolution:
    twice_s_eff: int
    c_left: float
    c_right: float
    residual: float

    @property
    def s_eff(self) -> SpinMagnitude:
        return SpinMagnitude(self.twice_s_eff)


@functools.lru_cache(maxsize=None)
def _trio_operators(twice_s: int):
    spin = SpinMagnitude(twice_s)
    sx, sy, sz = spin_matrices(spin)
    ops = [[site_operator(o, k, 3) for o in (sx, sy, sz)] for k in range(3)]
    return _bond_dot(spin, 0, 3), _bond_dot(spin, 1, 3), ops


def solve_trio(spin: SpinMagnitude, ratio: float) -> TrioSolution:
    """Diagonalize H = ratio*S1.S2 + S2.S3 and project the edge spins onto the ground multiplet.

    ``c_left`` is the coefficient for site 1 (the site attached through the
    weaker bond j1), ``c_right`` for site 3, so that P S1 P = c_left S_eff and
    P S3 P = c_right S_eff within the ground multiplet.
    """
    if not ratio > 0.0:
        raise ValueError(f"j1/omega must be positive, got {ratio}")
    bond12, bond23, ops = _trio_operators(spin.twice_s)
    gs = ground_space(ratio * bond12 + bond23)
    v = gs.basis
    twice_s_eff = gs.degeneracy - 1

    # total spin operators restricted to the multiplet define S_eff
    s_eff = [v.conj().T @ (ops[0][a] + ops[1][a] + ops[2][a]) @ v for a in range(3)]
    casimir = sum(t @ t for t in s_eff)
    expect = twice_s_eff / 2 * (twice_s_eff / 2 + 1)
    if not np.allclose(casimir, expect * np.eye(gs.degeneracy), atol=1e-8):
        raise SolverError(f"ground space at j1/omega={ratio!r} is not a single spin multiplet")
    if twice_s_eff != spin.twice_s:
        raise TrioSpinError(spin, twice_s_eff, ratio)

    norm_z = np.trace(s_eff[2] @ s_eff[2]).real
    coeffs = []
    residual = 0.0
    for site in (0, 2):
        proj = [v.conj().T @ ops[site][a] @ v for a in range(3)]
        c = float(np.trace(proj[2] @ s_eff[2]).real / norm_z)
        for a in range(3):
            residual = max(residual, float(np.abs(proj[a] - c * s_eff[a]).max()))
        coeffs.append(c)
    if residual > PROJECTION_TOL:
        raise SolverError(f"projection residual {residual:.3e} above {PROJECTION_TOL} at j1/omega={ratio!r}")
    return TrioSolution(twice_s_eff=twice_s_eff, c_left=coeffs[0], c_right=coeffs[1], residual=residual)


@functools.lru_cache(maxsize=None)
def trio_sector_operators(twice_s: int):
    """Trio bond operators restricted to fixed total-Sz blocks.

    Returns (a_hw, b_hw, z1_hw, z3_hw, a_up, b_up, a_lo, b_lo): S1.S2 and S2.S3
    in the Sz = S block (plus the diagonals of S1z and S3z there), in the
    Sz = S+1 block, and in the lowest |Sz| block, which contains every
    multiplet. Enough to locate the ground multiplet's spin and to read off
    the projection coefficients from its highest-weight state.
    """
    bond12, bond23, _ = _trio_operators(twice_s)
    tm = twice_s - 2 * np.arange(twice_s + 1)
    total = (tm[:, None, None] + tm[None, :, None] + tm[None, None, :]).ravel()
    sz1 = np.repeat(tm, (twice_s + 1) ** 2) / 2
    sz3 = np.tile(tm, (twice_s + 1) ** 2) / 2

    def block(target):
        idx = np.flatnonzero(total == target)
        return np.ascontiguousarray(bond12[np.ix_(idx, idx)]), np.ascontiguousarray(bond23[np.ix_(idx, idx)]), idx

    a_hw, b_hw, hw = block(twice_s)
    a_up, b_up, _ = block(twice_s + 2)
    a_lo, b_lo, _ = block(twice_s % 2)
    return a_hw, b_hw, sz1[hw].copy(), sz3[hw].copy(), a_up, b_up, a_lo, b_lo


def quantize_ratio(ratio: float) -> int:
    # must match the compiled loop bit for bit
    return int(math.floor(ratio / RATIO_QUANTUM + 0.5))


@functools.lru_cache(maxsize=None)
def _memo_trio(twice_s: int, key: int) -> TrioSolution:
    return solve_trio(SpinMagnitude(twice_s), key * RATIO_QUANTUM)


def trio_effective_couplings(model: ModelKind, spin: SpinMagnitude, j1: float, omega: float,
                             memo: bool = True) -> TrioSolution:
    """Projection coefficients for the trio j1*S1.S2 + omega*S2.S3.

    Only the ratio matters. With ``memo`` the ratio is quantized to 1e-6 and
    the solution is cached per process.
    """
    if model is not ModelKind.HEISENBERG:
        raise ValueError("trio decimation is only defined for the Heisenberg chain")
    if not (j1 > 0.0 and omega > 0.0):
        raise ValueError("j1 and omega must be positive")
    if memo:
        return _memo_trio(spin.twice_s, quantize_ratio(j1 / omega))
    return solve_trio(spin, j1 / omega)


def trio_table(spin: SpinMagnitude, ratios) -> list[tuple[float, TrioSolution, bool]]:
    thr = trio_threshold(ModelKind.HEISENBERG, spin)
    return [(float(r), solve_trio(spin, float(r)), math.isclose(r, thr, rel_tol=0, abs_tol=1e-12))
            for r in ratios]


def reduced_density_matrix(state: np.ndarray, block, spin: SpinMagnitude, n_sites: int) -> np.ndarray:
    """Trace out every site not in ``block`` (0-based site indices)."""
    block = sorted(set(int(b) for b in block))
    if any(b < 0 or b >= n_sites for b in block):
        raise ValueError("block sites out of range")
    d = spin.dim
    rest = [k for k in range(n_sites) if k not in block]
    psi = np.asarray(state).reshape([d] * n_sites).transpose(block + rest)
    psi = psi.reshape(d ** len(block), d ** len(rest))
    return psi @ psi.conj().T


def von_neumann_entropy(rho: np.ndarray, tol: float = 1e-10) -> float:
    """-Tr(rho log2 rho), with 0 log 0 = 0."""
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real} differs from 1")
    lam = np.linalg.eigvalsh(rho)
    if lam[0] < -tol:
        raise ValueError(f"density matrix has negative eigenvalue {lam[0]}")
    lam = lam[lam > tol]
    return float(-(lam * np.log2(lam)).sum())


@functools.lru_cache(maxsize=None)
def _singlet_sector(model: ModelKind, twice_s: int, n_sites: int):
    """Exact integer data for the total-spin-0 sector of an n-site chain.

    Returns (states, basis, overlap, bonds): the product-basis indices of the
    Sz=0 states, an integer basis of the singlet sector as Sz=0 amplitudes,
    its Gram matrix, and each bond term in that basis, all as fmpz_mat.
    Requires a uniform ladder (S = 1/2 or 1), so that every operator is an
    integer matrix up to one overall scale.
    """
    from flint import fmpz_mat

    if twice_s not in (1, 2):
        raise SolverError(f"exact singlet sector needs S=1/2 or S=1, got twice_s={twice_s}")
    d = twice_s + 1
    tm = twice_s - 2 * np.arange(d)
    digits = np.array(np.unravel_index(np.arange(d ** n_sites), [d] * n_sites)).T
    total = tm[digits].sum(axis=1)
    zero = np.flatnonzero(total == 0)
    one = np.flatnonzero(total == 2)
    where_one = {int(k): i for i, k in enumerate(one)}

    # total S+ from Sz=0 to Sz=1; the ladder is uniform so unit entries suffice
    raise_rows = [[0] * zero.size for _ in range(one.size)]
    for col, k in enumerate(zero):
        dig = digits[k]
        for site in range(n_sites):
            if dig[site] > 0:
                up = dig.copy()
                up[site] -= 1
                raise_rows[where_one[int(np.ravel_multi_index(up, [d] * n_sites))]][col] += 1
    x, nullity = fmpz_mat(raise_rows).nullspace()
    basis = fmpz_mat([[x[i, j] for j in range(nullity)] for i in range(zero.size)])

    scale = 4 if twice_s == 1 else 1
    power = 2 if model is ModelKind.BIQUADRATIC else 1
    bonds = []
    for i in range(n_sites - 1):
        h = _bond_dot(SpinMagnitude(twice_s), i, n_sites, power)[np.ix_(zero, zero)] * scale ** power
        hi = np.rint(h).astype(np.int64)
        if np.abs(h - hi).max() > 1e-9:
            raise SolverError("bond operator is not integral in the product basis")
        bonds.append(basis.transpose() * fmpz_mat(hi.tolist()) * basis)
    overlap = basis.transpose() * basis
    return zero, basis, overlap, bonds


def exact_ground_state(model: ModelKind, spin: SpinMagnitude, couplings, tol: float = 1e-12,
                       max_prec: int = 8192) -> np.ndarray:
    """Singlet ground state of an even open chain to ``tol``, in ball arithmetic.

    Double precision cannot resolve the tiny gaps of extremely broad coupling
    distributions; here the working precision doubles until the lowest
    singlet-sector eigenvalue is isolated and its eigenvector is known to
    ``tol`` relative accuracy. Only valid where the ground state is a total
    singlet (the spin-1/2 and spin-1 Heisenberg chains with an even number of
    sites).
    """
    from flint import acb_mat, arb, arb_mat, ctx

    couplings = [float(c) for c in couplings]
    n = len(couplings) + 1
    if n % 2:
        raise SolverError("singlet ground state needs an even number of sites")
    _check_dim(spin, n, DIMENSION_CAP)
    zero, basis, overlap, bonds = _singlet_sector(model, spin.twice_s, n)
    saved = ctx.prec
    prec = 128
    try:
        while prec <= max_prec:
            ctx.prec = prec
            h = arb_mat(bonds[0]) * arb(couplings[0])
            for j, b in zip(couplings[1:], bonds[1:]):
                h += arb_mat(b) * arb(j)
            a = arb_mat(overlap).solve(h)
            try:
                evals, vecs = acb_mat(a).eig(right=True)
            except ValueError:
                prec *= 2
                continue
            k = min(range(len(evals)), key=lambda i: float(evals[i].real.mid()))
            coef = arb_mat([[vecs[i, k].real] for i in range(vecs.nrows())])
            amp = arb_mat(basis) * coef
            mids = np.array([float(amp[i, 0].mid()) for i in range(amp.nrows())])
            rads = np.array([float(amp[i, 0].rad()) for i in range(amp.nrows())])
            norm = np.linalg.norm(mids)
            if norm > 0 and rads.max() <= tol * norm:
                psi = np.zeros(spin.dim ** n)
                psi[zero] = mids / norm
                return psi
            prec *= 2
    finally:
        ctx.prec = saved
    raise SolverError(f"ground state not resolved at {max_prec} bits")


def ground_state_entropy(model: ModelKind, spin: SpinMagnitude, couplings, block,
                         exact: bool | None = None) -> float:
    """Block entropy of the ground state of an open chain.

    With ``exact`` (the default where supported: Heisenberg chains of
    spin 1/2 or 1) the ground state comes from :func:`exact_ground_state`;
    otherwise from double-precision diagonalization, which must find a
    non-degenerate ground state.
    """
    n = len(couplings) + 1
    if exact is None:
        exact = model is ModelKind.HEISENBERG and spin.twice_s in (1, 2) and n % 2 == 0
    if exact:
        psi = exact_ground_state(model, spin, couplings)
    else:
        gs = ground_space(build_hamiltonian(model, spin, couplings))
        if gs.degeneracy != 1:
            raise SolverError(f"ground state is {gs.degeneracy}-fold degenerate")
        psi = gs.basis[:, 0]
    return von_neumann_entropy(reduced_density_matrix(psi, block, spin, n))

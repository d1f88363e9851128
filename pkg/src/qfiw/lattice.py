"""Exact diagonalization of spin-1/2 XXZ chains in total-Sz sectors.

Basis states are integers whose bit ``x`` is 1 when site ``x`` is spin up.
Every sector is diagonalized densely; nothing here uses iterative solvers,
so the practical limit is ``n_sites <= 14``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError, ValidationError

BOUNDARIES = ("periodic", "open")


@dataclass(frozen=True)
class ChainSpec:
    """Nearest-neighbour XXZ chain.

    ``H = J * sum_b [Sx Sx + Sy Sy + anisotropy * Sz Sz]`` over bonds ``b``.
    A periodic chain of two sites has a single bond (the open dimer), so the
    exchange is not counted twice.
    """

    n_sites: int
    coupling_j: float = 1.0
    anisotropy: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValidationError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        if self.boundary not in BOUNDARIES:
            raise ValidationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.boundary == "periodic" and self.n_sites % 2:
            raise ValidationError(
                f"periodic chain needs an even number of sites for a commensurate "
                f"staggered operator, got n_sites={self.n_sites}"
            )
        if not self.coupling_j >= 0:
            # J = 0 is allowed as a degenerate test case
            raise ValidationError(f"coupling_j must be >= 0 (antiferromagnetic), got {self.coupling_j}")

    @property
    def bonds(self) -> Tuple[Tuple[int, int], ...]:
        n = self.n_sites
        if self.boundary == "open" or n == 2:
            return tuple((i, i + 1) for i in range(n - 1))
        return tuple((i, (i + 1) % n) for i in range(n))


@dataclass(frozen=True)
class OperatorSpec:
    """Staggered-type operator ``sum_x exp(i q x) S^z_x``.

    On periodic chains ``q`` must be a lattice momentum ``2 pi k / n``.
    Open chains have no momentum quantum number, so any ``q`` is accepted
    when ``require_commensurate`` is False.
    """

    q: float
    n_sites: int
    component: str = "z"
    require_commensurate: bool = True
    phases: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.component != "z":
            raise ValidationError("only the z component is supported")
        q = float(self.q) % (2 * math.pi)
        object.__setattr__(self, "q", q)
        k = q * self.n_sites / (2 * math.pi)
        commensurate = abs(k - round(k)) < 1e-9
        if self.require_commensurate and not commensurate:
            raise ValidationError(
                f"q={q:.12g} is not commensurate with n_sites={self.n_sites} "
                f"(q*n/2pi = {k:.6g} is not an integer)"
            )
        x = np.arange(self.n_sites)
        if commensurate:
            phases = _lattice_phases(int(round(k)) % self.n_sites, self.n_sites)
        elif abs(q - math.pi) < 1e-12:
            phases = (-1.0) ** x + 0j
        else:
            phases = np.exp(1j * q * x)
        object.__setattr__(self, "phases", phases)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.phases.imag == 0))

    @classmethod
    def for_chain(cls, spec: ChainSpec, q: float) -> "OperatorSpec":
        return cls(q, spec.n_sites, require_commensurate=spec.boundary == "periodic")


def _lattice_phases(k: int, n: int) -> np.ndarray:
    # exact values where exp(2 pi i k x / n) is a fourth root of unity
    exact = {0: 1.0 + 0j, 1: 1j, 2: -1.0 + 0j, 3: -1j}
    out = np.empty(n, dtype=complex)
    for x in range(n):
        m = (k * x) % n
        if (4 * m) % n == 0:
            out[x] = exact[4 * m // n]
        else:
            out[x] = np.exp(2j * math.pi * m / n)
    return out


@dataclass(frozen=True)
class Sector:
    n_up: int
    states: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class EigenSystem:
    spec: ChainSpec
    sectors: Tuple[Sector, ...]
    ground_energy: float

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    @property
    def dim(self) -> int:
        return sum(s.dim for s in self.sectors)

    def all_energies(self) -> np.ndarray:
        """Energies in the deterministic global order (energy, sector, index)."""
        e = np.concatenate([s.energies for s in self.sectors])
        sec = np.concatenate([np.full(s.dim, s.n_up) for s in self.sectors])
        idx = np.concatenate([np.arange(s.dim) for s in self.sectors])
        order = np.lexsort((idx, sec, e))
        return e[order]

    def sector(self, n_up: int) -> Sector:
        for s in self.sectors:
            if s.n_up == n_up:
                return s
        raise KeyError(n_up)


@dataclass(frozen=True)
class ThermalEnsemble:
    beta: float
    weights: Tuple[np.ndarray, ...]
    log_partition: float

    def total(self) -> float:
        return float(sum(w.sum() for w in self.weights))


def sector_states(n_sites: int, n_up: int) -> np.ndarray:
    """Sorted basis states with ``n_up`` up spins."""
    allstates = np.arange(1 << n_sites, dtype=np.int64)
    counts = np.zeros_like(allstates)
    for x in range(n_sites):
        counts += (allstates >> x) & 1
    return allstates[counts == n_up]


def site_sz(states: np.ndarray, n_sites: int) -> np.ndarray:
    """Matrix ``sz[s, x]`` of S^z_x eigenvalues (+-1/2) on each basis state."""
    bits = (states[:, None] >> np.arange(n_sites)[None, :]) & 1
    return bits - 0.5


def build_hamiltonian(spec: ChainSpec) -> Dict[int, sp.csr_matrix]:
    """Sparse Hamiltonian block for every sector, keyed by number of up spins."""
    n = spec.n_sites
    blocks = {}
    for n_up in range(n + 1):
        states = sector_states(n, n_up)
        dim = len(states)
        diag = np.zeros(dim)
        rows, cols, vals = [], [], []
        for i, j in spec.bonds:
            bi = (states >> i) & 1
            bj = (states >> j) & 1
            same = bi == bj
            diag += spec.coupling_j * spec.anisotropy * np.where(same, 0.25, -0.25)
            src = np.nonzero(~same)[0]
            flipped = states[src] ^ ((1 << i) | (1 << j))
            dst = np.searchsorted(states, flipped)
            rows.append(dst)
            cols.append(src)
            vals.append(np.full(len(src), 0.5 * spec.coupling_j))
        rows.append(np.arange(dim))
        cols.append(np.arange(dim))
        vals.append(diag)
        h = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        ).tocsr()
        h.sum_duplicates()
        blocks[n_up] = h
    return blocks


def diagonalize(spec: ChainSpec, blocks: Dict[int, sp.spmatrix] | None = None) -> EigenSystem:
    """Dense diagonalization of each Sz block."""
    if blocks is None:
        blocks = build_hamiltonian(spec)
    sectors = []
    for n_up in sorted(blocks):
        h = blocks[n_up].toarray()
        if not np.allclose(h, h.T.conj(), atol=1e-12):
            raise ValidationError(f"block n_up={n_up} is not Hermitian")
        try:
            e, v = np.linalg.eigh(h)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigh did not converge for block n_up={n_up}") from exc
        sectors.append(Sector(n_up, sector_states(spec.n_sites, n_up), e, v))
    e0 = min(float(s.energies[0]) for s in sectors)
    return EigenSystem(spec, tuple(sectors), e0)


def thermal_ensemble(es: EigenSystem, beta: float) -> ThermalEnsemble:
    """Boltzmann weights, shifted by the ground energy so nothing overflows."""
    if not beta > 0:
        raise ValidationError(f"beta must be > 0, got {beta}")
    boltz = [np.exp(-beta * (s.energies - es.ground_energy)) for s in es.sectors]
    z = sum(b.sum() for b in boltz)
    weights = tuple(b / z for b in boltz)
    return ThermalEnsemble(float(beta), weights, float(math.log(z) - beta * es.ground_energy))


def operator_matrix(es: EigenSystem, op: OperatorSpec) -> Dict[int, np.ndarray]:
    """Eigenbasis matrix elements ``<psi_i|O|psi_j>`` per sector.

    The operator is built from S^z only, so it is block diagonal in the
    Sz sectors and cross-sector elements are identically zero.
    """
    if op.n_sites != es.n_sites:
        raise ValidationError(f"operator built for {op.n_sites} sites, eigensystem has {es.n_sites}")
    out = {}
    for s in es.sectors:
        diag = site_sz(s.states, es.n_sites) @ op.phases
        if op.is_real:
            diag = diag.real
        out[s.n_up] = s.vectors.T @ (diag[:, None] * s.vectors)
    return out


def thermal_expectation(es: EigenSystem, ens: ThermalEnsemble, op: OperatorSpec) -> complex:
    total = 0j
    for s, w in zip(es.sectors, ens.weights):
        diag = site_sz(s.states, es.n_sites) @ op.phases
        prob = (np.abs(s.vectors) ** 2) @ w
        total += prob @ diag
    return complex(total)


def sz_correlations(es: EigenSystem, ens: ThermalEnsemble) -> np.ndarray:
    """Equal-time thermal correlations ``<S^z_x S^z_y>``.

    Both operators are diagonal in the computational basis, so only the
    thermal occupation of each basis state is needed.
    """
    n = es.n_sites
    corr = np.zeros((n, n))
    for s, w in zip(es.sectors, ens.weights):
        prob = (np.abs(s.vectors) ** 2) @ w
        sz = site_sz(s.states, n)
        corr += sz.T @ (prob[:, None] * sz)
    return corr

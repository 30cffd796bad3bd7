"""Successor representation and its spectral diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import drift
from .errors import DomainError, SingularSystemError, ValidationError
from .graph import DEFAULT_GAMMA, TERMINAL_SELF_LOOP, CommGraph, TransitionOp, row_normalize

SOLVE_RESIDUAL_MAX = 1e-6
# relative tolerance under which the two leading moduli count as one repeated value
GAP_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SuccessorRep:
    M: np.ndarray
    gamma: float
    eigenvalues: np.ndarray
    singular_values: np.ndarray

    @property
    def n(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class Diagnostics:
    rho: float
    gap: float
    kappa: float
    rho_tilde: float
    rho_tilde_corr: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "gap": self.gap,
            "kappa": self.kappa,
            "rho_tilde": self.rho_tilde,
            "rho_tilde_corr": self.rho_tilde_corr,
        }


def _spectrum(M: np.ndarray):
    ev = np.linalg.eigvals(M)
    ev = ev[np.argsort(-np.abs(ev), kind="stable")]
    sv = np.linalg.svd(M, compute_uv=False)
    return ev, sv


def _package(M: np.ndarray, gamma: float) -> SuccessorRep:
    M = np.array(M, dtype=float)
    ev, sv = _spectrum(M)
    M.setflags(write=False)
    ev.setflags(write=False)
    sv.setflags(write=False)
    return SuccessorRep(M, gamma, ev, sv)


def successor(op: TransitionOp) -> SuccessorRep:
    """Solve ``(I - gamma P) M = I`` by LU with partial pivoting."""
    n = op.n
    A = np.eye(n) - op.gamma * op.P
    I = np.eye(n)
    try:
        M = np.linalg.solve(A, I)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    residual = np.linalg.norm(A @ M - I)
    if not np.isfinite(residual) or residual > SOLVE_RESIDUAL_MAX:
        raise SingularSystemError(f"solve residual {residual:.3e} exceeds {SOLVE_RESIDUAL_MAX}")
    return _package(M, op.gamma)


def successor_shift_only(P_shift: np.ndarray, gamma: float = DEFAULT_GAMMA) -> SuccessorRep:
    """``M = sum_{k<n} gamma^k P^k`` for a nilpotent operator, summed exactly.

    Used for the chain when its terminal row is left empty instead of
    closed with a self-loop.
    """
    P = np.asarray(P_shift, dtype=float)
    n = P.shape[0]
    if not 0.0 <= gamma < 1.0:
        raise ValidationError(f"gamma must lie in [0, 1), got {gamma}")
    M = np.zeros((n, n))
    term = np.eye(n)
    for k in range(n):
        M += term
        term = gamma * term @ P
    if np.any(term != 0):
        raise ValidationError("operator is not nilpotent; use successor() instead")
    return _package(M, float(gamma))


def shift_operator(graph: CommGraph) -> np.ndarray:
    """Row-normalized adjacency with the terminal self-loop removed."""
    if graph.closure != TERMINAL_SELF_LOOP:
        raise ValidationError("graph has no terminal self-loop closure")
    A = np.array(graph.adjacency)
    A[-1, -1] = 0.0
    rows = A.sum(axis=1)
    P = np.zeros_like(A)
    nz = rows > 0
    P[nz] = A[nz] / rows[nz, None]
    return P


def successor_for_graph(graph: CommGraph, gamma: Optional[float] = None, chain_convention: str = "shift") -> SuccessorRep:
    """SR of a graph, honoring the chain closure convention.

    ``chain_convention="shift"`` evaluates closed chains on the raw shift
    operator (nilpotent, so rho = 1 and gap = 0);
    ``"self_loop"`` solves on the row-normalized closed chain.
    """
    op = row_normalize(graph, gamma)
    if graph.closure == TERMINAL_SELF_LOOP:
        if chain_convention == "shift":
            return successor_shift_only(shift_operator(graph), op.gamma)
        if chain_convention != "self_loop":
            raise ValueError(f"unknown chain convention {chain_convention!r}")
    return successor(op)


def spectral_radius(sr: SuccessorRep) -> float:
    return float(np.abs(sr.eigenvalues[0]))


def spectral_gap(sr: SuccessorRep) -> float:
    mods = np.abs(sr.eigenvalues)
    if mods.size < 2:
        return 0.0
    gap = float(mods[0] - mods[1])
    if gap <= GAP_TIE_RTOL * max(1.0, float(mods[0])):
        return 0.0
    return gap


def condition_number(sr: SuccessorRep) -> float:
    return float(sr.singular_values[0] / sr.singular_values[-1])


def diagnostics(sr: SuccessorRep, k_profile: Sequence[int], rho_c: Optional[float] = None) -> Diagnostics:
    k = np.asarray(k_profile)
    if k.shape != (sr.n,):
        raise ValidationError(f"k_profile must have length {sr.n}")
    rho = spectral_radius(sr)
    rt = drift.rho_tilde(rho, k)
    rtc = drift.rho_tilde_corr(rho, k, rho_c) if rho_c is not None else None
    return Diagnostics(rho, spectral_gap(sr), condition_number(sr), rt, rtc)


def mu_squared(leaves: int, alpha: float) -> float:
    """Deviation of the center's leaf weights from uniform."""
    if leaves < 2:
        raise DomainError("leaves must be >= 2")
    if alpha < 1:
        raise DomainError("alpha must be >= 1")
    if np.isinf(alpha):
        return 1.0 - 1.0 / leaves
    return (alpha**2 + leaves - 1) / (alpha + leaves - 1) ** 2 - 1.0 / leaves


def malicious_kappa_bound(leaves: int, gamma: float, mu_sq: float) -> float:
    """Upper bound on kappa(M) for a star with one weight-inflating leaf."""
    if not 0.0 <= gamma < 1.0:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
    ceiling = 1.0 - 1.0 / leaves
    if mu_sq < 0 or mu_sq > ceiling + 1e-12:
        raise DomainError(f"mu^2 = {mu_sq} outside [0, {ceiling}]")
    g2 = gamma * gamma
    return (3.0 + g2 * (leaves + 1.0 / leaves + mu_sq)) ** 1.5 / (1.0 - g2)

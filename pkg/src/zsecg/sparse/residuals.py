"""Residual engines (SAE, NPE, LAE) and their FLOP counters."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..exceptions import InvalidArgument
from .dictionary import Annihilator, Dictionary, LsOperator
from .solvers import omp


class ResidualKind(str, Enum):
    SAE = "SAE"
    NPE = "NPE"
    LAE1 = "LAE1"
    LAE2 = "LAE2"


def sae_flops(N, n, k):
    """OMP with k fixed iterations plus the back-projection."""
    omp_cost = 2 * N * k * (k + 1.5) + 2 * k * n * (N + 1)
    return int(round(omp_cost)) + (2 * n + 1) * N


def npe_flops(N, n):
    return 2 * N * (N - n)


def lae_flops(N, n, variant):
    if variant == 1:
        return 2 * N * N
    if variant == 2:
        return (4 * n + 1) * N
    raise InvalidArgument(f"LAE variant must be 1 or 2, got {variant}")


@dataclass
class ResidualReport:
    residual: np.ndarray
    energy: float
    flops: int
    kind: ResidualKind


def _atoms(D):
    return D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=float)


def _report(residual, flops, kind):
    residual = np.asarray(residual, dtype=float)
    return ResidualReport(residual, float(residual @ residual), int(flops), kind)


def residual_sae(D, s, k=5) -> ResidualReport:
    atoms = _atoms(D)
    N, n = atoms.shape
    code = omp(atoms, s, k)
    return _report(atoms @ code.coeffs - s, sae_flops(N, n, k), ResidualKind.SAE)


def residual_npe(F, s) -> ResidualReport:
    f = F.f if isinstance(F, Annihilator) else np.asarray(F, dtype=float)
    m, N = f.shape
    return _report(f @ s, npe_flops(N, N - m), ResidualKind.NPE)


def residual_lae(D, L, s, variant=2) -> ResidualReport:
    atoms = _atoms(D)
    N, n = atoms.shape
    flops = lae_flops(N, n, variant)
    if variant == 1:
        projector = L.projector if L.projector is not None else np.eye(N) - atoms @ L.l
        return _report(projector @ s, flops, ResidualKind.LAE1)
    return _report(s - atoms @ (L.l @ s), flops, ResidualKind.LAE2)


# Batch energy helpers; rows of X are beats.

def npe_energies(F, X):
    f = F.f if isinstance(F, Annihilator) else np.asarray(F, dtype=float)
    R = np.asarray(X, dtype=float) @ f.T
    return np.einsum("ij,ij->i", R, R)


def lae_energies(D, L: LsOperator, X, variant=2):
    X = np.asarray(X, dtype=float)
    if variant == 1:
        R = X @ L.projector.T
    else:
        R = X - (X @ L.l.T) @ _atoms(D).T
    return np.einsum("ij,ij->i", R, R)


def sae_energies(D, X, k=5):
    atoms = _atoms(D)
    X = np.asarray(X, dtype=float)
    out = np.empty(len(X))
    for i, s in enumerate(X):
        r = atoms @ omp(atoms, s, k).coeffs - s
        out[i] = r @ r
    return out

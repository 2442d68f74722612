"""Morse index counts for solutions and profiles.

The stability form of a state u is

    Q(psi) = int |grad psi|^2 + 2 int |K| e^u psi^2 - bd h e^{u/2} psi^2,

discretized by :meth:`prescurv.energy.Problem.hessian_form` as stiffness
plus diagonal.  The Morse index is the number of negative eigenvalues of
Q against any positive inner product; by Sylvester's law of inertia that
equals the number of negative eigenvalues of the plain symmetric matrix,
which is what :func:`negative_count` computes (shift-invert Lanczos at a
certified shift below the spectrum, with k escalation).

Truncated half-plane profiles restrict Q to fields vanishing on the
artificial arc (Dirichlet truncation).  Restriction only shrinks the
admissible space, so the computed counts are lower bounds for the index
of the profile on the full half plane, which is the monotonicity the
truncation-family checks rely on.

The disk-model stability form

    Q_R(psi) = int_{D_R} |grad psi|^2 + 2 int psi^2 rho(|x|)
               - D0 sqrt(rho(R)) bd psi^2,   rho(s) = 4/(1-s^2)^2,

at the special radius R = D0 - sqrt(D0^2 - 1) separates in polar
coordinates, so :func:`disk_form_report` reduces it to one-dimensional
radial pencils per angular frequency m.  The m^2/r^2 potential makes the
per-mode ground states increase with m, so scanning stops at the first
nonnegative mode.  The m=1 ground state is an exact zero mode (the
fields x_i/(1-|x|^2)); a conforming discretization approximates its
eigenvalue from above, hence never reports it as spuriously negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import Mesh
from .energy import Problem, restrict_matrix
from .exact import (
    HalfPlaneProfile,
    disk_eigenfunction,
    eval_rescaled_limit,
    halfplane_problem,
    profile_state,
)
from .fields import CurvatureSpec

NEG_TOL = 1e-10


@dataclass
class SpectrumReport:
    """Inertia of a stability form.

    ``eigenvalues`` are raw matrix eigenvalues (the low end); only their
    signs carry meaning for the index.  ``converged`` is False when the
    escalation cap was hit with every computed eigenvalue still
    negative, making ``negative_count`` a lower bound.
    """

    negative_count: int
    eigenvalues: np.ndarray
    k_used: int
    converged: bool
    neg_tol: float = NEG_TOL


def _gershgorin_lower(Q: sp.spmatrix) -> float:
    Q = Q.tocsr()
    diag = Q.diagonal()
    rowabs = np.asarray(np.abs(Q).sum(axis=1)).ravel() - np.abs(diag)
    return float((diag - rowabs).min())


def negative_count(Q: sp.spmatrix, neg_tol: float = NEG_TOL, k0: int = 8,
                   k_max: int = 256, dense_cutoff: int = 600) -> SpectrumReport:
    """Count eigenvalues of the symmetric matrix Q below ``-neg_tol``."""
    n = Q.shape[0]
    if n <= dense_cutoff:
        vals = np.linalg.eigvalsh(Q.toarray())
        return SpectrumReport(
            negative_count=int((vals < -neg_tol).sum()),
            eigenvalues=vals[: min(n, 32)],
            k_used=n,
            converged=True,
            neg_tol=neg_tol,
        )
    bound = _gershgorin_lower(Q)
    sigma = bound - max(1e-8, 0.01 * abs(bound))
    Qc = Q.tocsc()
    k = k0
    cap = min(k_max, n - 2)
    while True:
        # fixed start vector keeps repeated runs bit-identical
        v0 = np.random.default_rng(0).standard_normal(n)
        vals = np.sort(spla.eigsh(Qc, k=k, sigma=sigma, which="LM", v0=v0,
                                  return_eigenvectors=False))
        if vals.max() >= 0 or k >= cap:
            done = vals.max() >= 0
            return SpectrumReport(
                negative_count=int((vals < -neg_tol).sum()),
                eigenvalues=vals,
                k_used=k,
                converged=bool(done),
                neg_tol=neg_tol,
            )
        k = min(2 * k, cap)


def morse_index(prob: Problem, u: np.ndarray, eps: float = 0.0,
                fixed: Optional[np.ndarray] = None,
                neg_tol: float = NEG_TOL) -> SpectrumReport:
    """Index of a state: negative directions of the stability form,
    optionally restricted away from Dirichlet-fixed dofs."""
    Q = prob.hessian(u, eps)
    if fixed is not None:
        Q = restrict_matrix(Q, np.nonzero(~fixed)[0])
    return negative_count(Q, neg_tol=neg_tol)


def halfplane_profile_index(mesh: Mesh, profile: HalfPlaneProfile,
                            neg_tol: float = NEG_TOL) -> SpectrumReport:
    """Index of a half-plane profile on a half-disk truncation."""
    prob, fixed = halfplane_problem(mesh, profile)
    return morse_index(prob, profile_state(mesh, profile), fixed=fixed,
                       neg_tol=neg_tol)


def rescaled_profile_index(mesh: Mesh, h1: float,
                           neg_tol: float = NEG_TOL) -> SpectrumReport:
    """Index of the strip limit profile on a half-disk truncation.

    The profile is 2 pi periodic along the flat edge; growing the
    truncation radius admits more periods, so the count grows without
    bound, unlike the finite-mass profiles.
    """
    if mesh.spec.kind != "halfdisk":
        raise ValueError("profile truncations live on half-disk meshes")
    spec = CurvatureSpec(K=-1.0, h=[h1, 0.0], K_bg=0.0, h_bg=(0.0, 0.0))
    prob = Problem(mesh, spec)
    fixed = np.zeros(mesh.n_dof, dtype=bool)
    fixed[mesh.vertex_dof[mesh.components[1].verts]] = True
    xy = mesh.dof_coords
    u = eval_rescaled_limit(h1, xy[:, 0], xy[:, 1])
    return morse_index(prob, u, fixed=fixed, neg_tol=neg_tol)


# -- separable disk model ----------------------------------------------------


def disk_truncation_radius(D0: float) -> float:
    """Radius at which the disk form first acquires a zero mode."""
    if D0 <= 1:
        raise ValueError("disk model needs boundary ratio above one")
    return D0 - math.sqrt(D0**2 - 1.0)


@dataclass
class DiskFormReport:
    """Spectral summary of the disk-model form at its critical radius.

    ``mode_counts`` lists (m, negatives, smallest eigenvalue) per angular
    frequency up to the first nonnegative mode; counts for m >= 1 enter
    ``negative_count`` with multiplicity two (cos and sin).
    """

    D0: float
    R: float
    negative_count: int
    mode_counts: list
    radial_eigenvalue: float
    radial_vector: np.ndarray
    r_grid: np.ndarray
    correlation_with_gamma: float
    kernel_rayleigh: float


def _radial_pieces(D0: float, n_r: int):
    """Per-element tridiagonal pieces of the radial forms on [0, R]."""
    R = disk_truncation_radius(D0)
    r = np.linspace(0.0, R, n_r + 1)
    h = r[1] - r[0]
    # 4-point Gauss on each element
    gx, gw = np.polynomial.legendre.leggauss(4)
    mid = 0.5 * (r[:-1] + r[1:])
    pts = mid[:, None] + 0.5 * h * gx[None, :]
    wts = 0.5 * h * gw[None, :]
    lam0 = (r[1:][:, None] - pts) / h  # hat of the left node
    lam1 = (pts - r[:-1][:, None]) / h

    def elem(weight):
        w = wts * weight
        return (
            (w * lam0 * lam0).sum(axis=1),
            (w * lam0 * lam1).sum(axis=1),
            (w * lam1 * lam1).sum(axis=1),
        )

    rho = 4.0 / (1.0 - pts**2) ** 2
    stiff_d = (r[1:] ** 2 - r[:-1] ** 2) / (2 * h**2)  # f'g' r dr, exact
    stiff = (stiff_d, -stiff_d, stiff_d)
    pot = elem(2.0 * rho * pts)  # 2 rho f g r dr
    invr = elem(1.0 / pts)  # f g / r dr (times m^2 later)
    mass = elem(pts)  # f g r dr
    bcoef = D0 * 2.0 / (1.0 - R**2)  # D0 sqrt(rho(R))
    return r, stiff, pot, invr, mass, bcoef * R


def _tridiag(n, pieces_list, boundary=0.0):
    d = np.zeros(n + 1)
    e = np.zeros(n)
    for d00, d01, d11 in pieces_list:
        d[:-1] += d00
        d[1:] += d11
        e += d01
    d[-1] -= boundary
    return d, e


def _mode_matrix(m, r, stiff, pot, invr, bnd):
    pieces = [stiff, pot]
    if m:
        pieces.append(tuple(m**2 * a for a in invr))
    d, e = _tridiag(len(r) - 1, pieces, boundary=bnd)
    if m:
        return d[1:], e[1:]  # clamp r=0 for nonradial modes
    return d, e


def _count_below(d, e, cut):
    lo = min((d - np.concatenate([[0.0], np.abs(e)])
              - np.concatenate([np.abs(e), [0.0]])).min(), cut) - 1.0
    vals = la.eigvalsh_tridiagonal(d, e, select="v", select_range=(lo, cut))
    return len(vals), vals


def disk_form_report(D0: float, n_r: int = 3000, m_cap: int = 128,
                     neg_tol: float = 1e-11) -> DiskFormReport:
    """Full inertia of the disk form via its angular decomposition."""
    r, stiff, pot, invr, mass, bnd = _radial_pieces(D0, n_r)
    mode_counts = []
    total = 0
    for m in range(m_cap + 1):
        d, e = _mode_matrix(m, r, stiff, pot, invr, bnd)
        cnt, vals = _count_below(d, e, -neg_tol)
        smallest = vals[0] if len(vals) else None
        mode_counts.append((m, cnt, smallest))
        total += cnt * (2 if m else 1)
        if cnt == 0:
            break  # per-mode minimum increases with m
    else:
        raise RuntimeError("angular mode cap exhausted")

    # radial ground pair for the eigenvector shape
    d0, e0 = _mode_matrix(0, r, stiff, pot, invr, bnd)
    A0 = sp.diags([e0, d0, e0], [-1, 0, 1]).toarray()
    dB, eB = _tridiag(len(r) - 1, [stiff, mass])
    B0 = sp.diags([eB, dB, eB], [-1, 0, 1]).toarray()
    w, v = la.eigh(A0, B0, subset_by_index=[0, 0])
    vec = v[:, 0]
    gam = disk_eigenfunction(r, np.zeros_like(r))
    corr = float(np.corrcoef(vec, gam)[0, 1])
    if corr < 0:
        vec = -vec
        corr = -corr

    # exact zero mode of the m=1 block, interpolated
    d1, e1 = _mode_matrix(1, r, stiff, pot, invr, bnd)
    A1 = sp.diags([e1, d1, e1], [-1, 0, 1]).tocsr()
    dB1, eB1 = _tridiag(len(r) - 1, [stiff, mass, invr])
    B1 = sp.diags([eB1[1:], dB1[1:], eB1[1:]], [-1, 0, 1]).tocsr()
    f = (r / (1.0 - r**2))[1:]
    kern = float(abs(f @ (A1 @ f)) / (f @ (B1 @ f)))

    return DiskFormReport(
        D0=D0,
        R=r[-1],
        negative_count=total,
        mode_counts=mode_counts,
        radial_eigenvalue=float(w[0]),
        radial_vector=vec,
        r_grid=r,
        correlation_with_gamma=corr,
        kernel_rayleigh=kern,
    )

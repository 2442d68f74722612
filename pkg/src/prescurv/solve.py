"""Critical-point search for the curvature energy.

Three entry points:

* :func:`minimize` - damped Newton with an Armijo line search and a
  diagonal trust regularization, certified by a positive-semidefinite
  Hessian check at the accepted state.
* :func:`mountain_pass` - deformation of a discrete path between two
  low states: repeated preconditioned descent at the path maximum with
  arclength reparametrization, then a Newton polish of the near-critical
  maximum.  Raises :class:`PathCollapseError` when the landscape carries
  no pass (the path maximum sinks to the endpoint level).
* :func:`continuation` - solves along a decreasing schedule of
  relaxation weights eps, warm starting each solve from the previous
  one, and reports a blow-up verdict when the states escape upward.

The relaxed functional I_eps = I + eps J with J = int |grad u|^2 +
e^u - u is handled inside :class:`prescurv.energy.Problem`; its critical
points solve the problem with rescaled data, exactly at the discrete
level, so index and mass readings along the continuation transfer
without extra bookkeeping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import BoundaryPoint
from .energy import EnergyBreakdown, Problem

ARMIJO_C = 1e-4
BLOWUP_SUP = 50.0
PSD_TOL = 1e-8


class PathCollapseError(RuntimeError):
    """The deformed path's maximum fell to the endpoint level."""


@dataclass
class PathState:
    """Discrete path after deformation: row j is the j-th state."""

    points: np.ndarray
    energies: np.ndarray
    max_index: int


@dataclass
class SolveReport:
    state: np.ndarray
    energy: EnergyBreakdown
    residual_norm: float
    iterations: int
    line_search_trace: list
    converged: bool
    blowup_flag: bool
    method: str
    eps: float = 0.0
    gauss_bonnet: float = math.nan
    min_eigenvalue: Optional[float] = None
    morse_index: Optional[int] = None
    message: str = ""
    path: Optional[PathState] = None

    @property
    def sup(self) -> float:
        return float(self.state.max())

    def as_dict(self, include_state: bool = True) -> dict:
        d = {
            "method": self.method,
            "eps": self.eps,
            "converged": self.converged,
            "blowup_flag": self.blowup_flag,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "gauss_bonnet": self.gauss_bonnet,
            "sup": self.sup,
            "energy": self.energy.as_dict(),
            "min_eigenvalue": self.min_eigenvalue,
            "morse_index": self.morse_index,
            "message": self.message,
            "line_search_trace": self.line_search_trace,
        }
        if include_state:
            d["state"] = np.asarray(self.state, dtype=float).tolist()
        return d

    def to_json(self, include_state: bool = True) -> str:
        return json.dumps(self.as_dict(include_state), indent=2)


def _gershgorin_lower(H: sp.spmatrix) -> float:
    H = H.tocsr()
    diag = H.diagonal()
    rowabs = np.asarray(np.abs(H).sum(axis=1)).ravel() - np.abs(diag)
    return float((diag - rowabs).min())


def _smallest_eigenvalue(H: sp.spmatrix, needed_above: float) -> float:
    """Smallest eigenvalue, or a certified lower bound if that already
    clears ``needed_above``."""
    bound = _gershgorin_lower(H)
    if bound >= needed_above:
        return bound
    n = H.shape[0]
    if n <= 600:
        return float(np.linalg.eigvalsh(H.toarray())[0])
    sigma = bound - max(1e-8, 0.01 * abs(bound))
    # fixed start vector keeps repeated runs bit-identical
    v0 = np.random.default_rng(0).standard_normal(n)
    val = spla.eigsh(H.tocsc(), k=1, sigma=sigma, which="LM", v0=v0,
                     return_eigenvectors=False)
    return float(val[0])


def _newton_direction(H: sp.spmatrix, g: np.ndarray, w: np.ndarray,
                      sigma: float) -> tuple[np.ndarray, float]:
    """Descent direction from the (regularized) Newton system.

    The regularization sigma * diag(w) is grown until the factorization
    succeeds and the direction points downhill; w carries the quadrature
    weights so sigma is comparable to the potential coefficient.
    """
    gn = float(np.linalg.norm(g))
    for _ in range(60):
        Hs = H if sigma == 0.0 else H + sp.diags(sigma * w)
        try:
            d = spla.splu(Hs.tocsc()).solve(-g)
        except RuntimeError:
            d = None
        if d is not None and np.all(np.isfinite(d)):
            if float(g @ d) < -1e-14 * gn * float(np.linalg.norm(d)):
                return d, sigma
        sigma = max(4.0 * sigma, 1e-3)
    raise RuntimeError("could not regularize the Newton system into a descent direction")


def minimize(prob: Problem, eps: float = 0.0,
             init: Optional[np.ndarray] = None, tol: float = 1e-8,
             max_iter: int = 100, certify: bool = True,
             blowup_threshold: float = BLOWUP_SUP) -> SolveReport:
    """Damped Newton descent on the (relaxed) energy.

    ``converged`` demands both a residual below ``tol`` in the dual norm
    and, when ``certify`` is set, a Hessian that is positive
    semidefinite up to a small negative slack, so the report certifies a
    local minimum rather than any critical point.
    """
    u = prob.zero_state() if init is None else np.array(init, dtype=float)
    w = prob.ops.w_int
    sigma = 0.0
    trace: list[dict] = []
    blow = False
    message = ""
    it = 0
    for it in range(max_iter):
        g = prob.gradient(u, eps)
        res = prob.dual_norm(g)
        e = prob.energy(u, eps)
        if res < tol:
            break
        H = prob.hessian(u, eps)
        try:
            d, sigma = _newton_direction(H, g, w, sigma)
        except RuntimeError as exc:
            message = str(exc)
            break
        gd = float(g @ d)
        noise = 1e-13 * (1.0 + abs(e.total_eps))
        t, ok, bt, mode = 1.0, False, 0, "armijo"
        if -gd < noise:
            # quadratic basin: energy decrements are below the floating
            # point floor, so accept full steps by residual decrease
            mode = "residual"
            ok = prob.residual_norm(u + d, eps) < res
        else:
            for bt in range(50):
                trial = prob.energy(u + t * d, eps)
                if (math.isfinite(trial.total_eps)
                        and trial.total_eps <= e.total_eps + ARMIJO_C * t * gd):
                    ok = True
                    break
                t *= 0.5
        trace.append({"iter": it, "residual": res, "energy": e.total_eps,
                      "step": t, "sigma": sigma, "backtracks": bt,
                      "mode": mode})
        if not ok:
            message = ("stalled at the floating point floor"
                       if mode == "residual"
                       else "line search failed to reduce the energy")
            break
        u = u + t * d
        sigma = 0.0 if sigma < 1e-14 else 0.5 * sigma
        if u.max() > blowup_threshold:
            blow = True
            message = "state escaped upward during descent"
            break
    final = prob.energy(u, eps)
    res = prob.residual_norm(u, eps)
    converged = res < tol and not blow and not message
    min_eig = None
    if converged and certify:
        H = prob.hessian(u, eps)
        thr = -PSD_TOL * max(1.0, float(np.abs(H.diagonal()).max()))
        min_eig = _smallest_eigenvalue(H, thr)
        if min_eig < thr:
            converged = False
            message = "stationary point is not a local minimum"
    return SolveReport(
        state=u, energy=final, residual_norm=res, iterations=it,
        line_search_trace=trace, converged=converged,
        blowup_flag=blow or final.blowup_flag, method="minimize", eps=eps,
        gauss_bonnet=prob.gauss_bonnet_residual(u),
        min_eigenvalue=min_eig, message=message,
    )


def newton_polish(prob: Problem, init: np.ndarray, eps: float = 0.0,
                  tol: float = 1e-10, max_iter: int = 60,
                  blowup_threshold: float = BLOWUP_SUP) -> SolveReport:
    """Residual-driven Newton iteration; converges to critical points of
    any index, so it finishes saddle searches."""
    u = np.array(init, dtype=float)
    w = prob.ops.w_int
    trace: list[dict] = []
    blow = False
    message = ""
    it = 0
    res = prob.residual_norm(u, eps)
    for it in range(max_iter):
        if res < tol:
            break
        H = prob.hessian(u, eps)
        g = prob.gradient(u, eps)
        d = None
        sigma = 0.0
        for _ in range(40):
            Hs = H if sigma == 0.0 else H + sp.diags(sigma * w)
            try:
                d = spla.splu(Hs.tocsc()).solve(-g)
            except RuntimeError:
                d = None
            if d is not None and np.all(np.isfinite(d)):
                break
            sigma = max(4.0 * sigma, 1e-10)
        if d is None:
            message = "Newton system remained singular"
            break
        t, ok, new_res = 1.0, False, res
        for bt in range(40):
            new_res = prob.residual_norm(u + t * d, eps)
            if new_res < (1.0 - ARMIJO_C * t) * res:
                ok = True
                break
            t *= 0.5
        trace.append({"iter": it, "residual": res, "step": t, "backtracks": bt})
        if not ok:
            message = "line search failed to reduce the residual"
            break
        u = u + t * d
        res = new_res
        if u.max() > blowup_threshold:
            blow = True
            message = "state escaped upward during polish"
            break
    converged = res < tol and not blow and not message
    final = prob.energy(u, eps)
    return SolveReport(
        state=u, energy=final, residual_norm=res, iterations=it,
        line_search_trace=trace, converged=converged,
        blowup_flag=blow or final.blowup_flag, method="minimize", eps=eps,
        gauss_bonnet=prob.gauss_bonnet_residual(u), message=message,
    )


# -- concentrated test functions ---------------------------------------------


MU_RATIOS = (1.5, 1.3, 1.2, 1.1, 1.05, 1.02, 1.01, 1.005, 1.002, 1.001)


def _distance2(prob: Problem, q: np.ndarray) -> np.ndarray:
    xy = prob.mesh.dof_coords
    dx = xy[:, 0] - q[0]
    if prob.mesh.spec.kind == "cylinder":
        dx = (dx + math.pi) % (2.0 * math.pi) - math.pi
    dy = xy[:, 1] - q[1]
    return dx**2 + dy**2


def build_u1(prob: Problem, point: BoundaryPoint, q2: float = 0.1,
             mu_ratios: Sequence[float] = MU_RATIOS,
             delta: Optional[float] = None,
             u0: Optional[np.ndarray] = None, eps: float = 0.0,
             below: Optional[float] = None) -> np.ndarray:
    """Concentrated state of negative energy near a boundary point.

    Walks a schedule of bubbles centered at q = point + q2 * n (outside
    the surface) and returns the first whose energy falls below
    ``below`` (zero by default) and whose boundary mass exceeds
    ``delta``, the separation level below which states are
    indistinguishable from the flat end u0.  Fails when the schedule
    exhausts, which is the expected outcome wherever the boundary ratio
    h/sqrt(|K|) stays at or below one.
    """
    if u0 is None:
        u0 = prob.zero_state() - 16.0
    if delta is None:
        delta = 0.5 * prob.ops.boundary_integral(np.exp(0.5 * u0))
    if below is None:
        below = 0.0
    q = point.coords + q2 * point.normal
    d2 = _distance2(prob, q)
    logK = np.log(-prob.K_dof)
    for ratio in mu_ratios:
        mu = ratio / q2
        wall = mu**2 * d2 - 1.0
        if wall.min() <= 0:
            continue
        phi = np.log(4.0 * mu**2) - 2.0 * np.log(wall) - logK
        e = prob.energy(phi, eps)
        if e.total_eps < below and prob.ops.boundary_integral(np.exp(0.5 * phi)) > delta:
            return phi
    raise RuntimeError(
        "test function schedule exhausted without reaching a negative level;"
        " the boundary ratio may not exceed one near the anchor point")


# -- path deformation ---------------------------------------------------------


def _resample_path(prob: Problem, pts: np.ndarray) -> np.ndarray:
    """Even arclength spacing in the H1 metric, endpoints pinned."""
    diffs = np.diff(pts, axis=0)
    seg = np.sqrt(np.maximum(
        np.einsum("jn,jn->j", diffs, (prob.ops.B @ diffs.T).T), 0.0))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        raise ValueError("path endpoints coincide")
    targets = np.linspace(0.0, total, len(pts))
    out = np.empty_like(pts)
    out[0], out[-1] = pts[0], pts[-1]
    j = 0
    for i in range(1, len(pts) - 1):
        s = targets[i]
        while cum[j + 1] < s:
            j += 1
        frac = (s - cum[j]) / seg[j] if seg[j] > 0 else 0.0
        out[i] = pts[j] + frac * diffs[j]
    return out


def mountain_pass(prob: Problem, eps: float, u0: np.ndarray, u1: np.ndarray,
                  n_points: int = 17, tol: float = 1e-8,
                  max_sweeps: int = 1000, switch_tol: float = 1e-3,
                  inner_steps: int = 3, stall_limit: int = 40,
                  blowup_threshold: float = BLOWUP_SUP) -> SolveReport:
    """Deform the segment [u0, u1] until its maximum is near-critical,
    then polish that maximum with Newton.

    Each sweep applies a few H1-preconditioned descent steps to the
    current path maximum and re-spaces the path at even H1 arclength.
    Sweeping stops when the max-point residual is small or the running
    pass level stops improving (the coarse path then straddles the
    saddle, and the polish finishes from the best state seen).  If the
    running maximum ever drops to the endpoint level the landscape has
    no pass between the endpoints and :class:`PathCollapseError` is
    raised.
    """
    ts = np.linspace(0.0, 1.0, n_points)[:, None]
    pts = (1.0 - ts) * np.asarray(u0, float)[None, :] + ts * np.asarray(u1, float)[None, :]
    energies = np.array([prob.energy(v, eps).total_eps for v in pts])
    e_end = max(energies[0], energies[-1])
    collapse_level = e_end + 1e-9 * (1.0 + abs(e_end))
    trace: list[dict] = []
    best_level = math.inf
    best_state = pts[1 + int(np.argmax(energies[1:-1]))].copy()
    stall = 0
    for sweep in range(max_sweeps):
        if energies.max() <= collapse_level:
            raise PathCollapseError(
                "path maximum fell to the endpoint level: no pass between the endpoints")
        # endpoints stay pinned; only interior points may move
        k = 1 + int(np.argmax(energies[1:-1]))
        g = prob.gradient(pts[k], eps)
        res = prob.dual_norm(g)
        trace.append({"sweep": sweep, "max_index": k, "level": energies[k],
                      "residual": res})
        if energies[k] < best_level - 1e-6 * (1.0 + abs(best_level)):
            best_level = energies[k]
            best_state = pts[k].copy()
            stall = 0
        else:
            stall += 1
        if res < switch_tol or stall >= stall_limit:
            break
        for _ in range(inner_steps):
            d = -prob.ops.solve_B(g)
            gd = float(g @ d)
            t, ok = 1.0, False
            for _bt in range(30):
                trial = prob.energy(pts[k] + t * d, eps).total_eps
                if trial <= energies[k] + ARMIJO_C * t * gd:
                    ok = True
                    break
                t *= 0.5
            if not ok:
                break
            pts[k] = pts[k] + t * d
            energies[k] = trial
            g = prob.gradient(pts[k], eps)
        pts = _resample_path(prob, pts)
        energies = np.array([prob.energy(v, eps).total_eps for v in pts])

    polished = newton_polish(prob, best_state, eps=eps, tol=tol,
                             blowup_threshold=blowup_threshold)
    report = SolveReport(
        state=polished.state, energy=polished.energy,
        residual_norm=polished.residual_norm,
        iterations=len(trace) + polished.iterations,
        line_search_trace=trace + polished.line_search_trace,
        converged=polished.converged, blowup_flag=polished.blowup_flag,
        method="mountain-pass", eps=eps,
        gauss_bonnet=polished.gauss_bonnet, message=polished.message,
        path=PathState(points=pts, energies=energies,
                       max_index=int(np.argmax(energies))),
    )
    return report


def _constant_start(prob: Problem, eps: float) -> float:
    """Constant minimizing the relaxed energy; the -eps u term lifts the
    deep end, so a finite minimizer exists for every positive eps."""
    from scipy.optimize import minimize_scalar

    ones = np.ones(prob.n_dof)
    res = minimize_scalar(lambda c: prob.energy(c * ones, eps).total_eps,
                          bounds=(-60.0, 10.0), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def relaxed_endpoints(prob: Problem, point: BoundaryPoint, eps: float,
                      q2: float = 0.1, tol: float = 1e-8) -> tuple[SolveReport, np.ndarray]:
    """Pass endpoints adapted to the relaxation weight: the stable low
    state (a certified local minimum of the relaxed energy, found from
    the best constant) and a concentrated state strictly below it."""
    c0 = _constant_start(prob, eps)
    low = minimize(prob, eps=eps, init=np.full(prob.n_dof, c0), tol=tol)
    level = low.energy.total_eps
    u1 = build_u1(prob, point, q2=q2, eps=eps,
                  below=level - 0.01 * (1.0 + abs(level)),
                  u0=low.state)
    return low, u1


def continuation(prob: Problem, point: BoundaryPoint,
                 eps_schedule: Sequence[float] = (0.05, 0.02, 0.01, 0.005),
                 tol: float = 1e-8, n_points: int = 17, q2: float = 0.1,
                 blowup_threshold: float = BLOWUP_SUP,
                 with_index: bool = True) -> list[SolveReport]:
    """Mountain-pass solve at the first relaxation weight, then warm
    started Newton polishes down the schedule.

    Stops early with the blow-up flag set when a state escapes above the
    threshold, which is the verdict the relaxation family is designed to
    expose.  Each report carries the Morse index of the relaxed form at
    its state when ``with_index`` is set.
    """
    reports: list[SolveReport] = []
    u = None
    for eps in eps_schedule:
        if u is None:
            low, u1 = relaxed_endpoints(prob, point, eps, q2=q2, tol=tol)
            rep = mountain_pass(prob, eps, low.state, u1, n_points=n_points,
                                tol=tol, blowup_threshold=blowup_threshold)
        else:
            rep = newton_polish(prob, u, eps=eps, tol=tol,
                                blowup_threshold=blowup_threshold)
            if not rep.converged and not rep.blowup_flag:
                low, u1 = relaxed_endpoints(prob, point, eps, q2=q2, tol=tol)
                rep = mountain_pass(prob, eps, low.state, u1, n_points=n_points,
                                    tol=tol, blowup_threshold=blowup_threshold)
            rep.method = "continuation"
        rep.eps = eps
        if with_index and not rep.blowup_flag:
            from .spectral import morse_index
            rep.morse_index = morse_index(prob, rep.state, eps=eps).negative_count
        reports.append(rep)
        if rep.blowup_flag:
            break
        u = rep.state
    return reports

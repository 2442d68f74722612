import json

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from prescurv.domain import DomainSpec, build_mesh
from prescurv.energy import Problem
from prescurv.exact import annulus_gamma_problem, annulus_gamma_state
from prescurv.fields import CurvatureSpec, background_for
from prescurv.solve import (
    PathCollapseError,
    build_u1,
    continuation,
    minimize,
    mountain_pass,
    newton_polish,
    relaxed_endpoints,
    _resample_path,
)
from prescurv.spectral import morse_index


def cylinder_problem(h, K_bg, level=3, L=1.0):
    mesh = build_mesh(DomainSpec("cylinder", L=L, level=level))
    return Problem(mesh, CurvatureSpec(K=-1.0, h=[h, h], K_bg=K_bg))


def saddle_problem(level=3, r=0.8):
    mesh = build_mesh(DomainSpec("annulus", r=r, level=level))
    K_bg, h_bg = background_for(mesh)
    spec = CurvatureSpec(K=-1.0, h=[2.0, -3.0], K_bg=K_bg, h_bg=h_bg)
    return Problem(mesh, spec)


def shooting_profile(K_bg, K0, h0, L):
    """Independent 1-d oracle: symmetric two-point Robin problem solved by
    midpoint shooting, u'' = 2 K_bg - 2 K0 e^u with u'(L) = 2 h0 e^{u(L)/2}."""

    def shoot(m):
        return solve_ivp(lambda t, y: [y[1], 2 * K_bg - 2 * K0 * np.exp(y[0])],
                         (L / 2, L), [m, 0.0], method="DOP853",
                         rtol=1e-12, atol=1e-14, dense_output=True)

    def defect(m):
        s = shoot(m)
        return s.y[1][-1] - 2 * h0 * np.exp(s.y[0][-1] / 2)

    sol = shoot(brentq(defect, -10.0, 4.0, xtol=1e-13))

    def u(t):
        t = np.asarray(t, dtype=float)
        return sol.sol(np.where(t < L / 2, L - t, t))[0]

    return u


class TestMinimize:
    def test_negative_background_regime_from_zero(self):
        prob = cylinder_problem(h=0.5, K_bg=-1.0)
        rep = minimize(prob, tol=1e-10)
        assert rep.converged
        assert rep.residual_norm < 1e-10
        assert abs(rep.gauss_bonnet) < 1e-9
        assert rep.min_eigenvalue is not None and rep.min_eigenvalue > 0
        assert rep.method == "minimize"
        # Armijo phase decreases the energy monotonically
        es = [t["energy"] for t in rep.line_search_trace if t["mode"] == "armijo"]
        assert all(b < a for a, b in zip(es, es[1:]))

    def test_matches_shooting_oracle(self):
        prob = cylinder_problem(h=0.5, K_bg=-1.0, level=3)
        rep = minimize(prob, tol=1e-10)
        oracle = shooting_profile(-1.0, -1.0, 0.5, 1.0)
        err = np.max(np.abs(rep.state - oracle(prob.mesh.dof_coords[:, 1])))
        assert err < 5e-3  # level-3 discretization error
        assert morse_index(prob, rep.state).negative_count == 0

    def test_zero_background_regime_negative_level(self):
        prob = cylinder_problem(h=0.5, K_bg=0.0)
        rep = minimize(prob, tol=1e-10)
        assert rep.converged
        assert rep.energy.total < 0
        assert morse_index(prob, rep.state).negative_count == 0

    def test_quadratic_convergence_from_exact_interpolant(self):
        mesh = build_mesh(DomainSpec("annulus", r=0.5, level=3))
        prob = annulus_gamma_problem(mesh, gamma=2, h1=2.0)
        init = annulus_gamma_state(mesh, gamma=2, h1=2.0)
        rep = minimize(prob, init=init, tol=1e-10, certify=False)
        assert rep.converged
        assert rep.iterations <= 5
        assert rep.residual_norm < 1e-10

    def test_certificate_rejects_saddle_family(self):
        # the power-family state with outer ratio 2 is a critical point of
        # positive index, so the minimum certificate must refuse it
        mesh = build_mesh(DomainSpec("annulus", r=0.5, level=3))
        prob = annulus_gamma_problem(mesh, gamma=2, h1=2.0)
        init = annulus_gamma_state(mesh, gamma=2, h1=2.0)
        rep = minimize(prob, init=init, tol=1e-10)
        assert not rep.converged
        assert rep.residual_norm < 1e-10
        assert rep.min_eigenvalue < 0
        assert "not a local minimum" in rep.message

    def test_uniqueness_for_nonpositive_boundary_data(self):
        prob = cylinder_problem(h=-0.5, K_bg=-1.0, level=2)
        rng = np.random.default_rng(7)
        states = []
        for _ in range(3):
            rep = minimize(prob, init=rng.uniform(-2, 2, prob.n_dof), tol=1e-12)
            assert rep.converged
            states.append(rep.state)
        for s in states[1:]:
            assert np.max(np.abs(s - states[0])) < 1e-8

    def test_blowup_flag_on_escape(self):
        prob = cylinder_problem(h=0.5, K_bg=-1.0, level=2)
        rep = minimize(prob, tol=1e-10, blowup_threshold=1.0)
        assert rep.blowup_flag
        assert not rep.converged

    def test_report_serialization(self):
        prob = cylinder_problem(h=-0.5, K_bg=-1.0, level=1)
        rep = minimize(prob, tol=1e-10)
        d = json.loads(rep.to_json())
        assert d["converged"] is True
        assert d["method"] == "minimize"
        assert len(d["state"]) == prob.n_dof
        slim = rep.as_dict(include_state=False)
        assert "state" not in slim


class TestNewtonPolish:
    def test_polish_recovers_saddle_from_nearby(self):
        prob = saddle_problem(level=3)
        p = prob.mesh.boundary_point(0, 0)
        low, u1 = relaxed_endpoints(prob, p, eps=0.05)
        rep = mountain_pass(prob, 0.05, low.state, u1, tol=1e-10)
        assert rep.converged
        rng = np.random.default_rng(1)
        jiggled = rep.state + 0.01 * rng.standard_normal(prob.n_dof)
        back = newton_polish(prob, jiggled, eps=0.05, tol=1e-10)
        assert back.converged
        assert back.residual_norm < 1e-10
        # constant boundary data makes the saddle a rotational orbit, so the
        # polished state may land on a rotated copy; compare orbit invariants
        assert abs(back.energy.total_eps - rep.energy.total_eps) < 1e-8
        assert abs(back.sup - rep.sup) < 1e-3
        assert morse_index(prob, back.state, eps=0.05).negative_count == 1


class TestBuildU1:
    def test_negative_energy_on_saddle_data(self):
        prob = saddle_problem(level=3)
        p = prob.mesh.boundary_point(0, 0)
        u1 = build_u1(prob, p)
        e = prob.energy(u1)
        assert e.total < 0
        u0 = prob.zero_state() - 16.0
        delta = 0.5 * prob.ops.boundary_integral(np.exp(0.5 * u0))
        assert prob.ops.boundary_integral(np.exp(0.5 * u1)) > delta

    def test_exhausts_when_ratio_below_one(self):
        mesh = build_mesh(DomainSpec("annulus", r=0.8, level=2))
        K_bg, h_bg = background_for(mesh)
        spec = CurvatureSpec(K=-1.0, h=[0.5, 0.5], K_bg=K_bg, h_bg=h_bg)
        prob = Problem(mesh, spec)
        with pytest.raises(RuntimeError, match="schedule exhausted"):
            build_u1(prob, mesh.boundary_point(0, 0))

    def test_concentrates_at_the_anchor(self):
        prob = saddle_problem(level=3)
        p = prob.mesh.boundary_point(0, 0)
        u1 = build_u1(prob, p)
        xy = prob.mesh.dof_coords
        d2 = np.sum((xy - p.coords) ** 2, axis=1)
        assert d2[np.argmax(u1)] < 0.05


class TestMountainPass:
    def test_finds_index_one_saddle(self):
        prob = saddle_problem(level=3)
        p = prob.mesh.boundary_point(0, 0)
        low, u1 = relaxed_endpoints(prob, p, eps=0.05)
        rep = mountain_pass(prob, 0.05, low.state, u1, tol=1e-8)
        assert rep.converged
        assert rep.residual_norm < 1e-6
        assert rep.method == "mountain-pass"
        assert morse_index(prob, rep.state, eps=0.05).negative_count == 1
        # the saddle level separates the endpoints
        assert rep.energy.total_eps > low.energy.total_eps
        assert rep.energy.total_eps > prob.energy(u1, 0.05).total_eps

    def test_path_state_consistency(self):
        prob = saddle_problem(level=3)
        p = prob.mesh.boundary_point(0, 0)
        low, u1 = relaxed_endpoints(prob, p, eps=0.05)
        rep = mountain_pass(prob, 0.05, low.state, u1, n_points=9, tol=1e-8)
        path = rep.path
        assert path.points.shape == (9, prob.n_dof)
        recomputed = [prob.energy(v, 0.05).total_eps for v in path.points]
        assert np.allclose(recomputed, path.energies)
        assert path.max_index == int(np.argmax(path.energies))
        # endpoints stay pinned to the inputs
        assert np.array_equal(path.points[0], low.state)
        assert np.array_equal(path.points[-1], u1)

    def test_collapse_on_convex_landscape(self):
        # nonpositive boundary data: the energy is convex, every segment
        # has its maximum at an endpoint, so no pass exists
        prob = cylinder_problem(h=-0.5, K_bg=-1.0, level=2)
        rep = minimize(prob, tol=1e-10)
        bump = rep.state + 1.0
        with pytest.raises(PathCollapseError):
            mountain_pass(prob, 0.0, rep.state, bump, tol=1e-8)


class TestResample:
    def test_even_arclength_sampling(self):
        prob = cylinder_problem(h=-0.5, K_bg=-1.0, level=1)
        rng = np.random.default_rng(3)
        n = prob.n_dof
        pts = np.cumsum(rng.standard_normal((7, n)), axis=0)
        out = _resample_path(prob, pts)
        assert np.array_equal(out[0], pts[0])
        assert np.array_equal(out[-1], pts[-1])
        # oracle: interpolate the input polyline at even fractions of its
        # cumulative metric arclength
        diffs = np.diff(pts, axis=0)
        B = prob.ops.B
        seg = np.sqrt(np.einsum("jn,jn->j", diffs, (B @ diffs.T).T))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        targets = np.linspace(0.0, s[-1], len(pts))
        for j, t in enumerate(targets[1:-1], start=1):
            k = np.searchsorted(s, t, side="right") - 1
            w = (t - s[k]) / (s[k + 1] - s[k])
            expected = (1 - w) * pts[k] + w * pts[k + 1]
            assert np.allclose(out[j], expected, atol=1e-10)

    def test_coincident_endpoints_rejected(self):
        prob = cylinder_problem(h=-0.5, K_bg=-1.0, level=1)
        pts = np.zeros((5, prob.n_dof))
        with pytest.raises(ValueError):
            _resample_path(prob, pts)


class TestContinuation:
    def test_tracks_saddle_branch(self):
        prob = saddle_problem(level=3)
        p = prob.mesh.boundary_point(0, 0)
        reports = continuation(prob, p, eps_schedule=(0.05, 0.02), tol=1e-8)
        assert len(reports) == 2
        assert all(r.converged for r in reports)
        assert [r.eps for r in reports] == [0.05, 0.02]
        assert reports[0].method == "mountain-pass"
        assert reports[1].method == "continuation"
        assert all(r.morse_index == 1 for r in reports)
        assert abs(reports[1].sup - reports[0].sup) < 1.0

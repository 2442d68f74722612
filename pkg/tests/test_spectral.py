import numpy as np
import pytest
import scipy.sparse as sp

from prescurv.domain import DomainSpec, build_mesh
from prescurv.energy import Problem
from prescurv.exact import bubble_profile, oneD_profile
from prescurv.fields import CurvatureSpec
from prescurv.spectral import (
    disk_form_report,
    disk_truncation_radius,
    halfplane_profile_index,
    morse_index,
    negative_count,
    rescaled_profile_index,
)


def random_inertia_matrix(rng, n, n_neg):
    """Sparse-ish symmetric matrix with exactly n_neg negative eigenvalues."""
    vals = np.concatenate([
        -rng.uniform(0.5, 3.0, size=n_neg),
        rng.uniform(0.1, 5.0, size=n - n_neg),
    ])
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return sp.csr_matrix(q @ np.diag(vals) @ q.T), n_neg


def test_negative_count_dense_path():
    rng = np.random.default_rng(0)
    Q, k = random_inertia_matrix(rng, 40, 7)
    rep = negative_count(Q)
    assert rep.negative_count == k
    assert rep.converged


def test_negative_count_iterative_path_and_escalation():
    # above the dense cutoff, with more negatives than the initial block
    rng = np.random.default_rng(1)
    n = 700
    diag = rng.uniform(0.5, 2.0, size=n)
    diag[:23] = -rng.uniform(0.5, 2.0, size=23)
    Q = sp.diags(diag).tocsr()
    rep = negative_count(Q, k0=4)
    assert rep.negative_count == 23
    assert rep.converged
    assert rep.k_used >= 24


def test_negative_count_psd():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((30, 30))
    rep = negative_count(sp.csr_matrix(A @ A.T))
    assert rep.negative_count == 0


def test_convex_problem_has_index_zero():
    mesh = build_mesh(DomainSpec("cylinder", L=1.0, level=2))
    spec = CurvatureSpec(K=-1.0, h=[-0.5, -0.25], K_bg=-1.0)
    prob = Problem(mesh, spec)
    rng = np.random.default_rng(3)
    u = rng.uniform(-1.0, 1.0, size=mesh.n_dof)
    assert morse_index(prob, u).negative_count == 0


def test_boundary_layer_instability_grows_with_state():
    # for h/sqrt(|K|) > sqrt(2) a constant state has a boundary layer of
    # negative directions, one per tangential mode m < c e^{u/2}, so the
    # count climbs with u; this also exercises the k escalation path
    mesh = build_mesh(DomainSpec("cylinder", L=1.0, level=2))
    spec = CurvatureSpec(K=-1.0, h=[3.0, 3.0], K_bg=0.0)
    prob = Problem(mesh, spec)
    counts = [morse_index(prob, np.full(mesh.n_dof, c)).negative_count
              for c in (-4.0, 0.0, 2.0)]
    assert counts[0] >= 1
    assert counts[0] < counts[1] < counts[2]


def test_oneD_truncation_index_zero():
    mesh = build_mesh(DomainSpec("halfdisk", R=8.0, level=3, grade=2.0))
    rep = halfplane_profile_index(mesh, oneD_profile(lam=1.0))
    assert rep.converged
    assert rep.negative_count == 0


def test_bubble_truncation_index_one():
    mesh = build_mesh(DomainSpec("halfdisk", R=8.0, level=3, grade=2.0))
    rep = halfplane_profile_index(mesh, bubble_profile(lam=1.0, h0=np.sqrt(2.0)))
    assert rep.converged
    assert rep.negative_count == 1


def test_bubble_index_stable_under_refinement():
    mesh = build_mesh(DomainSpec("halfdisk", R=8.0, level=4, grade=2.0))
    rep = halfplane_profile_index(mesh, bubble_profile(lam=1.0, h0=np.sqrt(2.0)))
    assert rep.negative_count == 1


def test_rescaled_limit_index_grows_with_truncation():
    counts = []
    for R in (5.0, 10.0):
        mesh = build_mesh(DomainSpec("halfdisk", R=R, level=3))
        counts.append(rescaled_profile_index(mesh, 2.0).negative_count)
    assert counts[0] >= 1
    assert counts[1] > counts[0]


def test_rescaled_limit_rejects_other_domains():
    mesh = build_mesh(DomainSpec("cylinder", L=1.0, level=1))
    with pytest.raises(ValueError):
        rescaled_profile_index(mesh, 2.0)


def test_disk_truncation_radius():
    assert disk_truncation_radius(1.0 + 1e-9) == pytest.approx(1.0, abs=1e-4)
    assert disk_truncation_radius(2.0) == pytest.approx(2.0 - np.sqrt(3.0))
    with pytest.raises(ValueError):
        disk_truncation_radius(0.9)


@pytest.mark.parametrize("D0", [1.2, 2.0])
def test_disk_form_single_negative_direction(D0):
    rep = disk_form_report(D0, n_r=1500)
    assert rep.negative_count == 1
    assert rep.radial_eigenvalue < 0
    # the one negative direction is radial; higher modes are stable
    assert rep.mode_counts[0][1] == 1
    assert rep.mode_counts[1][1] == 0


def test_disk_form_radial_vector_matches_eigenfunction():
    rep = disk_form_report(1.5, n_r=1500)
    assert rep.correlation_with_gamma > 0.999
    # same qualitative shape as (1+r^2)/(1-r^2): positive and increasing
    assert np.all(rep.radial_vector > 0)
    assert np.all(np.diff(rep.radial_vector) > -1e-12)


def test_disk_form_kernel_fields_are_flat():
    for D0 in (1.2, 2.0):
        rep = disk_form_report(D0, n_r=1500)
        assert rep.kernel_rayleigh < 1e-5


def test_disk_form_kernel_rayleigh_refines():
    coarse = disk_form_report(1.5, n_r=400).kernel_rayleigh
    fine = disk_form_report(1.5, n_r=1600).kernel_rayleigh
    assert fine < coarse / 4

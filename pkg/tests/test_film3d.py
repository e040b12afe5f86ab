import math

import numpy as np
import pytest

from nemfilm.elastic import AnchoringParams, ElasticConstants, LdGParams, f_e, ldg_for_modulus
from nemfilm.errors import AdmissibilityError, FoldError, InvalidInputError
from nemfilm.film3d import (
    FilmParams,
    ShellField,
    ShellGrid,
    SurfaceField,
    build_recovery,
    F_eps,
    fold_bound,
    full_gradient,
    gamma_rate,
    limit_energy,
    phi_matrix,
    remnant_field,
    shape_operator_ambient,
    surface_gradient_field,
    write_rate_csv,
    write_rate_json,
)
from nemfilm.qtensor import traceless_basis
from nemfilm.reduced import PField, ReducedConfig, geometric_offset, total_energy
from nemfilm.surface import cylinder, frame_at, frustum, plane_annulus, sphere_cap

SURFACES = [frustum(0.7), cylinder(1.5), sphere_cap(2.0, 0.4, 2.0)]


def _psi(surf):
    return lambda S, TH: 0.4 * np.sin(TH) + 0.3 * (S - surf.s0)


@pytest.mark.parametrize("surf", SURFACES, ids=lambda s: s.name)
def test_phi_inverts_normal_map_differential(surf):
    rng = np.random.default_rng(0)
    s = rng.uniform(surf.s0, surf.s1, 50)
    th = rng.uniform(0, 2 * np.pi, 50)
    t = rng.uniform(-1, 1, 50)
    eps = 0.5 * fold_bound(surf)
    W = shape_operator_ambient(surf, s, th)
    P = phi_matrix(surf, s, th, t, eps)
    A = np.eye(3) + eps * t[:, None, None] * W
    np.testing.assert_allclose(P @ A, np.broadcast_to(np.eye(3), A.shape), atol=1e-12)
    # first-order expansion Phi = I - eps t W + O(eps^2)
    errs = []
    for e in (1e-2, 5e-3):
        P = phi_matrix(surf, s, th, t, e)
        errs.append(np.abs(P - (np.eye(3) - e * t[:, None, None] * W)).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_phi_is_identity_on_plane():
    surf = plane_annulus()
    P = phi_matrix(surf, surf.sample(5), np.zeros(5), np.ones(5), 10.0)
    np.testing.assert_allclose(P, np.broadcast_to(np.eye(3), P.shape), atol=1e-15)
    assert math.isinf(fold_bound(surf))


def test_fold_detected():
    surf = cylinder(1.0)
    assert fold_bound(surf) == pytest.approx(1.0)
    with pytest.raises(FoldError):
        ShellGrid(surf, 1.0)
    with pytest.raises(FoldError):
        phi_matrix(surf, 0.5, 0.0, 1.0, 1.2)
    with pytest.raises(InvalidInputError):
        ShellGrid(surf, 0.1, nt=2)


def test_constant_ambient_field_has_zero_gradient():
    surf = sphere_cap()
    grid = ShellGrid(surf, 0.2, 12, 16, 5)
    C = traceless_basis()[1] + 0.3 * traceless_basis()[4]
    f = ShellField.from_function(grid, lambda S, TH, T: np.broadcast_to(C, S.shape + (3, 3)))
    np.testing.assert_allclose(full_gradient(f), 0.0, atol=1e-13)


@pytest.mark.parametrize("surf", SURFACES, ids=lambda s: s.name)
def test_gradient_of_linear_ambient_field(surf):
    # Q(X) = sum_k X_k C_k has ambient gradient C_k[i, j] in slot k
    E = traceless_basis()
    C = np.stack([E[0] + E[3], E[1] - 0.5 * E[2], E[4]])
    exact = np.moveaxis(C, 0, -1)

    def fn_for(grid):
        def fn(S, TH, T):
            fr = frame_at(surf, S, TH)
            X = surf.point(S, TH) + grid.eps * T[..., None] * fr.nu
            return np.einsum("...k,kij->...ij", X, C)

        return fn

    errs = []
    for n in (16, 32):
        grid = ShellGrid(surf, 0.3 * fold_bound(surf) if math.isfinite(fold_bound(surf)) else 0.3, n, 2 * n, 5)
        G = full_gradient(ShellField.from_function(grid, fn_for(grid)))
        errs.append(np.abs(G - exact).max())
    assert errs[1] < 0.02
    assert errs[0] / errs[1] > 3.5


def test_plane_shell_energy_is_twice_surface_energy():
    surf = plane_annulus(1.0, 1.0)
    params = FilmParams(ElasticConstants(0.0, 0.0), ldg_for_modulus(1.0, -1 / 3, 0.5))
    Q0 = SurfaceField.from_director_angle(surf, 17, 32, _psi(surf))
    for eps in (0.5, 0.05):
        grid = ShellGrid(surf, eps, 17, 32, 5)
        f = ShellField(grid, np.repeat(Q0.Q[:, :, None], 5, axis=2))
        assert F_eps(f, params) == pytest.approx(limit_energy(Q0, params), rel=1e-12)
        dens = f_e(surface_gradient_field(Q0), params.elastic)
        surf_energy = float(np.sum(dens * grid.surface_weights()))
        no_bulk = F_eps(f, FilmParams(params.elastic, LdGParams(A=1.0, delta=1e12)))
        assert no_bulk == pytest.approx(2 * surf_energy, rel=1e-12)


def test_normal_variation_costs_inverse_eps_squared():
    # a t-dependent profile on a flat shell pays |d_t Q|^2 / eps^2
    surf = plane_annulus(1.0, 1.0)
    params = FilmParams(ElasticConstants(0.0, 0.0), LdGParams(A=1.0, delta=1e12))
    C = traceless_basis()[2]
    vals = []
    for eps in (0.1, 0.05):
        grid = ShellGrid(surf, eps, 9, 16, 5)
        f = ShellField.from_function(grid, lambda S, TH, T: T[..., None, None] * C)
        vals.append(F_eps(f, params))
    area = math.pi * (2.0**2 - 1.0)
    assert vals[0] == pytest.approx(0.5 * 2 * area / 0.1**2, rel=1e-12)
    assert vals[1] / vals[0] == pytest.approx(4.0, rel=1e-12)


def test_recovery_is_constant_in_t_for_one_constant():
    surf = frustum(0.9)
    params = FilmParams(ElasticConstants(0.0, 0.0), ldg_for_modulus(1.0, -1 / 3, 0.5))
    Q0 = SurfaceField.from_director_angle(surf, 9, 16, _psi(surf))
    np.testing.assert_allclose(remnant_field(Q0, params), 0.0, atol=1e-14)
    rec = build_recovery(Q0, params, ShellGrid(surf, 0.1, 9, 16, 5))
    np.testing.assert_allclose(rec.Q - rec.Q[:, :, :1], 0.0, atol=1e-15)


def test_recovery_is_linear_in_t():
    surf = frustum(0.9)
    params = FilmParams(ElasticConstants(1.0, 0.5), ldg_for_modulus(1.0, -1 / 3, 0.5))
    Q0 = SurfaceField.from_director_angle(surf, 9, 16, _psi(surf))
    rec = build_recovery(Q0, params, ShellGrid(surf, 0.1, 9, 16, 5))
    np.testing.assert_allclose(rec.Q[:, :, 2], Q0.Q, atol=1e-15)
    np.testing.assert_allclose(rec.Q[:, :, 4] - rec.Q[:, :, 2], rec.Q[:, :, 2] - rec.Q[:, :, 0], atol=1e-15)


def test_incompatible_trace_rejected_when_anchored():
    surf = cylinder()
    Q0 = SurfaceField.from_director_angle(surf, 9, 16, _psi(surf), beta=0.2)
    params = FilmParams(anchoring=AnchoringParams(alpha0=1.0))
    with pytest.raises(AdmissibilityError):
        build_recovery(Q0, params, ShellGrid(surf, 0.1, 9, 16, 5))
    # without leading-order anchoring every Q0 is admissible
    build_recovery(Q0, FilmParams(), ShellGrid(surf, 0.1, 9, 16, 5))


def test_grid_must_match_surface_field():
    surf = cylinder()
    Q0 = SurfaceField.from_director_angle(surf, 9, 16, _psi(surf))
    with pytest.raises(InvalidInputError):
        build_recovery(Q0, FilmParams(), ShellGrid(surf, 0.1, 9, 32, 5))


@pytest.mark.parametrize(
    "M2, M3, anchoring",
    [(0.0, 0.0, AnchoringParams()), (1.0, 0.0, AnchoringParams()), (1.0, 0.5, AnchoringParams(alpha0=2.0, gamma1=1.0))],
)
def test_recovery_energy_converges(M2, M3, anchoring):
    surf = frustum(1.0)
    params = FilmParams(ElasticConstants(M2, M3), ldg_for_modulus(1.0, -1 / 3, 0.5), anchoring)
    Q0 = SurfaceField.from_director_angle(surf, 17, 32, _psi(surf))
    eps = 0.2 * fold_bound(surf) * 0.5 ** np.arange(4)
    res = gamma_rate(Q0, params, eps, nt=9)
    assert res.monotone
    assert res.order >= 0.9
    assert res.gap[-1] < res.gap[0]


def test_rate_inputs_validated(tmp_path):
    surf = cylinder(1.0)
    Q0 = SurfaceField.from_director_angle(surf, 9, 16, _psi(surf))
    with pytest.raises(FoldError):
        gamma_rate(Q0, FilmParams(), [1.5, 0.5])
    with pytest.raises(InvalidInputError):
        gamma_rate(Q0, FilmParams(), [0.1, 0.2])
    res = gamma_rate(Q0, FilmParams(ElasticConstants(1.0, 0.0)), [0.2, 0.1, 0.05], nt=5)
    write_rate_csv(tmp_path / "rate.csv", res)
    write_rate_json(tmp_path / "rate.json", res)
    lines = (tmp_path / "rate.csv").read_text().splitlines()
    assert lines[0] == "eps,F_eps,F0,gap,fitted_order"
    assert len(lines) == 4


@pytest.mark.parametrize("surf", SURFACES, ids=lambda s: s.name)
def test_limit_energy_matches_reduced_energy(surf):
    # one-constant limit density is the reduced density plus its geometric constant, doubled by the t-interval
    ldg = ldg_for_modulus(1.0, -1 / 3, 0.5)
    params = FilmParams(ElasticConstants(0.0, 0.0), ldg)
    psi = _psi(surf)
    s = surf.sample(4001)
    offset = 2 * math.pi * np.trapezoid(geometric_offset(s, surf, -1 / 3) * surf.a1(s), s)
    errs = []
    for ns in (33, 65):
        Q0 = SurfaceField.from_director_angle(surf, ns, 2 * ns - 2, psi)
        pf = PField.from_function(surf, ns, 2 * ns - 2, lambda S, TH: (np.cos(2 * psi(S, TH)), np.sin(2 * psi(S, TH))))
        reduced = total_energy(pf, ReducedConfig(surf, ldg=ldg)) + offset
        errs.append(abs(limit_energy(Q0, params) / reduced - 2.0))
    assert errs[1] < 1e-2
    assert errs[0] / errs[1] > 3.0


def test_limit_energy_grid_convergence():
    surf = sphere_cap()
    params = FilmParams(ElasticConstants(1.0, 0.5), ldg_for_modulus(1.0, -1 / 3, 0.5))
    vals = [limit_energy(SurfaceField.from_director_angle(surf, n + 1, 2 * n, _psi(surf)), params) for n in (16, 32, 64)]
    assert abs(vals[0] - vals[1]) / abs(vals[1] - vals[2]) == pytest.approx(4.0, rel=0.15)

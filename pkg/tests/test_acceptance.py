"""Acceptance checks, one test per criterion.

Each test carries a ``criterion`` marker; ``conftest.py`` prints a PASS/FAIL
line per criterion at the end of the run. Run only these with

    pytest tests/test_acceptance.py -v
"""

import math
import os
import time

import numpy as np
import pytest

from nemfilm.elastic import ElasticConstants, coercivity_margin, ldg_for_modulus
from nemfilm.film3d import F_eps, FilmParams, ShellField, ShellGrid, SurfaceField, gamma_rate
from nemfilm.frustum import (
    PHI0_LOWER_BOUND,
    FrustumGeometry,
    PsiProfile,
    critical_angle,
    e0_energy,
    minimize_in_sector,
    sweep,
)
from nemfilm.qtensor import traceless_basis
from nemfilm.reduced import (
    DiscreteEnergy,
    PField,
    ReducedConfig,
    density_from_tensor,
    density_sr10,
    geometric_offset,
    gradient_flow_minimize,
    winding_number,
)
from nemfilm.remnant import brute_force_G, closed_form_G, f_e0, f_e0_without_m3, f_e0_expanded, random_input
from nemfilm.surface import curvatures, cylinder, frustum, plane_annulus, sphere_cap

N_RANDOM = 1000
PHI_GRID = np.round(np.arange(0.2, 1.5001, 0.05), 10)


def _coercive_sample(rng):
    M3 = rng.uniform(-0.99, 1.99)
    M2 = rng.uniform(-0.6 - 0.1 * M3 + 1e-3, 5.0)
    return ElasticConstants(M2, M3)


@pytest.mark.criterion(1, "remnant closed form equals brute-force 5x5 solve")
def test_remnant_oracle_equivalence():
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    g_gap = v_gap = 0.0
    for _ in range(N_RANDOM):
        inp = random_input(rng, _coercive_sample(rng))
        Gb, _ = brute_force_G(inp)
        g_gap = max(g_gap, float(np.linalg.norm(closed_form_G(inp) - Gb)))
        v_gap = max(v_gap, abs(f_e0(inp, "closed") - f_e0(inp, "brute")))
    elapsed = time.perf_counter() - start
    assert g_gap <= 1e-8
    assert v_gap <= 1e-8
    assert elapsed < 10.0


@pytest.mark.criterion(2, "general reduced density reduces to the M3 = 0 formula")
def test_expanded_density_matches_m3_free_formula():
    rng = np.random.default_rng(2)
    for _ in range(N_RANDOM):
        c = ElasticConstants(rng.uniform(-0.59, 5.0), 0.0)
        inp = random_input(rng, c)
        a = f_e0_expanded(inp.gradM_Q, inp.nu, c)
        b = f_e0_without_m3(inp.gradM_Q, inp.nu, c.M2)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(b))
    for _ in range(100):
        c = ElasticConstants(0.0, 0.0)
        inp = random_input(rng, c)
        half = 0.5 * np.sum(inp.gradM_Q**2)
        assert f_e0_expanded(inp.gradM_Q, inp.nu, c) == pytest.approx(half, rel=1e-15)
        assert f_e0_without_m3(inp.gradM_Q, inp.nu, 0.0) == pytest.approx(half, rel=1e-15)


@pytest.mark.criterion(3, "coercivity margin positive inside, vanishing on the boundary")
def test_coercivity_region():
    rng = np.random.default_rng(3)
    for _ in range(N_RANDOM):
        M3 = rng.uniform(-1, 2)
        M2 = -0.6 - 0.1 * M3 + rng.uniform(0, 6)
        if not (-1 < M3 < 2 and M2 > -0.6 - 0.1 * M3):
            continue
        assert coercivity_margin(ElasticConstants(M2, M3)) > 0
    boundary = []
    for M3 in rng.uniform(-1, 2, 20):
        boundary.append((-0.6 - 0.1 * M3, M3))
    for M2 in rng.uniform(-0.5, 6, 15):
        boundary.append((M2, -1.0))
    for M2 in rng.uniform(-0.8, 6, 15):
        boundary.append((M2, 2.0))
    assert len(boundary) == 50
    for M2, M3 in boundary:
        assert coercivity_margin(ElasticConstants(M2, M3)) <= 1e-8


@pytest.mark.criterion(4, "frustum closed-form sector energies")
def test_frustum_closed_form_energies():
    for phi0 in PHI_GRID:
        g = FrustumGeometry(phi0)
        r = minimize_in_sector(0, g)
        exact = -2 * math.pi * math.sin(phi0) ** 2
        assert r.converged
        assert abs(r.energy - exact) <= 1e-6 * abs(exact)
        lin = e0_energy(PsiProfile.linear(-1), g)
        assert lin == pytest.approx(2 * math.pi - 8 * math.pi * math.cos(phi0), abs=1e-12)


@pytest.mark.criterion(5, "frustum dichotomy, critical angle, higher sectors more expensive")
def test_frustum_dichotomy():
    start = time.perf_counter()
    rows = sweep(np.append(PHI_GRID, math.pi / 2), (0, -1, -2, -3), n=256, jobs=min(4, os.cpu_count() or 1))
    table = {}
    for r in rows:
        assert r.converged
        table.setdefault(r.phi0, {})[r.k] = r.energy
    failures = []
    for phi0, e in table.items():
        if phi0 <= 1.1 and not e[-1] < e[0]:
            failures.append(f"k=-1 not below k=0 at phi0={phi0}")
    right = table[math.pi / 2]
    if not right[0] < right[-1]:
        failures.append("k=0 not below k=-1 at phi0=pi/2")
    phi_c = critical_angle((0.3, 1.5), tol=1e-3)
    if not PHI0_LOWER_BOUND <= phi_c <= 1.5708:
        failures.append(f"critical angle {phi_c} outside [1.105, 1.5708]")
    # k = -2 and k = -3 must not beat min(k=0, k=-1)
    beaten = [
        (phi0, k)
        for phi0, e in table.items()
        for k in (-2, -3)
        if e[k] < min(e[0], e[-1])
    ]
    if beaten:
        failures.append(f"higher sector below min(k=0, k=-1) at (phi0, k) = {beaten}")
    assert time.perf_counter() - start < 300
    assert not failures, "; ".join(failures)


def _smooth_q0(surf, ns=64, ntheta=128):
    return SurfaceField.from_director_angle(surf, ns, ntheta, lambda S, TH: 0.4 * np.sin(TH) + 0.3 * (S - surf.s0))


@pytest.mark.criterion(6, "recovery energies converge to the limit energy at order >= 0.9")
@pytest.mark.parametrize("M2", [0.0, 1.0])
def test_gamma_convergence_rate(M2):
    start = time.perf_counter()
    surf = cylinder(1.0)
    params = FilmParams(ElasticConstants(M2, 0.0), ldg_for_modulus(1.0, -1 / 3, 1.0))
    res = gamma_rate(_smooth_q0(surf), params, [0.1, 0.05, 0.025, 0.0125], nt=16)
    assert res.used.all()
    assert res.monotone
    assert res.order >= 0.9
    assert time.perf_counter() - start < 300


@pytest.mark.criterion(7, "normal derivative makes F_eps diverge like eps^-2")
def test_divergence_detection():
    surf = cylinder(1.0)
    params = FilmParams(ElasticConstants(1.0, 0.0), ldg_for_modulus(1.0, -1 / 3, 1.0))
    Q0 = _smooth_q0(surf, 33, 64)
    C = traceless_basis()[3]
    vals = []
    for eps in (0.1, 0.05, 0.025, 0.0125):
        grid = ShellGrid(surf, eps, 33, 64, 9)
        Q = Q0.Q[:, :, None] + grid.t[None, None, :, None, None] * C
        vals.append(F_eps(ShellField(grid, Q), params))
    ratios = np.array(vals[:-1]) / np.array(vals[1:])
    assert abs(ratios[-1] - 0.25) <= 0.025
    assert abs(ratios[-1] - 0.25) <= abs(ratios[0] - 0.25)


@pytest.mark.criterion(8, "reduced density and discrete gradient cross-checks")
def test_reduced_density_cross_check():
    rng = np.random.default_rng(8)
    n = 10_000
    for surf in (frustum(0.7), cylinder(1.5), sphere_cap(2.0, 0.4, 2.0), plane_annulus(0.5, 1.0)):
        s = rng.uniform(surf.s0, surf.s1, n)
        th = rng.uniform(0, 2 * np.pi, n)
        p, ps, pt = (rng.normal(size=(n, 2)) for _ in range(3))
        beta = rng.uniform(-1 / 3, 2 / 3)
        lhs = density_sr10(p, ps, pt, s, ReducedConfig(surf, beta=beta)) + geometric_offset(s, surf, beta)
        rhs = density_from_tensor(p, ps, pt, s, th, surf, beta)
        assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())

        cfg = ReducedConfig(surf, ldg=ldg_for_modulus(0.8, -1 / 3, 0.5))
        en = DiscreteEnergy(surf.sample(6), 12, cfg)
        x = rng.normal(size=144)
        g = en.gradient(x)
        h = 1e-5
        fd = np.array([(en.energy(x + h * e) - en.energy(x - h * e)) / (2 * h) for e in np.eye(144)])
        assert np.abs(fd - g).max() <= 1e-6 * np.abs(g).max()


@pytest.mark.criterion(9, "surface geometry is exact")
def test_geometry_exactness():
    R = 1.3
    sph = sphere_cap(R, 0.1, 3.0)
    cd = curvatures(sph, sph.sample(1001))
    assert np.abs(cd.kappa_T - 1 / R).max() <= 1e-12
    assert np.abs(cd.kappa_N - 1 / R).max() <= 1e-12
    phi0 = 0.6
    fr = frustum(phi0, 0.5, 2.0)
    s = fr.sample(1001)
    assert np.abs(curvatures(fr, s).kappa_N - math.tan(phi0) / s).max() <= 1e-12
    for surf in (sph, fr, cylinder(0.7), plane_annulus()):
        c = curvatures(surf, surf.sample(1001))
        ratio = np.linalg.det(c.secondFF) / np.linalg.det(c.firstFF)
        assert np.abs(c.gauss - ratio).max() <= 1e-10


@pytest.mark.criterion(10, "narrow cone aligns, wide cone keeps a lower-energy winding state")
def test_director_patterns():
    ns, ntheta = 64, 128

    def run(phi0, k):
        surf = frustum(phi0)
        cfg = ReducedConfig(surf, ldg=ldg_for_modulus(1.0, -1 / 3, 0.05), ns=ns, ntheta=ntheta)
        init = PField.winding(surf, k, ns, ntheta, noise=0.05, rng=np.random.default_rng(10))
        field, energy, rep = gradient_flow_minimize(init, cfg)
        assert rep.converged
        return field, energy

    narrow, _ = run(1.5, 0)
    assert winding_number(narrow, ns // 2) == 0
    assert np.abs(narrow.director_angle).max() < 1e-6

    wound, e_wound = run(0.5, -1)
    aligned, e_aligned = run(0.5, 0)
    assert winding_number(wound, ns // 2) == -1
    assert winding_number(aligned, ns // 2) == 0
    assert e_wound < e_aligned


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))

import numpy as np
import pytest
from numpy.testing import assert_allclose

from polycov.analysis import spectral_radius, verify_quadratic
from polycov.data import CrossCovBounds, CrossCovSummary, build_lagged_instruments, cross_cov_summary
from polycov.feasible import build_feasible_set
from polycov.polytope import VertexSet, enumerate_vertices, product_vertices
from polycov.reproduce import EXAMPLE1_U as EXAMPLE_U, EXAMPLE1_X as EXAMPLE_X, example1_data, example2_dataset
from polycov.synthesis import (
    CONDITION_NOT_MET,
    FEASIBLE,
    NOT_INFORMATIVE,
    EmptySetError,
    PerformanceSpec,
    SynthesisResult,
    UnsupportedSynthesis,
    result_to_json_dict,
    stabilize_quadratic,
    stabilize_scalar_unbounded,
    stabilize_scalar_unbounded_lmi,
    synth_h2,
    synth_hinf,
    synthesize_from_set,
)


def scalar_summary_bounds(c=0.25):
    data = example1_data()
    s = cross_cov_summary(data, build_lagged_instruments(data, 1))
    return s, CrossCovBounds(C_l=[[-c]], C_u=[[c]])


def four_vertex_set():
    return VertexSet(per_row=[np.array([[0.5, 1.0], [0.7, 1.0], [0.5, 1.2], [0.7, 1.2]])], n=1, m=1)


def singleton(a, b):
    return VertexSet(per_row=[np.array([[a, b]])], n=1, m=1)


class TestScalarBoundaryPath:
    def test_reference_values(self):
        res = stabilize_scalar_unbounded(*scalar_summary_bounds())
        assert res.status == FEASIBLE
        lo, hi = sorted(res.diagnostics["boundary_systems"])
        assert abs(lo - 0.6882) < 1e-3 and abs(hi - 0.8059) < 1e-3
        assert abs(res.K[0, 0] + 0.7353) < 1e-3

    def test_degenerate_equal_bounds(self):
        s, _ = scalar_summary_bounds()
        h = s.Rxr_plus[0, 0]
        bounds = CrossCovBounds(C_l=[[h]], C_u=[[h]])
        res = stabilize_scalar_unbounded(s, bounds)
        assert res.status == FEASIBLE
        assert_allclose(res.diagnostics["boundary_systems"], [0.0, 0.0], atol=1e-15)

    def test_wide_bounds_fail_condition(self):
        res = stabilize_scalar_unbounded(*scalar_summary_bounds(c=5.0))
        assert res.status == CONDITION_NOT_MET
        assert max(abs(v) for v in res.diagnostics["boundary_systems"]) > 1.0

    def test_uncorrelated_instrument_rejected(self):
        s = CrossCovSummary(Rxr_plus=[[1.0]], Rxr_minus=[[0.0]], Rur_minus=[[1.0]])
        with pytest.raises(ValueError, match="uncorrelated"):
            stabilize_scalar_unbounded(s, CrossCovBounds(C_l=[[-1.0]], C_u=[[1.0]]))

    def test_scale_invariance_of_gain(self):
        # scaling states, inputs and (quadratically) the bounds leaves K unchanged
        from polycov.data import TrajectoryData, build_lagged_instruments, cross_cov_summary

        for scale in (1e4, 1e-4):
            X = np.array(EXAMPLE_X) * scale
            U = np.array(EXAMPLE_U) * scale
            data = TrajectoryData(n=1, m=1, X=X, U_minus=U)
            s = cross_cov_summary(data, build_lagged_instruments(data, 1))
            b = CrossCovBounds(C_l=[[-0.25 * scale * scale]], C_u=[[0.25 * scale * scale]])
            for path in (stabilize_scalar_unbounded, stabilize_scalar_unbounded_lmi):
                res = path(s, b)
                assert res.status == FEASIBLE
                assert abs(res.K[0, 0] + 0.7352941176) < 1e-8

    def test_gain_stabilizes_thousand_strip_members(self):
        s, b = scalar_summary_bounds()
        res = stabilize_scalar_unbounded(s, b)
        K = res.K[0, 0]
        g = np.array([s.Rxr_minus[0, 0], s.Rur_minus[0, 0]])
        lo = s.Rxr_plus[0, 0] - b.C_u[0, 0]
        hi = s.Rxr_plus[0, 0] - b.C_l[0, 0]
        rng = np.random.default_rng(1)
        cs = rng.uniform(lo, hi, size=1000)
        free = rng.uniform(-50.0, 50.0, size=1000)
        dirn = np.array([-g[1], g[0]]) / np.linalg.norm(g)
        members = cs[:, None] * g / (g @ g) + free[:, None] * dirn
        assert np.all(np.abs(members[:, 0] + members[:, 1] * K) < 1.0)


class TestScalarLmiPath:
    def test_gain_matches_direct_path_exactly(self):
        s, b = scalar_summary_bounds()
        direct = stabilize_scalar_unbounded(s, b)
        via_lmi = stabilize_scalar_unbounded_lmi(s, b)
        assert via_lmi.status == FEASIBLE
        assert abs(via_lmi.K[0, 0] - direct.K[0, 0]) < 1e-9

    def test_wide_bounds_infeasible(self):
        res = stabilize_scalar_unbounded_lmi(*scalar_summary_bounds(c=5.0))
        assert res.status == CONDITION_NOT_MET

    def test_status_deterministic(self):
        s, b = scalar_summary_bounds()
        assert stabilize_scalar_unbounded_lmi(s, b).status == stabilize_scalar_unbounded_lmi(s, b).status

    def test_agreement_on_random_instances(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            g = rng.uniform(0.5, 3.0) * rng.choice([-1.0, 1.0])
            h = rng.uniform(-3.0, 3.0)
            u = rng.uniform(-2.0, 2.0)
            c = rng.uniform(0.05, 1.5)
            s = CrossCovSummary(Rxr_plus=[[h]], Rxr_minus=[[g]], Rur_minus=[[u]])
            b = CrossCovBounds(C_l=[[-c]], C_u=[[c]])
            r1 = stabilize_scalar_unbounded(s, b)
            r2 = stabilize_scalar_unbounded_lmi(s, b)
            assert r1.status == r2.status
            if r1.status == FEASIBLE:
                assert abs(r1.K[0, 0] - r2.K[0, 0]) < 1e-9


class TestQuadraticStabilization:
    def test_four_vertices_feasible_and_stabilizing(self):
        vs = four_vertex_set()
        res = stabilize_quadratic(vs)
        assert res.status == FEASIBLE
        K = res.K
        for sp in product_vertices(vs):
            assert spectral_radius(sp.A + sp.B @ K) < 1.0

    def test_uncontrollable_unstable_vertex(self):
        res = stabilize_quadratic(singleton(2.0, 0.0))
        assert res.status == NOT_INFORMATIVE

    def test_singleton_reduces_to_classical(self):
        res = stabilize_quadratic(singleton(1.5, 1.0))
        assert res.status == FEASIBLE
        assert spectral_radius(1.5 + res.K[0, 0]) < 1.0

    def test_status_invariant_under_vertex_permutation(self):
        verts = four_vertex_set().per_row[0]
        rng = np.random.default_rng(3)
        base = stabilize_quadratic(four_vertex_set()).status
        for _ in range(3):
            perm = rng.permutation(len(verts))
            vs = VertexSet(per_row=[verts[perm]], n=1, m=1)
            assert stabilize_quadratic(vs).status == base

    def test_certificate_reassembles_at_every_vertex(self):
        vs = four_vertex_set()
        res = stabilize_quadratic(vs)
        Y, M = res.certificates["Y"], res.certificates["M"]
        eps = 1e-7
        for sp in product_vertices(vs):
            closed = sp.A @ Y + sp.B @ M
            block = np.block([[Y, closed.T], [closed, Y]])
            assert np.linalg.eigvalsh(block)[0] >= eps

    def test_certificate_extends_to_convex_combinations(self):
        vs = four_vertex_set()
        res = stabilize_quadratic(vs)
        rep = verify_quadratic(res.K, res.certificates["P"], vs, samples=100, seed=0)
        assert rep["passed"]
        assert max(rep["combination_max_eigs"]) < 0

    def test_empty_row_raises(self):
        vs = VertexSet(per_row=[np.zeros((0, 2))], n=1, m=1)
        with pytest.raises(ValueError, match="empty"):
            stabilize_quadratic(vs)

    def test_verdict_matches_minimax_ground_truth(self):
        # scalar case: informativity holds exactly when min_k max_i |a_i + b_i k| < 1,
        # computable as a tiny LP; clear-cut random instances must agree in status
        from scipy.optimize import linprog

        rng = np.random.default_rng(77)
        checked = 0
        while checked < 30:
            verts = rng.uniform(-2.5, 2.5, size=(int(rng.integers(3, 7)), 2))
            A_ub, b_ub = [], []
            for a, b in verts:
                A_ub.append([b, -1.0])
                b_ub.append(-a)
                A_ub.append([-b, -1.0])
                b_ub.append(a)
            res = linprog([0.0, 1.0], A_ub=A_ub, b_ub=b_ub,
                          bounds=[(None, None), (None, None)], method="highs")
            best = res.x[1]
            if abs(best - 1.0) < 0.02:
                continue  # too close to the decision boundary for an exact status check
            out = stabilize_quadratic(VertexSet(per_row=[verts], n=1, m=1))
            if best < 1.0:
                assert out.status == FEASIBLE, f"minimax {best:.3f} but {out.status}"
            else:
                assert out.status == NOT_INFORMATIVE, f"minimax {best:.3f} but {out.status}"
            checked += 1


class TestHinf:
    def test_singleton_level_above_one_feasible(self):
        perf = PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=1.1, kind="hinf")
        res = synth_hinf(singleton(0.0, 1.0), perf)
        assert res.status == FEASIBLE
        assert abs(res.K[0, 0]) < 0.2  # near-zero gain is the only good choice

    def test_singleton_level_below_one_infeasible(self):
        perf = PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=0.9, kind="hinf")
        assert synth_hinf(singleton(0.0, 1.0), perf).status == NOT_INFORMATIVE

    def test_huge_level_matches_stabilizability(self):
        vs = four_vertex_set()
        perf = PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=1e6, kind="hinf")
        res = synth_hinf(vs, perf)
        assert res.status == FEASIBLE
        rep = verify_quadratic(res.K, res.certificates["Y"], vs, samples=50, seed=1)
        assert rep["passed"]

    def test_gamma_monotonicity(self):
        vs = four_vertex_set()
        seen_feasible = False
        for gamma in (0.5, 1.0, 2.0, 4.0, 16.0, 1e3):
            perf = PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=gamma, kind="hinf")
            status = synth_hinf(vs, perf).status
            if seen_feasible:
                assert status == FEASIBLE
            seen_feasible = seen_feasible or status == FEASIBLE
        assert seen_feasible

    def test_minimize_gamma_hits_analytic_optimum(self):
        perf = PerformanceSpec(C=[[1.0]], D=[[0.0]], kind="hinf")
        res = synth_hinf(singleton(0.0, 1.0), perf, minimize_gamma=True)
        assert res.status == FEASIBLE
        # best possible level for T = 1/(q - a_cl) is 1 at a_cl = 0
        assert 0.999 <= res.achieved_gamma <= 1.01

    def test_minimize_gamma_matches_gain_grid_search(self):
        # grid search over fixed gains with the analytic peak 1/(1-|K|)
        res = synth_hinf(singleton(0.0, 1.0), PerformanceSpec(C=[[1.0]], D=[[0.0]], kind="hinf"),
                         minimize_gamma=True)
        Ks = np.linspace(-0.9, 0.9, 181)
        oracle = np.min(1.0 / (1.0 - np.abs(Ks)))
        assert abs(res.achieved_gamma - oracle) <= 1e-3 * oracle


class TestH2:
    def test_singleton_levels(self):
        ok = synth_h2(singleton(0.0, 1.0), PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=1.5, kind="h2"))
        assert ok.status == FEASIBLE
        bad = synth_h2(singleton(0.0, 1.0), PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=0.5, kind="h2"))
        assert bad.status == NOT_INFORMATIVE

    def test_zero_channel_feasible_for_tiny_gamma(self):
        vs = four_vertex_set()
        perf = PerformanceSpec(C=[[0.0]], D=[[0.0]], gamma=0.01, kind="h2")
        assert synth_h2(vs, perf).status == FEASIBLE

    def test_gamma_monotonicity(self):
        vs = four_vertex_set()
        seen_feasible = False
        for gamma in (0.2, 1.0, 3.0, 10.0, 1e3):
            perf = PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=gamma, kind="h2")
            status = synth_h2(vs, perf).status
            if seen_feasible:
                assert status == FEASIBLE
            seen_feasible = seen_feasible or status == FEASIBLE
        assert seen_feasible

    def test_minimize_gamma(self):
        perf = PerformanceSpec(C=[[1.0]], D=[[0.0]], kind="h2")
        res = synth_h2(singleton(0.0, 1.0), perf, minimize_gamma=True)
        assert res.status == FEASIBLE
        assert 0.999 <= res.achieved_gamma <= 1.01


class TestDispatch:
    def test_scalar_unbounded_stab(self):
        data = example1_data()
        s = cross_cov_summary(data, build_lagged_instruments(data, 1))
        fset = build_feasible_set(s, CrossCovBounds(C_l=[[-0.25]], C_u=[[0.25]]))
        res = synthesize_from_set(fset, "stab")
        assert res.status == FEASIBLE
        assert abs(res.K[0, 0] + 0.7353) < 1e-3

    def test_unbounded_rejects_performance(self):
        data = example1_data()
        s = cross_cov_summary(data, build_lagged_instruments(data, 1))
        fset = build_feasible_set(s, CrossCovBounds(C_l=[[-0.25]], C_u=[[0.25]]))
        with pytest.raises(UnsupportedSynthesis):
            synthesize_from_set(fset, "hinf", perf=PerformanceSpec(C=[[1.0]], D=[[0.0]], gamma=2.0))

    def test_empty_set_refused(self):
        # opposite instrument directions with windows demanding v.g in both [2.4, 2.6] and [-2.6, -2.4]
        s = CrossCovSummary(Rxr_plus=[[2.5, 2.5]], Rxr_minus=[[1.0, -1.0]], Rur_minus=[[1.0, -1.0]])
        b = CrossCovBounds(C_l=-0.1 * np.ones((2, 1)), C_u=0.1 * np.ones((2, 1)))
        fset = build_feasible_set(s, b)
        with pytest.raises(EmptySetError):
            synthesize_from_set(fset, "stab")

    def test_bounded_stab_via_vertices(self):
        data = example2_dataset()
        instr = build_lagged_instruments(data, 3)
        bounds = CrossCovBounds(C_l=-0.1 * np.ones((3, 1)), C_u=0.1 * np.ones((3, 1)))
        fset = build_feasible_set(cross_cov_summary(data, instr), bounds)
        res = synthesize_from_set(fset, "stab")
        assert res.status == FEASIBLE
        vs = enumerate_vertices(fset)
        for sp in product_vertices(vs):
            assert spectral_radius(sp.A + sp.B @ res.K) < 1.0


class TestResultSerialization:
    def test_json_shape(self):
        res = stabilize_quadratic(four_vertex_set())
        doc = result_to_json_dict(res)
        assert doc["status"] == FEASIBLE
        assert isinstance(doc["K"], list)
        assert set(doc["certificates"]) == {"Y", "M", "P"}
        assert doc["margins"]["worst_block_min_eig"] >= doc["margins"]["required"]

    def test_json_without_gain(self):
        doc = result_to_json_dict(SynthesisResult(status=NOT_INFORMATIVE))
        assert doc["K"] is None and doc["gamma"] is None

"""Tests for the solver drivers."""

import numpy as np
import pytest

from pifslp import baselines
from pifslp.ci_model import CiInstance, generate_scenario
from pifslp.kernels import StaleCacheError
from pifslp.partition import make_partition
from pifslp.solvers import (VARIANTS, AdaptiveSpec, BlockWorker, ConfigError, DivergenceError,
                            SolverConfig, run_solver)
from pifslp.tuning import ProximalSpec

from conftest import desk_instance

JACOBI_LIKE = [v for v in VARIANTS if v != "pj_admm_pair"]


def _toy():
    sc = generate_scenario(1, 1, seed=0)
    return CiInstance(np.eye(2), np.ones(2), sc, 4)


class TestToy:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_converges_to_corner(self, variant):
        inst = _toy()
        scheme = "antenna_pair" if variant == "pj_admm_pair" else "adjacent"
        p = make_partition(2, 1 if scheme == "antenna_pair" else 2, scheme)
        res = run_solver(inst, p, SolverConfig(variant, rho=1.0, eps_x=1e-10, max_iter=20000))
        assert res.converged
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)
        assert res.power == pytest.approx(2.0, rel=1e-5)


class TestDesk:
    @pytest.mark.parametrize("variant", JACOBI_LIKE)
    def test_oracle_power(self, variant, desk, desk_partition):
        oracle = baselines.solve_oracle(desk).power
        res = run_solver(desk, desk_partition, SolverConfig(variant, eps_x=1e-6, max_iter=20000))
        assert res.converged
        rounded = baselines.feasible_round(desk, res.x)
        assert abs(rounded @ rounded - oracle) / oracle <= 5e-3
        assert rounded @ rounded >= oracle - 1e-8

    def test_pair_variant(self, desk):
        p = make_partition(32, 16, "antenna_pair")
        oracle = baselines.solve_oracle(desk).power
        res = run_solver(desk, p, SolverConfig("pj_admm_pair", eps_x=1e-6, max_iter=20000))
        assert abs(res.power - oracle) / oracle <= 5e-3

    def test_pair_needs_pair_partition(self, desk, desk_partition):
        with pytest.raises(ConfigError):
            run_solver(desk, desk_partition, SolverConfig("pj_admm_pair"))

    def test_decentralized_agrees(self, desk, desk_partition):
        a = run_solver(desk, desk_partition, SolverConfig("pj_admm", eps_x=1e-8, max_iter=20000))
        b = run_solver(desk, desk_partition, SolverConfig("decentralized_pj", eps_x=1e-8, max_iter=20000))
        assert abs(a.power - b.power) / a.power <= 1e-4

    def test_gauss_seidel_trace_differs_limit_agrees(self, desk, desk_partition):
        a = run_solver(desk, desk_partition, SolverConfig("pj_alm", eps_x=1e-8, max_iter=20000))
        b = run_solver(desk, desk_partition, SolverConfig("gauss_seidel", eps_x=1e-8, max_iter=20000))
        assert a.trace[1].power != b.trace[1].power
        assert abs(a.power - b.power) / a.power <= 1e-4

    def test_svd_matches_general_trace(self, desk, desk_partition):
        a = run_solver(desk, desk_partition, SolverConfig("pj_admm", record_iterates=True, max_iter=50))
        b = run_solver(desk, desk_partition, SolverConfig("pj_admm_svd", record_iterates=True, max_iter=50))
        for (xa, _), (xb, _) in zip(a.iterates, b.iterates):
            np.testing.assert_allclose(xa, xb, rtol=1e-9, atol=1e-11)


class TestFixedPoint:
    @pytest.mark.parametrize("variant", ["pj_admm", "pif", "decentralized_pj", "decentralized_pif", "pj_alm", "gauss_seidel"])
    def test_kkt_point_is_stationary(self, variant, desk, desk_partition):
        orc = baselines.solve_oracle(desk)
        cfg = SolverConfig(variant, x0=orc.x, lambda0=orc.lam, max_iter=1, record_iterates=True)
        res = run_solver(desk, desk_partition, cfg)
        x1, lam1 = res.iterates[-1]
        assert np.max(np.abs(x1 - orc.x)) <= 1e-10 * (1 + np.abs(orc.x).max())
        assert np.max(np.abs(lam1 - orc.lam)) <= 1e-10 * (1 + np.abs(orc.lam).max())


class TestAdaptive:
    def test_backtracks_counted(self, desk, desk_partition):
        cfg = SolverConfig("pif", proximal=ProximalSpec.prox_linear(np.full(8, 0.1 * 7 * 0.06)),
                           adaptive=AdaptiveSpec(), eps_x=1e-4)
        res = run_solver(desk, desk_partition, cfg)
        assert res.converged
        assert res.certificate.triggers > 0
        assert res.iterations == res.accepted + res.certificate.triggers
        assert sum(r.backtracked for r in res.trace) == res.certificate.triggers
        taus = [r.tau_max for r in res.trace]
        assert all(b >= a for a, b in zip(taus, taus[1:]))

    def test_converged_flag_implies_small_gap(self, desk, desk_partition):
        res = run_solver(desk, desk_partition, SolverConfig("pif", eps_x=1e-5))
        last = [r for r in res.trace if not r.backtracked][-1]
        assert res.converged and last.delta_x < 1e-5

    def test_trace_ring_buffer(self, desk, desk_partition):
        res = run_solver(desk, desk_partition, SolverConfig("pif", trace_len=5, eps_x=1e-5))
        assert len(res.trace) == 5 and res.trace[-1].iter == res.iterations


class TestErrors:
    @pytest.mark.parametrize("kw", [dict(variant="nope"), dict(rho=0), dict(beta=2.0), dict(eps_x=0),
                                    dict(max_iter=0), dict(variant="gauss_seidel", adaptive=AdaptiveSpec())])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            SolverConfig(**kw)

    def test_adaptive_validation(self):
        with pytest.raises(ConfigError):
            AdaptiveSpec(delta=1.0)

    def test_pif_needs_prox_linear(self, desk, desk_partition):
        with pytest.raises(ConfigError):
            run_solver(desk, desk_partition, SolverConfig("pif", proximal=ProximalSpec.standard([1.0])))

    def test_divergence_detected(self, desk):
        p = make_partition(32, 32, "scalar")
        cfg = SolverConfig("pj_admm", rho=1.0, beta=1.9, proximal=ProximalSpec.standard(np.zeros(32)))
        with pytest.raises(DivergenceError) as exc:
            run_solver(desk, p, cfg)
        assert len(exc.value.trace) > 0

    def test_stale_worker(self, rng):
        w = BlockWorker(0, rng.standard_normal((4, 2)), np.zeros(2), 0.5, "general")
        w.retune(ProximalSpec.standard([1.0]), 0)
        with pytest.raises(StaleCacheError):
            w.step(np.zeros(4), 1)

    def test_dimension_mismatch(self, desk):
        with pytest.raises(ConfigError):
            run_solver(desk, make_partition(30, 5), SolverConfig("pif"))

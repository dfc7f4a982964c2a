"""Tests for constellations, scenarios and the real-valued CI system."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pifslp import ci_model as cm


class TestConstellation:
    def test_qpsk_points(self):
        pts = cm.psk_constellation(4).points
        expected = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2)
        np.testing.assert_allclose(pts, expected, atol=1e-15)

    def test_bpsk_points(self):
        np.testing.assert_allclose(cm.psk_constellation(2).points, [1j, -1j], atol=1e-15)

    @pytest.mark.parametrize("order", [2, 4, 8, 16])
    def test_unit_modulus_equal_spacing(self, order):
        pts = cm.psk_constellation(order).points
        np.testing.assert_allclose(np.abs(pts), 1.0, atol=1e-12)
        steps = pts[1:] / pts[:-1]
        np.testing.assert_allclose(steps, np.exp(2j * np.pi / order), atol=1e-12)
        assert len(set(np.round(pts, 9))) == order

    @pytest.mark.parametrize("order", [1, 0, -4, 2.5])
    def test_invalid_order(self, order):
        with pytest.raises(cm.InvalidOrderError):
            cm.psk_constellation(order)


class TestScenario:
    def test_deterministic(self):
        a = cm.generate_scenario(2, 1, 4, 1, 1, seed=7)
        b = cm.generate_scenario(2, 1, 4, 1, 1, seed=7)
        assert np.array_equal(a.channel, b.channel) and np.array_equal(a.symbols, b.symbols)

    def test_realizations_differ(self):
        a = cm.generate_scenario(4, 2, seed=7, realization=0)
        b = cm.generate_scenario(4, 2, seed=7, realization=1)
        assert not np.array_equal(a.channel, b.channel)

    def test_unit_variance(self):
        sc = cm.generate_scenario(1000, 100, seed=3)
        h = sc.channel
        assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02
        assert abs(np.var(h.real) - 0.5) < 0.01

    def test_symbols_uniform(self):
        # chi-square against uniform over the 4 points, 1e5 draws
        sc = cm.generate_scenario(1, 100000, seed=5)
        idx = np.argmin(np.abs(sc.symbols[:, None] - cm.psk_constellation(4).points), axis=1)
        counts = np.bincount(idx, minlength=4)
        chi2 = np.sum((counts - 25000) ** 2 / 25000)
        assert chi2 < 16.27  # 0.999 quantile, 3 dof

    def test_rejects_bad_symbol(self):
        with pytest.raises(ValueError, match="constellation point"):
            cm.Scenario(2, 1, 4, np.ones((1, 2)), np.array([1.0 + 0j]), 1.0, 1.0)

    def test_rejects_nonpositive_gamma(self):
        with pytest.raises(ValueError):
            cm.Scenario(2, 1, 4, np.ones((1, 2)), cm.psk_constellation(4).points[:1], 0.0, 1.0)

    def test_rejects_nonfinite_channel(self):
        with pytest.raises(ValueError):
            cm.Scenario(2, 1, 4, np.array([[np.nan, 1]]), cm.psk_constellation(4).points[:1], 1.0, 1.0)


def _ci_holds(sc, x_c):
    """Complex CI test written from the geometry: rotate by the symbol, then
    check the received point lies in the wedge with apex sqrt(gamma sigma2)."""
    M = sc.order
    ok = []
    for k in range(sc.n_users):
        r = (sc.channel[k] @ x_c) / sc.symbols[k]
        t = np.sqrt(sc.gamma[k] * sc.sigma2[k])
        ok.append((r.real - t) * np.tan(np.pi / M) >= abs(r.imag) - 1e-12)
    return np.array(ok)


class TestAssemble:
    def test_boundary_matrix_qpsk(self):
        np.testing.assert_allclose(cm.boundary_matrix(4), [[1, -1], [1, 1]], atol=1e-15)

    def test_qpsk_blocks_and_thresholds(self):
        sc = cm.generate_scenario(3, 2, 4, gamma=[2.0, 3.0], sigma2=[1.0, 0.5], seed=1)
        inst = cm.assemble_instance(sc)
        assert inst.A.shape == (4, 6)
        np.testing.assert_allclose(inst.b, np.repeat(np.sqrt([2.0, 1.5]), 2))
        h = sc.channel[0] / sc.symbols[0]
        Hk = np.block([[h.real, -h.imag], [h.imag, h.real]])
        np.testing.assert_allclose(inst.A[:2], np.array([[1, -1], [1, 1]]) @ Hk, atol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32), order=st.sampled_from([4, 8, 16]))
    def test_real_system_matches_complex_wedge(self, seed, order):
        sc = cm.generate_scenario(4, 3, order, gamma=2.0, sigma2=1.0, seed=seed)
        inst = cm.assemble_instance(sc)
        x = np.random.default_rng(seed).standard_normal(8) * 3
        real_ok = (cm.ci_margins(inst, x).reshape(3, 2) >= -1e-12).all(axis=1)
        np.testing.assert_array_equal(real_ok, _ci_holds(sc, cm.complexify(x)))

    def test_bpsk_half_plane(self):
        sc = cm.generate_scenario(3, 2, 2, seed=4)
        inst = cm.assemble_instance(sc)
        assert inst.A.shape == (2, 6)
        x = np.arange(6.0)
        r = (sc.channel @ cm.complexify(x)) / sc.symbols
        np.testing.assert_allclose(inst.A @ x, r.real, atol=1e-12)

    def test_margins_shape_check(self, desk):
        with pytest.raises(ValueError):
            cm.ci_margins(desk, np.zeros(3))


class TestConversions:
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8))
    def test_realify_roundtrip(self, vals):
        z = np.array(vals) * (1 + 0.5j)
        np.testing.assert_array_equal(cm.complexify(cm.realify(z)), z)

    @given(st.floats(-60, 60))
    def test_db_roundtrip(self, v):
        assert abs(cm.linear_to_db(cm.db_to_linear(v)) - v) <= 1e-12 * max(1.0, abs(v))

    def test_power(self):
        assert cm.power(np.array([3 + 4j])) == 25.0

    def test_complexify_odd(self):
        with pytest.raises(ValueError):
            cm.complexify(np.zeros(3))


class TestJson:
    def test_scenario_roundtrip(self):
        sc = cm.generate_scenario(3, 2, 8, gamma=[1.5, 2.0], sigma2=0.3, seed=9)
        back = cm.scenario_from_json(cm.scenario_to_json(sc))
        assert np.array_equal(back.channel, sc.channel)
        assert np.array_equal(back.symbols, sc.symbols)
        assert np.array_equal(back.gamma, sc.gamma) and back.order == 8

    def test_schema_fields(self):
        doc = json.loads(cm.scenario_to_json(cm.generate_scenario(2, 1, seed=1)))
        assert {"version", "N_t", "K", "M", "gamma", "sigma2", "channel", "symbols"} <= set(doc)
        assert len(doc["channel"]) == 2 and len(doc["channel"][0]) == 2

    def test_instance_roundtrip(self, desk):
        back = cm.instance_from_json(cm.instance_to_json(desk))
        np.testing.assert_array_equal(back.A, desk.A)
        np.testing.assert_array_equal(back.b, desk.b)

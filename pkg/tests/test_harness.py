"""Tests for the Monte Carlo harness."""

import json

import numpy as np
import pytest

from pifslp import harness as hs


def _small(**kw):
    base = dict(n_tx=8, n_users=6, gamma_db=[5.0, 10.0], partition={"scheme": "adjacent", "N": 4},
                schemes=["PSLP-LA", "pif"], realizations=4, seed=5, n_symbols=4000, eps_x=1e-5)
    base.update(kw)
    return hs.ExperimentConfig(**base)


class TestConfig:
    def test_from_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"n_tx": 8, "n_users": 4, "gamma_db": [3], "realizations": 2}))
        cfg = hs.ExperimentConfig.from_json(str(path))
        assert cfg.gamma_db == [3.0] and cfg.gammas[0] == pytest.approx(10 ** 0.3)

    def test_unknown_key(self):
        with pytest.raises(hs.ConfigFileError):
            hs.ExperimentConfig.from_dict({"bogus": 1})

    def test_missing_file(self):
        with pytest.raises(hs.ConfigFileError):
            hs.ExperimentConfig.from_json("/nonexistent/c.json")

    @pytest.mark.parametrize("kw", [dict(realizations=0), dict(schemes=["XYZ"])])
    def test_invalid(self, kw):
        with pytest.raises(hs.ConfigFileError):
            _small(**kw)

    def test_scheme_mapping(self, desk, desk_partition):
        cfg = hs.ExperimentConfig(n_tx=16, n_users=12)
        sa = hs.scheme_config("PSLP-SA", cfg, desk, desk_partition)
        lc = hs.scheme_config("PSLP-LC", cfg, desk, desk_partition)
        assert sa.variant == "decentralized_pj" and sa.adaptive is not None
        np.testing.assert_allclose(sa.proximal.tau, 0.1 * 7 * 0.06)
        assert lc.variant == "decentralized_pif" and lc.adaptive is None and lc.proximal.kind == "prox_linear"


class TestSweeps:
    def test_power_report(self):
        rep = hs.sweep_power(_small())
        assert [r.scheme for r in rep.rows] == ["oracle", "PSLP-LA", "pif"] * 2
        lo, hi = rep.row("oracle", 5.0), rep.row("oracle", 10.0)
        assert hi.mean_power_db > lo.mean_power_db
        for s in ("PSLP-LA", "pif"):
            assert abs(rep.row(s, 10.0).mean_power_db - hi.mean_power_db) < 0.03
            assert rep.row(s, 10.0).fails == 0
        # power_db is the dB value of the mean linear power
        p = rep.raw[("oracle", 10.0)]["power"]
        assert hi.mean_power_db == pytest.approx(10 * np.log10(p.mean()))

    def test_realization_independent_of_count(self):
        a = hs.sweep_power(_small(realizations=2, gamma_db=[5.0]))
        b = hs.sweep_power(_small(realizations=4, gamma_db=[5.0]))
        np.testing.assert_array_equal(a.raw[("pif", 5.0)]["power"], b.raw[("pif", 5.0)]["power"][:2])

    def test_csv_identical_across_workers(self):
        a = hs.sweep_power(_small(workers=1)).to_csv()
        b = hs.sweep_power(_small(workers=3)).to_csv()
        assert a == b
        assert a.splitlines()[0] == ",".join(hs.CSV_COLUMNS)

    def test_capped_iterations_do_not_count_as_fails(self):
        rep = hs.sweep_power(_small(gamma_db=[5.0]), include_oracle=False, max_iter=3)
        assert rep.row("pif", 5.0).fails == 0 and rep.row("pif", 5.0).mean_iters == 3

    def test_ber_report(self):
        rep = hs.sweep_ber(_small(gamma_db=[12.0], schemes=["pif"]))
        names = [r.scheme for r in rep.rows]
        assert names == ["pif", "oracle", "ZF", "RZF"]
        for r in rep.rows:
            assert 0.0 <= r.mean_ber <= 1.0
        assert rep.raw[("ZF", 12.0)]["power"] == pytest.approx(rep.raw[("oracle", 12.0)]["power"])

    def test_noiseless_ber_zero(self):
        rep = hs.sweep_ber(_small(gamma_db=[40.0], schemes=["pif"], sigma2=1e-6, eps_x=1e-7), include_linear=False)
        assert rep.row("oracle", 40.0).mean_ber == 0.0

    def test_binomial_ci(self):
        assert hs.binomial_ci95(50, 10000) == pytest.approx(1.96 * np.sqrt(0.005 * 0.995 / 10000), rel=1e-3)
        assert np.isnan(hs.binomial_ci95(0, 0))

    def test_table1_alias(self):
        rep = hs.table1(_small(gamma_db=[5.0], schemes=["PSLP-LC"]))
        assert [r.scheme for r in rep.rows] == ["PSLP-LC"]

"""Monte Carlo experiments: power sweep, BER sweep, and iteration table.

Every realization ``r`` draws its channel, symbols and noise from its own
RNG substream, so a row of the report does not depend on how many
realizations run or in which order. The channel for realization ``r`` is
shared across the SINR grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import baselines
from .ci_model import (STREAM_NOISE, assemble_instance, complexify, db_to_linear,
                       generate_scenario, linear_to_db, psk_constellation, rng_stream)
from .partition import BlockPartition, make_partition
from .solvers import (DivergenceError, SolverConfig, AdaptiveSpec, run_solver)
from .tuning import ProximalSpec, block_norms_sq

CSV_COLUMNS = ("scheme", "gamma_db", "mean_power_db", "mean_iters", "mean_ber",
               "ber_ci95", "bits_per_iter", "fails")
TRACE_COLUMNS = ("iter", "delta_x", "delta_lambda", "power", "q_form", "tau_max", "messages_bits")

# Scheme labels: (variant, proximal kind, adaptive)
SCHEMES = {
    "PSLP-SA": ("decentralized_pj", "standard", True),
    "PSLP-SC": ("decentralized_pj", "standard", False),
    "PSLP-LA": ("decentralized_pif", "prox_linear", True),
    "PSLP-LC": ("decentralized_pif", "prox_linear", False),
}


class ConfigFileError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n_tx: int = 16
    n_users: int = 12
    order: int = 4
    gamma_db: list = field(default_factory=lambda: [10.0])
    sigma2: float = 1.0
    partition: dict = field(default_factory=lambda: {"scheme": "adjacent", "N": 8})
    schemes: list = field(default_factory=lambda: ["PSLP-LA"])
    rho: float = 0.06
    beta: float = 1.0
    eps_x: float = 1e-3
    max_iter: int = 5000
    tau_init_factor: float = 0.1
    tau_const_factor: float = 0.2
    delta: float = 2.0
    eta: float = 1e-3
    realizations: int = 100
    seed: int = 2024
    n_symbols: int = 200000
    workers: int = 1
    scalar_bits: int = 32

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigFileError("realizations must be >= 1")
        self.gamma_db = [float(g) for g in np.atleast_1d(self.gamma_db)]
        for s in self.schemes:
            if s not in SCHEMES and s not in _VARIANT_SCHEMES:
                raise ConfigFileError(f"unknown scheme {s!r}")

    @property
    def gammas(self) -> np.ndarray:
        return db_to_linear(self.gamma_db)

    def make_partition(self) -> BlockPartition:
        return BlockPartition.from_dict(self.partition, 2 * self.n_tx)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigFileError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigFileError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigFileError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)


# Plain variants at their certified proximal bound are also valid schemes.
_VARIANT_SCHEMES = ("pj_admm", "pj_admm_svd", "pj_admm_pair", "pif", "gauss_seidel",
                    "pj_alm", "decentralized_pj", "decentralized_pif")


def scheme_config(scheme: str, cfg: ExperimentConfig, instance, partition: BlockPartition,
                  max_iter: Optional[int] = None, eps_x: Optional[float] = None) -> SolverConfig:
    """Solver configuration for a scheme label or a bare variant name."""
    max_iter = cfg.max_iter if max_iter is None else max_iter
    eps_x = cfg.eps_x if eps_x is None else eps_x
    if scheme in _VARIANT_SCHEMES:
        return SolverConfig(scheme, rho=cfg.rho, beta=cfg.beta, eps_x=eps_x, max_iter=max_iter)
    variant, kind, adaptive = SCHEMES[scheme]
    n_blocks = partition.n_blocks
    if adaptive:
        tau = np.full(n_blocks, cfg.tau_init_factor * (n_blocks - 1) * cfg.rho)
        ada = AdaptiveSpec(cfg.delta, cfg.eta)
    else:
        norms = block_norms_sq(instance.A, partition)
        tau = cfg.tau_const_factor * cfg.rho * (n_blocks / (2.0 - cfg.beta) - 1.0) * norms
        ada = None
    return SolverConfig(variant, rho=cfg.rho, beta=cfg.beta, proximal=ProximalSpec(kind, tau=tau),
                        adaptive=ada, eps_x=eps_x, max_iter=max_iter)


@dataclass
class ReportRow:
    scheme: str
    gamma_db: float
    mean_power_db: float
    mean_iters: float
    mean_ber: float
    ber_ci95: float
    bits_per_iter: int
    fails: int


@dataclass
class McReport:
    rows: list
    config: ExperimentConfig
    raw: dict = field(default_factory=dict, repr=False)

    def row(self, scheme: str, gamma_db: float) -> ReportRow:
        for r in self.rows:
            if r.scheme == scheme and math.isclose(r.gamma_db, gamma_db):
                return r
        raise KeyError((scheme, gamma_db))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.scheme, _fmt(r.gamma_db), _fmt(r.mean_power_db), _fmt(r.mean_iters),
                        _fmt(r.mean_ber), _fmt(r.ber_ci95), r.bits_per_iter, r.fails])
        return buf.getvalue()

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return repr(float(v))


def _bits_per_iter(scheme: str, partition: BlockPartition, n_rows: int, scalar_bits: int) -> int:
    from .runtime import Topology
    variant = SCHEMES[scheme][0] if scheme in SCHEMES else scheme
    if variant in ("gauss_seidel",):
        return 0
    mode = "decentralized" if variant.startswith("decentralized") else "centralized"
    return Topology(mode, partition.n_blocks, n_rows, scalar_bits).bits_per_iter


def _map_realizations(fn, n, workers):
    if workers <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


def _instance(cfg: ExperimentConfig, gamma: float, r: int):
    sc = generate_scenario(cfg.n_tx, cfg.n_users, cfg.order, gamma, cfg.sigma2, cfg.seed, r)
    return assemble_instance(sc)


def _solve_realization(cfg, scheme, gamma, r, partition, max_iter=None):
    inst = _instance(cfg, gamma, r)
    sc_cfg = scheme_config(scheme, cfg, inst, partition, max_iter=max_iter)
    try:
        res = run_solver(inst, partition, sc_cfg)
    except DivergenceError:
        return inst, None
    return inst, res


def sweep_power(cfg: ExperimentConfig, include_oracle: bool = True, max_iter: Optional[int] = None) -> McReport:
    """Mean transmit power per (scheme, gamma); failures are counted, not raised."""
    partition = cfg.make_partition()
    rows, raw = [], {}
    for gdb, gamma in zip(cfg.gamma_db, cfg.gammas):
        if include_oracle:
            def oracle_job(r, gamma=gamma):
                return baselines.solve_oracle(_instance(cfg, gamma, r)).power
            powers = np.array(_map_realizations(oracle_job, cfg.realizations, cfg.workers))
            raw[("oracle", gdb)] = {"power": powers}
            rows.append(ReportRow("oracle", gdb, float(linear_to_db(powers.mean())), math.nan,
                                  math.nan, math.nan, 0, 0))
        for scheme in cfg.schemes:
            def job(r, scheme=scheme, gamma=gamma):
                inst, res = _solve_realization(cfg, scheme, gamma, r, partition, max_iter)
                if res is None:
                    return math.nan, math.nan, False
                return res.power, res.iterations, res.converged
            out = _map_realizations(job, cfg.realizations, cfg.workers)
            p = np.array([o[0] for o in out])
            it = np.array([o[1] for o in out])
            ok = np.array([o[2] for o in out])
            fails = int((~ok).sum()) if max_iter is None else int(np.isnan(p).sum())
            raw[(scheme, gdb)] = {"power": p, "iters": it, "converged": ok}
            good = ~np.isnan(p)
            rows.append(ReportRow(scheme, gdb, float(linear_to_db(p[good].mean())), float(it[good].mean()),
                                  math.nan, math.nan,
                                  _bits_per_iter(scheme, partition, 2 * cfg.n_users, cfg.scalar_bits), fails))
    return McReport(rows, cfg, raw)


def table1(cfg: ExperimentConfig) -> McReport:
    """Mean iteration counts to reach the relative iterate gap ``eps_x``."""
    return sweep_power(cfg, include_oracle=False)


def binomial_ci95(errors: int, total: int) -> float:
    """Half-width of the normal-approximation 95% interval for a bit error rate."""
    if total == 0:
        return math.nan
    p = errors / total
    return 1.959963984540054 * math.sqrt(max(p * (1 - p), 0.0) / total)


def sweep_ber(cfg: ExperimentConfig, include_linear: bool = True) -> McReport:
    """Uncoded BER of each scheme, ZF and RZF (both at the oracle power).

    Each realization transmits ``ceil(n_symbols / (K * realizations))`` noisy
    copies of its precoded slot.
    """
    partition = cfg.make_partition()
    const = psk_constellation(cfg.order)
    slots = max(1, math.ceil(cfg.n_symbols / (cfg.n_users * cfg.realizations)))
    names = list(cfg.schemes) + ["oracle"] + (["ZF", "RZF"] if include_linear else [])
    rows, raw = [], {}
    for gdb, gamma in zip(cfg.gamma_db, cfg.gammas):
        def job(r, gamma=gamma):
            inst = _instance(cfg, gamma, r)
            sc = inst.scenario
            orc = baselines.solve_oracle(inst)
            tx = {"oracle": complexify(orc.x)}
            iters = {}
            fails = {}
            for scheme in cfg.schemes:
                try:
                    res = run_solver(inst, partition, scheme_config(scheme, cfg, inst, partition))
                    tx[scheme] = complexify(res.x)
                    iters[scheme] = res.iterations
                    fails[scheme] = 0 if res.converged else 1
                except DivergenceError:
                    fails[scheme] = 1
            if include_linear:
                tx["ZF"] = baselines.zf_precode(sc, orc.power)
                tx["RZF"] = baselines.rzf_precode(sc, orc.power)
            g = rng_stream(cfg.seed, r, STREAM_NOISE)
            noise = (g.standard_normal((slots, sc.n_users)) + 1j * g.standard_normal((slots, sc.n_users)))
            noise *= np.sqrt(sc.sigma2 / 2.0)
            truth = np.broadcast_to(sc.symbols, (slots, sc.n_users))
            out = {}
            for name, xt in tx.items():
                y = sc.channel @ xt + noise
                errs, total = baselines.detect_and_ber(y, const, truth)
                out[name] = (errs, total, float(np.vdot(xt, xt).real))
            return out, iters, fails

        results = _map_realizations(job, cfg.realizations, cfg.workers)
        for name in names:
            errs = sum(o[0][name][0] for o in results if name in o[0])
            total = sum(o[0][name][1] for o in results if name in o[0])
            pw = np.array([o[0][name][2] for o in results if name in o[0]])
            it = [o[1][name] for o in results if name in o[1]]
            fl = sum(o[2].get(name, 0) for o in results)
            raw[(name, gdb)] = {"errors": errs, "bits": total, "power": pw}
            bpi = _bits_per_iter(name, partition, 2 * cfg.n_users, cfg.scalar_bits) if name in cfg.schemes else 0
            rows.append(ReportRow(name, gdb, float(linear_to_db(pw.mean())) if pw.size else math.nan,
                                  float(np.mean(it)) if it else math.nan,
                                  errs / total if total else math.nan, binomial_ci95(errs, total), bpi, fl))
    return McReport(rows, cfg, raw)


def trace_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in result.trace:
        w.writerow([row.iter, _fmt(row.delta_x), _fmt(row.delta_lambda), _fmt(row.power),
                    _fmt(row.q_form), _fmt(row.tau_max), row.messages_bits])
    return buf.getvalue()

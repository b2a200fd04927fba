"""Seeded Monte Carlo sweeps over distance, SNR and array size.

Every trial draws one user; all engines see that same channel (common random
numbers) but independent noise streams. Seeds derive from
``(seed, sweep point, trial, engine)`` so any record can be replayed exactly.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .array_model import (
    REFERENCE_ARRAY,
    ArrayConfig,
    Channel,
    MeasurementOracle,
    UserLocation,
    beam_gain,
    db_to_linear,
    dbm_to_watt,
    make_channel,
    near_steering,
)
from .codebook import Codeword, PolarCodebook, default_s_delta, upper_codeword
from .training import (
    EngineParams,
    TrainingResult,
    optimal_polar_index,
    run_engine,
)

log = logging.getLogger(__name__)

ENGINE_CODES = {
    "exhaustive": 1,
    "two-phase": 2,
    "far-exhaustive": 3,
    "far-hierarchical": 4,
    "two-stage": 5,
    "perfect-csi": 6,
}
#: Engines run by `--engines all`.
ALL_ENGINES = ("perfect-csi", "exhaustive", "two-phase", "far-hierarchical", "two-stage")
SWEEP_VARIABLES = ("distance", "snr", "antennas")
RESULT_COLUMNS = ("engine", "sweep_var", "sweep_value", "trials", "success_rate",
                  "mean_rate_bps_hz", "mean_pilots", "seed")


@dataclass(frozen=True)
class UserDistribution:
    """How each trial places its user.

    ``uniform``: theta ~ U[-1, 1] at distance ``r``; ``fixed``: always ``(theta, r)``;
    ``grid``: theta cycles through the polar angle grid at distance ``r``.
    ``r=None`` puts the user on the Fresnel boundary of the array.
    """

    kind: str = "uniform"
    theta: float = 0.0
    r: float | None = 10.0

    def __post_init__(self):
        if self.kind not in ("uniform", "fixed", "grid"):
            raise ValueError(f"unknown user distribution {self.kind!r}")

    def distance(self, cfg: ArrayConfig) -> float:
        return cfg.r_min if self.r is None else self.r

    def draw(self, cfg: ArrayConfig, trial: int, rng: np.random.Generator) -> UserLocation:
        r = self.distance(cfg)
        if self.kind == "fixed":
            return UserLocation(self.theta, r)
        if self.kind == "grid":
            n = trial % cfg.N + 1
            return UserLocation((2 * n - cfg.N - 1) / cfg.N, r)
        return UserLocation(float(rng.uniform(-1.0, 1.0)), r)


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation setup; powers are linear (W), ``beta0`` is a linear gain."""

    cfg: ArrayConfig = REFERENCE_ARRAY
    pilot_power: float = dbm_to_watt(30.0)
    beta0: float = db_to_linear(-72.0)
    noise_power: float = dbm_to_watt(-80.0)
    S: int = 6
    s_delta: float | str = 68.27
    engines: tuple[str, ...] = ALL_ENGINES
    L: int | None = None
    last_layer_rule: str = "example1-window"
    K: int = 1
    eta: float = 0.5
    users: UserDistribution = field(default_factory=UserDistribution)
    trials: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if min(self.pilot_power, self.beta0, self.noise_power) <= 0:
            raise ValueError("pilot_power, beta0 and noise_power must be positive")
        if not self.engines:
            raise ValueError("at least one engine is required")
        unknown = set(self.engines) - set(ENGINE_CODES)
        if unknown:
            raise ValueError(f"unknown engines: {sorted(unknown)}")
        if isinstance(self.s_delta, str) and self.s_delta != "auto":
            raise ValueError("s_delta must be a number or 'auto'")

    def params(self) -> EngineParams:
        sd = default_s_delta(self.cfg) if self.s_delta == "auto" else self.s_delta
        return EngineParams(self.cfg, S=self.S, s_delta=sd, L=self.L,
                            last_layer_rule=self.last_layer_rule, K=self.K, eta=self.eta)

    def reference_snr(self, r: float) -> float:
        """gamma = P N beta0 / (r^2 sigma^2), linear."""
        return self.pilot_power * self.cfg.N * self.beta0 / (r * r * self.noise_power)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cfg"] = {"N": self.cfg.N, "wavelength": self.cfg.wavelength}
        d["engines"] = list(self.engines)
        return d


@dataclass(frozen=True)
class ResultRecord:
    engine: str
    sweep_var: str
    sweep_value: float
    trials: int
    success_rate: float
    mean_rate_bps_hz: float
    mean_pilots: float
    seed: int
    wall_time: float = field(default=0.0, compare=False)

    def row(self) -> list:
        return [self.engine, self.sweep_var, repr(self.sweep_value), self.trials,
                repr(self.success_rate), repr(self.mean_rate_bps_hz), repr(self.mean_pilots), self.seed]


def success_indicator(result: TrainingResult, truth: tuple[int, int], polar: PolarCodebook | None = None) -> int:
    """1 iff the trained polar index equals the noiseless optimum."""
    if polar is not None:
        for n, s in (result.polar_index, truth):
            if not (1 <= n <= polar.cfg.N and 0 <= s < polar.S):
                raise ValueError(f"polar index ({n}, {s}) is not on the {polar.cfg.N}x{polar.S} grid")
    return int(tuple(result.polar_index) == tuple(truth))


def achievable_rate(channel: Channel, chosen: Codeword | np.ndarray, scenario: ScenarioConfig) -> float:
    """log2(1 + gamma g^2) in bps/Hz with g the normalized gain of ``chosen``."""
    g = beam_gain(channel.steering, chosen)
    return math.log2(1.0 + scenario.reference_snr(channel.user.r) * g * g)


def channel_seed(seed: int, point: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(point, trial))


def noise_seed(seed: int, point: int, trial: int, engine: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(point, trial, ENGINE_CODES[engine]))


def _run_trials(scenario: ScenarioConfig, point: int, trials: range) -> dict[str, tuple[list, list, list]]:
    params = scenario.params()
    polar = params.polar
    out = {e: ([], [], []) for e in scenario.engines}
    for t in trials:
        rng = np.random.default_rng(channel_seed(scenario.seed, point, t))
        user = scenario.users.draw(scenario.cfg, t, rng)
        channel = make_channel(user, scenario.beta0, scenario.cfg)
        truth = optimal_polar_index(channel, polar)
        for e in scenario.engines:
            oracle = MeasurementOracle(channel, scenario.pilot_power, scenario.noise_power,
                                       noise_seed(scenario.seed, point, t, e))
            res = run_engine(e, oracle, params, record_trace=False)
            succ, rates, pilots = out[e]
            succ.append(success_indicator(res, truth))
            rates.append(achievable_rate(channel, res.chosen, scenario))
            pilots.append(res.pilots)
    return out


def point_scenario(scenario: ScenarioConfig, variable: str, value: float) -> ScenarioConfig:
    """Scenario for one sweep point."""
    if variable == "distance":
        return replace(scenario, users=replace(scenario.users, r=float(value)))
    if variable == "snr":
        r = scenario.users.distance(scenario.cfg)
        gamma = db_to_linear(value)
        sigma2 = scenario.pilot_power * scenario.cfg.N * scenario.beta0 / (r * r * gamma)
        return replace(scenario, noise_power=sigma2)
    if variable == "antennas":
        return replace(scenario, cfg=ArrayConfig(int(value), scenario.cfg.wavelength), L=None)
    raise ValueError(f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}")


def run_point(scenario: ScenarioConfig, variable: str, value: float, point: int = 0,
              workers: int = 1) -> list[ResultRecord]:
    sc = point_scenario(scenario, variable, value)
    t0 = time.perf_counter()
    if workers > 1:
        bounds = np.linspace(0, sc.trials, workers + 1).astype(int)
        chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_trials, [sc] * len(chunks), [point] * len(chunks), chunks))
    else:
        parts = [_run_trials(sc, point, range(sc.trials))]
    wall = time.perf_counter() - t0

    records = []
    for e in sc.engines:
        succ = [x for p in parts for x in p[e][0]]
        rates = [x for p in parts for x in p[e][1]]
        pilots = [x for p in parts for x in p[e][2]]
        n = len(succ)
        records.append(ResultRecord(e, variable, float(value), n, sum(succ) / n,
                                    math.fsum(rates) / n, sum(pilots) / n, sc.seed, wall))
    log.info("%s=%s done in %.1fs", variable, value, wall)
    return records


def run_sweep(scenario: ScenarioConfig, variable: str, values, workers: int = 1) -> list[ResultRecord]:
    """Success rate, mean rate and mean pilots per engine at each sweep value."""
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}")
    if variable == "snr" and scenario.users.r is None:
        raise ValueError("an SNR sweep needs a fixed user distance")
    records = []
    for point, value in enumerate(values):
        records.extend(run_point(scenario, variable, value, point, workers))
    return records


def write_results(records, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for rec in records:
            w.writerow(rec.row())


OVERHEAD_SCHEMES = (
    ("exhaustive", "Near-field exhaustive search", "N*S"),
    ("two-phase", "Two-phase near-field training", "N+K*S"),
    ("far-exhaustive", "Far-field exhaustive search", "N"),
    ("far-hierarchical", "Far-field hierarchical training", "2*log2(N)"),
    ("two-stage", "Two-stage hierarchical training", "2L+4(Lt-L-1)+|last layer|"),
)


def overhead_table(params: EngineParams, user: UserLocation | None = None) -> list[tuple[str, str, int]]:
    """(scheme, formula, pilots) with counts taken from a live noiseless run of each engine."""
    user = user or UserLocation(0.1, 2.0 * params.cfg.r_min)
    channel = make_channel(user, 1.0, params.cfg)
    rows = []
    for engine, label, formula in OVERHEAD_SCHEMES:
        oracle = MeasurementOracle(channel, 1.0, 0.0)
        res = run_engine(engine, oracle, params, record_trace=False)
        if res.pilots != oracle.pilots_used:
            raise RuntimeError(f"{engine} misreported its pilot count")
        rows.append((label, formula, res.pilots))
    return rows


def format_overhead_table(rows) -> str:
    w = max(len(r[0]) for r in rows)
    f = max(len(r[1]) for r in rows)
    lines = [f"{'scheme':<{w}}  {'formula':<{f}}  pilots"]
    lines += [f"{a:<{w}}  {b:<{f}}  {c}" for a, b, c in rows]
    return "\n".join(lines)


def gain_profile(user: UserLocation, cfg: ArrayConfig, n_active: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless gain of every far-field beam of a central sub-array against the user.

    Gains are normalized to the sub-array size, so a perfectly matched beam scores 1.
    Returns ``(thetas, gains)`` on the grid -1 + (2i - 1)/n_active.
    """
    n_active = cfg.N if n_active is None else n_active
    layer = n_active.bit_length() - 1
    if 2**layer != n_active or n_active > cfg.N:
        raise ValueError("n_active must be a power of two not larger than N")
    b = near_steering(user.theta, user.r, cfg)
    beams = [upper_codeword(layer, i, cfg) for i in range(1, n_active + 1)]
    thetas = np.array([c.theta for c in beams])
    gains = np.array([beam_gain(b, c) for c in beams]) * math.sqrt(cfg.N / n_active)
    return thetas, gains


def write_profiles(user: UserLocation, cfg: ArrayConfig, sizes, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("n_active", "theta", "normalized_gain"))
        for n_active in sizes:
            for t, g in zip(*gain_profile(user, cfg, n_active)):
                w.writerow((n_active, repr(float(t)), repr(float(g))))

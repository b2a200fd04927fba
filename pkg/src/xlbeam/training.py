"""Beam-training procedures driven by a MeasurementOracle.

Every engine returns a TrainingResult whose ``pilots`` equals the number of
measurements it drew from the oracle. Ties between measured powers resolve
to the codeword tested first.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .array_model import ArrayConfig, Channel, MeasurementOracle
from .codebook import (
    LAST_LAYER_RULES,
    Codeword,
    PolarCodebook,
    angular_codebook,
    angular_matrix,
    default_s_delta,
    full_distance_candidates,
    last_layer_candidates,
    last_layer_positions,
    lower_codeword,
    polar_codebook,
    upper_codeword,
)

# relative slack under which two noiseless powers count as a tie
TIE_RTOL = 1e-9


def first_argmax(values) -> int:
    values = np.asarray(values)
    top = values.max()
    return int(np.flatnonzero(values >= top - TIE_RTOL * abs(top))[0])


@dataclass(frozen=True)
class LayerRecord:
    layer: int | None
    tested: list[str]
    powers: list[float]
    winner: str

    def to_json(self) -> str:
        return json.dumps({"layer": self.layer, "tested": self.tested,
                           "powers": self.powers, "winner": self.winner})


@dataclass
class TrainingResult:
    chosen: Codeword
    polar_index: tuple[int, int]
    pilots: int
    trace: list[LayerRecord] = field(default_factory=list)

    @property
    def theta_hat(self) -> float:
        return self.chosen.theta

    @property
    def r_hat(self) -> float:
        return self.chosen.distance

    def summary(self) -> dict:
        return {
            "polar_index": list(self.polar_index),
            "theta_hat": self.theta_hat,
            "r_hat": "inf" if math.isinf(self.r_hat) else self.r_hat,
            "pilots": self.pilots,
            "codeword": self.chosen.id,
        }


def write_trace(result: TrainingResult, path: str | Path) -> None:
    """One JSON object per layer: {layer, tested, powers, winner}."""
    with open(path, "w") as f:
        for rec in result.trace:
            f.write(rec.to_json() + "\n")


@dataclass(frozen=True)
class EngineParams:
    """Knobs shared by the training engines.

    ``L`` defaults to L_t - 2. ``s_delta=None`` scales the ring constant to the
    array via :func:`default_s_delta`.
    """

    cfg: ArrayConfig
    S: int = 6
    s_delta: float | None = 68.27
    L: int | None = None
    last_layer_rule: str = "example1-window"
    K: int = 1
    eta: float = 0.5

    def __post_init__(self):
        if self.s_delta is None:
            object.__setattr__(self, "s_delta", default_s_delta(self.cfg))
        if self.L is None:
            object.__setattr__(self, "L", max(self.L_t - 2, 1))
        if not 1 <= self.L <= self.L_t:
            raise ValueError(f"L must lie in 1..{self.L_t}, got {self.L}")
        if self.S < 1 or self.K < 1 or not 0 < self.eta <= 1:
            raise ValueError("need S >= 1, K >= 1 and 0 < eta <= 1")
        if self.K > self.cfg.N:
            raise ValueError("K cannot exceed the number of angular beams")
        if self.last_layer_rule not in LAST_LAYER_RULES:
            raise ValueError(f"unknown last-layer rule {self.last_layer_rule!r}")

    @property
    def L_t(self) -> int:
        return self.cfg.n_layers

    @property
    def polar(self) -> PolarCodebook:
        return polar_codebook(self.cfg, self.S, self.s_delta)


def _probe(oracle: MeasurementOracle, layer, codewords: list[Codeword], trace: list | None) -> Codeword:
    powers = oracle.measure_many(codewords)
    best = codewords[first_argmax(powers)]
    if trace is not None:
        trace.append(LayerRecord(layer, [c.id for c in codewords], powers.tolist(), best.id))
    return best


def optimal_polar_index(channel: Channel, polar: PolarCodebook) -> tuple[int, int]:
    """Noiseless best (n, s) over the whole polar grid."""
    gains = np.abs(channel.steering.conj() @ polar.matrix) ** 2
    return polar.indices()[first_argmax(gains)]


def run_exhaustive(oracle: MeasurementOracle, polar: PolarCodebook, record_trace: bool = True) -> TrainingResult:
    """Sweep all N*S polar codewords once."""
    start = oracle.pilots_used
    powers = oracle.measure_matrix(polar.matrix)
    n, s = polar.indices()[first_argmax(powers)]
    chosen = polar.codeword(n, s)
    trace = []
    if record_trace:
        trace.append(LayerRecord(None, [f"pol:{a},{b}" for a, b in polar.indices()],
                                 powers.tolist(), chosen.id))
    return TrainingResult(chosen, (n, s), oracle.pilots_used - start, trace)


def run_far_exhaustive(oracle: MeasurementOracle, params: EngineParams, record_trace: bool = True) -> TrainingResult:
    """Sweep the N full-array far-field beams; the ring estimate is always 0."""
    start = oracle.pilots_used
    beams = angular_codebook(params.cfg)
    powers = oracle.measure_matrix(angular_matrix(params.cfg))
    best = beams[first_argmax(powers)]
    trace = [LayerRecord(None, [c.id for c in beams], powers.tolist(), best.id)] if record_trace else []
    return TrainingResult(best, (best.angle_index, 0), oracle.pilots_used - start, trace)


def dominant_candidates(powers, K: int, eta: float) -> tuple[list[int], tuple[int, int]]:
    """K middle indices (0-based) of the contiguous run around the peak with power >= eta * max.

    Also returns the run as an inclusive (first, last) pair.
    """
    powers = np.asarray(powers)
    peak = first_argmax(powers)
    thr = eta * powers[peak]
    lo = peak
    while lo > 0 and powers[lo - 1] >= thr:
        lo -= 1
    hi = peak
    while hi < len(powers) - 1 and powers[hi + 1] >= thr:
        hi += 1
    width = hi - lo + 1
    start = lo + (width - K) // 2
    if (width - K) % 2 and powers[start + K] > powers[start]:
        # two equally central windows: keep the stronger one
        start += 1
    start = min(max(start, 0), len(powers) - K)
    return list(range(start, start + K)), (lo, hi)


def run_two_phase(oracle: MeasurementOracle, params: EngineParams, record_trace: bool = True) -> TrainingResult:
    """Angular sweep, then an S-ring distance sweep on the middle of the dominant region."""
    start = oracle.pilots_used
    polar = params.polar
    trace = [] if record_trace else None

    beams = angular_codebook(params.cfg)
    powers = oracle.measure_matrix(angular_matrix(params.cfg))
    picks, _ = dominant_candidates(powers, params.K, params.eta)
    if trace is not None:
        trace.append(LayerRecord(1, [c.id for c in beams], powers.tolist(),
                                 beams[picks[len(picks) // 2]].id))

    cands = [polar.codeword(p + 1, s) for p in picks for s in range(params.S)]
    best = _probe(oracle, 2, cands, trace)
    return TrainingResult(best, (best.angle_index, best.ring), oracle.pilots_used - start, trace or [])


def _stage_one(oracle, params: EngineParams, n_layers: int, trace) -> Codeword:
    best = None
    for layer in range(1, n_layers + 1):
        kids = (1, 2) if best is None else (2 * best.angle_index - 1, 2 * best.angle_index)
        best = _probe(oracle, layer, [upper_codeword(layer, i, params.cfg) for i in kids], trace)
    return best


def run_two_stage(oracle: MeasurementOracle, params: EngineParams, record_trace: bool = True) -> TrainingResult:
    """Coarse angular descent with central sub-arrays, then a joint angle/distance descent."""
    start = oracle.pilots_used
    cfg, S, sd, L, L_t = params.cfg, params.S, params.s_delta, params.L, params.L_t
    trace = [] if record_trace else None

    best = _stage_one(oracle, params, L, trace)
    if L == L_t:
        return TrainingResult(best, (best.angle_index, 0), oracle.pilots_used - start, trace or [])

    if L == L_t - 1:
        last = full_distance_candidates(best.angle_index, cfg, S, sd)
    else:
        i, j = best.angle_index, None
        for u in range(L + 1, L_t):
            angles = (2 * i - 1, 2 * i)
            dists = (1, 2) if j is None else (2 * j - 1, 2 * j)
            cands = [lower_codeword(u, a, b, cfg, S, sd, L) for a in angles for b in dists]
            win = _probe(oracle, u, cands, trace)
            i, j = win.angle_index, win.distance_index
        last = last_layer_candidates(i, j, params.last_layer_rule, cfg, S, sd, L)
    best = _probe(oracle, L_t, last, trace)
    return TrainingResult(best, (best.angle_index, best.ring), oracle.pilots_used - start, trace or [])


def run_far_hierarchical(oracle: MeasurementOracle, params: EngineParams, record_trace: bool = True) -> TrainingResult:
    """Binary angular descent over all log2(N) layers; the ring estimate is always 0."""
    start = oracle.pilots_used
    trace = [] if record_trace else None
    best = _stage_one(oracle, params, params.L_t, trace)
    return TrainingResult(best, (best.angle_index, 0), oracle.pilots_used - start, trace or [])


def perfect_csi(channel: Channel, polar: PolarCodebook) -> TrainingResult:
    """Beam matched to the true channel; zero pilots. Upper bound for rate comparisons."""
    u = channel.user
    w = channel.steering
    w.flags.writeable = False
    chosen = Codeword(w, u.theta, u.r, angle_index=0, first_active=1, last_active=channel.cfg.N)
    return TrainingResult(chosen, optimal_polar_index(channel, polar), 0, [])


def choose_L(R_c: float | None, cfg: ArrayConfig) -> int:
    """Stage-one depth keeping a user beyond ``R_c`` inside the Fresnel region of the sub-array."""
    cap = max(cfg.n_layers - 2, 1)
    if R_c is None:
        return cap
    if not R_c > 0:
        raise ValueError("R_c must be positive")
    n_l = math.floor((4.0 * R_c / cfg.wavelength) ** (2.0 / 3.0))
    return max(1, min(math.ceil(math.log2(n_l)), cap)) if n_l >= 1 else 1


def last_layer_size(params: EngineParams, j_star: int | None = None) -> int:
    """Codewords tested in the last layer; ``j_star`` only matters if clamping makes it vary."""
    if params.L == params.L_t:
        return 0
    if params.L == params.L_t - 1:
        return 2 * params.S
    js = [j_star] if j_star is not None else range(1, 2 ** (params.L_t - 1 - params.L) + 1)
    sizes = {len(last_layer_positions(j, params.S, params.L, params.L_t, params.last_layer_rule))
             for j in js}
    if len(sizes) != 1:
        raise ValueError(f"last-layer size depends on the winner: {sorted(sizes)}")
    return 2 * sizes.pop()


def overhead(params: EngineParams, j_star: int | None = None) -> int:
    """Pilots consumed by the two-stage engine under ``params``."""
    L, L_t = params.L, params.L_t
    if L == L_t:
        return 2 * L_t
    return 2 * L + 4 * max(L_t - L - 1, 0) + last_layer_size(params, j_star)


ENGINES = {
    "exhaustive": lambda oracle, p, **kw: run_exhaustive(oracle, p.polar, **kw),
    "two-phase": run_two_phase,
    "far-exhaustive": run_far_exhaustive,
    "far-hierarchical": run_far_hierarchical,
    "two-stage": run_two_stage,
}


def run_engine(name: str, oracle: MeasurementOracle, params: EngineParams, record_trace: bool = True) -> TrainingResult:
    """Dispatch by engine id; ``perfect-csi`` reads the channel and draws no pilots."""
    if name == "perfect-csi":
        return perfect_csi(oracle.channel, params.polar)
    try:
        fn = ENGINES[name]
    except KeyError:
        raise ValueError(f"unknown engine {name!r}; choose from {sorted(ENGINES) + ['perfect-csi']}") from None
    return fn(oracle, params, record_trace=record_trace)

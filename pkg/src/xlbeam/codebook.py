"""Polar-domain, angular and two-level hierarchical codebooks.

Indexing follows the usual 1-based conventions of the hierarchical tree:
layer ``u`` has angle indices ``1..2**u``; distance positions ``k`` index the
ring set ``[0, 1, ..., S-1]`` one-based, so position ``k`` is ring ``k - 1``
and ring 0 is the infinite-distance (far-field) ring.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

from .array_model import INF, ArrayConfig, far_steering, near_steering

LAST_LAYER_RULES = ("example1-window", "eq15-strict")

# Distance-sampling constant scale used when S_delta is not given explicitly.
BETA_DELTA = 1.2


def default_s_delta(cfg: ArrayConfig) -> float:
    """Ring constant N^2 d^2 / (2 lambda beta^2), rounded to four significant digits.

    Gives 68.27 m for 512 antennas at 3 mm.
    """
    value = cfg.N**2 * cfg.d**2 / (2 * cfg.wavelength * BETA_DELTA**2)
    return float(f"{value:.4g}")


def grid_angle(i: int, n_beams: int) -> float:
    """Centre of cell ``i`` when [-1, 1] is split into ``n_beams`` cells."""
    return -1.0 + (2 * i - 1) / n_beams


def ring_distance(s_delta: float, theta: float, ring: int) -> float:
    return INF if ring == 0 else s_delta * (1.0 - theta * theta) / ring


@dataclass(frozen=True, eq=False)
class Codeword:
    """Zero-padded beamforming vector driving a contiguous central block."""

    weights: np.ndarray = field(repr=False)
    theta: float
    distance: float
    angle_index: int
    layer: int | None = None
    distance_index: int | None = None
    ring: int | None = None
    first_active: int = 1
    last_active: int = 0

    @property
    def active(self) -> slice:
        return slice(self.first_active - 1, self.last_active)

    @property
    def n_active(self) -> int:
        return self.last_active - self.first_active + 1

    @property
    def id(self) -> str:
        if self.layer is None:
            return f"pol:{self.angle_index},{self.ring}"
        if self.distance_index is None:
            return f"u{self.layer}:{self.angle_index}"
        return f"u{self.layer}:{self.angle_index},{self.distance_index}"


def _centered(cfg: ArrayConfig, sub: np.ndarray, **meta) -> Codeword:
    n_act = sub.shape[0]
    first = (cfg.N - n_act) // 2 + 1
    w = np.zeros(cfg.N, dtype=complex)
    w[first - 1:first - 1 + n_act] = sub
    w.flags.writeable = False
    return Codeword(w, first_active=first, last_active=first + n_act - 1, **meta)


@dataclass(frozen=True)
class DistanceIndexSet:
    S: int

    @property
    def indices(self) -> list[int]:
        return list(range(self.S))

    def __getitem__(self, k: int) -> int:
        if not 1 <= k <= self.S:
            raise IndexError(f"position {k} outside 1..{self.S}")
        return k - 1

    def __len__(self):
        return self.S


@dataclass(frozen=True, eq=False)
class PolarCodebook:
    """N x S grid of full-array near-field codewords.

    Column ``n`` (1-based) points at theta_n = (2n - N - 1)/N; ring ``s`` sits at
    S_delta (1 - theta_n^2)/s, with ring 0 at infinity.
    """

    cfg: ArrayConfig
    S: int
    s_delta: float

    @cached_property
    def thetas(self) -> np.ndarray:
        N = self.cfg.N
        return (2.0 * np.arange(1, N + 1) - N - 1) / N

    @cached_property
    def matrix(self) -> np.ndarray:
        """All codewords as columns, ordered n-major: column (n-1)*S + s."""
        N, S = self.cfg.N, self.S
        W = np.empty((N, N * S), dtype=complex)
        for col, (n, s) in enumerate(self.indices()):
            W[:, col] = near_steering(self.thetas[n - 1], self.distance(n, s), self.cfg)
        W.flags.writeable = False
        return W

    def __len__(self):
        return self.cfg.N * self.S

    def indices(self):
        return [(n, s) for n in range(1, self.cfg.N + 1) for s in range(self.S)]

    def column(self, n: int, s: int) -> int:
        if not (1 <= n <= self.cfg.N and 0 <= s < self.S):
            raise IndexError(f"polar index ({n}, {s}) outside grid")
        return (n - 1) * self.S + s

    def distance(self, n: int, s: int) -> float:
        return ring_distance(self.s_delta, float(self.thetas[n - 1]), s)

    def codeword(self, n: int, s: int) -> Codeword:
        col = self.column(n, s)
        w = self.matrix[:, col]
        return Codeword(w, float(self.thetas[n - 1]), self.distance(n, s), n, ring=s,
                        distance_index=s, first_active=1, last_active=self.cfg.N)

    def __iter__(self):
        return (self.codeword(n, s) for n, s in self.indices())


@lru_cache(maxsize=16)
def polar_codebook(cfg: ArrayConfig, S: int, s_delta: float) -> PolarCodebook:
    if S < 1 or not s_delta > 0:
        raise ValueError("need S >= 1 and S_delta > 0")
    return PolarCodebook(cfg, S, float(s_delta))


@lru_cache(maxsize=16)
def angular_codebook(cfg: ArrayConfig) -> tuple[Codeword, ...]:
    """Full-array far-field beams on the uniform grid theta_n = (2n - N - 1)/N."""
    return tuple(
        _centered(cfg, far_steering(grid_angle(n, cfg.N), cfg.N),
                  theta=grid_angle(n, cfg.N), distance=INF, angle_index=n, ring=0)
        for n in range(1, cfg.N + 1)
    )


@lru_cache(maxsize=16)
def angular_matrix(cfg: ArrayConfig) -> np.ndarray:
    """Angular codebook as an N x N matrix of columns."""
    W = np.stack([c.weights for c in angular_codebook(cfg)], axis=1)
    W.flags.writeable = False
    return W


@lru_cache(maxsize=None)
def upper_codeword(layer: int, i: int, cfg: ArrayConfig) -> Codeword:
    """Far-field beam of the central 2**layer antennas toward cell ``i``."""
    n_act = 2**layer
    if not (layer >= 1 and n_act <= cfg.N):
        raise IndexError(f"layer {layer} invalid for N={cfg.N}")
    if not 1 <= i <= n_act:
        raise IndexError(f"codeword index {i} outside 1..{n_act}")
    theta = grid_angle(i, n_act)
    return _centered(cfg, far_steering(theta, n_act), theta=theta, distance=INF,
                     angle_index=i, layer=layer)


def _raw_distance_index(u: int, j: int, S: int, L: int) -> int:
    s_u = 2 ** (u - L)
    # exact integer ceil((2j-1) S / (2 S_u))
    return -((-(2 * j - 1) * S) // (2 * s_u))


def distance_index(u: int, j: int, S: int, L: int) -> int:
    """Position in the ring set sampled by the ``j``-th distance of layer ``u``."""
    if u <= L:
        raise ValueError(f"layer {u} is not a lower-level layer (L={L})")
    s_u = 2 ** (u - L)
    if not 1 <= j <= s_u:
        raise IndexError(f"distance index {j} outside 1..{s_u}")
    return _raw_distance_index(u, j, S, L)


@lru_cache(maxsize=None)
def _near_codeword(cfg: ArrayConfig, layer: int, i: int, k: int, s_delta: float,
                   distance_index: int) -> Codeword:
    n_act = 2**layer
    theta = grid_angle(i, n_act)
    ring = k - 1
    r = ring_distance(s_delta, theta, ring)
    return _centered(cfg, near_steering(theta, r, cfg, n_act), theta=theta, distance=r,
                     angle_index=i, layer=layer, distance_index=distance_index, ring=ring)


def lower_codeword(u: int, i: int, j: int, cfg: ArrayConfig, S: int, s_delta: float, L: int) -> Codeword:
    """Near-field beam of the central 2**u antennas at angle cell ``i``, distance ``j``."""
    L_t = cfg.n_layers
    if not L < u <= L_t:
        raise IndexError(f"layer {u} outside {L + 1}..{L_t}")
    if not 1 <= i <= 2**u:
        raise IndexError(f"angle index {i} outside 1..{2**u}")
    k = distance_index(u, j, S, L)
    return _near_codeword(cfg, u, i, k, float(s_delta), j)


def last_layer_positions(j_star: int, S: int, L: int, L_t: int, rule: str = "example1-window") -> list[int]:
    """Ring-set positions probed in the last layer after winner ``j_star`` at layer L_t - 1."""
    u = L_t - 1
    if rule == "example1-window":
        c = distance_index(u, j_star, S, L)
        return [k for k in (c - 1, c, c + 1) if 1 <= k <= S]
    if rule == "eq15-strict":
        distance_index(u, j_star, S, L)  # range check
        lo = _raw_distance_index(u, j_star - 1, S, L)
        hi = _raw_distance_index(u, j_star + 1, S, L)
        return [k for k in range(max(lo + 1, 1), min(hi - 1, S) + 1)]
    raise ValueError(f"unknown last-layer rule {rule!r}; expected one of {LAST_LAYER_RULES}")


def last_layer_candidates(i_star: int, j_star: int, rule: str, cfg: ArrayConfig, S: int,
                          s_delta: float, L: int) -> list[Codeword]:
    """Full-array codewords tested in the last layer, direction-major."""
    L_t = cfg.n_layers
    positions = last_layer_positions(j_star, S, L, L_t, rule)
    return [
        _near_codeword(cfg, L_t, i, k, float(s_delta), k)
        for i in (2 * i_star - 1, 2 * i_star)
        for k in positions
    ]


def full_distance_candidates(i_star: int, cfg: ArrayConfig, S: int, s_delta: float) -> list[Codeword]:
    """Last-layer set when no distance information precedes it (L = L_t - 1)."""
    return [
        _near_codeword(cfg, cfg.n_layers, i, k, float(s_delta), k)
        for i in (2 * i_star - 1, 2 * i_star)
        for k in range(1, S + 1)
    ]


def hierarchical_codebook(cfg: ArrayConfig, S: int, s_delta: float, L: int) -> list[Codeword]:
    """Every codeword of the upper (layers 1..L) and lower (L+1..L_t) levels."""
    out = [upper_codeword(l, i, cfg) for l in range(1, L + 1) for i in range(1, 2**l + 1)]
    for u in range(L + 1, cfg.n_layers + 1):
        out.extend(lower_codeword(u, i, j, cfg, S, s_delta, L)
                   for i in range(1, 2**u + 1) for j in range(1, 2 ** (u - L) + 1))
    return out


CSV_COLUMNS = ("layer", "angle_index", "distance_index", "theta", "distance_m_or_inf",
               "first_active", "last_active")


def export_codebook(codewords, csv_path: str | Path, bin_path: str | Path) -> int:
    """Write the codeword table and the little-endian interleaved (re, im) float64 dump.

    Returns the number of codewords written.
    """
    count = 0
    with open(csv_path, "w", newline="") as fcsv, open(bin_path, "wb") as fbin:
        writer = csv.writer(fcsv, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for cw in codewords:
            writer.writerow([
                "" if cw.layer is None else cw.layer,
                cw.angle_index,
                "" if cw.distance_index is None else cw.distance_index,
                repr(cw.theta),
                "inf" if math.isinf(cw.distance) else repr(cw.distance),
                cw.first_active,
                cw.last_active,
            ])
            fbin.write(np.ascontiguousarray(cw.weights, dtype="<c16").tobytes())
            count += 1
    return count


def read_codebook_bin(path: str | Path, N: int) -> np.ndarray:
    """Inverse of the binary dump: (count, N) complex array."""
    raw = np.fromfile(path, dtype="<f8")
    if raw.size % (2 * N):
        raise ValueError("file size is not a whole number of codewords")
    return (raw[0::2] + 1j * raw[1::2]).reshape(-1, N)


__all__ = [
    "BETA_DELTA", "Codeword", "DistanceIndexSet", "LAST_LAYER_RULES", "PolarCodebook",
    "angular_codebook", "angular_matrix", "default_s_delta", "distance_index", "export_codebook",
    "full_distance_candidates", "grid_angle", "hierarchical_codebook", "last_layer_candidates",
    "last_layer_positions", "lower_codeword", "polar_codebook", "read_codebook_bin",
    "ring_distance", "upper_codeword",
]

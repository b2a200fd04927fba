"""Geometry, steering vectors, LoS channel and noisy pilot measurements for a
half-wavelength ULA.

Distances are plain floats; ``math.inf`` marks a far-field (planar) steering
target and is accepted everywhere a distance is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0
INF = math.inf


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watt(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ArrayConfig:
    """Half-wavelength ULA with ``N`` antennas at carrier wavelength ``wavelength``."""

    N: int
    wavelength: float

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def from_frequency(cls, N: int, frequency_hz: float) -> "ArrayConfig":
        return cls(N, SPEED_OF_LIGHT / frequency_hz)

    @property
    def d(self) -> float:
        return self.wavelength / 2.0

    @property
    def aperture(self) -> float:
        return self.N * self.d

    @property
    def n_layers(self) -> int:
        """Depth of the binary codebook tree, log2(N)."""
        return self.N.bit_length() - 1

    @property
    def r_rayleigh(self) -> float:
        return 2.0 * self.aperture**2 / self.wavelength

    @property
    def r_min(self) -> float:
        """Fresnel boundary: below it amplitude variations are no longer negligible."""
        D = self.aperture
        return max(0.5 * math.sqrt(D**3 / self.wavelength), 1.2 * D)


#: 512 antennas at 100 GHz, as in the reference numerical setup.
REFERENCE_ARRAY = ArrayConfig(512, 0.003)


@dataclass(frozen=True)
class UserLocation:
    theta: float
    r: float

    def __post_init__(self):
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [-1, 1], got {self.theta}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")


def element_offset(n: int, N: int) -> float:
    """Position of antenna ``n`` (1-based) in units of d, relative to the array centre."""
    if not 1 <= n <= N:
        raise IndexError(f"antenna index {n} outside 1..{N}")
    return (2 * n - N - 1) / 2


def _offsets(N: int) -> np.ndarray:
    return (2.0 * np.arange(1, N + 1) - N - 1) / 2.0


def element_distance(user: UserLocation, n: int, cfg: ArrayConfig) -> float:
    """Exact distance from antenna ``n`` to the user."""
    y = element_offset(n, cfg.N) * cfg.d
    r, t = user.r, user.theta
    return math.sqrt(r * r * (1.0 - t * t) + (r * t - y) ** 2)


def _path_difference(theta: float, r: float, y: np.ndarray) -> np.ndarray:
    # r_n - r without cancellation for large r
    rn = np.sqrt(r * r * (1.0 - theta * theta) + (r * theta - y) ** 2)
    return (y * y - 2.0 * r * theta * y) / (rn + r)


def far_steering(theta: float, N: int) -> np.ndarray:
    """Planar-wave steering vector, phase referenced to the first element.

    The sign matches the large-r limit of :func:`near_steering` for antennas at
    (0, delta_n d): r_n - r -> -delta_n d theta, so the phase grows with n.
    """
    return np.exp(1j * np.pi * np.arange(N) * theta) / math.sqrt(N)


def near_steering(theta: float, r: float, cfg: ArrayConfig, n_active: int | None = None) -> np.ndarray:
    """Spherical-wave steering vector toward ``(theta, r)``.

    With ``n_active`` the vector describes the central sub-array of that size
    (length ``n_active``, unit norm). ``r = inf`` gives the far-field vector.
    """
    n = cfg.N if n_active is None else n_active
    if math.isinf(r):
        return far_steering(theta, n)
    if not r > 0:
        raise ValueError("distance must be positive")
    y = _offsets(n) * cfg.d
    phase = (2.0 * np.pi / cfg.wavelength) * _path_difference(theta, r, y)
    return np.exp(-1j * phase) / math.sqrt(n)


def _weights(w) -> np.ndarray:
    return w.weights if hasattr(w, "weights") else np.asarray(w)


def beam_gain(b, w) -> float:
    """Normalized beam gain |b^H w|; either argument may be a Codeword."""
    b, w = _weights(b), _weights(w)
    if b.shape != w.shape:
        raise ValueError(f"length mismatch: {b.shape} vs {w.shape}")
    return float(abs(np.vdot(b, w)))


@dataclass(frozen=True, eq=False)
class Channel:
    """LoS channel h = sqrt(N) * gain * b(theta, r)."""

    cfg: ArrayConfig
    user: UserLocation
    rho0: float
    gain: complex
    h: np.ndarray = field(repr=False)

    @property
    def steering(self) -> np.ndarray:
        return near_steering(self.user.theta, self.user.r, self.cfg)


def make_channel(user: UserLocation, rho0: float, cfg: ArrayConfig) -> Channel:
    if math.isinf(user.r):
        raise ValueError("a channel needs a finite distance")
    gain = math.sqrt(rho0) / user.r * np.exp(-2j * np.pi * user.r / cfg.wavelength)
    h = math.sqrt(cfg.N) * gain * near_steering(user.theta, user.r, cfg)
    h.flags.writeable = False
    return Channel(cfg, user, rho0, complex(gain), h)


class MeasurementOracle:
    """Noisy received-power source for one user; counts every pilot it serves.

    Each measurement transmits x = sqrt(P) through the codeword and returns
    |sqrt(P) h^H w + z|^2 with z ~ CN(0, noise_power), independent per pilot.
    """

    def __init__(self, channel: Channel, pilot_power: float, noise_power: float, seed: int | np.random.SeedSequence | None = 0):
        if pilot_power <= 0 or noise_power < 0:
            raise ValueError("pilot_power must be > 0 and noise_power >= 0")
        self.channel = channel
        self.pilot_power = pilot_power
        self.noise_power = noise_power
        self.rng = np.random.default_rng(seed)
        self.pilots_used = 0
        self._amp = math.sqrt(pilot_power)
        self._hc = channel.h.conj()

    def _noise(self, k: int) -> np.ndarray:
        if self.noise_power == 0:
            return np.zeros(k, dtype=complex)
        z = self.rng.standard_normal((k, 2))
        return (z[:, 0] + 1j * z[:, 1]) * math.sqrt(self.noise_power / 2.0)

    def measure(self, w) -> float:
        """Received power for one codeword (or raw length-N weight vector)."""
        span = getattr(w, "active", slice(None))
        weights = _weights(w)
        if weights.shape != (self.channel.cfg.N,):
            raise ValueError("weight vector length must equal N")
        s = self._amp * (self._hc[span] @ weights[span])
        self.pilots_used += 1
        return float(abs(s + self._noise(1)[0]) ** 2)

    def measure_many(self, codewords) -> np.ndarray:
        return np.array([self.measure(w) for w in codewords])

    def measure_matrix(self, W: np.ndarray) -> np.ndarray:
        """Measure every column of ``W`` (N x K) once, in column order."""
        s = self._amp * (self._hc @ W)
        self.pilots_used += W.shape[1]
        return np.abs(s + self._noise(W.shape[1])) ** 2

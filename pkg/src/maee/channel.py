"""Field-response channel model for a linearly movable transmit antenna.

A user's channel vector is ``h(x) = G^H f(x)`` where ``G`` is the path
response matrix and ``f(x)`` carries the per-path phase shifts induced by
the antenna position ``x``.  The squared channel norm then reduces to a
finite cosine series in ``x``, which this module exposes for fast grid
evaluation and for periodicity analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import TYPE_CHECKING

import numpy as np

from . import kernels
from .errors import DegeneratePaths

if TYPE_CHECKING:  # pragma: no cover
    from .energy import SystemScenario

TWO_PI = 2.0 * math.pi


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def virtual_aod(elevation, azimuth):
    """Virtual angle of departure ``sin(elevation) * cos(azimuth)``."""
    return np.sin(elevation) * np.cos(azimuth)


@dataclass(frozen=True)
class PathGeometry:
    """Per-path departure angles and their virtual AoDs."""

    elevation: np.ndarray
    azimuth: np.ndarray
    virtual_aod: np.ndarray

    def __post_init__(self):
        for name in ("elevation", "azimuth", "virtual_aod"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), dtype=np.float64)))
        expected = virtual_aod(self.elevation, self.azimuth)
        if not np.allclose(self.virtual_aod, expected, rtol=0.0, atol=1e-12):
            raise ValueError("virtual_aod must equal sin(elevation)*cos(azimuth)")
        if np.any(np.abs(self.virtual_aod) > 1.0 + 1e-12):
            raise ValueError("virtual AoDs must lie in [-1, 1]")

    @classmethod
    def from_angles(cls, elevation, azimuth) -> "PathGeometry":
        elevation = np.asarray(elevation, dtype=np.float64)
        azimuth = np.asarray(azimuth, dtype=np.float64)
        return cls(elevation, azimuth, virtual_aod(elevation, azimuth))

    @classmethod
    def from_virtual_aods(cls, aods) -> "PathGeometry":
        """Geometry with given virtual AoDs (azimuth zero, elevation arcsin)."""
        aods = np.clip(np.asarray(aods, dtype=np.float64), -1.0, 1.0)
        elevation = np.arcsin(aods)
        return cls(elevation, np.zeros_like(aods), np.sin(elevation))

    @property
    def num_paths(self) -> int:
        return self.virtual_aod.size


@dataclass(frozen=True)
class ChannelRealization:
    """Path-response matrix plus geometry for one user."""

    path_response: np.ndarray  # (num_paths, num_bs_antennas) complex
    geometry: PathGeometry
    wavelength: float
    num_paths: int = field(init=False)
    num_bs_antennas: int = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.path_response, dtype=np.complex128)
        if g.ndim != 2:
            raise ValueError("path_response must be a 2-D matrix")
        object.__setattr__(self, "path_response", _readonly(g))
        object.__setattr__(self, "num_paths", g.shape[0])
        object.__setattr__(self, "num_bs_antennas", g.shape[1])
        if self.num_paths < 1 or self.num_bs_antennas < 1:
            raise ValueError("need at least one path and one BS antenna")
        if self.geometry.num_paths != self.num_paths:
            raise ValueError("geometry path count does not match path_response rows")
        if not self.wavelength > 0.0:
            raise ValueError("wavelength must be positive")


def field_response(x, geometry: PathGeometry, wavelength: float) -> np.ndarray:
    """Unit-modulus phase vector ``exp(j*2*pi*x*aod/wavelength)`` per path."""
    phase = (TWO_PI / wavelength) * x * geometry.virtual_aod
    return np.exp(1j * phase)


def channel_vector(chan: ChannelRealization, x: float) -> np.ndarray:
    """Channel vector ``G^H f(x)`` seen by the BS array."""
    f = field_response(x, chan.geometry, chan.wavelength)
    return chan.path_response.conj().T @ f


def channel_gain(chan: ChannelRealization, x):
    """Squared channel norm ``||G^H f(x)||^2``, evaluated directly.

    Accepts a scalar or an array of positions.  This is the direct
    matrix-vector route; :func:`gain_expansion` provides the closed-form
    cosine-series route, and the two are kept independent on purpose.
    """
    xs = np.asarray(x, dtype=np.float64)
    if xs.ndim == 0:
        h = channel_vector(chan, float(xs))
        return float(np.real(np.vdot(h, h)))
    phases = (TWO_PI / chan.wavelength) * np.multiply.outer(chan.geometry.virtual_aod, xs)
    f = np.exp(1j * phases)  # (L, nx)
    h = chan.path_response.conj().T @ f  # (N, nx)
    return np.sum(np.abs(h) ** 2, axis=0)


@dataclass(frozen=True)
class GainExpansion:
    """Cosine-series form of a quadratic ``f(x)^H M f(x)``.

    ``value(x) = constant_term + sum_t 2*magnitudes[t] *
    cos(2*pi*x*aod_diffs[t]/wavelength + phases[t])`` over path pairs a<b.
    """

    constant_term: float
    magnitudes: np.ndarray
    phases: np.ndarray
    aod_diffs: np.ndarray
    wavelength: float

    def __post_init__(self):
        for name in ("magnitudes", "phases", "aod_diffs"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), dtype=np.float64)))
        # private writable copies: the JIT dispatcher is slow on read-only
        # array signatures, and the hot grid kernel goes through it
        object.__setattr__(self, "_mags", np.ascontiguousarray(self.magnitudes).copy())
        object.__setattr__(self, "_phs", np.ascontiguousarray(self.phases).copy())
        object.__setattr__(self, "_frq", (TWO_PI / self.wavelength)
                           * np.ascontiguousarray(self.aod_diffs))

    @property
    def cross_terms(self):
        """List of (magnitude, phase, aod_diff) triples for pairs a<b."""
        return list(zip(self.magnitudes, self.phases, self.aod_diffs))

    def evaluate(self, x):
        """Series value at position(s) x."""
        xs = np.asarray(x, dtype=np.float64)
        if xs.ndim == 0:
            args = self._frq * float(xs) + self._phs
            return float(self.constant_term + 2.0 * np.dot(np.cos(args), self._mags))
        return kernels.gain_profile(self.constant_term, self._mags, self._phs,
                                    self._frq, xs)

    def derivative(self, x):
        """First derivative of the series with respect to x."""
        xs = np.asarray(x, dtype=np.float64)
        w = self._frq
        if xs.ndim == 0:
            args = w * float(xs) + self._phs
            return float(-np.dot(np.sin(args), 2.0 * self._mags * w))
        args = np.multiply.outer(xs, w) + self._phs
        return -(np.sin(args) * (2.0 * self._mags * w)).sum(axis=-1)

    def curvature_bound(self) -> float:
        """Upper bound on |second derivative|, valid for every x."""
        w = self._frq
        return float(np.sum(2.0 * self._mags * w * w))


def hermitian_expansion(m: np.ndarray, aods: np.ndarray, wavelength: float) -> GainExpansion:
    """Expand ``f(x)^H M f(x)`` (M Hermitian) into a cosine series."""
    m = np.asarray(m, dtype=np.complex128)
    aods = np.asarray(aods, dtype=np.float64)
    n = m.shape[0]
    constant = float(np.trace(m).real)
    a_idx, b_idx = np.triu_indices(n, k=1)
    entries = m[a_idx, b_idx]
    return GainExpansion(
        constant_term=constant,
        magnitudes=np.abs(entries),
        phases=np.angle(entries),
        aod_diffs=aods[b_idx] - aods[a_idx],
        wavelength=wavelength,
    )


def gain_expansion(chan: ChannelRealization) -> GainExpansion:
    """Closed-form channel gain ``||h(x)||^2`` as a cosine series.

    The constant term is the total path power ``sum |g_ln|^2`` and each
    cross term couples a pair of paths through ``Y_ab = sum_n g_an g_bn*``.
    """
    g = chan.path_response
    return hermitian_expansion(g @ g.conj().T, chan.geometry.virtual_aod, chan.wavelength)


def two_path_period(chan: ChannelRealization) -> float:
    """Gain period ``wavelength / |aod_2 - aod_1|`` of a two-path channel."""
    if chan.num_paths != 2:
        raise ValueError("two_path_period requires exactly two paths")
    diff = chan.geometry.virtual_aod[1] - chan.geometry.virtual_aod[0]
    if diff == 0.0:
        raise DegeneratePaths("coincident virtual AoDs: gain is constant, period undefined")
    return chan.wavelength / abs(diff)


def quantized_period(q_indices, resolution: int, wavelength: float) -> float:
    """Minimum gain period for AoDs on the grid ``-1 + (2q-1)/Q``.

    With sorted grid indices the AoD gaps are ``2*(q_{l+1}-q_l)/Q``; the
    period is ``Q*wavelength / (2*gcd of the gaps)``.  Zero gaps
    (coincident quantized AoDs) are skipped.
    """
    q = np.asarray(q_indices, dtype=np.int64)
    if q.size < 2:
        raise ValueError("need at least two grid indices")
    if np.any(np.diff(q) < 0):
        raise ValueError("grid indices must be sorted non-decreasing")
    if np.any(q < 1) or np.any(q > resolution):
        raise ValueError("grid indices must lie in [1, Q]")
    gaps = [int(d) for d in np.diff(q) if d > 0]
    if not gaps:
        raise DegeneratePaths("all quantized AoDs coincide: gain is constant, period undefined")
    c = reduce(math.gcd, gaps)
    return resolution * wavelength / (2.0 * c)


def quantize_aods(aods, resolution: int):
    """Snap virtual AoDs to the nearest grid value ``-1 + (2q-1)/Q``.

    Returns ``(q_indices, quantized_values)`` with 1-based indices.
    """
    aods = np.asarray(aods, dtype=np.float64)
    q = np.rint((aods + 1.0) * resolution / 2.0 + 0.5).astype(np.int64)
    q = np.clip(q, 1, resolution)
    return q, -1.0 + (2.0 * q - 1.0) / resolution


def sample_channels(cfg: "SystemScenario", rng_seed: int) -> list[ChannelRealization]:
    """Draw every user's channel for one trial, in user-index order.

    One generator is seeded per trial and users are drawn sequentially, so
    a trial's realizations are reproducible across schemes and sweeps.
    Path-response entries are complex Gaussian with variance
    ``rho0 * d^-tau / L``; elevation and azimuth are uniform on [0, pi].
    """
    rng = np.random.default_rng(rng_seed)
    var = cfg.rho0 * cfg.distance ** (-cfg.pathloss_exp) / cfg.num_paths
    scale = math.sqrt(var / 2.0)
    out = []
    for _ in range(cfg.num_users):
        shape = (cfg.num_paths, cfg.num_bs_antennas)
        g = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        elevation = rng.uniform(0.0, math.pi, cfg.num_paths)
        azimuth = rng.uniform(0.0, math.pi, cfg.num_paths)
        geom = PathGeometry.from_angles(elevation, azimuth)
        out.append(ChannelRealization(g, geom, cfg.wavelength))
    return out


def sample_channel(cfg: "SystemScenario", user_index: int, rng_seed: int) -> ChannelRealization:
    """Channel of one user within a trial (consistent with :func:`sample_channels`)."""
    if not 0 <= user_index < cfg.num_users:
        raise ValueError("user_index out of range")
    return sample_channels(cfg, rng_seed)[user_index]

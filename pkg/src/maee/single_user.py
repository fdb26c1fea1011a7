"""Single-user optimizer: 1D exhaustive position search with ratio-based power updates.

For each sub-region center the transmit power is optimized by alternating a
closed-form clamp with a ratio (efficiency) update until the efficiency
increase falls below a tolerance; the center with the best efficiency wins.
An analytic efficiency upper bound is available for sanity checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .channel import (ChannelRealization, PathGeometry, channel_vector,
                      gain_expansion, quantize_aods)
from .energy import SystemScenario, block_metrics
from .errors import (BlockExhausted, Infeasible, InfeasibleThroughput,
                     ZeroEnergy, ZeroGain)

_LN2 = math.log(2.0)
DEFAULT_MAX_INNER = 100  # power-update iterations per position


@dataclass(frozen=True)
class GridSpec:
    """Centers of equal-length subdivisions of the moving region."""

    num_subregions: int
    centers: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        if c.size != self.num_subregions:
            raise ValueError("centers length must equal num_subregions")
        if c.size > 1 and np.any(np.diff(c) <= 0.0):
            raise ValueError("centers must be strictly increasing")

    @classmethod
    def uniform(cls, region_length: float, num_subregions: int) -> "GridSpec":
        if num_subregions < 1:
            raise ValueError("need at least one subregion")
        step = region_length / num_subregions
        centers = (np.arange(num_subregions) + 0.5) * step
        return cls(num_subregions, centers)


def default_subregions(scenario: SystemScenario) -> int:
    """Default grid density: sub-regions of length wavelength/100."""
    region = scenario.users[0].region_length
    return max(1, round(100.0 * region / scenario.wavelength))


class DinkelbachConstants(NamedTuple):
    """Position-dependent constants of the power problem at a fixed x."""

    comm_time: float        # s, block minus movement delay
    fixed_energy: float     # J, movement (plus any circuit) energy
    comm_efficiency: float
    noise_power: float      # W


def position_constants(scenario: SystemScenario, x: float) -> DinkelbachConstants:
    u = scenario.users[0]
    delay = abs(x - u.initial_position) / u.speed
    t_comm = scenario.block_duration - delay
    if t_comm <= 0.0:
        raise BlockExhausted("movement delay exhausts the block at this position")
    fixed = u.energy_rate * abs(x - u.initial_position) + u.circuit_energy
    return DinkelbachConstants(t_comm, fixed, u.comm_efficiency, scenario.noise_power)


def dinkelbach_objective(p: float, alpha: float, gain: float,
                         consts: DinkelbachConstants) -> float:
    """Parametric objective: rate minus ``alpha`` times energy, in bits/Hz."""
    rate = consts.comm_time * math.log2(1.0 + p * gain / consts.noise_power)
    return rate - alpha * p * consts.comm_time / consts.comm_efficiency \
        - alpha * consts.fixed_energy


def dinkelbach_alpha(p: float, gain: float, consts: DinkelbachConstants) -> float:
    """Ratio update: the true energy efficiency at (p, x)."""
    den = consts.fixed_energy + p * consts.comm_time / consts.comm_efficiency
    if den == 0.0:
        raise ZeroEnergy("zero total energy: efficiency undefined")
    return consts.comm_time * math.log2(1.0 + p * gain / consts.noise_power) / den


def unconstrained_power(alpha: float, gain: float, comm_efficiency: float,
                        noise_power: float) -> float:
    """Stationary power ``max(0, eta_c/(alpha ln2) - sigma^2/gain)``."""
    if gain == 0.0:
        raise ZeroGain("zero channel gain: stationary power undefined")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    return max(0.0, comm_efficiency / (alpha * _LN2) - noise_power / gain)


def power_threshold(min_throughput: float, comm_time: float, gain: float,
                    noise_power: float, max_power: float | None = None) -> float:
    """Smallest power meeting the throughput floor at this position."""
    if min_throughput == 0.0:
        return 0.0
    if gain == 0.0:
        raise ZeroGain("zero channel gain cannot meet a positive throughput floor")
    p_th = noise_power * (2.0 ** (min_throughput / comm_time) - 1.0) / gain
    if max_power is not None and p_th > max_power:
        raise InfeasibleThroughput(
            f"power floor {p_th:.3g} W exceeds budget {max_power:.3g} W")
    return p_th


def clamp_power(p_unc: float, p_th: float, p_max: float) -> float:
    """Three-branch clamp of the stationary power to [p_th, p_max]."""
    if p_unc < p_th:
        return p_th
    if p_unc > p_max:
        return p_max
    return p_unc


class PowerResult(NamedTuple):
    power: float
    alpha: float                       # equals the efficiency at (power, x)
    trace: list[tuple[float, float, float]]  # (alpha used, power, efficiency after)
    converged: bool


def optimize_power(x: float, chan: ChannelRealization, scenario: SystemScenario,
                   eps1: float = 1e-6, gain: float | None = None,
                   max_iter: int = DEFAULT_MAX_INNER) -> PowerResult:
    """Alternate the power clamp and the ratio update at a fixed position.

    The trace's efficiency column is non-decreasing; on convergence the
    final ratio equals the true energy efficiency at the returned power.
    Raises :class:`InfeasibleThroughput` if the throughput floor cannot be
    met at this position even at full power.
    """
    consts = position_constants(scenario, x)
    if gain is None:
        g = chan.path_response.conj().T @ np.exp(
            1j * (2.0 * math.pi / chan.wavelength) * x * chan.geometry.virtual_aod)
        gain = float(np.real(np.vdot(g, g)))
    p_max = float(scenario.max_power[0])
    r_th = float(scenario.min_throughput[0])
    p_th = power_threshold(r_th, consts.comm_time, gain, consts.noise_power, p_max) \
        if r_th > 0.0 else 0.0

    p = min(max(0.5 * p_max, p_th), p_max)
    alpha = dinkelbach_alpha(p, gain, consts)
    trace: list[tuple[float, float, float]] = []
    converged = False
    for _ in range(max_iter):
        if alpha > 0.0 and gain > 0.0:
            p_new = clamp_power(
                unconstrained_power(alpha, gain, consts.comm_efficiency,
                                    consts.noise_power), p_th, p_max)
        else:
            p_new = p_max
        alpha_new = dinkelbach_alpha(p_new, gain, consts)
        trace.append((alpha, p_new, alpha_new))
        delta = alpha_new - alpha
        p, alpha = p_new, alpha_new
        if delta < eps1:
            converged = True
            break
    return PowerResult(p, alpha, trace, converged)


@dataclass(frozen=True)
class SingleUserSolution:
    position: float
    power: float
    energy_efficiency: float
    dinkelbach_trace: list[tuple[float, float, float]]
    converged: bool
    iterations: int


def exhaustive_search(chan: ChannelRealization, scenario: SystemScenario,
                      num_subregions: int | None = None,
                      eps1: float = 1e-6,
                      max_iter: int = DEFAULT_MAX_INNER) -> SingleUserSolution:
    """Scan all sub-region centers and return the best feasible (x, p) pair.

    Ties in efficiency are broken toward the smaller moving distance.
    Raises :class:`Infeasible` when no center can meet the throughput floor.
    """
    u = scenario.users[0]
    s_count = num_subregions if num_subregions is not None else default_subregions(scenario)
    grid = GridSpec.uniform(u.region_length, s_count)
    gains = np.maximum(gain_expansion(chan).evaluate(grid.centers), 0.0)
    dist = np.abs(grid.centers - u.initial_position)
    t_comm = scenario.block_duration - dist / u.speed
    motor = u.energy_rate * dist + u.circuit_energy

    ee, _, _, feasible = kernels.dinkelbach_scan(
        gains, t_comm, motor, u.comm_efficiency, scenario.noise_power,
        float(scenario.max_power[0]), float(scenario.min_throughput[0]),
        eps1, max_iter)
    if not feasible.any():
        raise Infeasible("no sub-region center satisfies the throughput floor")

    cand = np.flatnonzero(ee == ee.max())
    best = int(cand[np.argmin(dist[cand])])
    res = optimize_power(float(grid.centers[best]), chan, scenario, eps1,
                         gain=float(gains[best]), max_iter=max_iter)
    return SingleUserSolution(
        position=float(grid.centers[best]),
        power=res.power,
        energy_efficiency=res.alpha,
        dinkelbach_trace=res.trace,
        converged=res.converged,
        iterations=len(res.trace),
    )


def ee_upper_bound(chan: ChannelRealization, scenario: SystemScenario,
                   p_star: float, grid: GridSpec) -> float:
    """Efficiency bound at the gain-maximizing grid position for a given power."""
    if p_star <= 0.0:
        raise ValueError("p_star must be positive")
    gain_max = float(np.max(gain_expansion(chan).evaluate(grid.centers)))
    u = scenario.users[0]
    return u.comm_efficiency / p_star * math.log2(
        1.0 + p_star * gain_max / scenario.noise_power)


class QuantizedSolution(NamedTuple):
    position: float
    power: float
    energy_efficiency: float   # evaluated with the true angles
    assumed_efficiency: float  # efficiency the quantized model predicted
    feasible: bool
    iterations: int


def quantized_search(chan: ChannelRealization, scenario: SystemScenario,
                     resolution: int, num_subregions: int | None = None,
                     eps1: float = 1e-6) -> QuantizedSolution:
    """Optimize with AoDs snapped to a resolution-Q grid, then score truthfully.

    Models imperfect angle knowledge: position and power come from the
    quantized channel, while the reported efficiency uses the true one.
    """
    _, aods_q = quantize_aods(chan.geometry.virtual_aod, resolution)
    chan_q = ChannelRealization(chan.path_response,
                                PathGeometry.from_virtual_aods(aods_q),
                                chan.wavelength)
    sol = exhaustive_search(chan_q, scenario, num_subregions, eps1)
    h = channel_vector(chan, sol.position)
    metrics = block_metrics(scenario, [chan], [sol.position], [sol.power],
                            h.reshape(-1, 1))
    feasible = bool(metrics.throughput[0] >= scenario.min_throughput[0] - 1e-9)
    return QuantizedSolution(sol.position, sol.power,
                             float(metrics.efficiency[0]),
                             sol.energy_efficiency, feasible, sol.iterations)

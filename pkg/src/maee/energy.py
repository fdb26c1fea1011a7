"""Motor and communication energy accounting for one transmission block.

A block of duration ``T`` splits into a movement phase (every antenna
travels to its optimized position; data transmission is suspended) and a
communication phase of length ``T - max_k |x_k - x_k^0| / v_k``.  Energy
efficiency is block throughput divided by total consumed energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import channel as chmod
from .errors import BlockExhausted, OutOfRegion, ZeroCombiner


@dataclass(frozen=True)
class MotorSpec:
    """Stepper motor parameters that set the travel energy rate."""

    motor_constant: float       # N*m/A
    peak_current: float         # A
    conversion_efficiency: float
    rotation_radius: float      # m

    def __post_init__(self):
        if min(self.motor_constant, self.peak_current,
               self.conversion_efficiency, self.rotation_radius) <= 0.0:
            raise ValueError("all motor parameters must be positive")
        if self.conversion_efficiency > 1.0:
            raise ValueError("conversion efficiency cannot exceed 1")


def energy_rate(spec: MotorSpec) -> float:
    """Travel energy per meter: ``K_m * I / (eta_m * r)``.

    The motor's power draw grows linearly with speed while the travel time
    shrinks with it, so the energy per unit distance is speed-independent.
    """
    return spec.motor_constant * spec.peak_current / (
        spec.conversion_efficiency * spec.rotation_radius)


@dataclass(frozen=True)
class UserEnergyProfile:
    """Per-user energy/region parameters."""

    energy_rate: float        # J/m
    comm_efficiency: float    # in (0, 1)
    speed: float              # m/s
    initial_position: float   # m
    region_length: float      # m
    circuit_energy: float = 0.0  # J per block, constant circuit draw

    def __post_init__(self):
        if self.energy_rate < 0.0:
            raise ValueError("energy_rate must be nonnegative")
        if not 0.0 < self.comm_efficiency < 1.0:
            raise ValueError("comm_efficiency must lie in (0, 1)")
        if self.speed <= 0.0:
            raise ValueError("speed must be positive")
        if not 0.0 <= self.initial_position <= self.region_length:
            raise ValueError("initial_position must lie inside the region")
        if self.circuit_energy < 0.0:
            raise ValueError("circuit_energy must be nonnegative")


@dataclass(frozen=True)
class SystemScenario:
    """Block parameters, per-user limits, and channel statistics."""

    block_duration: float          # s
    noise_power: float             # W
    users: tuple[UserEnergyProfile, ...]
    max_power: np.ndarray          # W, per user
    min_throughput: np.ndarray     # bits/Hz, per user
    rho0: float                    # linear path loss at reference distance
    distance: float                # m
    pathloss_exp: float
    num_paths: int
    num_bs_antennas: int
    wavelength: float
    num_users: int = field(init=False)

    def __post_init__(self):
        if self.block_duration <= 0.0 or self.noise_power <= 0.0:
            raise ValueError("block_duration and noise_power must be positive")
        users = tuple(self.users)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "num_users", len(users))
        for name in ("max_power", "min_throughput"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=np.float64),
                                  (self.num_users,)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.max_power <= 0.0):
            raise ValueError("max_power must be positive")
        if np.any(self.min_throughput < 0.0):
            raise ValueError("min_throughput must be nonnegative")

    @property
    def initial_positions(self) -> np.ndarray:
        return np.array([u.initial_position for u in self.users])

    @property
    def speeds(self) -> np.ndarray:
        return np.array([u.speed for u in self.users])

    @property
    def energy_rates(self) -> np.ndarray:
        return np.array([u.energy_rate for u in self.users])

    @property
    def comm_efficiencies(self) -> np.ndarray:
        return np.array([u.comm_efficiency for u in self.users])


def motor_energy(profile: UserEnergyProfile, x: float) -> float:
    """Travel energy ``energy_rate * |x - initial_position|`` in Joules."""
    if not 0.0 <= x <= profile.region_length:
        raise OutOfRegion(f"position {x} outside [0, {profile.region_length}]")
    return profile.energy_rate * abs(x - profile.initial_position)


def motor_energy_3d(rates: Sequence[float], start: Sequence[float],
                    end: Sequence[float]) -> float:
    """Per-axis travel energy sum for motors driving orthogonal axes."""
    rates = np.asarray(rates, dtype=np.float64)
    delta = np.abs(np.asarray(end, dtype=np.float64) - np.asarray(start, dtype=np.float64))
    return float(np.dot(rates, delta))


def movement_delay(profile: UserEnergyProfile, x: float) -> float:
    """Travel time ``|x - initial_position| / speed`` in seconds."""
    return abs(x - profile.initial_position) / profile.speed


def sinr(combining: np.ndarray, channels: np.ndarray, powers: np.ndarray,
         noise_power: float, k: int) -> float:
    """Receive SINR of user k after linear combining.

    ``combining`` and ``channels`` are N x K matrices whose k-th columns are
    the combining vector and channel vector of user k.
    """
    w = combining[:, k]
    wn = float(np.real(np.vdot(w, w)))
    if wn == 0.0:
        raise ZeroCombiner(f"combining vector of user {k} is zero")
    cross = np.abs(w.conj() @ channels) ** 2  # |w_k^H h_j|^2 for all j
    signal = cross[k] * powers[k]
    interference = float(np.dot(cross, powers) - signal)
    return signal / (interference + wn * noise_power)


class BlockMetrics(NamedTuple):
    throughput: np.ndarray   # bits/Hz per user
    energy: np.ndarray       # J per user
    efficiency: np.ndarray   # bits/Hz/J per user
    comm_time: float         # s, shared by all users


def block_metrics(scenario: SystemScenario, channels, positions, powers,
                  combining: np.ndarray) -> BlockMetrics:
    """Per-user throughput, energy, and energy efficiency for one block.

    The same communication time ``T - max_k delay_k`` enters both the
    throughput and the communication energy.  A user with zero total energy
    (no movement and zero power) gets efficiency 0 rather than 0/0; such a
    user cannot meet any positive throughput floor.
    """
    positions = np.asarray(positions, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    k_users = scenario.num_users
    delays = np.array([movement_delay(u, positions[k])
                       for k, u in enumerate(scenario.users)])
    move_energy = np.array([motor_energy(u, positions[k])
                            for k, u in enumerate(scenario.users)])
    comm_time = scenario.block_duration - float(delays.max())
    if comm_time <= 0.0:
        raise BlockExhausted("antenna movement exhausts the transmission block")

    h_mat = np.column_stack([chmod.channel_vector(channels[k], positions[k])
                             for k in range(k_users)])
    gamma = np.array([sinr(combining, h_mat, powers, scenario.noise_power, k)
                      for k in range(k_users)])
    throughput = comm_time * np.log2(1.0 + gamma)
    circuit = np.array([u.circuit_energy for u in scenario.users])
    energy = move_energy + circuit + powers / scenario.comm_efficiencies * comm_time
    efficiency = np.where(energy > 0.0, throughput / np.where(energy > 0.0, energy, 1.0), 0.0)
    return BlockMetrics(throughput, energy, efficiency, comm_time)

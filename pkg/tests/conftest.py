import math

import numpy as np
import pytest

from maee import (ChannelRealization, PathGeometry, SystemScenario,
                  UserEnergyProfile)

WAVELENGTH = 0.01
NOISE_W = 1e-10          # -70 dBm
P_MAX_W = 0.01           # 10 dBm
RHO0 = 1e-4              # -40 dB
DISTANCE = 50.0
PATHLOSS_EXP = 2.8


def make_scenario(num_users=1, num_paths=10, num_bs_antennas=16,
                  region=WAVELENGTH, block_duration=2.0, energy_rate=0.175,
                  speed=0.1, comm_efficiency=0.5, min_throughput=0.8,
                  max_power=P_MAX_W, noise_power=NOISE_W,
                  initial_position=None, wavelength=WAVELENGTH,
                  circuit_energy=0.0):
    x0 = region / 2.0 if initial_position is None else initial_position
    user = UserEnergyProfile(energy_rate=energy_rate,
                             comm_efficiency=comm_efficiency, speed=speed,
                             initial_position=x0, region_length=region,
                             circuit_energy=circuit_energy)
    return SystemScenario(
        block_duration=block_duration, noise_power=noise_power,
        users=(user,) * num_users, max_power=max_power,
        min_throughput=min_throughput, rho0=RHO0, distance=DISTANCE,
        pathloss_exp=PATHLOSS_EXP, num_paths=num_paths,
        num_bs_antennas=num_bs_antennas, wavelength=wavelength)


def rand_channel(rng, num_paths, num_bs_antennas, wavelength=WAVELENGTH,
                 scale=1.0, aods=None):
    g = scale * (rng.standard_normal((num_paths, num_bs_antennas))
                 + 1j * rng.standard_normal((num_paths, num_bs_antennas)))
    if aods is None:
        geom = PathGeometry.from_angles(rng.uniform(0, math.pi, num_paths),
                                        rng.uniform(0, math.pi, num_paths))
    else:
        geom = PathGeometry.from_virtual_aods(aods)
    return ChannelRealization(g, geom, wavelength)


def direct_gain(chan, x):
    """Independent oracle: dense complex matvec, then squared norm."""
    f = np.exp(1j * 2.0 * np.pi / chan.wavelength * x * chan.geometry.virtual_aod)
    h = chan.path_response.conj().T @ f
    return float(np.sum(np.abs(h) ** 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

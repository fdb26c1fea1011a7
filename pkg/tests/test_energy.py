import numpy as np
import pytest

from maee import (BlockExhausted, MotorSpec, OutOfRegion, UserEnergyProfile,
                  ZeroCombiner, block_metrics, channel_vector, energy_rate,
                  motor_energy, motor_energy_3d, movement_delay, sinr)

from conftest import make_scenario, rand_channel


class TestEnergyRate:
    def test_reference_motor(self):
        spec = MotorSpec(motor_constant=0.035, peak_current=1.0,
                         conversion_efficiency=1.0, rotation_radius=0.2)
        assert energy_rate(spec) == pytest.approx(0.175)

    def test_efficiency_inverse(self):
        base = MotorSpec(0.035, 1.0, 1.0, 0.2)
        halved = MotorSpec(0.035, 1.0, 0.5, 0.2)
        assert energy_rate(halved) == pytest.approx(2 * energy_rate(base))

    def test_radius_inverse(self):
        base = MotorSpec(0.035, 1.0, 1.0, 0.2)
        doubled = MotorSpec(0.035, 1.0, 1.0, 0.4)
        assert energy_rate(doubled) == pytest.approx(energy_rate(base) / 2)


def _profile(**kw):
    defaults = dict(energy_rate=0.175, comm_efficiency=0.5, speed=0.1,
                    initial_position=0.005, region_length=0.01)
    defaults.update(kw)
    return UserEnergyProfile(**defaults)


class TestMotorEnergy:
    def test_no_movement(self):
        u = _profile()
        assert motor_energy(u, u.initial_position) == 0.0

    def test_reference_value(self):
        u = _profile()
        assert motor_energy(u, u.initial_position + 0.005) == pytest.approx(8.75e-4)

    def test_out_of_region(self):
        u = _profile()
        with pytest.raises(OutOfRegion):
            motor_energy(u, u.region_length + 1e-9)

    def test_symmetry(self):
        u = _profile()
        for delta in (0.001, 0.003):
            assert motor_energy(u, u.initial_position + delta) == pytest.approx(
                motor_energy(u, u.initial_position - delta))


class TestMotorEnergy3d:
    def test_no_movement(self):
        assert motor_energy_3d((1.0, 2.0, 3.0), (0.1, 0.2, 0.3), (0.1, 0.2, 0.3)) == 0.0

    def test_reduces_to_1d(self):
        u = _profile()
        e3 = motor_energy_3d((u.energy_rate,) * 3, (u.initial_position, 0, 0),
                             (u.initial_position + 0.002, 0, 0))
        assert e3 == pytest.approx(motor_energy(u, u.initial_position + 0.002))

    def test_axis_sum(self):
        assert motor_energy_3d((1.0, 2.0, 3.0), (0, 0, 0),
                               (0.01, 0.01, 0.01)) == pytest.approx(0.06)


class TestMovementDelay:
    def test_zero(self):
        u = _profile()
        assert movement_delay(u, u.initial_position) == 0.0

    def test_reference(self):
        u = _profile()
        assert movement_delay(u, u.initial_position + 0.005) == pytest.approx(0.05)

    def test_inverse_speed(self):
        slow = _profile(speed=0.1)
        fast = _profile(speed=0.2)
        x = 0.008
        assert movement_delay(slow, x) == pytest.approx(2 * movement_delay(fast, x))


class TestSinr:
    def test_mrc_single_user(self, rng):
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        hmat = h.reshape(-1, 1)
        p = np.array([0.01])
        got = sinr(hmat, hmat, p, 1e-10, 0)
        assert got == pytest.approx(0.01 * np.linalg.norm(h) ** 2 / 1e-10, rel=1e-12)

    def test_zero_power(self, rng):
        h = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        assert sinr(h, h, np.array([0.0, 0.01]), 1e-10, 0) == 0.0

    def test_orthogonal_channels_no_interference(self):
        hmat = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], dtype=complex)
        p = np.array([0.02, 0.05])
        got = sinr(hmat, hmat, p, 1e-9, 0)
        assert got == pytest.approx(0.02 / 1e-9, rel=1e-12)

    def test_zero_combiner(self):
        hmat = np.ones((3, 1), dtype=complex)
        w = np.zeros((3, 1), dtype=complex)
        with pytest.raises(ZeroCombiner):
            sinr(w, hmat, np.array([0.01]), 1e-10, 0)

    def test_mmse_attains_rayleigh_quotient_max(self, rng):
        # oracle: max_w SINR_k = p_k h_k^H B^{-1} h_k, B = interference+noise cov
        n, k_users, sigma2 = 4, 3, 1e-3
        h = rng.standard_normal((n, k_users)) + 1j * rng.standard_normal((n, k_users))
        p = np.array([0.3, 0.2, 0.5])
        w = np.linalg.solve(h @ np.diag(p) @ h.conj().T + sigma2 * np.eye(n), h)
        for k in range(k_users):
            b = sigma2 * np.eye(n, dtype=complex)
            for j in range(k_users):
                if j != k:
                    b += p[j] * np.outer(h[:, j], h[:, j].conj())
            best = float(np.real(p[k] * h[:, k].conj() @ np.linalg.solve(b, h[:, k])))
            assert sinr(w, h, p, sigma2, k) == pytest.approx(best, rel=1e-9)


class TestBlockMetrics:
    def _one_user(self, rng, **kw):
        scenario = make_scenario(num_users=1, num_paths=3, num_bs_antennas=4, **kw)
        chan = rand_channel(rng, 3, 4, scale=1e-5)
        return scenario, chan

    def test_no_movement_cancellation(self, rng):
        scenario, chan = self._one_user(rng)
        x0 = scenario.users[0].initial_position
        h = channel_vector(chan, x0).reshape(-1, 1)
        p = 0.004
        m = block_metrics(scenario, [chan], [x0], [p], h)
        gamma = p * np.linalg.norm(h) ** 2 / scenario.noise_power
        expected = scenario.users[0].comm_efficiency * np.log2(1 + gamma) / p
        assert m.efficiency[0] == pytest.approx(expected, rel=1e-12)

    def test_reference_500(self):
        # gain * p / sigma^2 = 1023 at p = 0.01 W -> EE = 0.5 * 10 / 0.01 = 500
        import maee
        gain = 1023 * 1e-10 / 0.01
        g = np.array([[np.sqrt(gain)]], dtype=complex)
        chan = maee.ChannelRealization(g, maee.PathGeometry.from_virtual_aods([0.0]), 0.01)
        scenario = make_scenario(num_users=1, num_paths=1, num_bs_antennas=1)
        x0 = scenario.users[0].initial_position
        h = channel_vector(chan, x0).reshape(-1, 1)
        m = block_metrics(scenario, [chan], [x0], [0.01], h)
        assert m.efficiency[0] == pytest.approx(500.0, rel=1e-12)

    def test_block_exhausted(self, rng):
        scenario, chan = self._one_user(rng, block_duration=0.05, region=0.02,
                                        initial_position=0.0)
        h = channel_vector(chan, 0.02).reshape(-1, 1)
        with pytest.raises(BlockExhausted):
            block_metrics(scenario, [chan], [0.02], [0.001], h)

    def test_delay_coupling_shared_max(self, rng):
        # both users' rate and energy must use the same (max) delay
        scenario = make_scenario(num_users=2, num_paths=2, num_bs_antennas=4,
                                 region=0.02, initial_position=0.0,
                                 block_duration=2.0)
        chans = [rand_channel(rng, 2, 4, scale=1e-5) for _ in range(2)]
        x = [0.0, 0.02]  # user 1 moves, user 0 does not
        hmat = np.column_stack([channel_vector(chans[k], x[k]) for k in range(2)])
        p = [0.005, 0.005]
        m = block_metrics(scenario, chans, x, p, hmat)
        max_delay = 0.02 / scenario.users[1].speed
        assert m.comm_time == pytest.approx(scenario.block_duration - max_delay)
        for k in range(2):
            gamma = np.array([0.0, 0.0])
            from maee import sinr as _sinr
            gamma[k] = _sinr(hmat, hmat, np.asarray(p), scenario.noise_power, k)
            assert m.throughput[k] == pytest.approx(
                m.comm_time * np.log2(1 + gamma[k]), rel=1e-12)

    def test_efficiency_monotone_in_gain(self, rng):
        scenario = make_scenario(num_users=1, num_paths=1, num_bs_antennas=1)
        x0 = scenario.users[0].initial_position
        import maee
        prev = -np.inf
        for gain in (1e-9, 2e-9, 5e-9):
            g = np.array([[np.sqrt(gain)]], dtype=complex)
            chan = maee.ChannelRealization(g, maee.PathGeometry.from_virtual_aods([0.0]), 0.01)
            h = channel_vector(chan, x0).reshape(-1, 1)
            m = block_metrics(scenario, [chan], [x0], [0.005], h)
            assert m.efficiency[0] > prev
            prev = m.efficiency[0]

    def test_block_duration_invariance_at_initial_position(self, rng):
        chan = rand_channel(rng, 3, 4, scale=1e-5)
        vals = []
        for t_block in (2.0, 4.0):
            scenario = make_scenario(num_users=1, num_paths=3, num_bs_antennas=4,
                                     block_duration=t_block)
            x0 = scenario.users[0].initial_position
            h = channel_vector(chan, x0).reshape(-1, 1)
            vals.append(block_metrics(scenario, [chan], [x0], [0.003], h).efficiency[0])
        assert vals[0] == pytest.approx(vals[1], rel=1e-12)

    def test_zero_energy_defined_as_zero(self, rng):
        scenario, chan = self._one_user(rng)
        x0 = scenario.users[0].initial_position
        h = channel_vector(chan, x0).reshape(-1, 1)
        m = block_metrics(scenario, [chan], [x0], [0.0], h)
        assert m.efficiency[0] == 0.0

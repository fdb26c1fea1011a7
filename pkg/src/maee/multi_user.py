"""Max-min energy-efficiency optimizer for the multi-user uplink.

Alternates MMSE receive combining, per-user ratio (efficiency) updates, a
convex transmit-power subproblem, and a convex antenna-position subproblem
built from tight convex surrogates, until the worst user's true energy
efficiency stabilizes.

Slack variables live in a log domain: ``exp(mu_k)`` is the total received
power plus noise and ``exp(varpi_k)`` the interference plus noise for user
k, expressed in a noise-normalized power unit (noise maps to
``POWER_REF``).  The normalization keeps both slacks comfortably positive,
which the bilinear log surrogate requires; ratios like the SINR are
unaffected by it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import ChannelRealization, GainExpansion, channel_vector, hermitian_expansion
from .energy import SystemScenario, block_metrics
from .errors import BlockExhausted, DegenerateLocalPoint, Infeasible
from .solver import (Constraint, ConstraintBlock, SmoothProgram, SolveStatus,
                     linear_constraint, solve)

_LN2 = math.log(2.0)
POWER_REF = 1e3            # noise power maps to this value in the slack domain
XI1_FLOOR = 1e-6           # smallest movement-delay local point, seconds
_START_MARGIN = 1e-6       # slack nudge used to build strictly feasible starts


@dataclass
class SolveState:
    """One iterate of the alternating optimizer."""

    combining: np.ndarray      # N x K
    powers: np.ndarray         # W
    positions: np.ndarray      # m
    dinkelbach: np.ndarray     # bits/Hz/J, per user
    slacks_mu: np.ndarray      # log total received power (normalized)
    slacks_varpi: np.ndarray   # log interference plus noise (normalized)
    xi1: float                 # s, movement-delay slack
    xi2: float                 # s, paired delay slack (nonpositive as printed)
    objective: float           # current worst-user true efficiency


def power_scale(scenario: SystemScenario) -> float:
    """Normalization factor taking Watts into the slack power unit."""
    return POWER_REF / scenario.noise_power


def channel_matrix(channels: Sequence[ChannelRealization],
                   positions: Sequence[float]) -> np.ndarray:
    return np.column_stack([channel_vector(chan, x)
                            for chan, x in zip(channels, positions)])


def mmse_combining(h_mat: np.ndarray, powers: np.ndarray,
                   noise_power: float) -> np.ndarray:
    """SINR-optimal receive matrix ``(H P H^H + sigma^2 I)^-1 H``."""
    n = h_mat.shape[0]
    cov = (h_mat * np.asarray(powers)) @ h_mat.conj().T + noise_power * np.eye(n)
    return np.linalg.solve(cov, h_mat)


def _received_powers(combining, h_mat):
    """Matrix ``a[k, j] = |w_k^H h_j|^2`` and vector ``||w_k||^2``."""
    cross = combining.conj().T @ h_mat
    return np.abs(cross) ** 2, np.sum(np.abs(combining) ** 2, axis=0)


def rebuild_slacks(combining, h_mat, powers, scenario):
    """Log-domain slacks satisfying their defining equalities exactly."""
    kappa = power_scale(scenario)
    a, wn = _received_powers(combining, h_mat)
    noise = wn * scenario.noise_power
    total = a @ powers + noise
    interference = total - a.diagonal() * powers
    return np.log(kappa * total), np.log(kappa * interference)


def dinkelbach_alpha_multi(state: SolveState, scenario: SystemScenario,
                           channels) -> np.ndarray:
    """Ratio update: every user's true efficiency at the current iterate."""
    m = block_metrics(scenario, channels, state.positions, state.powers,
                      state.combining)
    return m.efficiency.copy()


def _delays(scenario, positions):
    return np.abs(positions - scenario.initial_positions) / scenario.speeds


def _fixed_energies(scenario, positions):
    circuit = np.array([u.circuit_energy for u in scenario.users])
    return scenario.energy_rates * np.abs(positions - scenario.initial_positions) \
        + circuit


def initialize_state(scenario: SystemScenario, channels,
                     powers: np.ndarray | None = None,
                     positions: np.ndarray | None = None) -> SolveState:
    """Interior starting iterate: initial positions, half-budget powers.

    The delay slack starts at the full-exploration value (the largest delay
    any in-region move can incur, capped by the block): starting it at the
    incumbent delay of zero makes the quadratic product surrogate crush
    every candidate move, and the position iterates never escape the
    initial point.
    """
    x = scenario.initial_positions if positions is None else np.asarray(positions, float)
    p = scenario.max_power / 2.0 if powers is None else np.asarray(powers, float)
    h_mat = channel_matrix(channels, x)
    w = mmse_combining(h_mat, p, scenario.noise_power)
    metrics = block_metrics(scenario, channels, x, p, w)
    mu, varpi = rebuild_slacks(w, h_mat, p, scenario)
    max_delay = float(_delays(scenario, x).max())
    reach = max(float(np.max([u.region_length / u.speed for u in scenario.users])),
                XI1_FLOOR)
    xi1 = min(max(reach, max_delay), 0.9 * scenario.block_duration)
    return SolveState(combining=w, powers=p.copy(), positions=x.copy(),
                      dinkelbach=metrics.efficiency.copy(), slacks_mu=mu,
                      slacks_varpi=varpi, xi1=xi1,
                      xi2=-max_delay, objective=float(metrics.efficiency.min()))


# ---------------------------------------------------------------------------
# surrogate machinery for the position subproblem


def pair_matrix(chan_j: ChannelRealization, w_k: np.ndarray, p_j: float) -> np.ndarray:
    """Hermitian matrix ``G_j w_k w_k^H G_j^H p_j`` governing h_jk(x_j)."""
    v = chan_j.path_response @ w_k
    return np.outer(v, v.conj()) * p_j


def h_jk_value(m: np.ndarray, aods: np.ndarray, x: float, wavelength: float) -> float:
    """Received-power term ``f(x)^H M f(x)`` via its cosine series."""
    return float(hermitian_expansion(m, aods, wavelength).evaluate(x))


def h_jk_derivative(m: np.ndarray, aods: np.ndarray, x: float,
                    wavelength: float) -> float:
    """First derivative of :func:`h_jk_value` with respect to x."""
    return float(hermitian_expansion(m, aods, wavelength).derivative(x))


def curvature_bound(m: np.ndarray, aods: np.ndarray, wavelength: float) -> float:
    """Global bound on the second derivative of :func:`h_jk_value`."""
    return hermitian_expansion(m, aods, wavelength).curvature_bound()


def surrogate_bounds(m: np.ndarray, aods: np.ndarray, x_local: float, x: float,
                     wavelength: float):
    """Quadratic lower/upper bounds on h(x), tangent at the local point."""
    exp = hermitian_expansion(m, aods, wavelength)
    h0 = float(exp.evaluate(x_local))
    d0 = float(exp.derivative(x_local))
    eps = exp.curvature_bound()
    dx = x - x_local
    base = h0 + d0 * dx
    return base - 0.5 * eps * dx * dx, base + 0.5 * eps * dx * dx


def bilinear_upper_bound(a: float, b: float, a_local: float, b_local: float) -> float:
    """Convex upper bound on the product a*b, tight at the local point."""
    if a_local <= 0.0 or b_local <= 0.0:
        raise DegenerateLocalPoint("bilinear bound needs positive local points")
    t = b_local / a_local
    return 0.5 * (t * a * a + b * b / t)


def bilinear_lower_bound(a: float, b: float, a_local: float, b_local: float) -> float:
    """Concave lower bound on the product a*b (a, b > 0), tight at the local point."""
    if min(a, b, a_local, b_local) <= 0.0:
        raise DegenerateLocalPoint("bilinear log bound needs positive arguments")
    ref = a_local * b_local
    return (1.0 + math.log(a) + math.log(b) - math.log(a_local)
            - math.log(b_local)) * ref


@dataclass(frozen=True)
class SurrogateData:
    """Per-(j, k) pair matrices, their cosine series, and curvature bounds."""

    matrices: tuple            # matrices[j][k] = M_jk
    expansions: tuple          # expansions[j][k] = GainExpansion of h_jk
    curvatures: np.ndarray     # curvatures[j, k] = eps_jk


def build_surrogates(channels, combining, powers) -> SurrogateData:
    k_users = combining.shape[1]
    mats, exps = [], []
    eps = np.zeros((k_users, k_users))
    for j in range(k_users):
        row_m, row_e = [], []
        for k in range(k_users):
            m = pair_matrix(channels[j], combining[:, k], float(powers[j]))
            exp = hermitian_expansion(m, channels[j].geometry.virtual_aod,
                                      channels[j].wavelength)
            row_m.append(m)
            row_e.append(exp)
            eps[j, k] = exp.curvature_bound()
        mats.append(tuple(row_m))
        exps.append(tuple(row_e))
    return SurrogateData(tuple(mats), tuple(exps), eps)


# ---------------------------------------------------------------------------
# subproblem builders


def build_power_subproblem(state: SolveState, scenario: SystemScenario,
                           channels):
    """Convex program in (p, mu, varpi, worst-EE bound) at fixed positions.

    Returns ``(program, start)`` where the start is a strictly feasible
    nudge of the incumbent whenever the incumbent satisfies the throughput
    floors with margin.
    """
    k_users = scenario.num_users
    kappa = power_scale(scenario)
    h_mat = channel_matrix(channels, state.positions)
    a_w, wn = _received_powers(state.combining, h_mat)
    a = kappa * a_w                          # a[k, j] in slack power units
    b = POWER_REF * wn                       # kappa * ||w_k||^2 sigma^2
    alpha = state.dinkelbach
    delays = _delays(scenario, state.positions)
    t_bar = scenario.block_duration - float(delays.max())
    if t_bar <= 0.0:
        raise BlockExhausted("movement delay exhausts the block")
    xi_fixed = _fixed_energies(scenario, state.positions)
    varpi_i = state.slacks_varpi
    exp_varpi_i = np.exp(varpi_i)
    eta = scenario.comm_efficiencies
    r_th = scenario.min_throughput

    n = 3 * k_users + 1
    i_p = np.arange(k_users)
    i_mu = k_users + i_p
    i_vp = 2 * k_users + i_p
    i_s = 3 * k_users

    cons: list[Constraint] = []
    for k in range(k_users):
        # throughput floor: r_th*ln2 - t_bar*(mu_k - varpi_k) <= 0
        coeffs = np.zeros(n)
        coeffs[i_mu[k]] = -t_bar
        coeffs[i_vp[k]] = t_bar
        cons.append(linear_constraint(coeffs, float(r_th[k]) * _LN2, f"C1[{k}]"))

        # worst-EE epigraph: sigma*ln2 + alpha*ln2*(t_bar*p/eta + Xi) - t_bar*(mu-varpi) <= 0
        coeffs = np.zeros(n)
        coeffs[i_s] = _LN2
        coeffs[i_p[k]] = alpha[k] * _LN2 * t_bar / eta[k]
        coeffs[i_mu[k]] = -t_bar
        coeffs[i_vp[k]] = t_bar
        cons.append(linear_constraint(coeffs, alpha[k] * _LN2 * float(xi_fixed[k]),
                                      f"C7[{k}]"))

        # interference slack, linearized: sum_{j!=k} a[k,j] p_j + b_k
        #   <= exp(varpi_i)*(1 + varpi_k - varpi_i)
        coeffs = np.zeros(n)
        coeffs[i_p] = a[k]
        coeffs[i_p[k]] = 0.0
        coeffs[i_vp[k]] = -float(exp_varpi_i[k])
        offset = float(b[k]) - float(exp_varpi_i[k]) * (1.0 - float(varpi_i[k]))
        cons.append(linear_constraint(coeffs, offset, f"C9[{k}]"))

    # total-power slack: exp(mu_k) <= sum_j a[k,j] p_j + b_k, all users at once
    blocks = (_power_slack_block(n, i_p, i_mu, a, b),)

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[i_p] = 0.0
    upper[i_p] = scenario.max_power
    scales = np.ones(n)
    scales[i_p] = scenario.max_power
    scales[i_s] = 10.0
    prog = SmoothProgram(n, _unit_vector(n, i_s), tuple(cons), lower, upper,
                         scales, blocks=blocks)

    # strictly feasible start from the incumbent
    z0 = np.zeros(n)
    z0[i_p] = state.powers
    total = a @ state.powers + b
    interference = total - a.diagonal() * state.powers
    z0[i_mu] = np.log(total) - _START_MARGIN
    z0[i_vp] = np.log(interference) + _START_MARGIN
    head = (t_bar * (z0[i_mu] - z0[i_vp])
            - alpha * _LN2 * (t_bar * state.powers / eta + xi_fixed))
    z0[i_s] = float(head.min()) / _LN2 - _START_MARGIN
    return prog, z0


def _unit_vector(n, idx):
    v = np.zeros(n)
    v[idx] = 1.0
    return v


def _power_slack_block(n, i_p, i_mu, a, b):
    """``exp(mu_k) - sum_j a[k,j] p_j - b_k <= 0`` for every user."""
    k_users = a.shape[0]

    def values(z):
        return np.exp(z[i_mu]) - a @ z[i_p] - b

    def jacobian(z):
        jac = np.zeros((k_users, n))
        jac[:, i_p] = -a
        jac[np.arange(k_users), i_mu] = np.exp(z[i_mu])
        return jac

    def hess_diag(z):
        hd = np.zeros((k_users, n))
        hd[np.arange(k_users), i_mu] = np.exp(z[i_mu])
        return hd

    return ConstraintBlock(k_users, values, jacobian, hess_diag, "C8")


def _rate_floor_block(n, i_mu, i_vp, i_xi1, floors_nats, t_block, active):
    """``floor/(T - xi1) - (mu_k - varpi_k) <= 0`` for users with a floor."""
    idx = np.flatnonzero(active)
    floors = floors_nats[idx]
    m = idx.size

    def values(z):
        return floors / (t_block - z[i_xi1]) - (z[i_mu[idx]] - z[i_vp[idx]])

    def jacobian(z):
        jac = np.zeros((m, n))
        jac[np.arange(m), i_mu[idx]] = -1.0
        jac[np.arange(m), i_vp[idx]] = 1.0
        jac[:, i_xi1] = floors / (t_block - z[i_xi1]) ** 2
        return jac

    def hess_diag(z):
        hd = np.zeros((m, n))
        hd[:, i_xi1] = 2.0 * floors / (t_block - z[i_xi1]) ** 3
        return hd

    return ConstraintBlock(m, values, jacobian, hess_diag, "C12")


def _coupled_rate_block(n, i_mu, i_vp, i_s, i_xi1, i_xi2, t_block, mu_local,
                        varpi_local, xi1_local, extra, sigma_coeff,
                        xi1_energy, xi2_coeff, name):
    """``extra + sigma_coeff*s - (T - xi1)(mu - varpi)-surrogate <= 0`` rows.

    The delay products use the quadratic upper bound for ``xi1*mu`` and the
    log lower bound for ``xi1*varpi``, both tangent at the local points.
    """
    k_users = i_mu.size
    t1 = mu_local / xi1_local                 # per-user quadratic curvature
    p0 = xi1_local * varpi_local              # per-user log-bound reference
    log_ref = math.log(xi1_local) + np.log(varpi_local)
    rows = np.arange(k_users)

    def values(z):
        mu = z[i_mu]
        vp = z[i_vp]
        xi1 = z[i_xi1]
        out = extra + sigma_coeff * z[i_s] - t_block * (mu - vp)
        out += 0.5 * (t1 * xi1 * xi1 + mu * mu / t1)
        out -= (1.0 + math.log(xi1) + np.log(vp) - log_ref) * p0
        out += xi1_energy * xi1
        if i_xi2 is not None:
            out += xi2_coeff * z[i_xi2]
        return out

    def jacobian(z):
        jac = np.zeros((k_users, n))
        jac[rows, i_mu] = -t_block + z[i_mu] / t1
        jac[rows, i_vp] = t_block - p0 / z[i_vp]
        jac[:, i_xi1] = t1 * z[i_xi1] - p0 / z[i_xi1] + xi1_energy
        jac[:, i_s] = sigma_coeff
        if i_xi2 is not None:
            jac[:, i_xi2] = xi2_coeff
        return jac

    def hess_diag(z):
        hd = np.zeros((k_users, n))
        hd[rows, i_mu] = 1.0 / t1
        hd[rows, i_vp] = p0 / z[i_vp] ** 2
        hd[:, i_xi1] = t1 + p0 / z[i_xi1] ** 2
        return hd

    return ConstraintBlock(k_users, values, jacobian, hess_diag, name)


def _signal_slack_block(n, i_x, i_mu, x_local, h0, d0, eps, b):
    """``exp(mu_k) <= sum_j hlb_jk(x_j) + b_k`` with quadratic lower surrogates."""
    k_users = i_mu.size
    rows = np.arange(k_users)

    def values(z):
        dx = z[i_x] - x_local
        hlb = h0 + d0 * dx[:, None] - 0.5 * eps * (dx * dx)[:, None]
        return np.exp(z[i_mu]) - hlb.sum(axis=0) - b

    def jacobian(z):
        dx = z[i_x] - x_local
        jac = np.zeros((k_users, n))
        jac[:, i_x] = -(d0 - eps * dx[:, None]).T
        jac[rows, i_mu] = np.exp(z[i_mu])
        return jac

    def hess_diag(z):
        hd = np.zeros((k_users, n))
        hd[:, i_x] = eps.T
        hd[rows, i_mu] = np.exp(z[i_mu])
        return hd

    return ConstraintBlock(k_users, values, jacobian, hess_diag, "C14")


def _interference_slack_block(n, i_x, i_vp, x_local, h0, d0, eps, b,
                              exp_varpi_i, varpi_local):
    """``sum_{j!=k} hub_jk(x_j) + b_k <= exp-tangent(varpi_k)`` rows."""
    k_users = i_vp.size
    rows = np.arange(k_users)
    h0z, d0z, epsz = h0.copy(), d0.copy(), eps.copy()
    np.fill_diagonal(h0z, 0.0)
    np.fill_diagonal(d0z, 0.0)
    np.fill_diagonal(epsz, 0.0)
    off = b - exp_varpi_i * (1.0 - varpi_local)

    def values(z):
        dx = z[i_x] - x_local
        hub = h0z + d0z * dx[:, None] + 0.5 * epsz * (dx * dx)[:, None]
        return hub.sum(axis=0) + off - exp_varpi_i * z[i_vp]

    def jacobian(z):
        dx = z[i_x] - x_local
        jac = np.zeros((k_users, n))
        jac[:, i_x] = (d0z + epsz * dx[:, None]).T
        jac[rows, i_vp] = -exp_varpi_i
        return jac

    def hess_diag(z):
        hd = np.zeros((k_users, n))
        hd[:, i_x] = epsz.T
        return hd

    return ConstraintBlock(k_users, values, jacobian, hess_diag, "C15")


def build_position_subproblem(state: SolveState, scenario: SystemScenario,
                              channels, mode: str = "ee"):
    """Convex program in (x, mu, varpi, bound[, xi1, xi2]) at fixed powers.

    ``mode`` selects the objective family: ``ee`` (worst-user efficiency,
    with movement energy and delay), ``rate`` (worst-user throughput, delay
    only), or ``sinr`` (worst-user log-SINR proxy, no movement costs).
    Raises :class:`DegenerateLocalPoint` when the local slack points leave
    the domain of the log surrogates.
    """
    if mode not in ("ee", "rate", "sinr"):
        raise ValueError(f"unknown mode {mode!r}")
    k_users = scenario.num_users
    kappa = power_scale(scenario)
    a_w, wn = _received_powers(state.combining, channel_matrix(channels, state.positions))
    b = POWER_REF * wn
    alpha = state.dinkelbach
    eta = scenario.comm_efficiencies
    p = state.powers
    t_block = scenario.block_duration
    x0 = scenario.initial_positions
    speeds = scenario.speeds
    rates_motor = scenario.energy_rates
    r_th = scenario.min_throughput

    x_local = state.positions
    mu_local = state.slacks_mu
    varpi_local = state.slacks_varpi
    xi1_local = max(XI1_FLOOR, float(_delays(scenario, x_local).max()), state.xi1)
    if xi1_local <= 0.0 or np.any(varpi_local <= 0.0):
        raise DegenerateLocalPoint("xi1 and varpi local points must be positive")
    if mode != "sinr" and np.any(mu_local <= 0.0):
        raise DegenerateLocalPoint("mu local points must be positive")
    exp_varpi_i = np.exp(varpi_local)

    surr = build_surrogates(channels, state.combining, p)
    # tangent data in slack power units
    h0 = np.array([[kappa * surr.expansions[j][k].evaluate(float(x_local[j]))
                    for k in range(k_users)] for j in range(k_users)])
    d0 = np.array([[kappa * surr.expansions[j][k].derivative(float(x_local[j]))
                    for k in range(k_users)] for j in range(k_users)])
    eps = kappa * surr.curvatures

    with_xi = mode in ("ee", "rate")
    n = 3 * k_users + (3 if mode == "ee" else 2 if mode == "rate" else 1)
    i_x = np.arange(k_users)
    i_mu = k_users + i_x
    i_vp = 2 * k_users + i_x
    i_s = 3 * k_users
    i_xi1 = 3 * k_users + 1 if with_xi else None
    i_xi2 = 3 * k_users + 2 if mode == "ee" else None

    cons: list[Constraint] = []

    if with_xi:
        for k in range(k_users):
            for sign in (1.0, -1.0):
                coeffs = np.zeros(n)
                coeffs[i_x[k]] = sign / speeds[k]
                coeffs[i_xi1] = -1.0
                cons.append(linear_constraint(coeffs, -sign * x0[k] / speeds[k],
                                              f"C10[{k},{int(sign < 0)}]"))
    if mode == "ee":
        for k in range(k_users):
            for sign in (1.0, -1.0):
                coeffs = np.zeros(n)
                coeffs[i_x[k]] = -sign / speeds[k]
                coeffs[i_xi2] = 1.0
                cons.append(linear_constraint(coeffs, sign * x0[k] / speeds[k],
                                              f"C11[{k},{int(sign < 0)}]"))

    blocks = []
    if with_xi:
        active = r_th > 0.0
        if np.any(active):
            # throughput floor with delay coupling, in the exact convex form
            # r_th*ln2/(T - xi1) - (mu_k - varpi_k) <= 0.  The floor is a
            # constant, so no product surrogate is needed here; the
            # surrogate form goes infeasible at its own expansion point
            # whenever the floor is active and xi1 sits above the realized
            # delay, which is the normal operating regime.
            blocks.append(_rate_floor_block(n, i_mu, i_vp, i_xi1,
                                            r_th * _LN2, t_block, active))
    if mode == "ee":
        blocks.append(_coupled_rate_block(
            n, i_mu, i_vp, i_s, i_xi1, i_xi2, t_block, mu_local, varpi_local,
            xi1_local,
            alpha * _LN2 * p / eta * t_block,
            _LN2,
            alpha * _LN2 * rates_motor * speeds,
            -alpha * _LN2 * p / eta,
            "C13"))
    elif mode == "rate":
        # worst-user throughput epigraph
        blocks.append(_coupled_rate_block(
            n, i_mu, i_vp, i_s, i_xi1, None, t_block, mu_local, varpi_local,
            xi1_local, np.zeros(k_users), _LN2, np.zeros(k_users),
            np.zeros(k_users), "Crate"))
    else:
        for k in range(k_users):
            coeffs = np.zeros(n)
            coeffs[i_s] = 1.0
            coeffs[i_mu[k]] = -1.0
            coeffs[i_vp[k]] = 1.0
            cons.append(linear_constraint(coeffs, 0.0, f"Csinr[{k}]"))

    blocks.append(_signal_slack_block(n, i_x, i_mu, x_local, h0, d0, eps, b))
    blocks.append(_interference_slack_block(n, i_x, i_vp, x_local, h0, d0,
                                            eps, b, exp_varpi_i, varpi_local))

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[i_x] = 0.0
    upper[i_x] = np.array([u.region_length for u in scenario.users])
    lower[i_vp] = 1e-12
    if with_xi:
        lower[i_xi1] = 1e-12
        upper[i_xi1] = 0.95 * t_block
    scales = np.ones(n)
    scales[i_x] = upper[i_x]
    scales[i_s] = 10.0
    if with_xi:
        scales[i_xi1] = max(xi1_local, 1e-3)
    if mode == "ee":
        scales[i_xi2] = max(xi1_local, 1e-3)
    prog = SmoothProgram(n, _unit_vector(n, i_s), tuple(cons), lower, upper,
                         scales, blocks=tuple(blocks))

    # strictly feasible start: the incumbent with nudged slacks
    z0 = np.zeros(n)
    z0[i_x] = x_local
    z0[i_mu] = mu_local - _START_MARGIN
    z0[i_vp] = varpi_local + _START_MARGIN
    max_delay = float(_delays(scenario, x_local).max())
    if with_xi:
        # largest delay-slack start the exact throughput floors tolerate at
        # the start slacks; starting right at the realized delay would park
        # the barrier at the log pole of the bilinear surrogate, and an
        # unconditionally large start violates active floors
        # delay-slack start: the expansion-point scale, shrunk to what the
        # exact throughput floors tolerate at the start slacks.  When a
        # floor is exactly active no feasible slack exists at the incumbent
        # (movement has to raise the gain first) and the phase-1 pass
        # navigates into that thin interior.
        xi_start = xi1_local
        rate_nats = z0[i_mu] - z0[i_vp]
        for k in range(k_users):
            if r_th[k] > 0.0 and rate_nats[k] > 0.0:
                head = t_block - float(r_th[k]) * _LN2 / rate_nats[k]
                xi_start = min(xi_start, 0.98 * head)
        z0[i_xi1] = min(max(max_delay + 1e-9, xi_start), 0.9 * t_block)
    if mode == "ee":
        z0[i_xi2] = -max_delay - 1e-9
    heads = []
    for k in range(k_users):
        rate_part = t_block * (z0[i_mu[k]] - z0[i_vp[k]])
        if with_xi:
            rate_part -= bilinear_upper_bound(float(z0[i_xi1]), float(z0[i_mu[k]]),
                                              xi1_local, float(mu_local[k]))
            rate_part += bilinear_lower_bound(float(z0[i_xi1]), float(z0[i_vp[k]]),
                                              xi1_local, float(varpi_local[k]))
        if mode == "ee":
            energy = alpha[k] * _LN2 * (rates_motor[k] * speeds[k] * float(z0[i_xi1])
                                        + p[k] / eta[k] * (t_block - float(z0[i_xi2])))
            heads.append((rate_part - energy) / _LN2)
        elif mode == "rate":
            heads.append(rate_part / _LN2)
        else:
            heads.append(float(z0[i_mu[k]] - z0[i_vp[k]]))
    z0[i_s] = min(heads) - _START_MARGIN
    return prog, z0


@dataclass
class Algorithm2Result:
    state: SolveState
    min_ee_trace: list          # true worst-user efficiency per outer iteration
    sigma_power: list           # power-subproblem objectives
    sigma_position: list        # position-subproblem objectives
    user_efficiency: np.ndarray
    iterations: int
    converged: bool


def _refresh(state, scenario, channels, positions, powers, xi1=None):
    """Recombine (MMSE), update ratios, and rebuild slack equalities."""
    h_mat = channel_matrix(channels, positions)
    w = mmse_combining(h_mat, powers, scenario.noise_power)
    metrics = block_metrics(scenario, channels, positions, powers, w)
    mu, varpi = rebuild_slacks(w, h_mat, powers, scenario)
    max_delay = float(_delays(scenario, positions).max())
    new_xi1 = state.xi1 if xi1 is None else xi1
    return replace(state, combining=w, powers=np.asarray(powers, float).copy(),
                   positions=np.asarray(positions, float).copy(),
                   dinkelbach=metrics.efficiency.copy(), slacks_mu=mu,
                   slacks_varpi=varpi, xi1=max(XI1_FLOOR, max_delay, new_xi1),
                   xi2=-max_delay,
                   objective=float(metrics.efficiency.min())), metrics


def _power_block(state, scenario, channels, eps2, kkt_tol, feas_tol,
                 max_inner=12):
    """Alternate the power subproblem with ratio/combining refreshes.

    The ratio variables are stale inside each solve, so iterating the pair
    to a fixed point per outer iteration removes the residual creep the
    staleness would otherwise feed into the outer loop.
    """
    k_users = scenario.num_users
    sigma_last = None
    feasible = True
    for _ in range(max_inner):
        prog, z0 = build_power_subproblem(state, scenario, channels)
        rep = solve(prog, z0, feas_tol=feas_tol, kkt_tol=kkt_tol)
        if rep.status is SolveStatus.INFEASIBLE:
            feasible = sigma_last is not None
            break
        sigma_last = rep.objective
        cand, _ = _refresh(state, scenario, channels, state.positions,
                           rep.point[:k_users])
        if cand.objective >= state.objective:  # true-efficiency guard
            gain = cand.objective - state.objective
            state = cand
            if gain < eps2:
                break
        else:
            break
    return state, sigma_last, feasible


def _position_block(state, scenario, channels, eps2, kkt_tol, feas_tol,
                    mode="ee", max_inner=12, metric=None, lookahead=False):
    """Re-expand and re-solve the position subproblem until its gain dies.

    One solve of the surrogate program moves the antennas only within the
    curvature-bound trust region around the expansion point, so a single
    solve per outer iteration creeps; refreshing the expansion point after
    every accepted move converges the block.  Updates are accepted only
    when ``metric`` (worst-user true efficiency by default; the baseline
    schemes pass their own objective) does not drop; with ``lookahead`` a
    candidate is judged with its powers re-tuned first, which matters at
    floor-pinned incumbents where every move loses at frozen powers.
    """
    k_users = scenario.num_users
    sigma_last = None
    if metric is None:
        metric = lambda st, m: st.objective  # noqa: E731
    best = metric(state, block_metrics(scenario, channels, state.positions,
                                       state.powers, state.combining))
    for _ in range(max_inner):
        prog, z0 = build_position_subproblem(state, scenario, channels, mode=mode)
        rep = solve(prog, z0, feas_tol=feas_tol, kkt_tol=kkt_tol)
        if rep.status is SolveStatus.INFEASIBLE:
            break
        sigma_last = rep.objective
        new_x = np.clip(rep.point[:k_users], 0.0,
                        [u.region_length for u in scenario.users])
        new_xi1 = float(rep.point[3 * k_users + 1]) if mode != "sinr" else None
        cand, cand_metrics = _refresh(state, scenario, channels, new_x,
                                      state.powers, xi1=new_xi1)
        if lookahead and mode == "ee":
            # a coarse power re-tune is enough to rank the candidate
            cand, _, _ = _power_block(cand, scenario, channels,
                                      max(eps2, 1e-3), kkt_tol, feas_tol,
                                      max_inner=4)
            cand_metrics = block_metrics(scenario, channels, cand.positions,
                                         cand.powers, cand.combining)
        cand_val = metric(cand, cand_metrics)
        if float(np.max(np.abs(new_x - state.positions))) < 1e-9 * \
                max(u.region_length for u in scenario.users) and cand_val <= best:
            break  # proposal is a no-op; nothing left to gain here
        if cand_val >= best:
            gain = cand_val - best
            state, best = cand, cand_val
            if gain < eps2:
                break
        elif new_xi1 is not None and min(state.xi1, new_xi1) < 0.99 * state.xi1:
            # reject the move but retry with the expansion point tightened
            # toward the realized delay: loose first-round surrogates make
            # the initial proposal poor, not the direction itself
            state = replace(state, xi1=max(
                XI1_FLOOR, float(_delays(scenario, state.positions).max()),
                min(state.xi1, new_xi1)))
        else:
            break
    return state, sigma_last


def algorithm2(scenario: SystemScenario, channels, eps2: float = 1e-6,
               max_outer: int = 50, kkt_tol: float = 1e-8,
               feas_tol: float = 1e-9, optimize_positions: bool = True,
               snap_step: float | None = None) -> Algorithm2Result:
    """Alternating max-min efficiency optimization of powers and positions.

    Two phases under a common true-efficiency guard (the reported trace is
    non-decreasing by construction): an exploration phase alternates single
    subproblem solves, whose weak incumbents let the antennas migrate to
    better gain basins, and a polish phase drives each block to its fixed
    point once the per-iteration gain falls below a relative threshold.
    The no-movement operating point (powers converged at the initial
    positions) is kept as a fallback candidate, so the returned solution
    never loses to keeping the antennas still.

    Raises :class:`Infeasible` when the throughput floors cannot be met at
    the initial positions (feasibility pass of the first power subproblem).
    """
    init = initialize_state(scenario, channels)
    k_users = scenario.num_users

    anchor, anchor_sigma, feasible = _power_block(init, scenario, channels,
                                                  0.1 * eps2, kkt_tol, feas_tol)
    if not feasible:
        raise Infeasible("throughput floors unreachable at initial positions")

    state = init
    trace = [state.objective]
    sigma_power = [anchor_sigma] if anchor_sigma is not None else []
    sigma_position = []
    converged = False
    iterations = 0
    polish = not optimize_positions

    for it in range(1, max_outer + 1):
        iterations = it
        if not polish:
            prog, z0 = build_power_subproblem(state, scenario, channels)
            rep = solve(prog, z0, feas_tol=feas_tol, kkt_tol=kkt_tol)
            if rep.status is not SolveStatus.INFEASIBLE:
                sigma_power.append(rep.objective)
                cand, _ = _refresh(state, scenario, channels, state.positions,
                                   rep.point[:k_users])
                if cand.objective >= state.objective:
                    state = cand
            state, sig = _position_block(state, scenario, channels,
                                         0.1 * eps2, kkt_tol, feas_tol)
            if sig is not None:
                sigma_position.append(sig)
            trace.append(max(state.objective, trace[-1]))
            if it >= 12 or trace[-1] - trace[-2] < max(
                    eps2, 1e-4 * (1.0 + abs(trace[-1]))):
                polish = True   # budget reached or gains went quiet
        else:
            state, sig, _ = _power_block(state, scenario, channels,
                                         0.1 * eps2, kkt_tol, feas_tol)
            if sig is not None:
                sigma_power.append(sig)
            if optimize_positions:
                state, sig = _position_block(state, scenario, channels,
                                             0.1 * eps2, kkt_tol, feas_tol,
                                             lookahead=True)
                if sig is not None:
                    sigma_position.append(sig)
            trace.append(max(state.objective, trace[-1]))
            if trace[-1] - trace[-2] < eps2:
                converged = True
                break

    if anchor.objective > state.objective:
        state = anchor
        trace.append(state.objective)

    if snap_step is not None:
        snapped = np.clip(np.round(state.positions / snap_step) * snap_step,
                          0.0, [u.region_length for u in scenario.users])
        state, _ = _refresh(state, scenario, channels, snapped, state.powers)
        trace.append(state.objective)

    metrics = block_metrics(scenario, channels, state.positions, state.powers,
                            state.combining)
    return Algorithm2Result(state=state, min_ee_trace=trace,
                            sigma_power=sigma_power,
                            sigma_position=sigma_position,
                            user_efficiency=metrics.efficiency,
                            iterations=iterations, converged=converged)


def optimize_powers_at_positions(scenario: SystemScenario, channels, positions,
                                 eps2: float = 1e-6, max_outer: int = 50,
                                 kkt_tol: float = 1e-8,
                                 feas_tol: float = 1e-9) -> Algorithm2Result:
    """Power/combining optimization with antennas pinned at given positions."""
    state = initialize_state(scenario, channels,
                             positions=np.asarray(positions, float))
    trace = [state.objective]
    sigma_power = []
    converged = False
    iterations = 0
    k_users = scenario.num_users
    for it in range(1, max_outer + 1):
        iterations = it
        prog, z0 = build_power_subproblem(state, scenario, channels)
        rep = solve(prog, z0, feas_tol=feas_tol, kkt_tol=kkt_tol)
        if rep.status is SolveStatus.INFEASIBLE:
            if it == 1:
                raise Infeasible("throughput floors unreachable at these positions")
            break
        sigma_power.append(rep.objective)
        cand, _ = _refresh(state, scenario, channels, state.positions,
                           rep.point[:k_users])
        if cand.objective >= state.objective:
            state = cand
        trace.append(state.objective)
        if trace[-1] - trace[-2] < eps2:
            converged = True
            break
    metrics = block_metrics(scenario, channels, state.positions, state.powers,
                            state.combining)
    return Algorithm2Result(state=state, min_ee_trace=trace,
                            sigma_power=sigma_power, sigma_position=[],
                            user_efficiency=metrics.efficiency,
                            iterations=iterations, converged=converged)

"""Experiment harness: scheme runners, seeded Monte-Carlo sweeps, CSV output.

Schemes: ``proposed`` (full optimizer), ``quantized`` (angles snapped to a
resolution-Q grid before optimizing, scored with the true angles),
``max_throughput`` (positions for throughput, power for efficiency),
``max_snr`` (positions for channel gain / worst SINR, power for
efficiency), and ``fpa`` (antennas pinned at their initial positions).
Within one (sweep value, trial) cell every scheme sees bit-identical
channels.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import (ChannelRealization, PathGeometry, gain_expansion,
                      quantize_aods, sample_channels)
from .energy import SystemScenario, UserEnergyProfile, block_metrics
from .errors import BlockExhausted, Infeasible, InfeasibleThroughput
from .multi_user import (_position_block, algorithm2, channel_matrix,
                         initialize_state, mmse_combining,
                         optimize_powers_at_positions)
from .single_user import (GridSpec, default_subregions, exhaustive_search,
                          optimize_power, quantized_search)

SWEEPS = ("region_size", "energy_rate", "speed", "block_duration",
          "convergence_trace")
SCHEMES = ("proposed", "quantized", "max_throughput", "max_snr", "fpa")

CSV_HEADER = ("scheme,sweep_param,sweep_value,trial,seed,user,ee_bits_hz_j,"
              "min_ee,move_dist_norm,avg_move_dist_norm,iterations,feasible,"
              "wall_ms")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Scenario parameters (Table-I defaults) plus sweep bookkeeping.

    Power-like quantities are stored in configuration units (dB/dBm) and
    converted to linear Watts only when the scenario object is built.
    """

    wavelength: float = 0.01          # lambda, m
    region_length: float | None = None  # A, m; defaults to one wavelength
    num_bs_antennas: int = 16         # N
    num_users: int = 4                # K
    num_paths: int = 10               # L
    rho0_db: float = -40.0
    distance: float = 50.0            # d, m
    pathloss_exp: float = 2.8         # tau
    p_max_dbm: float = 10.0
    comm_efficiency: float = 0.5      # eta_c
    energy_rate: float = 0.175        # E_bar, J/m
    speed: float = 0.1                # v, m/s
    block_duration: float = 2.0       # T, s
    min_throughput: float = 0.8       # R_TH, bits/Hz
    sigma2_dbm: float = -70.0
    eps1: float = 1e-6
    eps2: float = 1e-6
    sweep: str = "region_size"
    sweep_values: tuple = (1.0,)
    schemes: tuple = ("proposed", "fpa")
    trials: int = 1
    base_seed: int = 0
    grid_subregions: int | None = None
    quantized_q: int = 15
    record_wall_time: bool = False
    snap_step: float | None = None

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ValueError(f"unknown sweep {self.sweep!r}; choose from {SWEEPS}")
        for s in self.schemes:
            if _scheme_base(s) not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.sweep_values:
            raise ValueError("sweep_values must be non-empty")

    def scenario(self, sweep_value: float | None = None) -> SystemScenario:
        region = self.region_length if self.region_length is not None else self.wavelength
        energy_rate = self.energy_rate
        speed = self.speed
        block = self.block_duration
        if sweep_value is not None:
            if self.sweep == "region_size":
                region = sweep_value * self.wavelength
            elif self.sweep == "energy_rate":
                energy_rate = sweep_value
            elif self.sweep == "speed":
                speed = sweep_value
            elif self.sweep == "block_duration":
                block = sweep_value
        user = UserEnergyProfile(energy_rate=energy_rate,
                                 comm_efficiency=self.comm_efficiency,
                                 speed=speed, initial_position=region / 2.0,
                                 region_length=region)
        return SystemScenario(
            block_duration=block, noise_power=dbm_to_watt(self.sigma2_dbm),
            users=(user,) * self.num_users,
            max_power=dbm_to_watt(self.p_max_dbm),
            min_throughput=self.min_throughput,
            rho0=db_to_linear(self.rho0_db), distance=self.distance,
            pathloss_exp=self.pathloss_exp, num_paths=self.num_paths,
            num_bs_antennas=self.num_bs_antennas, wavelength=self.wavelength)


_KEY_MAP = {
    "lambda": ("wavelength", float),
    "a": ("region_length", float),
    "n": ("num_bs_antennas", int),
    "k": ("num_users", int),
    "l": ("num_paths", int),
    "rho0_db": ("rho0_db", float),
    "d": ("distance", float),
    "tau": ("pathloss_exp", float),
    "p_max_dbm": ("p_max_dbm", float),
    "eta_c": ("comm_efficiency", float),
    "e_bar": ("energy_rate", float),
    "v": ("speed", float),
    "t": ("block_duration", float),
    "r_th": ("min_throughput", float),
    "sigma2_dbm": ("sigma2_dbm", float),
    "eps1": ("eps1", float),
    "eps2": ("eps2", float),
    "sweep": ("sweep", str),
    "sweep_values": ("sweep_values", "floats"),
    "schemes": ("schemes", "strings"),
    "trials": ("trials", int),
    "base_seed": ("base_seed", int),
    "grid_s": ("grid_subregions", int),
    "quantized_q": ("quantized_q", int),
    "record_wall_time": ("record_wall_time", "bool"),
    "snap_step": ("snap_step", float),
}


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a flat ``key = value`` configuration file (``#`` comments)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key not in _KEY_MAP:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        attr, kind = _KEY_MAP[key]
        if kind == "floats":
            values[attr] = tuple(float(v) for v in val.split(",") if v.strip())
        elif kind == "strings":
            values[attr] = tuple(v.strip() for v in val.split(",") if v.strip())
        elif kind == "bool":
            values[attr] = val.lower() in ("1", "true", "yes", "on")
        else:
            values[attr] = kind(val)
    return ExperimentConfig(**values)


def _scheme_base(spec: str) -> str:
    return spec.split(":", 1)[0].strip().lower()


def _scheme_resolution(spec: str, default: int) -> int:
    if ":" in spec:
        return int(spec.split(":", 1)[1])
    return default


@dataclass
class SchemeResult:
    scheme: str
    feasible: bool
    user_ee: np.ndarray | None = None
    min_ee: float = math.nan
    positions: np.ndarray | None = None
    iterations: int = 0
    trace: list = field(default_factory=list)
    wall_ms: float = -1.0


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    sweep_param: str
    sweep_value: float
    trial: int
    seed: int
    user: int
    ee: float
    min_ee: float
    move_norm: float
    avg_move_norm: float
    iterations: int
    feasible: bool
    wall_ms: float


@dataclass
class SweepResult:
    rows: list

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r.scheme, r.sweep_value,
                                                r.trial, r.user))

    def write_csv(self, path: str | Path):
        lines = [CSV_HEADER]
        for r in self.sorted_rows():
            lines.append(",".join([
                r.scheme, r.sweep_param, _fmt(r.sweep_value), str(r.trial),
                str(r.seed), str(r.user), _fmt(r.ee), _fmt(r.min_ee),
                _fmt(r.move_norm), _fmt(r.avg_move_norm), str(r.iterations),
                str(int(r.feasible)), _fmt(r.wall_ms)]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8",
                              newline="\n")


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


# ---------------------------------------------------------------------------
# single-user scheme runners


def _single_user_solution(scheme, chan, scenario, cfg):
    grid_s = cfg.grid_subregions or default_subregions(scenario)
    u = scenario.users[0]
    base = _scheme_base(scheme)
    if base == "proposed":
        sol = exhaustive_search(chan, scenario, grid_s, cfg.eps1)
        return SchemeResult(scheme, True, np.array([sol.energy_efficiency]),
                            sol.energy_efficiency, np.array([sol.position]),
                            sol.iterations,
                            trace=[t[2] for t in sol.dinkelbach_trace])
    if base == "quantized":
        q = _scheme_resolution(scheme, cfg.quantized_q)
        sol = quantized_search(chan, scenario, q, grid_s, cfg.eps1)
        return SchemeResult(scheme, sol.feasible,
                            np.array([sol.energy_efficiency]),
                            sol.energy_efficiency, np.array([sol.position]),
                            sol.iterations)
    if base == "fpa":
        res = optimize_power(u.initial_position, chan, scenario, cfg.eps1)
        return SchemeResult(scheme, True, np.array([res.alpha]), res.alpha,
                            np.array([u.initial_position]), len(res.trace),
                            trace=[t[2] for t in res.trace])
    grid = GridSpec.uniform(u.region_length, grid_s)
    gains = np.maximum(gain_expansion(chan).evaluate(grid.centers), 0.0)
    if base == "max_snr":
        x = float(grid.centers[int(np.argmax(gains))])
    elif base == "max_throughput":
        t_comm = scenario.block_duration - np.abs(grid.centers - u.initial_position) / u.speed
        score = np.where(t_comm > 0,
                         t_comm * np.log2(1.0 + float(scenario.max_power[0])
                                          * gains / scenario.noise_power),
                         -np.inf)
        x = float(grid.centers[int(np.argmax(score))])
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    res = optimize_power(x, chan, scenario, cfg.eps1)
    return SchemeResult(scheme, True, np.array([res.alpha]), res.alpha,
                        np.array([x]), len(res.trace),
                        trace=[t[2] for t in res.trace])


# ---------------------------------------------------------------------------
# multi-user scheme runners


def _positions_then_power(scenario, channels, cfg, mode):
    """Baseline pattern: optimize positions for a side objective at full
    power, then optimize powers (and combining) for efficiency."""
    state = initialize_state(scenario, channels,
                             powers=scenario.max_power.copy())
    if mode == "sinr":
        metric = lambda st, m: float(np.min(m.throughput)) / m.comm_time  # noqa: E731
    else:
        metric = lambda st, m: float(np.min(m.throughput))  # noqa: E731
    prev = -np.inf
    for _ in range(30):
        state, _ = _position_block(state, scenario, channels, eps2=0.0,
                                   kkt_tol=1e-8, feas_tol=1e-9, mode=mode,
                                   metric=metric, max_inner=25)
        m = block_metrics(scenario, channels, state.positions, state.powers,
                          state.combining)
        cur = metric(state, m)
        if cur - prev < 1e-6 * (1.0 + abs(cur)):
            break
        prev = cur
    res = optimize_powers_at_positions(scenario, channels, state.positions,
                                       cfg.eps2)
    return res


def _multi_user_solution(scheme, channels, scenario, cfg):
    base = _scheme_base(scheme)
    if base == "proposed":
        res = algorithm2(scenario, channels, cfg.eps2, snap_step=cfg.snap_step)
    elif base == "fpa":
        res = optimize_powers_at_positions(scenario, channels,
                                           scenario.initial_positions, cfg.eps2)
    elif base == "quantized":
        q = _scheme_resolution(scheme, cfg.quantized_q)
        quantized = []
        for chan in channels:
            _, aods_q = quantize_aods(chan.geometry.virtual_aod, q)
            quantized.append(ChannelRealization(
                chan.path_response, PathGeometry.from_virtual_aods(aods_q),
                chan.wavelength))
        inner = algorithm2(scenario, quantized, cfg.eps2, snap_step=cfg.snap_step)
        # truth re-evaluation: keep the optimized positions and powers, but
        # combine with the true channels (perfect reception-side CSI)
        h_true = channel_matrix(channels, inner.state.positions)
        w = mmse_combining(h_true, inner.state.powers, scenario.noise_power)
        m = block_metrics(scenario, channels, inner.state.positions,
                          inner.state.powers, w)
        feasible = bool(np.all(m.throughput >= scenario.min_throughput - 1e-9))
        return SchemeResult(scheme, feasible, m.efficiency,
                            float(m.efficiency.min()), inner.state.positions,
                            inner.iterations, trace=list(inner.min_ee_trace))
    elif base in ("max_snr", "max_throughput"):
        mode = "sinr" if base == "max_snr" else "rate"
        res = _positions_then_power(scenario, channels, cfg, mode)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return SchemeResult(scheme, True, res.user_efficiency,
                        float(res.user_efficiency.min()), res.state.positions,
                        res.iterations, trace=list(res.min_ee_trace))


def run_scheme(scheme: str, channels, scenario: SystemScenario,
               cfg: ExperimentConfig) -> SchemeResult:
    """Run one scheme on one trial's channels; errors mark the row infeasible."""
    t0 = time.perf_counter()
    try:
        if scenario.num_users == 1:
            out = _single_user_solution(scheme, channels[0], scenario, cfg)
        else:
            out = _multi_user_solution(scheme, channels, scenario, cfg)
    except (Infeasible, InfeasibleThroughput, BlockExhausted):
        out = SchemeResult(scheme, False)
    if cfg.record_wall_time:
        out.wall_ms = (time.perf_counter() - t0) * 1e3
    return out


def _rows_for_cell(cfg: ExperimentConfig, sweep_value: float,
                   trial: int) -> list:
    seed = cfg.base_seed + trial
    scenario = cfg.scenario(sweep_value if cfg.sweep != "convergence_trace"
                            else None)
    channels = sample_channels(scenario, seed)
    rows = []
    for scheme in cfg.schemes:
        result = run_scheme(scheme, channels, scenario, cfg)
        if cfg.sweep == "convergence_trace":
            rows.extend(_trace_rows(cfg, result, trial, seed))
        else:
            rows.extend(_metric_rows(cfg, result, sweep_value, trial, seed,
                                     scenario))
    return rows


def _metric_rows(cfg, result, sweep_value, trial, seed, scenario):
    k_users = scenario.num_users
    rows = []
    if not result.feasible and result.user_ee is None:
        for user in list(range(k_users)) + [-1]:
            rows.append(SweepRow(result.scheme, cfg.sweep, sweep_value, trial,
                                 seed, user, math.nan, math.nan, math.nan,
                                 math.nan, result.iterations, False,
                                 result.wall_ms))
        return rows
    move = np.abs(result.positions - scenario.initial_positions) / scenario.wavelength
    avg_move = float(move.mean())
    for user in range(k_users):
        rows.append(SweepRow(result.scheme, cfg.sweep, sweep_value, trial,
                             seed, user, float(result.user_ee[user]),
                             result.min_ee, float(move[user]), avg_move,
                             result.iterations, result.feasible,
                             result.wall_ms))
    rows.append(SweepRow(result.scheme, cfg.sweep, sweep_value, trial, seed,
                         -1, result.min_ee, result.min_ee, avg_move, avg_move,
                         result.iterations, result.feasible, result.wall_ms))
    return rows


def _trace_rows(cfg, result, trial, seed):
    rows = []
    trace = result.trace if result.feasible else []
    for i, value in enumerate(trace):
        rows.append(SweepRow(result.scheme, "iteration", float(i), trial,
                             seed, -1, float(value), float(value), math.nan,
                             math.nan, i, result.feasible, result.wall_ms))
    if not trace:
        rows.append(SweepRow(result.scheme, "iteration", 0.0, trial, seed, -1,
                             math.nan, math.nan, math.nan, math.nan, 0, False,
                             result.wall_ms))
    return rows


def run_sweep(cfg: ExperimentConfig, out_path: str | Path | None = None) -> SweepResult:
    """Run every (scheme, sweep value, trial) cell; optionally write the CSV.

    Deterministic for a fixed config and base seed: each trial's channels
    are drawn once per cell from ``base_seed + trial`` and shared by all
    schemes.  ``MAEE_WORKERS`` distributes cells across processes; rows are
    sorted before writing either way.
    """
    values = [0.0] if cfg.sweep == "convergence_trace" else list(cfg.sweep_values)
    cells = [(value, trial) for value in values for trial in range(cfg.trials)]
    workers = int(os.environ.get("MAEE_WORKERS", "1"))
    rows = []
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_cell_worker,
                                  [(cfg, v, t) for v, t in cells]):
                rows.extend(chunk)
    else:
        for value, trial in cells:
            rows.extend(_rows_for_cell(cfg, value, trial))
    result = SweepResult(rows)
    if out_path is not None:
        result.write_csv(out_path)
    return result


def _cell_worker(args):
    cfg, value, trial = args
    return _rows_for_cell(cfg, value, trial)


# ---------------------------------------------------------------------------
# spec'd baseline entry points (thin wrappers over the scheme runners)


def baseline_fpa(channels, scenario: SystemScenario,
                 cfg: ExperimentConfig | None = None) -> SchemeResult:
    """Antennas stay at their initial positions; power optimized for efficiency."""
    cfg = cfg or ExperimentConfig(num_users=scenario.num_users)
    return run_scheme("fpa", channels, scenario, cfg)


def baseline_max_snr(channels, scenario: SystemScenario,
                     cfg: ExperimentConfig | None = None) -> SchemeResult:
    """Positions maximize channel gain (worst SINR for multi-user), then power."""
    cfg = cfg or ExperimentConfig(num_users=scenario.num_users)
    return run_scheme("max_snr", channels, scenario, cfg)


def baseline_max_throughput(channels, scenario: SystemScenario,
                            cfg: ExperimentConfig | None = None) -> SchemeResult:
    """Positions maximize achievable throughput (delay-aware), then power."""
    cfg = cfg or ExperimentConfig(num_users=scenario.num_users)
    return run_scheme("max_throughput", channels, scenario, cfg)

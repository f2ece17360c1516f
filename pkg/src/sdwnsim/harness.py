"""Seeded trial execution, parameter sweeps, oracle verification, CSV output.

Seed scheme: stream seeds are drawn from numpy's SeedSequence with
entropy = master_seed and spawn_key = (trial_index, stream_id), where stream
ids 0/1/2 cover deployment, slice assignment and fading. Each trial is fully
self-contained, so adding replications never reshuffles existing ones and
records are byte-identical regardless of the parallelism degree.
"""

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import cellular, control, metrics, wlan
from .config import CELLULAR, WLAN, ScenarioConfig
from .errors import ConfigError
from .model import (AccessPoint, ChannelParams, DeploymentParams, LoadSplit, Region,
                    SliceSpec, assign_slices, gain_matrix, gain_tensor,
                    generate_edge_weighted_users, generate_ppp_users, wlan_rate_matrix)

STREAM_DEPLOY = 0
STREAM_SLICES = 1
STREAM_FADING = 2

CSV_COLUMNS = ("scenario_id", "trial", "policy", "lambda_mean", "rho1",
               "total_throughput", "sp1_throughput", "sp2_throughput", "jain_index",
               "edge_median_rate", "center_median_rate", "solver_status", "wall_time",
               "scaling")


@dataclass
class ResultRecord:
    scenario_id: str
    trial: int
    policy: str
    lambda_mean: float
    rho1: float
    total_throughput: float
    sp1_throughput: float
    sp2_throughput: float
    jain_index: float
    edge_median_rate: float
    center_median_rate: float
    solver_status: str
    wall_time: float = 0.0
    scaling: float = 1.0


@dataclass
class TrialDetail:
    """Raw per-trial outputs for in-process consumers (not serialized)."""

    record: ResultRecord
    per_user_rate: np.ndarray = None
    edge_flags: np.ndarray = None
    per_sp_airtime: np.ndarray = None
    user_slice_ids: np.ndarray = None


def stream_seed(master_seed: int, trial: int, stream: int) -> int:
    words = np.random.SeedSequence(entropy=master_seed,
                                   spawn_key=(trial, stream)).generate_state(2)
    return int(words[0]) | (int(words[1]) << 32)


def _channel_params(cfg: ScenarioConfig) -> ChannelParams:
    ch = cfg.channel
    return ChannelParams(
        pathloss_exponent=float(ch.get("pathloss_exponent", 3.5)),
        reference_distance=float(ch.get("reference_distance", 1.0)),
        reference_gain=float(ch.get("reference_gain", 1.0)),
        noise_power=float(ch.get("noise_power", 1e-13)),
        fading=ch.get("fading", "off"),
    )


def _nodes(cfg: ScenarioConfig):
    return [AccessPoint(id=n.id, position=n.position, channel_id=n.channel_id,
                        tx_power=n.tx_power) for n in cfg.nodes]


def _slice_specs(cfg: ScenarioConfig, slice_ids: np.ndarray):
    specs = []
    for sc in cfg.slices:
        members = frozenset(int(i) for i in np.flatnonzero(slice_ids == sc.slice_id))
        specs.append(SliceSpec(slice_id=sc.slice_id, reservation=sc.reservation,
                               user_ids=members, isolation=sc.isolation))
    return specs


def _solver_options(cfg: ScenarioConfig):
    wl = wlan.WlanSolverOptions(**cfg.wlan_solver) if cfg.wlan_solver \
        else wlan.WlanSolverOptions()
    cl = cellular.CellularSolverOptions(**cfg.cellular_solver) if cfg.cellular_solver \
        else cellular.CellularSolverOptions()
    return wl, cl


def run_trial(cfg: ScenarioConfig, trial: int, policy: str) -> TrialDetail:
    """One seeded trial under one policy, through the control plane."""
    t0 = time.perf_counter()
    region = Region(*cfg.region)
    nodes = _nodes(cfg)
    params = _channel_params(cfg)
    deployment = DeploymentParams(lambda_mean=float(cfg.deployment["lambda_mean"]))
    split = LoadSplit(rho1=float(cfg.load_split["rho1"]))

    deploy_seed = stream_seed(cfg.master_seed, trial, STREAM_DEPLOY)
    slice_seed = stream_seed(cfg.master_seed, trial, STREAM_SLICES)
    fading_seed = stream_seed(cfg.master_seed, trial, STREAM_FADING)

    if cfg.scenario_kind == CELLULAR and cfg.edge_fraction is not None:
        positions = generate_edge_weighted_users(region, deployment, nodes,
                                                 cfg.edge_fraction, cfg.edge_threshold,
                                                 deploy_seed)
    else:
        positions = generate_ppp_users(region, deployment, len(nodes), deploy_seed)
    slice_ids = assign_slices(len(positions), split, slice_seed)
    slices = _slice_specs(cfg, slice_ids)
    wlan_opts, cell_opts = _solver_options(cfg)

    if cfg.scenario_kind == WLAN:
        detail = _run_wlan_trial(cfg, nodes, params, positions, slice_ids, slices,
                                 policy, wlan_opts, fading_seed)
    else:
        detail = _run_cellular_trial(cfg, nodes, params, positions, slice_ids, slices,
                                     policy, cell_opts, fading_seed)
    detail.record.trial = trial
    detail.record.wall_time = time.perf_counter() - t0
    return detail


def _finish_record(cfg, policy, status, scaling, per_sp, per_user, edge_flags):
    total = float(np.sum(per_sp))
    jain = metrics.jain_index(per_sp) if total > 0 else 0.0
    edge_median = 0.0
    center_median = 0.0
    if per_user is not None and edge_flags is not None and len(per_user):
        flags = np.asarray(edge_flags, dtype=bool)
        if flags.any():
            edge_median = metrics.empirical_cdf(per_user[flags]).median()
        if (~flags).any():
            center_median = metrics.empirical_cdf(per_user[~flags]).median()
    sp = list(np.asarray(per_sp, dtype=float)) + [0.0, 0.0]
    return ResultRecord(
        scenario_id=cfg.scenario_id, trial=0, policy=policy,
        lambda_mean=float(cfg.deployment["lambda_mean"]),
        rho1=float(cfg.load_split["rho1"]),
        total_throughput=total, sp1_throughput=float(sp[0]), sp2_throughput=float(sp[1]),
        jain_index=float(jain), edge_median_rate=float(edge_median),
        center_median_rate=float(center_median), solver_status=status,
        scaling=float(scaling))


def _edge_flags_or_none(cfg, positions, nodes):
    if len(positions) == 0 or len(nodes) < 2:
        return None
    return cellular.classify_cell_edge(positions, nodes, cfg.edge_threshold)


def _run_wlan_trial(cfg, nodes, params, positions, slice_ids, slices, policy,
                    options, fading_seed):
    gains = gain_matrix(positions, nodes, params, fading_seed)
    rates = wlan_rate_matrix(gains, nodes, params, cfg.rate_table)
    status, scaling = "optimal", 1.0
    if policy == "max_snr":
        tau = wlan.max_snr_wlan(gains, rates)
        status = "baseline"
    else:
        ran = control.RanState(ran_id=0, kind=control.WLAN_KIND,
                               user_slice_ids=slice_ids, gains=gains, rates=rates,
                               noise_power=params.noise_power)
        report = control.lrm_report(ran)
        constraints = [control.vrm_translate(
            control.SlaSpec(sc.slice_id, "airtime", sc.reservation, sc.isolation),
            control.WLAN_KIND) for sc in cfg.slices]
        crm = control.CommonResourceManager(wlan_options=options)
        try:
            schedule = crm.crm_schedule({0: constraints}, [report])[0]
        except control.InfeasibleError as err:
            # strict isolation: surfaced, recorded as scaled, re-solved for reporting
            constraints = [replace(c, scalable=True) for c in constraints]
            schedule = crm.crm_schedule({0: constraints}, [report])[0]
            schedule.scaled, schedule.scaling = True, err.scaling
        control.LocalResourceManager().lrm_apply(schedule)
        tau = schedule.allocation
        if schedule.scaled:
            status, scaling = "scaled_infeasible", schedule.scaling
    report_tp = wlan.wlan_throughput(tau, rates, slices)
    per_user = report_tp.per_user_per_ap.sum(axis=1)
    edge_flags = _edge_flags_or_none(cfg, positions, nodes)
    rec = _finish_record(cfg, policy, status, scaling, report_tp.per_sp, per_user,
                         edge_flags)
    return TrialDetail(record=rec, per_user_rate=per_user, edge_flags=edge_flags,
                       per_sp_airtime=report_tp.per_sp_airtime,
                       user_slice_ids=slice_ids)


def _run_cellular_trial(cfg, nodes, params, positions, slice_ids, slices, policy,
                        options, fading_seed):
    tensor = gain_tensor(positions, nodes, cfg.subcarriers, params, fading_seed)
    budgets = np.array([n.tx_power for n in nodes], dtype=float)
    status, scaling = "optimal", 1.0
    if policy == "max_snr":
        alloc = cellular.max_snr_cellular(tensor, budgets, params.noise_power)
        status = "baseline"
    else:
        ran = control.RanState(ran_id=0, kind=control.CELLULAR_KIND,
                               user_slice_ids=slice_ids, gain_tensor=tensor,
                               budgets=budgets, noise_power=params.noise_power)
        report = control.lrm_report(ran)
        constraints = [control.vrm_translate(
            control.SlaSpec(sc.slice_id, "min_rate", sc.reservation, sc.isolation),
            control.CELLULAR_KIND) for sc in cfg.slices]
        crm = control.CommonResourceManager(cellular_options=options)
        try:
            schedule = crm.crm_schedule({0: constraints}, [report])[0]
        except control.InfeasibleError as err:
            constraints = [replace(c, scalable=True) for c in constraints]
            schedule = crm.crm_schedule({0: constraints}, [report])[0]
            schedule.scaled, schedule.scaling = True, err.scaling
        control.LocalResourceManager().lrm_apply(schedule)
        alloc = schedule.allocation
        if schedule.scaled:
            status, scaling = "scaled_infeasible", schedule.scaling
    edge_flags = _edge_flags_or_none(cfg, positions, nodes)
    rep = cellular.cellular_rates(alloc, tensor, params.noise_power, slices,
                                  edge_flags=edge_flags)
    rec = _finish_record(cfg, policy, status, scaling, rep.per_slice_rate,
                         rep.per_user_rate, edge_flags)
    return TrialDetail(record=rec, per_user_rate=rep.per_user_rate,
                       edge_flags=edge_flags, user_slice_ids=slice_ids)


def _worker_count(workers=None) -> int:
    cap = os.environ.get("SDWN_SIM_THREADS")
    if workers is None:
        workers = int(cap) if cap else 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def _task(args):
    cfg_kw, trial, policy = args
    cfg = ScenarioConfig(**cfg_kw)
    return trial, policy, run_trial(cfg, trial, policy)


def run_scenario(cfg: ScenarioConfig, policies=None, workers=None, keep_details=False):
    """All replications of one config; records sorted by (policy, trial)."""
    policies = sorted(policies) if policies else [cfg.policy]
    tasks = [(cfg.__dict__, trial, policy)
             for policy in policies for trial in range(cfg.replications)]
    results = _execute(tasks, _worker_count(workers))
    results.sort(key=lambda r: (r[1], r[0]))
    details = [r[2] for r in results]
    if keep_details:
        return details
    return [d.record for d in details]


def _execute(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=1))


def sweep(cfg: ScenarioConfig, grid: dict, workers=None, keep_details=False):
    """Cartesian sweep over lambda_mean and/or rho1, both policies always.

    Records come back in (grid point, policy, trial) lexicographic order
    regardless of execution order.
    """
    names = sorted(grid)
    for name in names:
        if name not in ("lambda_mean", "rho1"):
            raise ConfigError(f"sweep parameter must be lambda_mean or rho1, got {name!r}")
        values = list(grid[name])
        if not values or any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(f"sweep grid for {name} must be non-empty and strictly increasing")
    points = [()]
    for name in names:
        points = [p + ((name, v),) for p in points for v in grid[name]]
    for point in points:
        _config_at(cfg, point)   # validate every grid point before any run

    tasks = []
    for gi, point in enumerate(points):
        sub = _config_at(cfg, point)
        for policy in ("max_snr", "sdwn"):
            for trial in range(cfg.replications):
                tasks.append(((gi, policy, trial), (sub.__dict__, trial, policy)))
    order = {key: i for i, (key, _) in enumerate(tasks)}
    results = _execute([t for _, t in tasks], _worker_count(workers))
    keyed = list(zip([k for k, _ in tasks], results))
    keyed.sort(key=lambda kv: order[kv[0]])
    details = [r[2] for _, r in keyed]
    if keep_details:
        return details
    return [d.record for d in details]


def _config_at(cfg: ScenarioConfig, point) -> ScenarioConfig:
    sub = cfg
    for name, value in point:
        if name == "lambda_mean":
            if value <= 0:
                raise ConfigError("lambda_mean grid values must be positive")
            sub = replace(sub, deployment={"lambda_mean": float(value)})
        else:
            if not 0 <= value <= 1:
                raise ConfigError("rho1 grid values must lie in [0, 1]")
            sub = replace(sub, load_split={"rho1": float(value)})
    return sub


def format_float(x: float) -> str:
    return "%.9g" % x


def write_csv(records, path_or_handle, timing=False):
    """CSV with a mandatory header; floats printed with 9 significant digits.

    wall_time is written as 0 unless timing is requested, keeping output
    byte-deterministic under a fixed master seed.
    """
    own = isinstance(path_or_handle, (str, os.PathLike))
    fh = open(path_or_handle, "w") if own else path_or_handle
    try:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            row = []
            for col in CSV_COLUMNS:
                val = getattr(rec, col)
                if col == "wall_time" and not timing:
                    val = 0.0
                row.append(format_float(val) if isinstance(val, float) else str(val))
            fh.write(",".join(row) + "\n")
    finally:
        if own:
            fh.close()


def read_csv(path):
    """Read a results CSV back into ResultRecord objects."""
    float_fields = {f.name for f in fields(ResultRecord) if f.type in (float, "float")}
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header")
        for line in fh:
            vals = line.strip().split(",")
            kw = {}
            for col, val in zip(CSV_COLUMNS, vals):
                if col in float_fields:
                    kw[col] = float(val)
                elif col == "trial":
                    kw[col] = int(val)
                else:
                    kw[col] = val
            records.append(ResultRecord(**kw))
    return records


@dataclass
class VerificationReport:
    scenario_kind: str
    solver_objective: float
    oracle_objective: float
    gap: float
    tolerance: float
    feasibility_agreement: bool
    passed: bool
    detail: str = ""


def verify_oracle(cfg: ScenarioConfig, grid_step: float = None, trial: int = 0):
    """Run the solver and the matching brute-force oracle on one realized
    trial instance; report the objective gap and feasibility agreement."""
    region = Region(*cfg.region)
    nodes = _nodes(cfg)
    params = _channel_params(cfg)
    deployment = DeploymentParams(lambda_mean=float(cfg.deployment["lambda_mean"]))
    split = LoadSplit(rho1=float(cfg.load_split["rho1"]))
    positions = generate_ppp_users(region, deployment, len(nodes),
                                   stream_seed(cfg.master_seed, trial, STREAM_DEPLOY))
    slice_ids = assign_slices(len(positions), split,
                              stream_seed(cfg.master_seed, trial, STREAM_SLICES))
    slices = _slice_specs(cfg, slice_ids)
    wlan_opts, cell_opts = _solver_options(cfg)
    fading_seed = stream_seed(cfg.master_seed, trial, STREAM_FADING)

    if cfg.scenario_kind == WLAN:
        gains = gain_matrix(positions, nodes, params, fading_seed)
        rates = wlan_rate_matrix(gains, nodes, params, cfg.rate_table)
        oracle = wlan.brute_force_tau_oracle(rates, slices, grid_step, wlan_opts)
        tolerance = 1e-2
        try:
            sol = wlan.optimize_tau(rates, slices, wlan_opts)
            solver_obj, solver_feasible, solver_scaling = sol.objective, True, 1.0
        except wlan.InfeasibleError as err:
            solver_obj, solver_feasible, solver_scaling = 0.0, False, err.scaling
        agree = solver_feasible == oracle.feasible
        if agree and not solver_feasible:
            agree = abs(solver_scaling - oracle.scaling) <= 0.02
        gap = oracle.objective - solver_obj
        passed = agree and gap <= tolerance
        detail = "" if solver_feasible else \
            f"scaling solver={solver_scaling:.4f} oracle={oracle.scaling:.4f}"
    else:
        tensor = gain_tensor(positions, nodes, cfg.subcarriers, params, fading_seed)
        budgets = np.array([n.tx_power for n in nodes], dtype=float)
        oracle = cellular.brute_force_cellular_oracle(tensor, budgets, slices, cell_opts,
                                                      noise_power=params.noise_power)
        tolerance = 0.05
        try:
            alloc = cellular.solve_joint_allocation(tensor, budgets, slices, cell_opts,
                                                    noise_power=params.noise_power)
            rep = cellular.cellular_rates(alloc, tensor, params.noise_power, slices)
            solver_obj, solver_feasible, solver_scaling = \
                float(rep.per_user_rate.sum()), True, 1.0
        except cellular.InfeasibleError as err:
            solver_obj, solver_feasible, solver_scaling = 0.0, False, err.scaling
        agree = solver_feasible == oracle.feasible
        if agree and not solver_feasible:
            agree = abs(solver_scaling - oracle.scaling) <= 0.02
        gap = (oracle.objective - solver_obj) / oracle.objective if oracle.objective > 0 \
            else 0.0
        passed = agree and gap <= tolerance
        detail = "" if solver_feasible else \
            f"scaling solver={solver_scaling:.4f} oracle={oracle.scaling:.4f}"
    return VerificationReport(scenario_kind=cfg.scenario_kind, solver_objective=solver_obj,
                              oracle_objective=oracle.objective, gap=float(gap),
                              tolerance=tolerance, feasibility_agreement=agree,
                              passed=passed, detail=detail)

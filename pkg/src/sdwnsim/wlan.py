"""Virtualized 802.11 scenario: slotted-contention throughput over per-user,
per-AP transmission probabilities, airtime guarantees per SP, the network
optimizer, the Max-SNR baseline, and the CW_min mapping.

Throughput model: T[i,a] = r[i,a] * tau[i,a] * prod_{j != i} (1 - tau[j,a]).
APs sit on non-overlapping channels, so contention couples users only through
the per-AP product. A slice's successful airtime at an AP is the same product
form with rates replaced by slice membership; its network airtime is the
average over APs.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleError, OracleSizeError

_ORACLE_MAX_VARS = 4
_ORACLE_MAX_POINTS = 1.2e9
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class WlanSolverOptions:
    max_iterations: int = 200      # inner projected-gradient steps per penalty round
    step_size: float = 0.25
    feasibility_tolerance: float = 1e-4
    convergence_tolerance: float = 1e-6
    multistart_count: int = 8
    oracle_grid_step: float = 0.001

    def __post_init__(self):
        for name in ("max_iterations", "step_size", "feasibility_tolerance",
                     "convergence_tolerance", "multistart_count", "oracle_grid_step"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"solver option {name} must be strictly positive")
        if self.feasibility_tolerance > 1e-4:
            raise ConfigError("feasibility_tolerance must be <= 1e-4")


@dataclass
class WlanThroughputReport:
    per_user_per_ap: np.ndarray   # (N, A) Mbit/s
    per_sp: np.ndarray            # (K,) Mbit/s
    per_sp_airtime: np.ndarray    # (K,) network-average successful airtime


@dataclass
class CwTable:
    """Minimum contention windows per (user, AP); 0 marks an unassociated pair."""

    w: np.ndarray

    def inverse_tau(self) -> np.ndarray:
        out = np.zeros(self.w.shape)
        held = self.w > 0
        out[held] = 2.0 / (self.w[held] + 1.0)
        return out


@dataclass
class WlanSolution:
    tau: np.ndarray
    objective: float
    per_sp_airtime: np.ndarray
    status: str = "optimal"


@dataclass
class FeasibilityResult:
    feasible: bool
    min_slack: float
    witness: np.ndarray
    scaling: float = 1.0


@dataclass
class OracleResult:
    tau: np.ndarray
    objective: float
    feasible: bool
    scaling: float = 1.0


def _exclusive_products(u: np.ndarray) -> np.ndarray:
    """E1[..., i] = prod_{j != i} u[..., j], exact at zeros of u."""
    zero = u == 0.0
    nz = zero.sum(axis=-1, keepdims=True)
    usafe = np.where(zero, 1.0, u)
    pnz = usafe.prod(axis=-1, keepdims=True)
    return np.where(nz == 0, pnz / usafe, np.where(zero & (nz == 1), pnz, 0.0))


def _product_value_grad(tau: np.ndarray, w: np.ndarray):
    """Value and gradient of v(tau) = sum_l w_l tau_l prod_{j != l}(1 - tau_j).

    tau has shape (..., N); w broadcasts against it. Exact on the box boundary
    (tau values of exactly 1 are handled by zero-counting, not division).
    """
    u = 1.0 - tau
    zero = u == 0.0
    nz = zero.sum(axis=-1, keepdims=True)
    usafe = np.where(zero, 1.0, u)
    pnz = usafe.prod(axis=-1, keepdims=True)
    e1 = np.where(nz == 0, pnz / usafe, np.where(zero & (nz == 1), pnz, 0.0))
    wte = w * tau * e1
    value = wte.sum(axis=-1)

    # no zeros: g_i = w_i E1_i - (v - w_i tau_i E1_i) / u_i
    g0 = w * e1 - (value[..., None] - wte) / usafe
    # one zero at z: g_z = Pz (w_z - sum_{l != z} w_l tau_l / u_l); g_i = -w_z Pz / u_i
    s1 = np.where(zero, 0.0, w * tau / usafe).sum(axis=-1, keepdims=True)
    wz = np.where(zero, w * np.ones_like(u), 0.0).sum(axis=-1, keepdims=True)
    g1 = np.where(zero, pnz * (w - s1), -wz * pnz / usafe)
    # two zeros z1, z2: g_{z1} = -w_{z2} Pzz and symmetrically; 0 elsewhere
    g2 = np.where(zero, -(wz - w * zero) * pnz, 0.0)
    grad = np.where(nz == 0, g0, np.where(nz == 1, g1, np.where(nz == 2, g2, 0.0)))
    return value, grad


def _membership_matrix(n_users: int, slices) -> np.ndarray:
    m = np.zeros((len(slices), n_users))
    seen = set()
    for k, sl in enumerate(slices):
        for uid in sl.user_ids:
            if not 0 <= uid < n_users:
                raise ConfigError(f"slice {sl.slice_id} references unknown user {uid}")
            if uid in seen:
                raise ConfigError(f"user {uid} belongs to more than one slice")
            seen.add(uid)
            m[k, uid] = 1.0
    return m


def _validate_tau(tau: np.ndarray, rates: np.ndarray):
    tau = np.asarray(tau, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if tau.shape != rates.shape or tau.ndim != 2:
        raise ConfigError(f"tau shape {tau.shape} does not match rates shape {rates.shape}")
    if np.any(tau < 0) or np.any(tau > 1):
        raise ConfigError("tau entries must lie in [0, 1]")
    if np.any(rates < 0):
        raise ConfigError("rates must be non-negative")
    return tau, rates


def wlan_throughput(tau: np.ndarray, rates: np.ndarray, slices) -> WlanThroughputReport:
    """Per-user/per-AP throughput, per-SP totals and network-average airtimes."""
    tau, rates = _validate_tau(tau, rates)
    n, a = tau.shape
    m = _membership_matrix(n, slices)
    e1 = _exclusive_products((1.0 - tau).T).T    # (N, A)
    t = rates * tau * e1
    succ = tau * e1                              # per-user successful airtime share
    per_sp = m @ t.sum(axis=1)
    per_sp_airtime = (m @ succ).mean(axis=1) if a > 0 else np.zeros(len(slices))
    return WlanThroughputReport(per_user_per_ap=t, per_sp=per_sp, per_sp_airtime=per_sp_airtime)


def max_snr_wlan(gains: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Max-SNR association baseline.

    Each user joins its argmax-gain AP (ties to the lowest AP id) and the n_a
    users of one AP share it symmetrically with tau = 1/n_a. Users with zero
    rate at every AP stay unassociated (all-zero row).
    """
    gains = np.asarray(gains, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if gains.shape != rates.shape:
        raise ConfigError("gains and rates shapes differ")
    n, a = gains.shape
    tau = np.zeros((n, a))
    if n == 0:
        return tau
    best = np.argmax(gains, axis=1)
    covered = rates.max(axis=1) > 0
    counts = np.bincount(best[covered], minlength=a)
    for i in range(n):
        if covered[i]:
            tau[i, best[i]] = 1.0 / counts[best[i]]
    return tau


def tau_to_cwmin(tau: np.ndarray) -> CwTable:
    """Map transmission probabilities to minimum contention windows.

    W = ceil(2/tau - 1) clamped to >= 1, so the inverse map 2/(W+1) never
    exceeds tau (conservative rounding; the 1e-9 guard only absorbs binary
    representation noise at exact integer boundaries). tau = 0 pairs carry no
    window (entry 0 = unassociated).
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(tau > 1):
        raise ConfigError("tau entries must lie in [0, 1]")
    w = np.zeros(tau.shape, dtype=int)
    held = tau > 0
    w[held] = np.maximum(1, np.ceil(2.0 / tau[held] - 1.0 - 1e-9).astype(int))
    return CwTable(w=w)


def _instance_seed(rates: np.ndarray, betas: np.ndarray, membership: np.ndarray, options) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(np.ascontiguousarray(rates, dtype=float).tobytes())
    h.update(np.ascontiguousarray(betas, dtype=float).tobytes())
    h.update(np.ascontiguousarray(membership, dtype=float).tobytes())
    h.update(repr(options).encode())
    return int.from_bytes(h.digest(), "little")


def _partition_corner_seeds(rates: np.ndarray, membership: np.ndarray, max_partitions: int = 64):
    """Per-AP monopoly corners: assign each AP to one slice and give it to that
    slice's best-rate user there. These are stationary points of the projected
    dynamics and include the unconstrained optimum (all APs to the overall
    best user)."""
    n, a = rates.shape
    k = membership.shape[0]
    seeds = []
    # pure throughput monopoly: per AP, the best user overall
    corner = np.zeros((n, a))
    for ap in range(a):
        corner[int(np.argmax(rates[:, ap])), ap] = 1.0
    seeds.append(corner)
    if k == 0 or n == 0:
        return seeds
    if k ** a <= max_partitions:
        assignments = np.indices((k,) * a).reshape(a, -1).T
    else:
        assignments = [np.full(a, kk) for kk in range(k)]
    for assign in assignments:
        corner = np.zeros((n, a))
        ok = True
        for ap in range(a):
            members = membership[assign[ap]] > 0
            if not members.any():
                ok = False
                break
            masked = np.where(members, rates[:, ap], -1.0)
            corner[int(np.argmax(masked)), ap] = 1.0
        if ok:
            seeds.append(corner)
    return seeds


def _build_starts(rates, membership, betas, options, extra=()):
    n, a = rates.shape
    starts = list(_partition_corner_seeds(rates, membership))
    starts.append(np.full((n, a), 1.0 / max(2, n)))
    starts.extend(np.asarray(e, dtype=float) for e in extra)
    rng = np.random.default_rng(_instance_seed(rates, betas, membership, options))
    for _ in range(options.multistart_count):
        starts.append(rng.uniform(0.02, 0.98, size=(n, a)))
    return np.stack(starts)  # (S, N, A)


def _batched_airtimes(tau_b: np.ndarray, membership: np.ndarray):
    """tau_b: (S, N, A) -> per-slice network airtime (S, K) and gradients (S, K, N, A)."""
    s, n, a = tau_b.shape
    k = membership.shape[0]
    tb = np.swapaxes(tau_b, 1, 2)  # (S, A, N)
    vals = np.empty((s, k))
    grads = np.empty((s, k, n, a))
    for kk in range(k):
        v, g = _product_value_grad(tb, membership[kk])
        vals[:, kk] = v.mean(axis=1)
        grads[:, kk] = np.swapaxes(g, 1, 2) / a
    return vals, grads


def _batched_objective(tau_b: np.ndarray, rates: np.ndarray):
    tb = np.swapaxes(tau_b, 1, 2)
    v, g = _product_value_grad(tb, rates.T)
    return v.sum(axis=1), np.swapaxes(g, 1, 2)


def _batched_values(tau_b: np.ndarray, rates: np.ndarray, membership: np.ndarray):
    """Value-only pass sharing one exclusive-product evaluation: total
    throughput (S,) and per-slice airtimes (S, K)."""
    a = tau_b.shape[2]
    tb = np.swapaxes(tau_b, 1, 2)                    # (S, A, N)
    e1 = _exclusive_products(1.0 - tb)
    succ = tb * e1                                   # (S, A, N)
    f = (succ * rates.T).sum(axis=(1, 2))
    air = np.einsum("san,kn->sk", succ, membership) / a
    return f, air


def _batched_eval(tau_b: np.ndarray, rates: np.ndarray, membership: np.ndarray):
    """Fused value+gradient pass for the objective and every slice airtime.

    One _product_value_grad call over a stacked weight tensor (rates plus the
    K membership rows) instead of K+1 separate passes. Returns f (S,), fgrad
    (S,N,A), airtimes (S,K), airtime grads (S,K,N,A)."""
    s, n, a = tau_b.shape
    k = membership.shape[0]
    w = np.empty((a, k + 1, n))
    w[:, 0, :] = rates.T
    w[:, 1:, :] = membership[None, :, :]
    tb = np.swapaxes(tau_b, 1, 2)[:, :, None, :]          # (S, A, 1, N)
    vals, grads = _product_value_grad(tb, w)              # (S,A,K+1), (S,A,K+1,N)
    f = vals[:, :, 0].sum(axis=1)
    fgrad = np.swapaxes(grads[:, :, 0, :], 1, 2)
    air = vals[:, :, 1:].mean(axis=1)
    agrad = np.moveaxis(grads[:, :, 1:, :], (1, 2, 3), (3, 1, 2)) / a
    return f, fgrad, air, agrad


def _al_merit(f, h, lam, mu):
    """Augmented-Lagrangian merit to maximize: f - (1/2mu) sum_k [max(0, lam-mu h)^2 - lam^2]."""
    act = np.maximum(0.0, lam - mu * h)
    return f - ((act * act - lam * lam).sum(axis=1)) / (2.0 * mu)


def _objective_value(tau: np.ndarray, rates: np.ndarray) -> float:
    e1 = _exclusive_products((1.0 - tau).T).T
    return float((rates * tau * e1).sum())


def _airtime_values(tau: np.ndarray, membership: np.ndarray) -> np.ndarray:
    if tau.shape[1] == 0:
        return np.zeros(membership.shape[0])
    e1 = _exclusive_products((1.0 - tau).T).T
    succ = tau * e1
    return (membership @ succ).mean(axis=1)


def _pick_lexicographic(candidates, objectives):
    """Best objective (exact float comparison, so the Max-SNR warm start can
    never be beaten by a numerically-worse pick); exact ties resolved toward
    the lexicographically greatest flattened tau, which prefers probability
    mass on lower user ids."""
    best = max(objectives)
    tied = [c for c, o in zip(candidates, objectives) if o == best]
    tied.sort(key=lambda t: tuple(t.flatten()), reverse=True)
    return tied[0]


def _maximize_min_slack(rates, membership, betas, options, extra_seeds=(),
                        iterations=None, stop_at=None):
    """Projected subgradient ascent on min_k (airtime_k - beta_k) over reserved
    slices. Returns (best min-slack, witness tau). stop_at short-circuits the
    ascent once the slack target is proven reachable (a feasibility decision
    does not need the exact max-min value)."""
    n, a = rates.shape
    reserved = betas > 0
    if n == 0 or a == 0 or not reserved.any():
        return np.inf, np.zeros((n, a))
    m_res = membership[reserved]
    b_res = betas[reserved]
    tau_b = np.clip(_build_starts(rates, membership, betas, options, extra=extra_seeds), 0.0, 1.0)
    steps = iterations if iterations is not None else options.max_iterations
    best_val = -np.inf
    best_tau = tau_b[0].copy()
    eta0 = options.step_size
    for t in range(steps + 1):
        vals, grads = _batched_airtimes(tau_b, m_res)   # (S, Kr), (S, Kr, N, A)
        slacks = vals - b_res[None, :]
        mins = slacks.min(axis=1)
        i = int(np.argmax(mins))
        if mins[i] > best_val + _TIE_TOL:
            best_val = float(mins[i])
            best_tau = tau_b[i].copy()
        if stop_at is not None and best_val >= stop_at:
            break
        if t == steps:
            break
        # subgradient: average the gradients of slices within a hair of the min
        active = slacks <= (slacks.min(axis=1, keepdims=True) + 1e-7)
        wsum = active.sum(axis=1).astype(float)
        g = (grads * active[:, :, None, None]).sum(axis=1) / wsum[:, None, None]
        tau_b = np.clip(tau_b + (eta0 / (1.0 + t / 30.0)) * g, 0.0, 1.0)
    return best_val, best_tau


def feasibility_check(rates, slices, options: WlanSolverOptions = None) -> FeasibilityResult:
    """Decide whether some tau meets every airtime reservation within epsilon.

    Decided by maximizing the minimum slack; when infeasible, the maximal
    uniform reservation scaling s is located by bisection with the same
    machinery.
    """
    options = options or WlanSolverOptions()
    rates = np.asarray(rates, dtype=float)
    n, a = rates.shape
    m = _membership_matrix(n, slices)
    betas = np.array([sl.reservation for sl in slices], dtype=float)
    if np.any(betas > 1):
        raise ConfigError("airtime reservations cannot exceed 1")
    eps = options.feasibility_tolerance
    slack, witness = _maximize_min_slack(rates, m, betas, options, stop_at=0.0)
    if slack >= -eps:
        return FeasibilityResult(feasible=True, min_slack=float(slack), witness=witness)
    scaling, witness_s = _bisect_scaling(rates, m, betas, options)
    return FeasibilityResult(feasible=False, min_slack=float(slack), witness=witness_s, scaling=scaling)


def _bisect_scaling(rates, membership, betas, options):
    eps = options.feasibility_tolerance
    lo, hi = 0.0, 1.0
    witness = np.zeros_like(rates)
    seeds = []
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        slack, w = _maximize_min_slack(rates, membership, mid * betas, options,
                                       extra_seeds=seeds, stop_at=0.0,
                                       iterations=max(60, options.max_iterations // 2))
        if slack >= -eps:
            lo, witness = mid, w
            seeds = [w]
        else:
            hi = mid
    return lo, witness


def _batched_restore(tau_b: np.ndarray, membership: np.ndarray, betas: np.ndarray,
                     eps: float, max_steps: int = 12) -> np.ndarray:
    """Newton steps along the most-violated constraint's gradient, batched.

    Pulls each element of the batch back onto (slightly inside) the
    reservation boundary. Elements whose worst constraint has a vanishing
    gradient (degenerate monopoly corners) are nudged off the corner first,
    since the airtime of a fully suppressed slice is flat there.
    """
    tau_b = tau_b.copy()
    k = membership.shape[0]
    if k == 0 or not (betas > 0).any():
        return tau_b
    for _ in range(max_steps):
        vals, grads = _batched_airtimes(tau_b, membership)      # (S,K), (S,K,N,A)
        slack = vals - betas[None, :]
        worst = np.argmin(slack, axis=1)                        # (S,)
        sidx = np.arange(tau_b.shape[0])
        wslack = slack[sidx, worst]
        need = wslack < -0.25 * eps
        if not need.any():
            break
        g = grads[sidx, worst]                                  # (S,N,A)
        gnorm = (g * g).sum(axis=(1, 2))
        flat = need & (gnorm <= 1e-14)
        if flat.any():
            # degenerate corner: shrink the monopolists so the suppressed
            # slice's airtime regains a usable gradient
            tau_b[flat] = np.clip(tau_b[flat] * 0.75, 0.0, 1.0 - 1e-3)
            continue
        stepw = np.where(need & (gnorm > 1e-14),
                         (-wslack + 0.25 * eps) / np.maximum(gnorm, 1e-14), 0.0)
        tau_b = np.clip(tau_b + stepw[:, None, None] * g, 0.0, 1.0)
    return tau_b


def _feasible_ascent(tau_b: np.ndarray, r_norm: np.ndarray, membership: np.ndarray,
                     betas: np.ndarray, eps: float, options) -> np.ndarray:
    """Projected objective ascent that restores reservation feasibility after
    every trial step, so all iterates stay feasible. Polishing phase run after
    the augmented-Lagrangian rounds."""
    tau_b = _batched_restore(tau_b, membership, betas, eps)
    s_count = tau_b.shape[0]
    eta = np.full(s_count, options.step_size)
    fcur, _ = _batched_values(tau_b, r_norm, membership)
    stall = 0
    for _t in range(options.max_iterations):
        _, fgrad = _batched_objective(tau_b, r_norm)
        best_f = fcur.copy()
        best_tau = tau_b.copy()
        picked = np.full(s_count, -1)
        for ci, te in enumerate((2.0 * eta, eta, 0.25 * eta)):
            cand = np.clip(tau_b + te[:, None, None] * fgrad, 0.0, 1.0)
            cand = _batched_restore(cand, membership, betas, eps)
            cf, cair = _batched_values(cand, r_norm, membership)
            ok = (cair >= betas[None, :] - eps).all(axis=1)
            better = ok & (cf > best_f + 1e-12)
            if better.any():
                best_f = np.where(better, cf, best_f)
                best_tau = np.where(better[:, None, None], cand, best_tau)
                picked = np.where(better, ci, picked)
        moved = np.abs(best_tau - tau_b).max()
        tau_b, fcur = best_tau, best_f
        eta = np.where(picked == 0, np.minimum(eta * 1.6, 2.0),
                       np.where(picked == 2, np.maximum(eta * 0.4, 1e-6),
                                np.where(picked == -1, np.maximum(eta * 0.25, 1e-6), eta)))
        stall = stall + 1 if moved < options.convergence_tolerance else 0
        if stall >= 10:
            break
    return tau_b


def optimize_tau(rates, slices, options: WlanSolverOptions = None,
                 baseline_tau: np.ndarray = None) -> WlanSolution:
    """Maximize total throughput subject to per-SP airtime reservations.

    Projected gradient ascent with an augmented-Lagrangian treatment of the
    airtime constraints, restarted from a deterministic multistart set seeded
    by the instance hash (plus structured monopoly corners, the Max-SNR
    baseline point when provided, and the feasibility witness). Raises
    InfeasibleError with the maximal uniform reservation scaling when the
    reservations cannot be met.
    """
    options = options or WlanSolverOptions()
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 2:
        raise ConfigError("rates must be a (users x aps) matrix")
    n, a = rates.shape
    m = _membership_matrix(n, slices)
    betas = np.array([sl.reservation for sl in slices], dtype=float)
    if np.any(betas < 0) or np.any(betas > 1):
        raise ConfigError("airtime reservations must lie in [0, 1]")
    eps = options.feasibility_tolerance

    if n == 0 or a == 0:
        if np.any(betas > eps):
            raise InfeasibleError("no users to carry reserved airtime", scaling=0.0)
        return WlanSolution(tau=np.zeros((n, a)), objective=0.0,
                            per_sp_airtime=np.zeros(len(slices)))

    feas = feasibility_check(rates, slices, options)
    if not feas.feasible:
        raise InfeasibleError(
            f"airtime reservations infeasible; maximal uniform scaling {feas.scaling:.4f}",
            scaling=feas.scaling)

    # normalize rates so step sizes and tie tolerances are scale-free
    scale = rates.max()
    r_norm = rates / scale if scale > 0 else rates

    extra = [feas.witness]
    if baseline_tau is not None:
        baseline_tau = np.asarray(baseline_tau, dtype=float)
        if baseline_tau.shape == rates.shape:
            extra.append(baseline_tau)
    tau_b = np.clip(_build_starts(rates, m, betas, options, extra=extra), 0.0, 1.0)
    raw_candidates = [t.copy() for t in tau_b]

    s_count = tau_b.shape[0]
    lam = np.zeros((s_count, len(slices)))
    mu = 2.0
    eta = np.full(s_count, options.step_size)
    best_feasible = -np.inf
    rounds_without_gain = 0
    for _round in range(10):
        prev = tau_b.copy()
        stall = 0
        for _t in range(options.max_iterations):
            fval, fgrad, hvals, hgrads = _batched_eval(tau_b, r_norm, m)
            h = hvals - betas[None, :]
            act = np.maximum(0.0, lam - mu * h)              # (S, K)
            grad = fgrad + (act[:, :, None, None] * hgrads).sum(axis=1)
            phi0 = _al_merit(fval, h, lam, mu)
            # batched backtracking: try three step lengths, keep the best merit
            trial_etas = (2.0 * eta, eta, 0.25 * eta)
            best_phi = phi0.copy()
            best_tau = tau_b.copy()
            picked = np.full(s_count, -1)
            for ci, te in enumerate(trial_etas):
                cand = np.clip(tau_b + te[:, None, None] * grad, 0.0, 1.0)
                cf, cair = _batched_values(cand, r_norm, m)
                cphi = _al_merit(cf, cair - betas[None, :], lam, mu)
                better = cphi > best_phi + 1e-12
                if better.any():
                    best_phi = np.where(better, cphi, best_phi)
                    best_tau = np.where(better[:, None, None], cand, best_tau)
                    picked = np.where(better, ci, picked)
            moved = np.abs(best_tau - tau_b).max()
            tau_b = best_tau
            eta = np.where(picked == 0, np.minimum(eta * 1.6, 2.0),
                           np.where(picked == 2, np.maximum(eta * 0.4, 1e-6),
                                    np.where(picked == -1, np.maximum(eta * 0.25, 1e-6), eta)))
            # shrinks need a few iterations to bite before declaring a stall
            stall = stall + 1 if moved < options.convergence_tolerance else 0
            if stall >= 10:
                break
        _f, hvals = _batched_values(tau_b, r_norm, m)
        lam = np.maximum(0.0, lam - mu * (hvals - betas[None, :]))
        mu *= 2.5
        eta = np.maximum(eta, options.step_size * 0.1)
        if np.abs(tau_b - prev).max() < options.convergence_tolerance and \
                (hvals - betas[None, :]).min(initial=0.0) >= -eps:
            break
        # stop growing penalties once the best feasible objective stagnates
        feas_mask = (hvals - betas[None, :] >= -eps).all(axis=1)
        round_best = float(_f[feas_mask].max()) if feas_mask.any() else -np.inf
        if round_best > best_feasible + options.convergence_tolerance:
            best_feasible = round_best
            rounds_without_gain = 0
        else:
            rounds_without_gain += 1
            if rounds_without_gain >= 2:
                break

    polished = _feasible_ascent(tau_b, r_norm, m, betas, eps, options)
    candidates = [polished[i] for i in range(s_count)] + raw_candidates + [feas.witness]
    feasible_cands, objectives = [], []
    for c in candidates:
        if (_airtime_values(c, m) >= betas - eps).all():
            feasible_cands.append(c)
            objectives.append(_objective_value(c, rates))
    if not feasible_cands:
        feasible_cands = [feas.witness]
        objectives = [_objective_value(feas.witness, rates)]
    tau_star = _pick_lexicographic(feasible_cands, objectives)
    return WlanSolution(tau=tau_star,
                        objective=_objective_value(tau_star, rates),
                        per_sp_airtime=_airtime_values(tau_star, m))


def _oracle_grid(step: float) -> np.ndarray:
    count = int(np.floor(1.0 / step + 1e-9))
    grid = np.linspace(0.0, count * step, count + 1)
    if grid[-1] < 1.0 - 1e-12:
        grid = np.append(grid, 1.0)
    return grid


def brute_force_tau_oracle(rates, slices, grid_step: float = None,
                           options: WlanSolverOptions = None) -> OracleResult:
    """Exhaustive grid search over every tau variable for tiny instances.

    Rejects instances with more than 4 decision variables or grids past ~1.2e9
    points. The best feasible point is returned with ties broken toward the
    lexicographically smallest grid point (flattened user-major). Instances
    with >= 3 variables are scanned slab-by-slab in float32 across two threads
    (the argmax merge prefers earlier slabs, keeping the tie-break exact);
    the winning objective is re-evaluated in float64.
    """
    options = options or WlanSolverOptions()
    step = grid_step if grid_step is not None else options.oracle_grid_step
    rates = np.asarray(rates, dtype=float)
    n, a = rates.shape
    nvars = n * a
    if nvars > _ORACLE_MAX_VARS:
        raise OracleSizeError(f"{nvars} decision variables exceed the oracle limit of {_ORACLE_MAX_VARS}")
    grid = _oracle_grid(step)
    if float(len(grid)) ** nvars > _ORACLE_MAX_POINTS:
        raise OracleSizeError(f"grid of {len(grid)}^{nvars} points is too large to enumerate")
    m = _membership_matrix(n, slices)
    betas = np.array([sl.reservation for sl in slices], dtype=float)
    eps = options.feasibility_tolerance

    if nvars == 0:
        feasible = bool((betas <= eps).all())
        return OracleResult(tau=np.zeros((n, a)), objective=0.0, feasible=feasible,
                            scaling=1.0 if feasible else 0.0)

    best_val, best_idx = _oracle_scan(grid, rates, m, betas, eps, objective=True)
    if best_idx >= 0:
        tau = _index_to_tau(best_idx, grid, n, a)
        return OracleResult(tau=tau, objective=_objective_value(tau, rates), feasible=True)
    # no feasible point: scan for the maximal uniform reservation scaling
    s_val, s_idx = _oracle_scan(grid, rates, m, betas, eps, objective=False)
    tau = _index_to_tau(max(s_idx, 0), grid, n, a)
    return OracleResult(tau=tau, objective=0.0, feasible=False,
                        scaling=float(min(1.0, max(0.0, s_val))))


def _index_to_tau(flat_index: int, grid: np.ndarray, n: int, a: int) -> np.ndarray:
    idx = np.unravel_index(flat_index, (len(grid),) * (n * a))
    return grid[list(idx)].reshape(n, a)


def _eval_chunk(chunk_axis0, grid, rates, membership, dtype):
    """Raw totals and per-slice airtimes over a grid chunk.

    chunk_axis0 holds variable 0's values; the remaining variables broadcast
    along their own axes. Returns (total, [airtime_k]) with leading axis
    len(chunk_axis0)."""
    n, a = rates.shape
    nvars = n * a
    g = len(grid)
    shape = (len(chunk_axis0),) + (g,) * (nvars - 1)
    taus = []
    for v in range(nvars):
        vals = (chunk_axis0 if v == 0 else grid).astype(dtype)
        ax_shape = [1] * nvars
        ax_shape[v] = len(vals)
        taus.append(vals.reshape(ax_shape))
    total = np.zeros(shape, dtype=dtype)
    air = [np.zeros(shape, dtype=dtype) for _ in range(membership.shape[0])]
    for ap in range(a):
        cols = [taus[i * a + ap] for i in range(n)]
        us = [1.0 - c for c in cols]
        for i in range(n):
            e1 = None
            for j in range(n):
                if j == i:
                    continue
                e1 = us[j] if e1 is None else e1 * us[j]
            succ = cols[i] * e1 if e1 is not None else cols[i] * np.ones(1, dtype=dtype)
            total = total + dtype(rates[i, ap]) * succ
            for k in range(membership.shape[0]):
                if membership[k, i]:
                    air[k] = air[k] + succ / a
    return total, air


def _oracle_scan_slabs(grid, rates, membership, betas, eps, objective=True):
    """Slab-by-slab full enumeration; reference path for every instance size."""
    n, a = rates.shape
    nvars = n * a
    g = len(grid)
    reserved = betas > 0
    dtype = np.float32 if nvars >= 3 else np.float64

    def evaluate(chunk_axis0):
        total, air = _eval_chunk(chunk_axis0, grid, rates, membership, dtype)
        if objective:
            feas = None
            for k in range(len(betas)):
                ok = air[k] >= (betas[k] - eps)
                feas = ok if feas is None else (feas & ok)
            score = np.where(feas, total, -np.inf) if feas is not None else total
        else:
            score = None
            for k in range(len(betas)):
                if reserved[k]:
                    ratio = (air[k] + eps) / betas[k]
                    score = ratio if score is None else np.minimum(score, ratio)
            if score is None:
                score = total * 0 + np.inf
        flat = score.reshape(len(chunk_axis0), -1)
        idx = np.argmax(flat)
        return float(flat.flat[idx]), int(idx)

    rest = g ** (nvars - 1)
    chunk = max(1, int(4e6 // max(rest, 1)))
    ranges = [(s, min(s + chunk, g)) for s in range(0, g, chunk)]

    def run_range(rr):
        best_v, best_i = -np.inf, -1
        for s, e in rr:
            v, i = evaluate(grid[s:e])
            flat_i = s * rest + i
            if v > best_v:
                best_v, best_i = v, flat_i
        return best_v, best_i

    if len(ranges) >= 8:
        halves = [ranges[: len(ranges) // 2], ranges[len(ranges) // 2:]]
        with ThreadPoolExecutor(max_workers=2) as ex:
            results = list(ex.map(run_range, halves))
        # earlier half wins ties, preserving the lexicographic tie-break
        best_v, best_i = results[0]
        if results[1][0] > best_v:
            best_v, best_i = results[1]
    else:
        best_v, best_i = run_range(ranges)
    if objective and not np.isfinite(best_v):
        return -np.inf, -1
    return best_v, best_i


def _oracle_scan_affine(grid, rates, membership, betas, eps):
    """Exact grid-search reduction over variable 0.

    The throughput and every airtime are multilinear in the tau variables, so
    with the other variables pinned they are affine in variable 0; over the
    grid points inside the feasible interval an affine function is maximized
    at one of the two endpoint grid points. Evaluating the generic chunk at
    tau_0 = 0 and tau_0 = 1 recovers the affine coefficients, and the global
    argmax (with the lexicographic-smallest tie-break) follows exactly."""
    g = len(grid)
    step = grid[1] - grid[0]
    t0, a0 = _eval_chunk(np.array([0.0]), grid, rates, membership, np.float64)
    t1, a1 = _eval_chunk(np.array([1.0]), grid, rates, membership, np.float64)
    f_d = t0.reshape(-1)
    f_c = t1.reshape(-1) - f_d
    rest = f_d.size
    lo = np.zeros(rest)
    hi = np.full(rest, 1.0)
    empty = np.zeros(rest, dtype=bool)
    for k in range(len(betas)):
        b = a0[k].reshape(-1) - (betas[k] - eps)       # slack at tau0 = 0
        aa = a1[k].reshape(-1) - (betas[k] - eps) - b  # slope over tau0
        pos = aa > 1e-15
        neg = aa < -1e-15
        flat = ~pos & ~neg
        bound = np.zeros(rest)
        np.divide(-b, aa, out=bound, where=pos | neg)
        lo = np.where(pos, np.maximum(lo, bound), lo)
        hi = np.where(neg, np.minimum(hi, bound), hi)
        empty |= flat & (b < 0)
    lo_idx = np.ceil(lo / step - 1e-9).astype(np.int64)
    hi_idx = np.floor(hi / step + 1e-9).astype(np.int64)
    empty |= (lo_idx > hi_idx) | (hi_idx < 0) | (lo_idx > g - 1)
    lo_idx = lo_idx.clip(0, g - 1)
    hi_idx = hi_idx.clip(0, g - 1)

    flat12 = np.arange(rest)
    candidates = []
    for idx in (lo_idx, hi_idx):
        vals = np.where(empty, -np.inf, f_c * grid[idx] + f_d)
        i = int(np.argmax(vals))
        v = float(vals[i])
        if not np.isfinite(v):
            continue
        keys = np.where(vals == v, idx * rest + flat12, np.iinfo(np.int64).max)
        candidates.append((v, int(keys.min())))
    if not candidates:
        return -np.inf, -1
    best_v = max(v for v, _ in candidates)
    best_key = min(k for v, k in candidates if v == best_v)
    return best_v, best_key


def _oracle_scan(grid, rates, membership, betas, eps, objective=True):
    """Best feasible grid point: affine reduction when exact and applicable,
    full slab enumeration otherwise."""
    nvars = rates.size
    g = len(grid)
    uniform = abs((g - 1) * (grid[1] - grid[0]) - 1.0) < 1e-9 if g > 1 else False
    if objective and nvars == 3 and uniform:
        return _oracle_scan_affine(grid, rates, membership, betas, eps)
    return _oracle_scan_slabs(grid, rates, membership, betas, eps, objective)

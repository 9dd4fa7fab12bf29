"""NOMA decoding-order optimization.

Two routes to the same quantity, the min-latency SIC order for fixed
combiners and demands:

* :func:`brute_force_order` enumerates all K! orders (the exact oracle);
* :func:`sca_decoding` relaxes the precedence indicators to [0, 1], replaces
  each SINR by its quadratic-transform lower bound and iterates convex
  subproblems, pushing the relaxed indicators back to {0, 1} through the
  first-order (Taylor) linearization of ``pi - pi**2``.

The convex subproblem maximizes ``u = 1/T``; every constraint is either box,
or ``B log2(1 + affine(pi)) >= Q_k u``, so a log-barrier Newton method on at
most K(K-1)/2 + 1 variables is enough.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import INFEASIBLE_LATENCY, NetworkScenario, gain_matrix, sinr_from_gains, system_latency
from .errors import ConfigurationError, InfeasibleError

BRUTE_FORCE_MAX_USERS = 8
LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# Orders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecodingOrder:
    """A strict SIC order; ``sequence[0]`` is decoded first."""

    sequence: tuple

    def __post_init__(self):
        seq = tuple(int(x) for x in self.sequence)
        if sorted(seq) != list(range(len(seq))):
            raise ConfigurationError(f"not a permutation: {seq}")
        object.__setattr__(self, "sequence", seq)

    @classmethod
    def from_sequence(cls, seq) -> "DecodingOrder":
        return cls(tuple(seq))

    @classmethod
    def from_matrix(cls, pi) -> "DecodingOrder":
        """Validate a binary precedence matrix and recover its order."""
        pi = np.asarray(pi)
        K = pi.shape[0]
        off = ~np.eye(K, dtype=bool)
        if not np.all(np.isin(pi[off], (0, 1))):
            raise ConfigurationError("precedence entries must be binary")
        if not np.all((pi + pi.T)[off] == 1):
            raise ConfigurationError("precedence must satisfy pi[k,j] + pi[j,k] = 1")
        rows = (pi * off).sum(axis=1).astype(int)
        if sorted(rows) != list(range(K)):
            raise ConfigurationError("precedence relation contains a cycle")
        return cls(tuple(int(k) for k in np.argsort(-rows, kind="stable")))

    @property
    def num_sus(self) -> int:
        return len(self.sequence)

    @property
    def positions(self) -> np.ndarray:
        pos = np.empty(self.num_sus, dtype=int)
        pos[list(self.sequence)] = np.arange(self.num_sus)
        return pos

    @property
    def matrix(self) -> np.ndarray:
        pos = self.positions
        pi = (pos[:, None] < pos[None, :]).astype(float)
        return pi

    @property
    def priorities(self) -> np.ndarray:
        """Integer priorities r_k (decoding position)."""
        return self.positions.astype(float)

    def satisfies_big_m(self, big_m: float) -> bool:
        """Check ``r_k < r_j + M (1 - pi_kj)`` for every ordered pair."""
        r = self.priorities
        pi = self.matrix
        K = self.num_sus
        return all(r[k] < r[j] + big_m * (1 - pi[k, j])
                   for k in range(K) for j in range(K) if k != j)

    def __str__(self) -> str:
        return "->".join(f"SU{k + 1}" for k in self.sequence)


def order_latency(gains: np.ndarray, noise_power: float, bandwidth: float,
                  demands, precedence) -> float:
    s = sinr_from_gains(gains, precedence, noise_power)
    return system_latency(demands, bandwidth * np.log2(1.0 + s))


def brute_force_order(scenario: NetworkScenario, beamformers, demands,
                      max_users: int = BRUTE_FORCE_MAX_USERS):
    """Exhaustive min-latency order; ties go to the lexicographically smallest permutation.

    Returns ``(DecodingOrder, latency)``.
    """
    K = scenario.num_sus
    if K > max_users:
        raise ConfigurationError(
            f"brute force over {K}! orders refused (K > {max_users}); use sca_decoding")
    G = gain_matrix(scenario, beamformers)
    q = np.asarray(demands, dtype=float)
    best, best_t = None, math.inf
    for perm in itertools.permutations(range(K)):
        order = DecodingOrder(perm)
        t = order_latency(G, scenario.noise_power, scenario.bandwidth, q, order.matrix)
        if best is None or t < best_t:
            best, best_t = order, t
    return best, best_t


# ---------------------------------------------------------------------------
# Quadratic transform
# ---------------------------------------------------------------------------


def _interference(gains: np.ndarray, pi_tilde) -> np.ndarray:
    pi = np.array(pi_tilde, dtype=float)
    np.fill_diagonal(pi, 0.0)
    return np.sum(pi * gains, axis=1)


def update_y(gains: np.ndarray, noise_power: float, pi_tilde) -> np.ndarray:
    """Maximizer of the quadratic-transform surrogate: sqrt(S_k) / (I_k + N)."""
    G = np.asarray(gains, dtype=float)
    return np.sqrt(np.diag(G)) / (_interference(G, pi_tilde) + noise_power)


def surrogate_sinr(y, gains: np.ndarray, noise_power: float, pi_tilde) -> np.ndarray:
    """``2 y sqrt(S) - y^2 (I + N)``; a lower bound on the SINR, tight at :func:`update_y`."""
    G = np.asarray(gains, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 * y * np.sqrt(np.diag(G)) - y ** 2 * (_interference(G, pi_tilde) + noise_power)


# ---------------------------------------------------------------------------
# Relaxed problem in pair coordinates
# ---------------------------------------------------------------------------


def _pairs(K: int):
    return [(a, b) for a in range(K) for b in range(a + 1, K)]


def pairs_to_matrix(p, K: int) -> np.ndarray:
    """Expand pair variables p_i = pi[a, b] (a < b) into a full relaxed matrix."""
    pi = np.zeros((K, K))
    for i, (a, b) in enumerate(_pairs(K)):
        pi[a, b] = p[i]
        pi[b, a] = 1.0 - p[i]
    return pi


def matrix_to_pairs(pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    return np.array([pi[a, b] for a, b in _pairs(pi.shape[0])])


def taylor_binary_residual(p, p0) -> np.ndarray:
    """Linearization of ``pi - pi^2`` at ``p0``: ``pi (1 - 2 pi0) + pi0^2`` (an upper bound)."""
    p = np.asarray(p, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    return p * (1.0 - 2.0 * p0) + p0 ** 2


def _affine_surrogate(gains, noise_power, y):
    """Write the surrogate SINR of every SU as ``s0 + A @ p`` in pair coordinates."""
    G = np.asarray(gains, dtype=float)
    K = G.shape[0]
    pairs = _pairs(K)
    M = np.zeros((K, len(pairs)))
    I0 = np.zeros(K)
    for i, (a, b) in enumerate(pairs):
        M[a, i] = G[a, b]
        M[b, i] = -G[b, a]
        I0[b] += G[b, a]
    y = np.asarray(y, dtype=float)
    s0 = 2.0 * y * np.sqrt(np.diag(G)) - y ** 2 * (I0 + noise_power)
    A = -(y ** 2)[:, None] * M
    return s0, A


@dataclass
class RelaxedOrder:
    """An SCA iterate: relaxed precedence plus the auxiliaries that produced it."""

    pi_tilde: np.ndarray
    y: np.ndarray
    latency: float
    expansion_points: np.ndarray


@dataclass
class BarrierResult:
    p: np.ndarray
    v: float
    gap: float
    newton_steps: int
    residual: float


def _barrier_solve(s0, A, alpha, active, c_pen, rho, p_start, *,
                   gap_tol=1e-9, mu=50.0, max_newton=50, newton_tol=1e-10, kkt_tol=1e-7):
    """Minimize ``-v + rho * c_pen @ p`` s.t. ``alpha_k log(1+s_k(p)) > v``, ``0 < p < 1``.

    ``alpha_k = B T_ref / (Q_k ln 2)`` for active SUs.  Returns a ``BarrierResult``.
    """
    P = A.shape[1]
    A = A[active]
    s0 = s0[active]
    alpha = alpha[active]
    nk = len(alpha)
    m = nk + 2 * P
    eye = np.eye(P)
    neg_ones = -np.ones((nk, 1))

    delta = 1e-6
    p = np.clip(np.asarray(p_start, dtype=float), delta, 1.0 - delta)
    # upper slack kept separately: 1 - p loses all precision once p is within 1e-10 of 1
    q = 1.0 - p
    one_s = 1.0 + s0 + A @ p
    if np.any(one_s <= 0):
        raise InfeasibleError("quadratic-transform surrogate is non-positive at the start point")
    r = alpha * np.log(one_s)
    rmin = float(r.min())
    v = rmin - 0.05 * abs(rmin) - 1e-9

    def phi(p, q, v, t):
        one_s = 1.0 + s0 + A @ p
        if one_s.min() <= 0 or (P and min(p.min(), q.min()) <= 0):
            return math.inf
        g = alpha * np.log(one_s) - v
        if g.min() <= 0:
            return math.inf
        return (t * (rho * (c_pen @ p) - v) - np.log(g).sum()
                - np.log(p).sum() - np.log(q).sum())

    t = 1.0
    steps = 0
    lam2 = 0.0
    while True:
        for _ in range(max_newton):
            one_s = 1.0 + s0 + A @ p
            g = alpha * np.log(one_s) - v
            inv_g = 1.0 / g
            dr = (alpha / one_s)[:, None] * A               # d/dp of alpha log(1+s)
            grad = np.empty(P + 1)
            grad[:P] = t * rho * c_pen - dr.T @ inv_g - 1.0 / p + 1.0 / q
            grad[P] = inv_g.sum() - t
            J = np.hstack([dr, neg_ones]) * inv_g[:, None]
            H = J.T @ J
            curv = alpha * inv_g / one_s ** 2
            H[:P, :P] += (A * curv[:, None]).T @ A + eye * (1.0 / p ** 2 + 1.0 / q ** 2)
            try:
                dx = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, grad, rcond=None)[0]
            lam2 = float(-grad @ dx)
            steps += 1
            if lam2 / 2.0 <= newton_tol and (m / t >= gap_tol
                                             or np.max(np.abs(grad)) / t <= kkt_tol):
                break
            dp = dx[:P]
            # largest step keeping the box strictly feasible
            with np.errstate(divide="ignore"):
                lim = np.where(dp < 0, -p / dp, np.where(dp > 0, q / dp, np.inf))
            step = min(1.0, 0.99 * float(lim.min())) if P else 1.0
            if lam2 < 1e-2 and step == 1.0 and math.isfinite(phi(p + dp, q - dp, v + dx[P], t)):
                # quadratic-convergence region: phi differences drown in rounding at large t
                p, q, v = p + dp, q - dp, v + dx[P]
                continue
            f0 = phi(p, q, v, t)
            while step > 1e-10:
                pn, qn, vn = p + step * dp, q - step * dp, v + step * dx[P]
                if phi(pn, qn, vn, t) <= f0 - 0.25 * step * lam2:
                    break
                step *= 0.5
            if step <= 1e-10:
                break
            p, q, v = pn, qn, vn
        if m / t < gap_tol:
            break
        t = min(t * mu, m / gap_tol * 1.0000001)
    # stationarity of the Lagrangian with multipliers 1/(t g_i), scaled back by 1/t
    one_s = 1.0 + s0 + A @ p
    inv_g = 1.0 / (alpha * np.log(one_s) - v)
    dr = (alpha / one_s)[:, None] * A
    grad = np.concatenate([t * rho * c_pen - dr.T @ inv_g - 1.0 / p + 1.0 / q,
                           [inv_g.sum() - t]])
    return BarrierResult(p=p, v=float(v), gap=m / t, newton_steps=steps,
                         residual=float(np.max(np.abs(grad))) / t)


def solve_convex_subproblem(scenario: NetworkScenario, beamformers, demands, y, expansion_points,
                            *, penalty: float = 0.0, start=None, latency_ref: float | None = None,
                            gap_tol: float = 1e-9):
    """One convexified decoding-order problem at fixed ``y`` and Taylor points.

    Returns ``(pi_tilde, T, info)``.  ``T = 0`` when no SU has demand.
    Raises :class:`InfeasibleError` when no strictly feasible start exists.
    """
    G = gain_matrix(scenario, beamformers) / scenario.noise_power
    y = np.asarray(y, dtype=float) * math.sqrt(scenario.noise_power)
    return _solve_sub(G, 1.0, scenario.bandwidth, np.asarray(demands, dtype=float), y,
                      np.asarray(expansion_points, dtype=float), penalty, start, latency_ref, gap_tol)


def _solve_sub(G, noise, bandwidth, q, y, p0, penalty, start, latency_ref, gap_tol):
    K = G.shape[0]
    active = q > 0
    if not np.any(active):
        return pairs_to_matrix(p0, K), 0.0, {"gap": 0.0, "newton_steps": 0, "residual": 0.0}
    s0, A = _affine_surrogate(G, noise, y)
    p_init = p0 if start is None else start
    if latency_ref is None:
        latency_ref = order_latency(G, noise, bandwidth, q, pairs_to_matrix(p_init, K))
        if not math.isfinite(latency_ref) or latency_ref <= 0:
            latency_ref = 1.0
    alpha = np.zeros(K)
    alpha[active] = bandwidth * latency_ref / (q[active] * LN2)
    c_pen = 2.0 * (1.0 - 2.0 * p0)
    res = _barrier_solve(s0, A, alpha, active, c_pen, penalty, p_init, gap_tol=gap_tol)
    T = latency_ref / res.v if res.v > 0 else INFEASIBLE_LATENCY
    return pairs_to_matrix(res.p, K), T, {"gap": res.gap, "newton_steps": res.newton_steps,
                                          "residual": res.residual, "p": res.p, "v": res.v}


# ---------------------------------------------------------------------------
# SCA driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaOptions:
    tol: float = 1e-4
    max_iters: int = 50
    penalty: float = 2.0
    binary_tol: float = 1e-3
    polish: bool = False
    gap_tol: float = 1e-9
    verbose: bool = False


@dataclass
class ScaResult:
    order: DecodingOrder
    latency: float
    relaxed: RelaxedOrder
    relaxed_latency: float
    iterations: int
    trace: list = field(default_factory=list)
    rounded_order: DecodingOrder | None = None
    infeasible: bool = False
    fallback: bool = False

    def trace_text(self) -> str:
        """Per-iteration trace as JSON lines."""
        return "\n".join(json.dumps(row) for row in self.trace)


def round_relaxed(pi_tilde) -> DecodingOrder:
    """Threshold at 0.5, repair pairing from the upper triangle, order by row sums."""
    pi_tilde = np.asarray(pi_tilde, dtype=float)
    K = pi_tilde.shape[0]
    pi = np.zeros((K, K))
    for a, b in _pairs(K):
        pi[a, b] = 1.0 if pi_tilde[a, b] >= 0.5 else 0.0
        pi[b, a] = 1.0 - pi[a, b]
    rows = pi.sum(axis=1)
    relaxed_rows = np.where(np.eye(K, dtype=bool), 0.0, pi_tilde).sum(axis=1)
    # more SUs decoded after k -> earlier; cycles broken by relaxed row sums then index
    seq = sorted(range(K), key=lambda k: (-rows[k], -relaxed_rows[k], k))
    return DecodingOrder(tuple(seq))


def _polish(order: DecodingOrder, latency_of):
    """Adjacent-swap local search on the exact latency."""
    best, best_t = order, latency_of(order)
    improved = True
    while improved:
        improved = False
        for i in range(best.num_sus - 1):
            seq = list(best.sequence)
            seq[i], seq[i + 1] = seq[i + 1], seq[i]
            cand = DecodingOrder(tuple(seq))
            t = latency_of(cand)
            if t < best_t * (1.0 - 1e-12):
                best, best_t, improved = cand, t, True
    return best, best_t


def sca_decoding(scenario: NetworkScenario, beamformers, demands, opts: ScaOptions | None = None) -> ScaResult:
    """Latency-minimizing decoding order by successive convex approximation.

    Stage 1 solves the relaxed problem (no binarization push) to convergence,
    so its latency is non-increasing across iterations.  Stage 2 adds the
    linearized ``pi - pi^2`` term with weight ``opts.penalty`` and iterates
    until the indicators are binary; its merit ``-u/u_ref + penalty * lin``
    is non-increasing.  The result is rounded, repaired and re-scored
    exactly; ``opts.polish`` then runs an adjacent-swap local search.
    """
    opts = opts or ScaOptions()
    K = scenario.num_sus
    N0 = scenario.noise_power
    G = gain_matrix(scenario, beamformers) / N0
    B = scenario.bandwidth
    q = np.asarray(demands, dtype=float)
    if q.shape != (K,) or np.any(q < 0):
        raise ConfigurationError("demands must be a nonnegative vector of length K")

    def exact(order: DecodingOrder) -> float:
        return order_latency(G, 1.0, B, q, order.matrix)

    P = K * (K - 1) // 2
    p = np.full(P, 0.5)
    identity = DecodingOrder(tuple(range(K)))
    if K == 1 or not np.any(q > 0):
        relaxed = RelaxedOrder(pairs_to_matrix(p, K), update_y(G, 1.0, pairs_to_matrix(p, K)) / math.sqrt(N0),
                               exact(identity), p.copy())
        return ScaResult(identity, exact(identity), relaxed, exact(identity), iterations=1 if K == 1 else 0,
                         rounded_order=identity)

    t_ref = order_latency(G, 1.0, B, q, pairs_to_matrix(p, K))
    trace = []
    T_prev = math.inf
    merit_prev = math.inf
    stage = 1
    it = 0
    relaxed_T = math.inf
    infeasible = False
    while it < opts.max_iters:
        it += 1
        pi_t = pairs_to_matrix(p, K)
        y = update_y(G, 1.0, pi_t)
        rho = 0.0 if stage == 1 else opts.penalty
        try:
            _, T, info = _solve_sub(G, 1.0, B, q, y, p, rho, None, t_ref, opts.gap_tol)
        except InfeasibleError:
            infeasible = True
            break
        p_new = info["p"]
        merit = -info["v"] + rho * float(np.sum(2.0 * (p_new - p_new ** 2)))
        row = {"iter": it, "stage": stage, "T": T, "merit": merit,
               "T_exact_relaxed": order_latency(G, 1.0, B, q, pairs_to_matrix(p_new, K)),
               "gap": info["gap"], "kkt_residual": info["residual"], "newton_steps": info["newton_steps"]}
        trace.append(row)
        p = p_new
        if stage == 1:
            # surrogate already tight at the new point -> next y update changes nothing
            tight = abs(row["T_exact_relaxed"] - T) <= opts.tol * max(T, 1e-300)
            converged = tight or (math.isfinite(T_prev) and abs(T_prev - T) <= opts.tol * max(T, 1e-300))
            T_prev = T
            if converged:
                relaxed_T = T
                stage = 2
                merit_prev = math.inf
        else:
            binary = float(np.max(np.minimum(p, 1.0 - p))) < opts.binary_tol
            stalled = math.isfinite(merit_prev) and abs(merit_prev - merit) <= opts.tol * max(abs(merit), 1e-12)
            merit_prev = merit
            if binary or stalled:
                break
    if not math.isfinite(relaxed_T):
        relaxed_T = T_prev

    pi_t = pairs_to_matrix(p, K)
    relaxed = RelaxedOrder(pi_t, update_y(G, 1.0, pi_t) / math.sqrt(N0), relaxed_T, p.copy())
    if infeasible:
        if K <= BRUTE_FORCE_MAX_USERS:
            order, T = brute_force_order(scenario, beamformers, q)
        else:
            order, T = identity, exact(identity)
        return ScaResult(order, T, relaxed, relaxed_T, it, trace,
                         rounded_order=None, infeasible=True, fallback=K <= BRUTE_FORCE_MAX_USERS)

    rounded = round_relaxed(pi_t)
    order, T = rounded, exact(rounded)
    if opts.polish:
        order, T = _polish(rounded, exact)
    return ScaResult(order, T, relaxed, relaxed_T, it, trace, rounded_order=rounded)

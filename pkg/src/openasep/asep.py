"""Open ASEP: parameter maps, generator, exact stationary law and simulation.

Configurations of N sites are bitmasks; site i (1-based) is bit i-1.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import NumericalError, ParameterError
from .qseries import QParam

__all__ = [
    "BoundaryRates",
    "ASEPModel",
    "ScalingInput",
    "StationaryDist",
    "LaplaceSpec",
    "MCResult",
    "kappa_pm",
    "scaling_to_rates",
    "abcd_to_rates",
    "rates_to_abcd",
    "boundary_densities",
    "generator_apply",
    "rate_matrix",
    "stationary_exact",
    "height_increments",
    "laplace_exact",
    "pgf_exact",
    "mc_simulate",
]

MAX_EXACT_SITES = 20
DENSE_LIMIT = 10


@dataclass(frozen=True)
class BoundaryRates:
    """Injection/ejection rates: alpha in and gamma out on the left, beta out and delta in on the right."""

    alpha: float
    beta: float
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("alpha and beta must be positive")
        if self.gamma < 0 or self.delta < 0:
            raise ParameterError("gamma and delta must be nonnegative")


@dataclass(frozen=True)
class ASEPModel:
    n_sites: int
    q: float
    rates: BoundaryRates

    def __post_init__(self):
        if self.n_sites < 1:
            raise ParameterError("N must be at least 1")
        if not 0.0 <= self.q < 1.0:
            raise ParameterError("q must lie in [0, 1)")

    @property
    def n_states(self) -> int:
        return 1 << self.n_sites


@dataclass(frozen=True)
class ScalingInput:
    """Boundary exponents (u, v, w, r) and lattice size N; q = exp(-2/sqrt(N))."""

    u: float
    v: float
    w: float
    r: float
    n_sites: int

    def __post_init__(self):
        if not self.u + self.v > 0:
            raise ParameterError("u + v must be positive")
        if not (self.w > 0 and self.r > 0):
            raise ParameterError("w and r must be positive")
        if self.n_sites < 1:
            raise ParameterError("N must be at least 1")

    @property
    def qparam(self) -> QParam:
        return QParam.from_n(self.n_sites)

    def model(self) -> ASEPModel:
        q, rates = scaling_to_rates(self)
        return ASEPModel(self.n_sites, q, rates)


def kappa_pm(q: float, x: float, y: float):
    """Roots (kappa+, kappa-) of x k^2 - (1 - q - x + y) k - y = 0, kappa+ >= kappa-."""
    if x == 0:
        raise ParameterError("x must be nonzero")
    m = 1.0 - q - x + y
    disc = m * m + 4.0 * x * y
    if disc < 0:
        raise ParameterError("negative discriminant")
    root = math.sqrt(disc)
    # The smaller-magnitude root is formed as a product to avoid cancellation.
    if m >= 0:
        kp = (m + root) / (2.0 * x)
        km = -y / (x * kp) if kp != 0 else (m - root) / (2.0 * x)
    else:
        km = (m - root) / (2.0 * x)
        kp = -y / (x * km) if km != 0 else (m + root) / (2.0 * x)
    return kp, km


def scaling_to_rates(si: ScalingInput):
    """Boundary rates realising A = q^v, B = -q^w, C = q^u, D = -q^r at q = exp(-2/sqrt(N))."""
    qp = si.qparam
    k, q = qp.kappa, qp.q
    one_m_q = -math.expm1(-k)
    alpha = one_m_q / (-math.expm1(-k * si.r) * (1.0 + math.exp(-k * si.u)))
    beta = one_m_q / (-math.expm1(-k * si.w) * (1.0 + math.exp(-k * si.v)))
    gamma = math.exp(-k * (si.u + si.r)) * alpha
    delta = math.exp(-k * (si.v + si.w)) * beta
    return q, BoundaryRates(alpha, beta, gamma, delta)


def rates_to_abcd(model: ASEPModel):
    r = model.rates
    A, B = kappa_pm(model.q, r.beta, r.delta)
    C, D = kappa_pm(model.q, r.alpha, r.gamma)
    return A, B, C, D


def abcd_to_rates(A: float, B: float, C: float, D: float, q: float) -> BoundaryRates:
    """Inverse of the kappa map: alpha = (1-q)/((1+C)(1+D)), gamma = -CD alpha, and likewise on the right."""
    alpha = (1.0 - q) / ((1.0 + C) * (1.0 + D))
    beta = (1.0 - q) / ((1.0 + A) * (1.0 + B))
    return BoundaryRates(alpha, beta, -C * D * alpha, -A * B * beta)


def boundary_densities(model: ASEPModel):
    """Effective densities (rho_left, rho_right) = (1/(1+C), A/(1+A))."""
    A, _, C, _ = rates_to_abcd(model)
    return 1.0 / (1.0 + C), A / (1.0 + A)


def _transitions(model: ASEPModel):
    """Yield (target_states, rates) arrays over all source states."""
    n = model.n_sites
    states = np.arange(model.n_states, dtype=np.int64)
    r = model.rates
    first = states & 1
    yield states ^ 1, np.where(first == 1, r.gamma, r.alpha)
    for i in range(n - 1):
        a = (states >> i) & 1
        b = (states >> (i + 1)) & 1
        rate = np.where((a == 1) & (b == 0), 1.0, np.where((a == 0) & (b == 1), model.q, 0.0))
        yield states ^ (3 << i), rate
    last = (states >> (n - 1)) & 1
    yield states ^ (1 << (n - 1)), np.where(last == 1, r.beta, r.delta)


def generator_apply(model: ASEPModel, f) -> np.ndarray:
    """(L f)(tau) = sum over moves of rate * (f(tau') - f(tau))."""
    f = np.asarray(f, dtype=float)
    if f.shape != (model.n_states,):
        raise ParameterError("f must have length 2^N")
    out = np.zeros_like(f)
    for target, rate in _transitions(model):
        out += rate * (f[target] - f)
    return out


def rate_matrix(model: ASEPModel) -> scipy.sparse.csr_matrix:
    """Sparse generator Q with Q[tau, tau'] the jump rate and zero row sums."""
    n = model.n_states
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    states = np.arange(n)
    for target, rate in _transitions(model):
        keep = rate > 0
        rows.append(states[keep])
        cols.append(target[keep])
        vals.append(rate[keep])
        diag -= rate
    rows.append(states)
    cols.append(states)
    vals.append(diag)
    return scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


@dataclass(frozen=True)
class StationaryDist:
    probabilities: np.ndarray
    model: ASEPModel
    residual: float

    def occupation(self) -> np.ndarray:
        """Mean occupation of each site."""
        states = np.arange(self.model.n_states)
        return np.array([self.probabilities @ ((states >> i) & 1) for i in range(self.model.n_sites)])


def stationary_exact(model: ASEPModel, residual_tol: float = 1e-10) -> StationaryDist:
    """Solve pi Q = 0, sum(pi) = 1, replacing one balance equation by normalisation."""
    if model.n_sites > MAX_EXACT_SITES:
        raise ParameterError(f"exact mode supports N <= {MAX_EXACT_SITES}")
    Q = rate_matrix(model)
    n = model.n_states
    if model.n_sites <= DENSE_LIMIT:
        M = Q.T.toarray()
        M[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            pi = scipy.linalg.solve(M, rhs)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"singular balance system: {exc}") from exc
    else:
        # Pin pi[-1] = 1 and drop its balance equation; a dense normalisation
        # row would destroy the sparsity of the factorisation.
        M = Q.T.tocsc()
        try:
            lu = scipy.sparse.linalg.splu(M[:-1, :-1].tocsc())
        except RuntimeError as exc:
            raise NumericalError(f"singular balance system: {exc}") from exc
        head = lu.solve(-M[:-1, -1].toarray().ravel())
        pi = np.append(head, 1.0)
    pi = np.where(np.abs(pi) < 1e-300, 0.0, pi)
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    resid = float(np.max(np.abs(Q.T @ pi)))
    if resid > residual_tol:
        raise NumericalError(f"stationary residual {resid:.2e} exceeds {residual_tol:.0e}")
    return StationaryDist(pi, model, resid)


def height_increments(state, n_sites: int, x: float):
    """h(x) - h(0) = sum_{i <= floor(N x)} (2 tau_i - 1); vectorised over ``state``."""
    if not 0.0 <= x <= 1.0:
        raise ParameterError("x must lie in [0, 1]")
    k = math.floor(n_sites * x)
    mask = (1 << k) - 1
    ones = np.bitwise_count(np.asarray(state, dtype=np.uint64) & np.uint64(mask)).astype(np.int64)
    out = 2 * ones - k
    return int(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LaplaceSpec:
    """Points 0 < x_1 < ... < x_d <= 1 and weights c_1..c_d > 0.

    ``s_k = c_k + ... + c_d`` with ``s_{d+1} = 0``. Zero weights are
    accepted so that the trivial transform can be evaluated.
    """

    x_points: tuple
    c_weights: tuple
    s: tuple = field(init=False)

    def __post_init__(self):
        x = tuple(float(v) for v in self.x_points)
        c = tuple(float(v) for v in self.c_weights)
        if len(x) != len(c) or not x:
            raise ParameterError("x_points and c_weights must have the same positive length")
        full = (0.0,) + x
        if any(b <= a for a, b in zip(full, full[1:])) or x[-1] > 1.0:
            raise ParameterError("need 0 = x_0 < x_1 < ... < x_d <= 1")
        if any(v < 0 for v in c):
            raise ParameterError("c weights must be nonnegative")
        object.__setattr__(self, "x_points", x)
        object.__setattr__(self, "c_weights", c)
        s = tuple(float(sum(c[k:])) for k in range(len(c))) + (0.0,)
        object.__setattr__(self, "s", s)

    @property
    def d(self) -> int:
        return len(self.c_weights)

    @property
    def x_full(self) -> tuple:
        return (0.0,) + self.x_points + (1.0,)

    def n_points(self, n: int) -> tuple:
        """(n_0, ..., n_{d+1}) with n_k = floor(N x_k)."""
        return tuple(math.floor(n * x) for x in self.x_full)


def laplace_exact(model: ASEPModel, spec: LaplaceSpec, dist: StationaryDist | None = None) -> float:
    """<exp(-sum_k c_k (h(x_k) - h(0)) / sqrt(N))> under the stationary law."""
    dist = dist or stationary_exact(model)
    n = model.n_sites
    states = np.arange(model.n_states, dtype=np.uint64)
    expo = np.zeros(model.n_states)
    for c, x in zip(spec.c_weights, spec.x_points):
        expo -= c * height_increments(states, n, x) / math.sqrt(n)
    return float(dist.probabilities @ np.exp(expo))


def pgf_exact(model: ASEPModel, t_vector, dist: StationaryDist | None = None) -> float:
    """<prod_j t_j^{tau_j}> under the stationary law (0^0 = 1)."""
    t = np.asarray(t_vector, dtype=float)
    if t.shape != (model.n_sites,):
        raise ParameterError("t_vector must have length N")
    if np.any(t < 0):
        raise ParameterError("t_j must be nonnegative")
    dist = dist or stationary_exact(model)
    states = np.arange(model.n_states)
    weight = np.ones(model.n_states)
    for j in range(model.n_sites):
        weight *= np.where((states >> j) & 1, t[j], 1.0)
    return float(dist.probabilities @ weight)


# ------------------------------------------------------------- simulation


@dataclass(frozen=True)
class MCResult:
    """Merged statistics of independent replicas.

    Standard errors come from batch means over all replicas' batches.
    """

    occupation: np.ndarray
    occupation_se: np.ndarray
    moment_pairs: tuple
    moments: np.ndarray
    moments_se: np.ndarray
    laplace: float | None
    laplace_se: float | None
    n_snapshots: int
    n_replicas: int


def mc_simulate(
    model: ASEPModel,
    horizon: float,
    burn_in: float,
    seed: int,
    n_replicas: int = 4,
    snap_dt: float | None = None,
    moment_pairs=(),
    moment_order: int = 4,
    laplace: LaplaceSpec | None = None,
    n_batches: int = 20,
    n_workers: int = 1,
    initial: np.ndarray | None = None,
) -> MCResult:
    """Kinetic Monte Carlo of open ASEP with independent replicas.

    Parameters
    ----------
    model : ASEPModel
    horizon, burn_in : float
        Each replica runs to ``horizon``; statistics use (burn_in, horizon].
    seed : int
        Replica seeds are spawned from ``numpy.random.SeedSequence(seed)``,
        so results are reproducible bit for bit.
    snap_dt : float, optional
        Spacing of configuration snapshots (default: 200 snapshots per replica).
    moment_pairs : sequence of (x, y)
        Pairs for E|h_N(x) - h_N(y)|^n with h_N(x) = N^{-1/2} h(floor(N x)).
    laplace : LaplaceSpec, optional
        Also estimate the multi-point Laplace transform from snapshots.

    Returns
    -------
    MCResult
    """
    from ._kmc import run_replica

    if not horizon > burn_in > 0:
        raise ParameterError("need horizon > burn_in > 0")
    n = model.n_sites
    window = horizon - burn_in
    snap_dt = snap_dt or window / 200.0
    max_snaps = int(window / snap_dt) + 1
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n_replicas)]
    r = model.rates

    def one(k):
        rng = np.random.default_rng(seeds[k])
        state = (
            np.array(initial, dtype=np.int8).copy()
            if initial is not None
            else (rng.random(n) < 0.5).astype(np.int8)
        )
        snaps = np.zeros((max_snaps, n), dtype=np.int8)
        occ = np.zeros(n)
        count = run_replica(
            state, model.q, r.alpha, r.beta, r.gamma, r.delta, seeds[k] % (2**32 - 1),
            burn_in, horizon, snap_dt, snaps, occ,
        )
        return occ / window, snaps[:count]

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one, range(n_replicas)))
    else:
        results = [one(k) for k in range(n_replicas)]

    occ = np.array([o for o, _ in results])
    occupation = occ.mean(axis=0)
    occupation_se = occ.std(axis=0, ddof=1) / math.sqrt(n_replicas) if n_replicas > 1 else np.full(n, np.nan)
    snaps = [s for _, s in results]
    n_snap = sum(len(s) for s in snaps)

    def per_snapshot(fn):
        # Batches never straddle replicas: batch means are formed per replica.
        per = [fn(s.astype(np.int64)) for s in snaps]
        b = max(1, n_batches // n_replicas)
        return np.concatenate([_batch_means(p, b) for p in per]), np.concatenate(per).mean(axis=0)

    heights = lambda s: np.concatenate([np.zeros((len(s), 1), np.int64), np.cumsum(2 * s - 1, axis=1)], axis=1)
    pairs = tuple((float(x), float(y)) for x, y in moment_pairs)
    moments = np.zeros(len(pairs))
    moments_se = np.zeros(len(pairs))
    if pairs:
        def mom(s):
            h = heights(s)
            cols = [
                np.abs(h[:, math.floor(n * x)] - h[:, math.floor(n * y)]) ** moment_order / n ** (moment_order / 2)
                for x, y in pairs
            ]
            return np.stack(cols, axis=1).astype(float)

        bm, moments = per_snapshot(mom)
        moments_se = bm.std(axis=0, ddof=1) / math.sqrt(len(bm))

    lap = lap_se = None
    if laplace is not None:
        def lap_fn(s):
            h = heights(s)
            e = np.zeros(len(s))
            for c, x in zip(laplace.c_weights, laplace.x_points):
                e -= c * h[:, math.floor(n * x)] / math.sqrt(n)
            return np.exp(e)[:, None]

        bm, mean = per_snapshot(lap_fn)
        lap = float(mean[0])
        lap_se = float(bm.std(ddof=1) / math.sqrt(len(bm)))
    return MCResult(occupation, occupation_se, pairs, moments, moments_se, lap, lap_se, n_snap, n_replicas)


def _batch_means(samples: np.ndarray, n_batches: int) -> np.ndarray:
    m = samples.shape[0]
    b = max(1, min(n_batches, m))
    size = m // b
    return samples[: size * b].reshape((b, size) + samples.shape[1:]).mean(axis=1)

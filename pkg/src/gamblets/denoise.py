"""Signal recovery from noisy fine-scale measurements.

Four estimators operate on a noisy fine vector eta = u + zeta:

* level_filter keeps the first l wavelet levels; select_level picks
  the level l that balances accumulated noise against truncation bias
  given the noise size sigma and the prior energy bound M.
* hard_threshold / soft_threshold shrink wavelet coefficients with a
  per-level threshold schedule t_k = h^(-2ks) t0.
* regularize solves the constrained least-squares problem
  min x^T A x subject to |x - y| <= gamma via its Lagrangian form
  x = (alpha A + I)^{-1} y, locating alpha by bisection.

run_trials evaluates all methods on identical signal/noise draws and
aggregates error statistics; energy_growth_check measures how much
energy the level filter picks up from the noise.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadConfig,
    BadLevel,
    DimensionMismatch,
    EmptyGrid,
    LevelZero,
    NoBracketWarning,
)
from .numerics import CholFactor, chi_square_quantile, cholesky, solve_spd, symmetrize
from .transform import (
    GambletSystem,
    MultiresCoefficients,
    analyze,
    energy_norm,
    reconstruct,
)

log = logging.getLogger("gamblets")

METHODS = ("level-filter", "hard-threshold", "soft-threshold", "regularization")
SIGNAL_MODES = ("random-sphere", "smooth-1d", "smooth-2d")

_G3_X = (np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)]) + 1.0) / 2.0
_G3_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass(frozen=True)
class DenoiseConfig:
    """Problem parameters shared by the estimators.

    h is the subsampling ratio of the hierarchy (mesh width halves per
    level), s the operator order divided by two, d the spatial
    dimension, sigma the per-measurement noise level and bound the
    prior bound on the source energy |f|.
    """

    d: int
    q: int
    sigma: float
    bound: float = 1.0
    h: float = 0.5
    s: float = 1.0
    confidence: float = 0.95
    t0: float | None = None
    signal: str = "random-sphere"
    method: str | None = None

    def __post_init__(self):
        if self.q < 1:
            raise BadConfig(f"q must be >= 1, got {self.q}")
        if self.sigma < 0:
            raise BadConfig(f"sigma must be >= 0, got {self.sigma}")
        if self.bound <= 0:
            raise BadConfig(f"bound must be > 0, got {self.bound}")
        if not 0.0 < self.h < 1.0:
            raise BadConfig(f"h must lie in (0, 1), got {self.h}")
        if self.s <= 0:
            raise BadConfig(f"s must be > 0, got {self.s}")
        if self.d <= 0:
            raise BadConfig(f"d must be > 0, got {self.d}")
        if not 0.0 < self.confidence < 1.0:
            raise BadConfig(f"confidence must lie in (0, 1), got {self.confidence}")
        if self.t0 is not None and self.t0 < 0:
            raise BadConfig(f"t0 must be >= 0, got {self.t0}")
        if self.signal not in SIGNAL_MODES:
            raise BadConfig(f"unknown signal mode {self.signal!r}; options: {SIGNAL_MODES}")
        if self.method is not None and self.method not in METHODS:
            raise BadConfig(f"unknown method {self.method!r}; options: {METHODS}")


@dataclass
class DenoiseResult:
    recovered: np.ndarray
    level: int | None = None
    level_energies: np.ndarray | None = None
    energy: float = 0.0
    alpha: float | None = None
    gamma: float | None = None


@dataclass(frozen=True)
class MethodStats:
    energy_avg: float
    energy_std: float
    l2_avg: float
    l2_std: float


@dataclass
class TrialStats:
    methods: list[str]
    stats: dict[str, MethodStats]
    noise_energy_avg: float
    noise_energy_std: float
    n_trials: int
    seed: int
    level: int
    level_histogram: dict[int, int]
    tuned_t0: dict[str, float] = field(default_factory=dict)
    first_realization: dict | None = None


# ---------------------------------------------------------------------------
# Level selection.

def level_betas(cfg: DenoiseConfig) -> np.ndarray:
    """Risk proxies beta_l for l = 0..q.

    beta_0 = h^(2s) M^2, beta_q = sigma^2 h^(-(2s+d)q), and in between
    beta_l = sigma^2 h^(-(2s+d)l) + h^(2s(l+1)) M^2: accumulated noise
    plus squared truncation bias.
    """
    h, s, d, q = cfg.h, cfg.s, cfg.d, cfg.q
    m2 = cfg.bound**2
    s2 = cfg.sigma**2
    betas = np.empty(q + 1)
    betas[0] = h ** (2 * s) * m2
    for l in range(1, q):
        betas[l] = s2 * h ** (-(2 * s + d) * l) + h ** (2 * s * (l + 1)) * m2
    betas[q] = s2 * h ** (-(2 * s + d) * q)
    return betas


def select_level(cfg: DenoiseConfig) -> int:
    """Level minimizing beta_l; ties resolve toward the smaller level."""
    return int(np.argmin(level_betas(cfg)))


# ---------------------------------------------------------------------------
# Estimators.

def _result_from_coeffs(sys: GambletSystem, coeffs: list[np.ndarray], level=None) -> DenoiseResult:
    energies = np.array([float(c @ sys.b_of(k + 1) @ c) for k, c in enumerate(coeffs)])
    v = reconstruct(sys, MultiresCoefficients(coeffs))
    return DenoiseResult(
        recovered=v, level=level, level_energies=energies,
        energy=float(np.sqrt(max(energies.sum(), 0.0))),
    )


def level_filter(sys: GambletSystem, y: np.ndarray, l: int) -> DenoiseResult:
    """Keep wavelet levels 1..l of y and drop the rest; l = 0 gives zero."""
    if not (0 <= l <= sys.q):
        raise BadLevel(f"level must lie in 0..{sys.q}, got {l}")
    c = analyze(sys, y)
    kept = [ck.copy() if k < l else np.zeros_like(ck) for k, ck in enumerate(c.levels)]
    return _result_from_coeffs(sys, kept, level=l)


def threshold_schedule(cfg: DenoiseConfig, t0: float) -> np.ndarray:
    """Per-level thresholds t_k = h^(-2ks) t0 for k = 1..q."""
    return t0 * cfg.h ** (-2 * cfg.s * np.arange(1, cfg.q + 1))


def _shrink(sys: GambletSystem, y, t0, cfg, rule) -> DenoiseResult:
    if t0 < 0:
        raise BadConfig(f"t0 must be >= 0, got {t0}")
    c = analyze(sys, y)
    ts = threshold_schedule(cfg, t0)
    return _result_from_coeffs(sys, [rule(ck, ts[k]) for k, ck in enumerate(c.levels)])


def _hard(x: np.ndarray, t: float) -> np.ndarray:
    return np.where(np.abs(x) > t, x, 0.0)


def _soft(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def hard_threshold(sys: GambletSystem, y: np.ndarray, t0: float, cfg: DenoiseConfig) -> DenoiseResult:
    """Zero every wavelet coefficient with magnitude at most its level threshold."""
    return _shrink(sys, y, t0, cfg, _hard)


def soft_threshold(sys: GambletSystem, y: np.ndarray, t0: float, cfg: DenoiseConfig) -> DenoiseResult:
    """Shrink every wavelet coefficient toward zero by its level threshold."""
    return _shrink(sys, y, t0, cfg, _soft)


def default_threshold_grid(cfg: DenoiseConfig, size: int = 16) -> np.ndarray:
    """Candidate t0 values bracketing the noise scale of the coefficients.

    Spans [1e-2, 1e2] times sigma h^(2s) logarithmically; collapses to
    {0} when sigma = 0 (no noise means no shrinkage).
    """
    if cfg.sigma == 0.0:
        return np.array([0.0])
    return np.geomspace(1e-2, 1e2, size) * cfg.sigma * cfg.h ** (2 * cfg.s)


def tune_threshold(
    sys: GambletSystem,
    trials: list[tuple[np.ndarray, np.ndarray]],
    t0_grid: np.ndarray,
    cfg: DenoiseConfig,
    kind: str = "hard",
) -> float:
    """t0 from the grid minimizing the mean energy error over (u, eta) pairs.

    Oracle tuning for experiments: the error of a thresholded recovery
    is evaluated against the known clean signal u via the per-level
    B-forms, which equals the energy norm of the mismatch.
    """
    t0_grid = np.sort(np.asarray(t0_grid, dtype=float))
    if t0_grid.size == 0:
        raise EmptyGrid("threshold grid is empty")
    if not trials:
        raise EmptyGrid("no tuning trials supplied")
    rule = {"hard": _hard, "soft": _soft}.get(kind)
    if rule is None:
        raise BadConfig(f"kind must be 'hard' or 'soft', got {kind!r}")
    pairs = [(analyze(sys, u).levels, analyze(sys, eta).levels) for u, eta in trials]
    mean_err = np.zeros(t0_grid.size)
    for j, t0 in enumerate(t0_grid):
        ts = threshold_schedule(cfg, t0)
        total = 0.0
        for cu, ceta in pairs:
            sq = 0.0
            for k in range(sys.q):
                diff = rule(ceta[k], ts[k]) - cu[k]
                sq += float(diff @ sys.b_of(k + 1) @ diff)
            total += np.sqrt(max(sq, 0.0))
        mean_err[j] = total / len(pairs)
    return float(t0_grid[int(np.argmin(mean_err))])


def regularize(
    op,
    y: np.ndarray,
    sigma: float,
    confidence: float = 0.95,
    gamma: float | None = None,
    spectrum: tuple[np.ndarray, np.ndarray] | None = None,
) -> DenoiseResult:
    """Energy-minimizing recovery inside the noise ball |x - y| <= gamma.

    gamma defaults to the sqrt of sigma^2 times the `confidence`
    quantile of a chi-square with N degrees of freedom, so the true
    signal lies in the ball with that probability. If |y| <= gamma the
    zero vector is feasible and optimal; otherwise the solution is
    x = (alpha A + I)^{-1} y with alpha chosen so the constraint is
    active: g(alpha) = |y - x| = gamma. g increases continuously from
    0 toward |y|, so alpha is bracketed by doubling and then bisected
    to |g(alpha) - gamma| <= 1e-10 gamma.
    """
    A = np.asarray(op.A if hasattr(op, "A") else op, dtype=float)
    y = np.asarray(y, dtype=float)
    n = A.shape[0]
    if y.shape != (n,):
        raise DimensionMismatch(f"signal shape {y.shape}, matrix order {n}")
    if gamma is None:
        if sigma < 0:
            raise BadConfig(f"sigma must be >= 0, got {sigma}")
        gamma = float(sigma * np.sqrt(chi_square_quantile(n, confidence)))
    if gamma < 0:
        raise BadConfig(f"gamma must be >= 0, got {gamma}")

    norm_y = float(np.linalg.norm(y))
    if norm_y <= gamma:
        return DenoiseResult(recovered=np.zeros(n), energy=0.0, alpha=None, gamma=gamma)
    if spectrum is None:
        lam, vecs = np.linalg.eigh(symmetrize(A))
    else:
        lam, vecs = spectrum
    yhat = vecs.T @ y

    def g(alpha: float) -> float:
        return float(np.linalg.norm(alpha * lam / (1.0 + alpha * lam) * yhat))

    if gamma == 0.0:
        return DenoiseResult(
            recovered=y.copy(), energy=energy_norm(A, y), alpha=0.0, gamma=0.0
        )

    lo, hi = 0.0, 1.0
    while g(hi) < gamma:
        lo = hi
        hi *= 2.0
        if hi > 1e30:
            warnings.warn(
                f"no alpha below 1e30 reaches the constraint (g -> {g(lo):.6g} < gamma = {gamma:.6g}); "
                "returning the limiting recovery",
                NoBracketWarning,
            )
            x = vecs @ (yhat / (1.0 + lo * lam))
            return DenoiseResult(
                recovered=x, energy=energy_norm(A, x), alpha=lo, gamma=gamma
            )
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        val = g(mid)
        if abs(val - gamma) <= 1e-10 * gamma:
            lo = hi = mid
            break
        if val < gamma:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    x = vecs @ (yhat / (1.0 + alpha * lam))
    energy = float(np.sqrt(max(np.sum(lam * (yhat / (1.0 + alpha * lam)) ** 2), 0.0)))
    return DenoiseResult(recovered=x, energy=energy, alpha=alpha, gamma=gamma)


# ---------------------------------------------------------------------------
# Signals, noise, and error metrics.

def _smooth_1d(x: np.ndarray) -> np.ndarray:
    # sin(pi x)/x, continuously extended to pi at x = 0
    return np.pi * np.sinc(x)


def _smooth_2d(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.cos(3 * x + y) + np.sin(3 * y) + np.sin(7 * x - 5 * y)


def _cell_projection_1d(n: int, fn) -> np.ndarray:
    """Coefficients <phi_i, f> for normalized cell indicators on n cells."""
    w = 1.0 / n
    left = np.arange(n) * w
    vals = fn(left[:, None] + w * _G3_X[None, :])
    return np.sqrt(w) * (vals @ _G3_W)


def _cell_projection_2d(n: int, fn) -> np.ndarray:
    w = 1.0 / n
    left = np.arange(n) * w
    gx = left[:, None] + w * _G3_X[None, :]
    # tensor Gauss rule per cell; x-major flattening of the cell grid
    avg = np.einsum(
        "a,b,iajb->ij", _G3_W, _G3_W, fn(gx[:, :, None, None], gx[None, None, :, :])
    )
    # cell volume w^2, so <phi, f> = sqrt(w^2) * average = w * average
    return w * avg.reshape(-1)


def gen_signal(
    hier,
    op,
    mode: str,
    rng: np.random.Generator,
    overlap: np.ndarray | None = None,
    factor: CholFactor | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample a source f and the corresponding solution u of A u = O f.

    random-sphere draws the source coefficients uniformly from the unit
    Euclidean sphere (the measurement functions are orthonormal, so
    this is the unit sphere of the source space); the smooth modes
    project a fixed formula onto the fine cells by Gauss quadrature.
    Returns (f coefficients over the fine cells, solution vector u).
    """
    if mode not in SIGNAL_MODES:
        raise BadConfig(f"unknown signal mode {mode!r}; options: {SIGNAL_MODES}")
    n = op.n
    if mode == "random-sphere":
        f = rng.standard_normal(n)
        nf = np.linalg.norm(f)
        if nf > 0:
            f = f / nf
    elif mode == "smooth-1d":
        if op.dim != 1:
            raise BadConfig("smooth-1d signal needs a one-dimensional operator")
        f = _cell_projection_1d(n, _smooth_1d)
    else:
        if op.dim != 2:
            raise BadConfig("smooth-2d signal needs a two-dimensional operator")
        side = round(n ** 0.5)
        f = _cell_projection_2d(side, _smooth_2d)
    if overlap is None:
        from .operators import measurement_overlap

        overlap = measurement_overlap(hier, op)
    if factor is None:
        factor = cholesky(op.A)
    u = solve_spd(factor, overlap @ f)
    return f, u


def add_noise(u: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """u plus i.i.d. centered Gaussian noise of standard deviation sigma."""
    if sigma < 0:
        raise BadConfig(f"sigma must be >= 0, got {sigma}")
    u = np.asarray(u, dtype=float)
    if sigma == 0.0:
        return u.copy()
    return u + sigma * rng.standard_normal(u.shape[0])


def errors(op, u: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """(energy-norm, L2-norm) of v - u under the operator's A and mass forms."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape != (op.n,):
        raise DimensionMismatch(f"vector shapes {u.shape} and {v.shape} for operator order {op.n}")
    diff = v - u
    e = float(np.sqrt(max(diff @ op.A @ diff, 0.0)))
    l2 = float(np.sqrt(max(diff @ op.mass @ diff, 0.0)))
    return e, l2


# ---------------------------------------------------------------------------
# Trial harness.

def _trial_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def run_trials(
    sys: GambletSystem,
    op,
    cfg: DenoiseConfig,
    n_trials: int,
    seed: int,
    methods: tuple[str, ...] | list[str] | None = None,
    threads: int = 1,
    tune_size: int = 32,
    t0_grid: np.ndarray | None = None,
    capture_first: bool = True,
) -> TrialStats:
    """Evaluate the estimators on n_trials independent signal/noise draws.

    Every method sees the identical (f, zeta) pair within a trial.
    Trial k draws from a child generator keyed by (seed, 0, k), and
    threshold tuning uses a disjoint stream keyed by (seed, 1, i), so
    results are reproducible and independent of thread count.
    """
    if n_trials < 1:
        raise BadConfig(f"n_trials must be >= 1, got {n_trials}")
    if n_trials < 2:
        warnings.warn("statistics over a single trial: STDEV is reported as 0")
    methods = list(METHODS if methods is None else methods)
    for m in methods:
        if m not in METHODS:
            raise BadConfig(f"unknown method {m!r}; options: {METHODS}")

    l_dag = select_level(cfg)
    factor = cholesky(op.A)
    overlap = None
    if op.kind != "graph":
        from .operators import measurement_overlap

        overlap = measurement_overlap(sys.hier, op)

    def make_trial(rng):
        f, u = gen_signal(sys.hier, op, cfg.signal, rng, overlap=overlap, factor=factor)
        eta = add_noise(u, cfg.sigma, rng)
        return f, u, eta

    tuned: dict[str, float] = {}
    needs_tuning = [m for m in ("hard-threshold", "soft-threshold") if m in methods]
    if needs_tuning:
        if cfg.t0 is not None:
            for m in needs_tuning:
                tuned[m] = cfg.t0
        else:
            grid = default_threshold_grid(cfg) if t0_grid is None else t0_grid
            pairs = []
            for i in range(tune_size):
                _, u, eta = make_trial(_trial_rng(seed, 1, i))
                pairs.append((u, eta))
            for m in needs_tuning:
                tuned[m] = tune_threshold(sys, pairs, grid, cfg, kind=m.split("-")[0])
            log.info("tuned thresholds: %s", tuned)

    spectrum = None
    gamma = None
    if "regularization" in methods:
        lam, vecs = np.linalg.eigh(symmetrize(np.asarray(op.A, dtype=float)))
        spectrum = (lam, vecs)
        gamma = float(cfg.sigma * np.sqrt(chi_square_quantile(op.n, cfg.confidence)))

    def recover(method, eta):
        if method == "level-filter":
            return level_filter(sys, eta, l_dag).recovered
        if method == "hard-threshold":
            return hard_threshold(sys, eta, tuned[method], cfg).recovered
        if method == "soft-threshold":
            return soft_threshold(sys, eta, tuned[method], cfg).recovered
        return regularize(
            op, eta, cfg.sigma, cfg.confidence, gamma=gamma, spectrum=spectrum
        ).recovered

    err = np.zeros((n_trials, len(methods), 2))
    noise = np.zeros(n_trials)
    first: dict | None = None

    def run_one(k: int):
        f, u, eta = make_trial(_trial_rng(seed, 0, k))
        noise[k] = energy_norm(op, eta - u)
        recs = {}
        for j, m in enumerate(methods):
            v = recover(m, eta)
            err[k, j] = errors(op, u, v)
            if k == 0 and capture_first:
                recs[m] = v
        if k == 0 and capture_first:
            return {"f": f, "u": u, "eta": eta, "recoveries": recs, "level": l_dag}
        return None

    if threads > 1 and n_trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for out in pool.map(run_one, range(n_trials)):
                if out is not None:
                    first = out
    else:
        for k in range(n_trials):
            out = run_one(k)
            if out is not None:
                first = out

    def stats_of(col):
        avg = float(np.mean(col))
        std = float(np.std(col, ddof=1)) if n_trials > 1 else 0.0
        return avg, std

    per_method = {}
    for j, m in enumerate(methods):
        ea, es = stats_of(err[:, j, 0])
        la, ls = stats_of(err[:, j, 1])
        per_method[m] = MethodStats(ea, es, la, ls)
    na, ns = stats_of(noise)
    return TrialStats(
        methods=methods,
        stats=per_method,
        noise_energy_avg=na,
        noise_energy_std=ns,
        n_trials=n_trials,
        seed=seed,
        level=l_dag,
        level_histogram={l_dag: n_trials},
        tuned_t0=tuned,
        first_realization=first,
    )


def energy_growth_check(
    sys: GambletSystem,
    op,
    cfg: DenoiseConfig,
    n_trials: int,
    seed: int,
    quantile: float = 0.95,
    return_samples: bool = False,
):
    """Empirical quantile of |recovery|_A - |u|_A for the level filter.

    The filtered recovery can only exceed the clean signal's energy by
    what it picks up from the noise, so this statistic tracks the
    noise-level scaling of the estimator.
    """
    l_dag = select_level(cfg)
    if l_dag == 0:
        raise LevelZero("selected level is 0; the statistic needs at least one level")
    factor = cholesky(op.A)
    overlap = None
    if op.kind != "graph":
        from .operators import measurement_overlap

        overlap = measurement_overlap(sys.hier, op)
    samples = np.zeros((n_trials, 3))
    for k in range(n_trials):
        rng = _trial_rng(seed, 0, k)
        _, u = gen_signal(sys.hier, op, cfg.signal, rng, overlap=overlap, factor=factor)
        eta = add_noise(u, cfg.sigma, rng)
        rec = level_filter(sys, eta, l_dag).recovered
        zrec = level_filter(sys, eta - u, l_dag).recovered
        samples[k] = (
            energy_norm(op, rec),
            energy_norm(op, u),
            energy_norm(op, zrec),
        )
    qv = float(np.quantile(samples[:, 0] - samples[:, 1], quantile))
    if return_samples:
        return qv, samples
    return qv

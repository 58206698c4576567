"""Closed-form and exact numerical references for validating the sampler.

Three independent cross-checks live here:

* the textbook two-state bright/dark exciton solution (a 2x2 linear system
  solved in closed form), which the low-power decay histogram must overlay,
* an exact continuous-time Markov-chain period map over the full state space
  for small level counts: within-period evolution by matrix exponential,
  composed with the pulse injection map, iterated to the stationary
  cycle-start distribution; expected photons per period follow from the
  integrated radiative flux,
* single- and double-exponential least-squares fitting with Poisson-aware
  weights, used to extract decay and blinking rate constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from .excitation import NonResonant, Resonant
from .kinetics import CLASS_ORDER, ExcitonClass, RateParams, _classify, _rate_tuple

__all__ = [
    "analytic_bright_dark",
    "bright_dark_propagator",
    "analytic_decay_curve",
    "CtmcModel",
    "build_ctmc",
    "ctmc_emission_probability",
    "BiExponential",
    "ExpFit",
    "fit_exponentials",
]


# ---------------------------------------------------------------------------
# two-state bright/dark exciton model
# ---------------------------------------------------------------------------


def _bright_dark_matrix(params: RateParams) -> np.ndarray:
    """Generator of the (bright, dark) two-state system.

    The bright exciton loses population through enhanced radiative decay,
    non-radiative decay of either carrier and spin flips of either carrier;
    the dark exciton lacks the radiative channel; spin flips couple the two
    at twice the single-carrier rate.
    """
    loss_b = params.gamma_r * params.purcell + 2.0 * params.gamma_nr + 2.0 * params.gamma_sf
    loss_d = 2.0 * params.gamma_nr + 2.0 * params.gamma_sf
    c = 2.0 * params.gamma_sf
    return np.array([[-loss_b, c], [c, -loss_d]])


def bright_dark_propagator(params: RateParams, t) -> np.ndarray:
    """exp(M t) for the two-state system, exact via the symmetric eigenproblem.

    For scalar ``t`` returns a (2, 2) array; for an array of times the leading
    axis runs over the time samples.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be >= 0")
    m = _bright_dark_matrix(params)
    mu = -(m[0, 0] + m[1, 1]) / 2.0
    shifted = m + mu * np.eye(2)  # trace-free, squares to s^2 * I
    s = math.sqrt(shifted[0, 0] ** 2 + shifted[0, 1] * shifted[1, 0])
    ts = t[..., None, None]
    if s == 0.0:
        sinh_term = ts
        cosh_st = np.ones_like(ts)
    else:
        sinh_term = np.sinh(s * ts) / s
        cosh_st = np.cosh(s * ts)
    return np.exp(-mu * ts) * (cosh_st * np.eye(2) + sinh_term * shifted)


def analytic_bright_dark(params: RateParams, t):
    """Bright and dark populations at time t for the initial condition (1, 0).

    Returns (rho_bright, rho_dark); both are arrays when ``t`` is an array.
    """
    p = bright_dark_propagator(params, t)
    return p[..., 0, 0], p[..., 1, 0]


def analytic_decay_curve(params: RateParams, t, bright0: float = 1.0, dark0: float = 0.0):
    """Exciton photon emission density at time t for a given initial mixture.

    The detected intensity is the enhanced radiative rate times the bright
    population; captured pairs start bright or dark with equal probability,
    so the low-power histogram comparison uses bright0 = dark0 = 0.5.
    """
    p = bright_dark_propagator(params, t)
    rho_b = p[..., 0, 0] * bright0 + p[..., 0, 1] * dark0
    return params.gamma_r * params.purcell * rho_b


# ---------------------------------------------------------------------------
# exact period-map oracle
# ---------------------------------------------------------------------------

_MAX_ORACLE_LEVELS = 2  # state space is (n+1)^4; keep the expm small and exact


@dataclass(frozen=True)
class CtmcModel:
    """Exact period map of the pulsed dot over the full occupancy state space."""

    n_levels: int
    period_t: float
    generator: np.ndarray  # (S, S) transition-rate matrix, rows sum to 0
    pulse_map: np.ndarray  # (S, S) row-stochastic injection map
    evolution: np.ndarray  # expm(generator * period_t)
    flux_weights: np.ndarray  # (S, n_classes) radiative rate per class
    integrated: np.ndarray  # \int_0^T expm(generator s) ds

    @property
    def n_states(self) -> int:
        return self.generator.shape[0]

    def cycle_map(self) -> np.ndarray:
        """Stochastic map over one full cycle: inject, then evolve."""
        return self.pulse_map @ self.evolution

    def stationary_start(self, tol: float = 1e-12, max_iter: int = 2_000_000) -> np.ndarray:
        """Stationary pre-pulse distribution by power iteration.

        The iteration starts from the empty dot, matching how trajectories
        begin; this keeps the mass on the physically reachable component of a
        reducible chain (unreachable charge states can be absorbing when all
        loss rates vanish). Raises RuntimeError when the iteration fails to
        reach ``tol``.
        """
        p_cycle = self.cycle_map()
        pi = np.zeros(self.n_states)
        pi[0] = 1.0  # index 0 is the empty state (0, 0, 0, 0)
        for _ in range(max_iter):
            nxt = pi @ p_cycle
            nxt /= nxt.sum()
            if np.abs(nxt - pi).sum() < tol:
                return nxt
            pi = nxt
        raise RuntimeError(
            f"power iteration did not converge to {tol} in {max_iter} iterations"
        )

    def emission_per_cycle(self, tol: float = 1e-12) -> dict[ExcitonClass, float]:
        """Expected photons per period per class in the stationary cycle."""
        pi = self.stationary_start(tol=tol)
        occupation_time = pi @ self.pulse_map @ self.integrated  # (S,)
        flux = occupation_time @ self.flux_weights
        return {cls: float(flux[i]) for i, cls in enumerate(CLASS_ORDER)}


def _state_tuples(n_levels: int):
    r = range(n_levels + 1)
    return [(a, b, c, d) for a in r for b in r for c in r for d in r]


def _capture_matrix(n_levels: int) -> np.ndarray:
    """Single-carrier capture over one species' (up, dn) occupancy pairs.

    The carrier picks a column with probability 1/2, falls back to the other
    when full, and is discarded when both are full.
    """
    n = n_levels + 1
    a_mat = np.zeros((n * n, n * n))
    for up in range(n):
        for dn in range(n):
            i = up * n + dn
            # chosen column up
            if up < n_levels:
                j = (up + 1) * n + dn
            elif dn < n_levels:
                j = up * n + (dn + 1)
            else:
                j = i
            a_mat[i, j] += 0.5
            # chosen column dn
            if dn < n_levels:
                j = up * n + (dn + 1)
            elif up < n_levels:
                j = (up + 1) * n + dn
            else:
                j = i
            a_mat[i, j] += 0.5
    return a_mat


def _poisson_weights(lam: float, tail: float = 1e-15) -> np.ndarray:
    weights = []
    p = math.exp(-lam)
    total = p
    n = 0
    weights.append(p)
    while 1.0 - total > tail and n < 400:
        n += 1
        p *= lam / n
        total += p
        weights.append(p)
    return np.asarray(weights)


def build_ctmc(
    params: RateParams,
    scheme: NonResonant | Resonant,
    period_t: float,
    n_levels: int = 1,
) -> CtmcModel:
    """Assemble generator, pulse map and period operators for the exact model."""
    if not 1 <= n_levels <= _MAX_ORACLE_LEVELS:
        raise ValueError(
            f"exact oracle supports 1 <= n_levels <= {_MAX_ORACLE_LEVELS}"
        )
    if period_t <= 0.0:
        raise ValueError("period_t must be positive")
    states = _state_tuples(n_levels)
    index = {s: i for i, s in enumerate(states)}
    n_states = len(states)

    from .kinetics import EVENT_DELTAS

    q = np.zeros((n_states, n_states))
    flux = np.zeros((n_states, len(CLASS_ORDER)))
    for i, (a, b, c, d) in enumerate(states):
        rates = _rate_tuple(
            a, b, c, d, n_levels,
            params.gamma_r, params.gamma_nr, params.gamma_sf, params.purcell,
        )
        for kind, rate in enumerate(rates):
            if rate <= 0.0:
                continue
            da, db, dc, dd = EVENT_DELTAS[kind]
            j = index[(a + da, b + db, c + dc, d + dd)]
            q[i, j] += rate
            q[i, i] -= rate
        radiative = rates[0] + rates[1]
        if radiative > 0.0:
            flux[i, _classify(a + b, c + d)] = radiative

    if isinstance(scheme, Resonant):
        pulse = np.eye(n_states)
        empty = index[(0, 0, 0, 0)]
        target = (1, 0, 0, 1) if scheme.polarization == "up" else (0, 1, 1, 0)
        pulse[empty, empty] = 0.0
        pulse[empty, index[target]] = 1.0
    else:
        n_pair = (n_levels + 1) ** 2
        capture = _capture_matrix(n_levels)
        weights = _poisson_weights(scheme.p_in)
        pulse = np.zeros((n_states, n_states))
        power = np.eye(n_pair)
        for w in weights:
            pulse += w * np.kron(power, power)
            power = power @ capture
        # renormalize the truncated Poisson tail
        pulse /= pulse.sum(axis=1, keepdims=True)

    # E(T) and \int_0^T E(s) ds in one block exponential
    block = np.zeros((2 * n_states, 2 * n_states))
    block[:n_states, :n_states] = q
    block[:n_states, n_states:] = np.eye(n_states)
    big = expm(block * period_t)
    evolution = big[:n_states, :n_states]
    integrated = big[:n_states, n_states:]

    return CtmcModel(
        n_levels=n_levels,
        period_t=period_t,
        generator=q,
        pulse_map=pulse,
        evolution=evolution,
        flux_weights=flux,
        integrated=integrated,
    )


def ctmc_emission_probability(
    params: RateParams,
    scheme: NonResonant | Resonant,
    period_t: float,
    n_levels: int = 1,
    tol: float = 1e-12,
) -> dict[ExcitonClass, float]:
    """Exact stationary photons per period per class (small level counts)."""
    model = build_ctmc(params, scheme, period_t, n_levels)
    return model.emission_per_cycle(tol=tol)


# ---------------------------------------------------------------------------
# exponential fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiExponential:
    """Sum of a fast and a slow exponential decay."""

    a_fast: float
    gamma_fast: float
    a_slow: float
    gamma_slow: float

    def __post_init__(self):
        if not self.gamma_fast >= self.gamma_slow:
            raise ValueError("gamma_fast must be >= gamma_slow")
        if not self.gamma_slow > 0.0:
            raise ValueError("rates must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.a_fast * np.exp(-self.gamma_fast * x) + self.a_slow * np.exp(
            -self.gamma_slow * x
        )


@dataclass(frozen=True)
class ExpFit:
    """Result of an exponential fit: parameters plus the weighted residual."""

    order: int
    amplitudes: tuple[float, ...]
    rates: tuple[float, ...]
    residual: float

    def as_biexponential(self) -> BiExponential:
        if self.order != 2:
            raise ValueError("only order-2 fits convert to BiExponential")
        return BiExponential(
            self.amplitudes[0], self.rates[0], self.amplitudes[1], self.rates[1]
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for a, g in zip(self.amplitudes, self.rates):
            out = out + a * np.exp(-g * x)
        return out


def _log_slope(x, y):
    """Decay-rate estimate from a straight-line fit to log counts."""
    mask = y > 0
    if mask.sum() < 2:
        return 1.0, max(float(y.max()), 1.0)
    lx, ly = x[mask], np.log(y[mask])
    slope, intercept = np.polyfit(lx, ly, 1)
    rate = max(-slope, 1e-6)
    return rate, math.exp(intercept)


def fit_exponentials(x, y, order: int = 2) -> ExpFit:
    """Weighted nonlinear least squares for one or two decaying exponentials.

    Counts are weighted by their Poisson variance estimate max(y, 1). The
    solver runs from three starting points built from log-slope estimates of
    the early and late parts of the curve; parameters are optimized in log
    space to stay positive, and order-2 results are ordered fast/slow.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < 4:
        raise ValueError("need at least 4 samples")
    if np.any(y < 0):
        raise ValueError("y must be non-negative")
    if not np.any(y > 0):
        raise ValueError("degenerate data: all counts are zero")
    if np.count_nonzero(y > 0) <= order:
        raise ValueError("degenerate data: too few non-zero samples")

    sigma = np.sqrt(np.maximum(y, 1.0))
    n_par = 2 * order

    def residuals(p):
        a = np.exp(p[:order])
        g = np.exp(p[order:])
        model = (a[None, :] * np.exp(-np.outer(x, g))).sum(axis=1)
        return (model - y) / sigma

    # starting points from early/late log slopes
    mid = max(2, len(x) // 3)
    g_early, a_early = _log_slope(x[:mid], y[:mid])
    g_late, a_late = _log_slope(x[-mid:], y[-mid:])
    g_all, a_all = _log_slope(x, y)
    if order == 1:
        starts = [(a_all, g_all), (a_all, 2.0 * g_all), (a_all, 0.5 * g_all)]
        packs = [np.log([a, g]) for a, g in starts]
    else:
        # pack layout: (log a_fast, log a_slow, log g_fast, log g_slow)
        g_hi = max(g_early, 1.000001 * g_late)
        packs = [
            np.log([a_early, max(a_late, 1e-12), g_hi, g_late]),
            np.log([a_all, a_all * 1e-2, 3.0 * g_all, g_all / 3.0]),
            np.log([a_all, a_all * 0.1, 10.0 * g_all, g_all]),
        ]

    # log-space box keeps rates/amplitudes positive and finite
    bounds = (np.full(n_par, -60.0), np.full(n_par, 60.0))
    best = None
    for p0 in packs:
        p0 = np.clip(p0, bounds[0] + 1e-9, bounds[1] - 1e-9)
        try:
            res = least_squares(
                residuals, p0, method="trf", bounds=bounds,
                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000 * n_par,
            )
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None or not np.all(np.isfinite(best.x)):
        raise RuntimeError("exponential fit failed to converge from all starts")

    a = np.exp(best.x[:order])
    g = np.exp(best.x[order:])
    if order == 2 and g[0] < g[1]:
        a = a[::-1]
        g = g[::-1]
    residual = float(2.0 * best.cost)  # least_squares cost is 0.5 * sum(r^2)
    return ExpFit(order, tuple(float(v) for v in a), tuple(float(v) for v in g), residual)

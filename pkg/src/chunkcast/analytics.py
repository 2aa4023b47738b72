"""Closed-form completion-time approximations and the minimum-window solver.

The per-batch completion time of a single receiver is modeled as a Gaussian
with mean mu = K/p and standard deviation sigma = sqrt(K(1-p))/p.  The file
transfer completion time over N receivers is then estimated three ways:

* ``e_t_integral``   — b * integral_0^inf (1 - F_X(z)^N) dz, the expected
  maximum of N such Gaussians, scaled by the number of batches b = F/K.
* ``e_t_3sigma``     — b*(mu + n_tilde*sigma - sigma*A(N)), where n_tilde is
  the smallest integer number of sigmas covering all N receivers at the 0.99
  level and A(N) is a truncated cdf-power integral.  Defined only when
  K > n_tilde^2 (1-p), which keeps mu - n_tilde*sigma positive.
* ``e_t_orderstat``  — b*(mu + sigma*B(N)) with B(N) = phi_inv(0.5264^(1/N)),
  a quantile approximation of the expected greatest order statistic.

``min_window`` inverts the relative-delay constraint
(E[T_K^F] - E[T_opt]) / E[T_opt] <= epsilon for the smallest integer window,
either with the exact (n_tilde, A(N)) characterization or the simplified
B(N) form whose denominator keeps only the dominant sqrt(F) term.

All quantities are dimensionless or in slots; every function is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad

from .model import ConfigError, ScenarioConfig

_SQRT2 = math.sqrt(2.0)
_QUAD_TOL = 1e-10
# integration in standard-normal units is truncated here; the neglected
# tails are < 1e-30 for any N of interest
_UPPER_SIGMAS = 12.0
_LOWER_SIGMAS = -10.0


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def phi(x: float) -> float:
    """Standard normal cdf."""
    return 0.5 * math.erfc(-x / _SQRT2)


def q(x: float) -> float:
    """Standard normal tail (Q-function), 1 - phi(x)."""
    return 0.5 * math.erfc(x / _SQRT2)


def _pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Rational minimax coefficients for the initial quantile guess (Acklam's
# approximation, |error| < 1.2e-9); one Newton step against phi() then
# brings the result to full double precision in the ranges used here.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def phi_inv(u: float) -> float:
    """Standard normal quantile, accurate to well under 1e-9 absolute."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"phi_inv requires u in (0, 1), got {u}")
    if u < _P_LOW:
        r = math.sqrt(-2.0 * math.log(u))
        x = ((((( _C[0]*r + _C[1])*r + _C[2])*r + _C[3])*r + _C[4])*r + _C[5]) / \
            (((( _D[0]*r + _D[1])*r + _D[2])*r + _D[3])*r + 1.0)
    elif u <= 1.0 - _P_LOW:
        s = u - 0.5
        r = s * s
        x = ((((( _A[0]*r + _A[1])*r + _A[2])*r + _A[3])*r + _A[4])*r + _A[5]) * s / \
            ((((( _B[0]*r + _B[1])*r + _B[2])*r + _B[3])*r + _B[4])*r + 1.0)
    else:
        r = math.sqrt(-2.0 * math.log(1.0 - u))
        x = -((((( _C[0]*r + _C[1])*r + _C[2])*r + _C[3])*r + _C[4])*r + _C[5]) / \
            (((( _D[0]*r + _D[1])*r + _D[2])*r + _D[3])*r + 1.0)
    # one Newton refinement against the in-house cdf
    return x - (phi(x) - u) / _pdf(x)


def n_tilde(n_receivers: int) -> int:
    """Smallest positive integer n with erf(n/sqrt(2))^N >= 0.99.

    The integer sigma-multiple covering all N per-receiver Gaussians at the
    0.99 level; grows like sqrt(2 ln N) and is 3 for N <= 2, 5 by N ~ 1200.
    """
    if n_receivers < 1:
        raise ValueError("n_receivers must be >= 1")
    n = 1
    while math.erf(n / _SQRT2) ** n_receivers < 0.99:
        n += 1
    return n


def _quad(fn, lo: float, hi: float, tol: float = _QUAD_TOL) -> float:
    val, err = quad(fn, lo, hi, epsabs=tol, epsrel=1e-12, limit=400)
    if err > max(tol * 100.0, 1e-8):
        raise QuadratureError(
            f"quadrature error estimate {err:g} above tolerance on [{lo}, {hi}]"
        )
    return val


def a_exact(n_receivers: int, n_tilde_value: int | None = None) -> float:
    """A(N) = integral_{-nt}^{nt} (phi(z) - phi(-nt))^N dz.

    The inner integral of the defining double integral is the normal cdf
    difference, so a single adaptive quadrature suffices.
    """
    nt = n_tilde(n_receivers) if n_tilde_value is None else n_tilde_value
    base = phi(-nt)
    return _quad(lambda z: (phi(z) - base) ** n_receivers, -nt, nt)


def a_approx(n_receivers: int, n_tilde_value: int | None = None) -> float:
    """A(N) ~ integral_0^{nt} phi(x)^N dx, dropping the Q-power term."""
    nt = n_tilde(n_receivers) if n_tilde_value is None else n_tilde_value
    return _quad(lambda x: phi(x) ** n_receivers, 0.0, nt)


def q_power_integral(n_receivers: int, upper: float = 5.0) -> float:
    """integral_0^upper Q(x)^N dx — the term a_approx neglects."""
    return _quad(lambda x: q(x) ** n_receivers, 0.0, upper)


def b_n(n_receivers: int) -> float:
    """B(N) = phi_inv(0.5264^(1/N)), the greatest-order-statistic quantile."""
    if n_receivers < 1:
        raise ValueError("n_receivers must be >= 1")
    return phi_inv(0.5264 ** (1.0 / n_receivers))


@dataclass(frozen=True)
class NormalParams:
    """Gaussian model of one receiver's per-batch completion time."""

    mu: float
    sigma: float

    @staticmethod
    def for_window(window: int, conn_prob: float) -> "NormalParams":
        return NormalParams(
            mu=window / conn_prob,
            sigma=math.sqrt(window * (1.0 - conn_prob)) / conn_prob,
        )


@dataclass(frozen=True)
class AnalyticResult:
    """The three completion-time estimates and their auxiliary quantities.

    ``e_t_3sigma`` is None when K <= n_tilde^2 (1-p), where that form's
    positivity assumption fails.
    """

    e_t_integral: float
    e_t_3sigma: float | None
    e_t_orderstat: float
    n_tilde: int
    a_n: float
    b_n: float


def expected_completion(config: ScenarioConfig) -> AnalyticResult:
    """All three E[T_K^F] estimates for a scenario.

    Requires F to be a multiple of K: the batch decomposition
    E[T_K^F] ~ b * E[T_K] assumes b = F/K integral.
    """
    if config.file_size % config.window != 0:
        raise ConfigError("analytics require file_size to be a multiple of window")
    n = config.n_receivers
    p = config.conn_prob
    b = config.file_size // config.window
    params = NormalParams.for_window(config.window, p)
    nt = n_tilde(n)
    a_val = a_exact(n, nt)
    b_val = b_n(n)

    if params.sigma == 0.0:
        # deterministic channel: every form collapses to b*K = F slots
        exact = float(config.file_size)
        return AnalyticResult(
            e_t_integral=exact,
            e_t_3sigma=exact,
            e_t_orderstat=exact,
            n_tilde=nt,
            a_n=a_val,
            b_n=b_val,
        )

    # E[T_K] = integral_0^inf (1 - F_X(z)^N) dz with z = mu + sigma*u;
    # below _LOWER_SIGMAS the integrand is 1 up to phi(u)^N < 1e-23
    lo = -params.mu / params.sigma
    split = max(lo, _LOWER_SIGMAS)
    per_batch = params.sigma * (
        (split - lo) + _quad(lambda u: 1.0 - phi(u) ** n, split, _UPPER_SIGMAS)
    )
    e_integral = b * per_batch

    e_3sigma: float | None = None
    if config.window > nt * nt * (1.0 - p):
        e_3sigma = b * (params.mu + nt * params.sigma - params.sigma * a_val)

    e_orderstat = b * (params.mu + params.sigma * b_val)

    return AnalyticResult(
        e_t_integral=e_integral,
        e_t_3sigma=e_3sigma,
        e_t_orderstat=e_orderstat,
        n_tilde=nt,
        a_n=a_val,
        b_n=b_val,
    )


def relative_delay(
    file_size: int,
    window: int,
    conn_prob: float,
    n_receivers: int,
    formula: str = "simplified",
) -> float:
    """Left-hand side of the delay constraint at a given window size.

    exact:       sqrt(1-p)(nt - A(N)) / (sqrt(F) + sqrt(1-p)(nt - A(N)))
                 * (sqrt(F/K) - 1)
    simplified:  (sqrt(F/K) - 1) sqrt(1-p) B(N) / sqrt(F)
    """
    root = math.sqrt(file_size / window) - 1.0
    if formula == "exact":
        nt = n_tilde(n_receivers)
        c = math.sqrt(1.0 - conn_prob) * (nt - a_exact(n_receivers, nt))
        if c == 0.0:
            return 0.0
        return c / (math.sqrt(file_size) + c) * root
    if formula == "simplified":
        s = math.sqrt(1.0 - conn_prob) * b_n(n_receivers)
        return root * s / math.sqrt(file_size)
    raise ValueError(f"formula must be 'exact' or 'simplified', got {formula!r}")


def min_window(
    file_size: int,
    n_receivers: int,
    conn_prob: float,
    epsilon: float,
    formula: str = "simplified",
    divisor_only: bool = False,
) -> int:
    """Smallest integer window meeting the relative-delay constraint.

    With ``divisor_only`` the answer is further restricted to divisors of
    the file size (integral batch count).  The constraint is monotone
    decreasing in K and zero at K = F, so a solution always exists.
    """
    if epsilon <= 0.0:
        raise ConfigError("epsilon must be positive")
    if file_size < 1:
        raise ConfigError("file_size must be a positive integer")
    if n_receivers < 1:
        raise ConfigError("n_receivers must be >= 1")
    if not 0.0 < conn_prob <= 1.0:
        raise ConfigError("conn_prob must lie in (0, 1]")

    if conn_prob == 1.0:
        return 1  # no channel variance, any window meets any constraint

    if formula == "exact":
        nt = n_tilde(n_receivers)
        c = math.sqrt(1.0 - conn_prob) * (nt - a_exact(n_receivers, nt))
        scale = epsilon * (math.sqrt(file_size) + c) / c
    elif formula == "simplified":
        s = math.sqrt(1.0 - conn_prob) * b_n(n_receivers)
        scale = epsilon * math.sqrt(file_size) / s
    else:
        raise ValueError(f"formula must be 'exact' or 'simplified', got {formula!r}")

    k_real = file_size / (1.0 + scale) ** 2
    k = max(1, math.ceil(k_real - 1e-12))
    # guard the closed form against float rounding at the boundary
    while k < file_size and relative_delay(file_size, k, conn_prob, n_receivers, formula) > epsilon:
        k += 1
    while k > 1 and relative_delay(file_size, k - 1, conn_prob, n_receivers, formula) <= epsilon:
        k -= 1
    assert relative_delay(file_size, file_size, conn_prob, n_receivers, formula) <= epsilon

    if divisor_only:
        while file_size % k != 0:
            k += 1
    return k

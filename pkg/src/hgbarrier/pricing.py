"""Asymptotic down-and-out call prices.

The price under the full model expands around the deterministic-volatility
limit as f0 + eps * f1 + O(eps^2).  The zero-order term f0 is the closed-form
barrier price under time-dependent deterministic volatility; the first-order
term f1 is a one-dimensional integral of truncated-Gaussian expectations and
captures the spot/vol correlation.  Single-stage and two-stage barrier
families are supported, plus the constant-volatility barrier price used as a
reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import mixed_dxdv_coeffs, norm_cdf, norm_pdf, psi, upsilon
from .model import (
    BarrierSpec,
    MarketState,
    ModelParams,
    OptionSpec,
    barrier_level,
    integrated_variance,
    noiseless_logvol,
)
from .quadrature import QuadratureError, adaptive_quad

__all__ = [
    "QuadratureConfig",
    "PriceBreakdown",
    "zero_order_price",
    "first_order_term",
    "approx_price",
    "bs_barrier_price",
    "two_stage_zero_order",
    "two_stage_first_order",
]

# step widths (log-spot, log-vol) of the mixed finite difference used in the
# two-stage first-order integrand
_FD_STEP_X = 3e-4
_FD_STEP_V = 3e-4


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the first-order integrals.

    ``endpoint_inset`` shaves a fraction of the remaining time off the
    maturity end of the integration interval, where the coefficient table
    carries 1/gamma factors; adaptivity handles the rest.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    endpoint_inset: float = 1e-7
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("quadrature tolerances must be positive")
        if not 0.0 < self.endpoint_inset < 1e-3:
            raise ValueError(f"endpoint inset must lie in (0, 1e-3), got {self.endpoint_inset}")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")


@dataclass(frozen=True)
class PriceBreakdown:
    """Asymptotic price with its pieces.

    total = f0 + eps * f1 by construction.  ``negative_total`` flags the
    (possible) breakdown of the expansion when a large correction drives the
    reported price below zero; the value is reported unclamped.
    """

    f0: float
    f1: float
    correction: float
    total: float
    bs_reference: float
    quad_error_estimate: float
    beta_used: float
    barrier_at_eval: float
    negative_total: bool


def _doc_closed_form(x: float, strike: float, barrier_now: float, kh: float,
                     rate: float, tau: float, g2: float, beta: float) -> float:
    """Down-and-out call under deterministic vol with an exponential barrier.

    ``g2`` is the integrated variance over the remaining life, ``barrier_now``
    the barrier level at valuation, ``kh`` the larger of strike and terminal
    barrier level.
    """
    g = math.sqrt(g2)
    df = math.exp(-rate * tau)
    d1 = (math.log(x / kh) + rate * tau + 0.5 * g2) / g
    d2 = d1 - g
    log_ratio = math.log(barrier_now / x)
    d3 = d1 + 2.0 * log_ratio / g
    d4 = d2 + 2.0 * log_ratio / g
    value = x * norm_cdf(d1) - strike * df * norm_cdf(d2)
    n3 = norm_cdf(d3)
    if n3 > 0.0:
        value -= (barrier_now / x) ** (2.0 + 2.0 * beta) * x * n3
    n4 = norm_cdf(d4)
    if n4 > 0.0:
        value += (barrier_now / x) ** (2.0 * beta) * strike * df * n4
    return value


def _require_single_stage(spec: BarrierSpec, what: str) -> None:
    if not spec.is_single_stage:
        raise ValueError(f"{what} requires a single-stage barrier spec; "
                         f"use the two-stage routines for staged barriers")


def zero_order_price(
    params: ModelParams, option: OptionSpec, spec: BarrierSpec, state: MarketState
) -> float:
    """Deterministic-volatility limit of the barrier option price.

    Closed form for the single-stage barrier family; exactly zero on the
    barrier and converging to the vanilla price as the barrier level
    vanishes.  Rejects spots below the barrier and t >= maturity.
    """
    _require_single_stage(spec, "zero_order_price")
    T = option.maturity
    t, x, v = state.t, state.x, state.v
    if t >= T:
        raise ValueError(f"valuation time {t} must precede maturity {T}")
    h_t = barrier_level(params, option, spec, t, v)
    if x < h_t:
        raise ValueError(f"spot {x} is below the barrier level {h_t} at valuation")
    if x == h_t:
        return 0.0
    g2 = integrated_variance(params, t, T, v)
    kh = max(option.strike, spec.h1)
    return _doc_closed_form(x, option.strike, h_t, kh, params.r, T - t, g2, spec.beta)


def _first_order_unit_rho(
    params: ModelParams,
    option: OptionSpec,
    spec: BarrierSpec,
    state: MarketState,
    qcfg: QuadratureConfig,
) -> tuple[float, float]:
    """First-order integral with the correlation factored out; (value, error)."""
    T = option.maturity
    t, x, v = state.t, state.x, state.v
    K = option.strike
    if K < spec.h1:
        raise ValueError(
            f"first-order term requires strike >= terminal barrier level, got K={K}, h1={spec.h1}"
        )
    if t >= T:
        raise ValueError(f"valuation time {t} must precede maturity {T}")
    h_t = barrier_level(params, option, spec, t, v)
    if x <= h_t:
        raise ValueError(f"spot {x} must exceed the barrier level {h_t} at valuation")

    log_x = math.log(x)
    log_x2 = 2.0 * math.log(h_t) - log_x
    reflection = (h_t / x) ** (2.0 * spec.beta)
    theta = params.theta
    r = params.r

    def integrand(u: float) -> float:
        v_u = noiseless_logvol(params, t, v, u)
        g2_tu = integrated_variance(params, t, u, v)
        h_u = barrier_level(params, option, spec, u, v_u)
        lower = math.log(h_u)
        drift = r * (u - t) - 0.5 * g2_tu
        mu1 = log_x + drift
        mu2 = log_x2 + drift
        co = mixed_dxdv_coeffs(params, option, spec, u, v_u)
        s1 = 0.0
        s2 = 0.0
        for j in range(3):
            nu_j, kap_j, eta_j = co.nu[j], co.kappa[j], co.eta[j]
            if co.a[j] != 0.0:
                s1 += co.a[j] * upsilon(nu_j, kap_j, eta_j, mu1, g2_tu, lower)
                s2 += co.a[j] * upsilon(nu_j, kap_j, eta_j, mu2, g2_tu, lower)
            for ell in range(3):
                b = co.b[j, ell]
                if b != 0.0:
                    s1 += b * psi(ell, nu_j, kap_j, eta_j, mu1, g2_tu, lower)
                    s2 += b * psi(ell, nu_j, kap_j, eta_j, mu2, g2_tu, lower)
        return math.exp(-r * (u - t)) * theta * math.exp(v_u) * (s1 - reflection * s2)

    hi = T - qcfg.endpoint_inset * (T - t)
    return adaptive_quad(
        integrand, t, hi,
        rel_tol=qcfg.rel_tol, abs_tol=qcfg.abs_tol, max_subdivisions=qcfg.max_subdivisions,
    )


def first_order_term(
    params: ModelParams,
    option: OptionSpec,
    spec: BarrierSpec,
    state: MarketState,
    qcfg: QuadratureConfig | None = None,
) -> float:
    """First-order coefficient of the expansion (price correction per unit eps).

    Adaptive quadrature of the closed-form integrand; exactly linear in the
    correlation, which multiplies the integral once at the end.  Only defined
    for regular options (strike at or above the terminal barrier level).
    """
    _require_single_stage(spec, "first_order_term")
    if params.rho == 0.0:
        return 0.0
    qcfg = qcfg or QuadratureConfig()
    value, _ = _first_order_unit_rho(params, option, spec, state, qcfg)
    return params.rho * value


def approx_price(
    params: ModelParams,
    option: OptionSpec,
    spec: BarrierSpec,
    state: MarketState,
    qcfg: QuadratureConfig | None = None,
) -> PriceBreakdown:
    """First-order asymptotic price f0 + eps * f1 with diagnostics.

    The reference column is the constant-volatility barrier price at
    sigma = e^v with the barrier pinned at its terminal level.
    """
    _require_single_stage(spec, "approx_price")
    qcfg = qcfg or QuadratureConfig()
    f0 = zero_order_price(params, option, spec, state)
    if params.rho == 0.0:
        f1, quad_err = 0.0, 0.0
    else:
        unit, err = _first_order_unit_rho(params, option, spec, state, qcfg)
        f1 = params.rho * unit
        quad_err = abs(params.rho) * err
    correction = params.eps * f1
    total = f0 + correction
    return PriceBreakdown(
        f0=f0,
        f1=f1,
        correction=correction,
        total=total,
        bs_reference=bs_barrier_price(math.exp(state.v), option, spec.h1, state, rate=params.r),
        quad_error_estimate=quad_err,
        beta_used=spec.beta,
        barrier_at_eval=barrier_level(params, option, spec, state.t, state.v),
        negative_total=total < 0.0,
    )


def bs_barrier_price(
    sigma: float, option: OptionSpec, h: float, state: MarketState, *, rate: float
) -> float:
    """Constant-volatility down-and-out call with a constant barrier.

    The exponential barrier family degenerates to a constant level when its
    exponent is rate/sigma^2 - 1/2, which recovers the standard closed form.
    """
    T = option.maturity
    t, x = state.t, state.x
    if t >= T:
        raise ValueError(f"valuation time {t} must precede maturity {T}")
    if x <= h:
        raise ValueError(f"spot {x} must exceed the barrier {h}")
    if sigma <= 0.0:
        raise ValueError(f"volatility must be positive, got {sigma}")
    g2 = sigma * sigma * (T - t)
    beta = rate / (sigma * sigma) - 0.5
    return _doc_closed_form(x, option.strike, h, max(option.strike, h), rate, T - t, g2, beta)


def _two_stage_parts(option: OptionSpec, spec2: BarrierSpec) -> tuple[float, float, float, float]:
    """Unpack a two-stage spec into (T1, beta1, T, beta2), validating shape."""
    if spec2.n_stages != 2:
        raise ValueError(f"expected a two-stage barrier spec, got {spec2.n_stages} stage(s)")
    (t1, beta1), (t2, beta2) = spec2.stages
    if abs(t2 - option.maturity) > 1e-12 * max(1.0, option.maturity):
        raise ValueError(f"last breakpoint {t2} must equal the option maturity {option.maturity}")
    return t1, beta1, option.maturity, beta2


def _two_stage_f0_logspot(
    params: ModelParams,
    option: OptionSpec,
    spec2: BarrierSpec,
    u: float,
    log_spot,
    v: float,
):
    """Two-stage zero-order price at (u, e^{log_spot}, v) for u before the breakpoint.

    Propagates the survival mass over the first stage against the joint
    density and folds the second-stage closed form into four
    truncated-Gaussian expectations.  Vectorized over ``log_spot``.
    """
    t1, beta1, T, beta2 = _two_stage_parts(option, spec2)
    K = option.strike
    r = params.r
    kh = max(K, spec2.h1)

    v1 = noiseless_logvol(params, u, v, t1)
    g2_tail = integrated_variance(params, t1, T, v1)
    g = math.sqrt(g2_tail)
    h_break = barrier_level(params, option, spec2, t1, v1)
    k_disc = K * math.exp(-r * (T - t1))
    base = r * (T - t1)
    log_h2 = math.log(h_break * h_break / kh)
    coeff_a = (1.0, -k_disc, -h_break ** (2.0 + 2.0 * beta2), h_break ** (2.0 * beta2) * k_disc)
    coeff_eta = (1.0, 0.0, -(1.0 + 2.0 * beta2), -2.0 * beta2)
    coeff_nu = (1.0 / g, 1.0 / g, -1.0 / g, -1.0 / g)
    coeff_kappa = (
        (-math.log(kh) + base + 0.5 * g2_tail) / g,
        (-math.log(kh) + base - 0.5 * g2_tail) / g,
        (log_h2 + base + 0.5 * g2_tail) / g,
        (log_h2 + base - 0.5 * g2_tail) / g,
    )

    w = np.asarray(log_spot, dtype=float)
    g2_head = integrated_variance(params, u, t1, v)
    h_now = barrier_level(params, option, spec2, u, v)
    drift = r * (t1 - u) - 0.5 * g2_head
    mu1 = w + drift
    mu2 = 2.0 * math.log(h_now) - w + drift
    lower = math.log(h_break)

    s1 = 0.0
    s2 = 0.0
    for a_j, eta_j, nu_j, kap_j in zip(coeff_a, coeff_eta, coeff_nu, coeff_kappa):
        s1 = s1 + a_j * upsilon(nu_j, kap_j, eta_j, mu1, g2_head, lower)
        s2 = s2 + a_j * upsilon(nu_j, kap_j, eta_j, mu2, g2_head, lower)
    reflection = np.exp(2.0 * beta1 * (math.log(h_now) - w))
    out = math.exp(-r * (t1 - u)) * (s1 - reflection * s2)
    if np.ndim(out) == 0:
        return float(out)
    return out


def two_stage_zero_order(
    params: ModelParams, option: OptionSpec, spec2: BarrierSpec, state: MarketState
) -> float:
    """Zero-order price for a two-stage barrier, in closed form.

    Coincides with the single-stage closed form when both stage exponents
    agree.  Requires a regular option and a valuation time before the stage
    breakpoint.
    """
    t1, _, T, _ = _two_stage_parts(option, spec2)
    if option.strike < spec2.h1:
        raise ValueError(
            f"two-stage pricing requires strike >= terminal barrier level, "
            f"got K={option.strike}, h1={spec2.h1}"
        )
    t, x, v = state.t, state.x, state.v
    if not t < t1:
        raise ValueError(f"valuation time {t} must precede the stage breakpoint {t1}")
    h_t = barrier_level(params, option, spec2, t, v)
    if x <= h_t:
        raise ValueError(f"spot {x} must exceed the barrier level {h_t} at valuation")
    return float(_two_stage_f0_logspot(params, option, spec2, t, math.log(x), v))


def _two_stage_mixed_dxdv(
    params: ModelParams,
    option: OptionSpec,
    spec2: BarrierSpec,
    u: float,
    log_spot,
    v_u: float,
):
    """e^w * d2 f0 / dx dv for the two-stage zero order, by central differences.

    The derivative in log-spot times the one in log-vol equals the mixed
    spot/vol derivative scaled by the spot, which is exactly the factor the
    first-order integrand needs.  No closed-form coefficient table exists for
    staged barriers, so a 4-point stencil on the closed form stands in.
    """
    hx, hv = _FD_STEP_X, _FD_STEP_V
    w = np.asarray(log_spot, dtype=float)
    fpp = _two_stage_f0_logspot(params, option, spec2, u, w + hx, v_u + hv)
    fpm = _two_stage_f0_logspot(params, option, spec2, u, w + hx, v_u - hv)
    fmp = _two_stage_f0_logspot(params, option, spec2, u, w - hx, v_u + hv)
    fmm = _two_stage_f0_logspot(params, option, spec2, u, w - hx, v_u - hv)
    return (fpp - fpm - fmp + fmm) / (4.0 * hx * hv)


_Z_CUTOFF = 10.0  # standardized truncation of the spot integrals


def two_stage_first_order(
    params: ModelParams,
    option: OptionSpec,
    spec2: BarrierSpec,
    state: MarketState,
    qcfg: QuadratureConfig | None = None,
) -> float:
    """First-order coefficient for a two-stage barrier.

    Stage two reuses the single-stage closed form started at the breakpoint;
    stage one adds a time-by-space quadrature of the mixed-derivative source
    against the joint survival density.  Reduces to ``first_order_term`` when
    the stage exponents agree.
    """
    t1, beta1, T, beta2 = _two_stage_parts(option, spec2)
    if option.strike < spec2.h1:
        raise ValueError(
            f"two-stage pricing requires strike >= terminal barrier level, "
            f"got K={option.strike}, h1={spec2.h1}"
        )
    qcfg = qcfg or QuadratureConfig()
    t, x, v = state.t, state.x, state.v
    if not t < t1:
        raise ValueError(f"valuation time {t} must precede the stage breakpoint {t1}")
    h_t = barrier_level(params, option, spec2, t, v)
    if x <= h_t:
        raise ValueError(f"spot {x} must exceed the barrier level {h_t} at valuation")
    if params.rho == 0.0:
        return 0.0

    r = params.r
    theta = params.theta
    log_x = math.log(x)
    v1 = noiseless_logvol(params, t, v, t1)
    stage2_spec = BarrierSpec.single(spec2.h1, T, beta2)
    h_break = barrier_level(params, option, spec2, t1, v1)

    # survival density over the first stage, standardized: z = (y - mu1)/gamma
    def _stage1_density(z, shift: float, reflection: float):
        return norm_pdf(z) - reflection * norm_pdf(z + shift)

    # continuation value of the first-order term at the stage breakpoint;
    # each node is itself a quadrature, so relax its tolerance to what the
    # outer integral can use
    inner_qcfg = QuadratureConfig(
        rel_tol=max(qcfg.rel_tol, 1e-6),
        abs_tol=max(qcfg.abs_tol, 1e-8),
        endpoint_inset=qcfg.endpoint_inset,
        max_subdivisions=qcfg.max_subdivisions,
    )
    g1 = math.sqrt(integrated_variance(params, t, t1, v))
    drift1 = r * (t1 - t) - 0.5 * g1 * g1
    mu1_break = log_x + drift1
    mu2_break = 2.0 * math.log(h_t) - log_x + drift1
    refl_break = (h_t / x) ** (2.0 * beta1)
    shift_break = (mu1_break - mu2_break) / g1
    z_lo = max((math.log(h_break) - mu1_break) / g1, -_Z_CUTOFF)

    def continuation(z: float) -> float:
        w_spot = math.exp(mu1_break + g1 * z)
        unit, _ = _first_order_unit_rho(
            params, option, stage2_spec, MarketState(t=t1, x=w_spot, v=v1), inner_qcfg
        )
        return unit * _stage1_density(z, shift_break, refl_break)

    part1, _ = adaptive_quad(
        continuation, z_lo, _Z_CUTOFF,
        rel_tol=max(qcfg.rel_tol, 1e-6), abs_tol=max(qcfg.abs_tol, 1e-8),
        max_subdivisions=qcfg.max_subdivisions,
    )
    part1 *= math.exp(-r * (t1 - t))

    # mixed-derivative source accumulated over the first stage
    def outer(u: float) -> float:
        v_u = noiseless_logvol(params, t, v, u)
        g_tu = math.sqrt(integrated_variance(params, t, u, v))
        h_u = barrier_level(params, option, spec2, u, v_u)
        drift_u = r * (u - t) - 0.5 * g_tu * g_tu
        mu1_u = log_x + drift_u
        mu2_u = 2.0 * math.log(h_t) - log_x + drift_u
        shift_u = (mu1_u - mu2_u) / g_tu
        lo = max((math.log(h_u) - mu1_u) / g_tu, -_Z_CUTOFF)

        def inner(z: np.ndarray) -> np.ndarray:
            d2 = _two_stage_mixed_dxdv(params, option, spec2, u, mu1_u + g_tu * z, v_u)
            return d2 * _stage1_density(z, shift_u, refl_break)

        val, _ = adaptive_quad(
            inner, lo, _Z_CUTOFF, rel_tol=1e-6, abs_tol=1e-8, max_subdivisions=60,
            vectorized=True,
        )
        return math.exp(-r * (u - t)) * theta * math.exp(v_u) * val

    part2, _ = adaptive_quad(
        outer, t, t1, rel_tol=1e-6, abs_tol=1e-7, max_subdivisions=60
    )
    return params.rho * (part1 + part2)

"""Model parameters, the deterministic log-volatility flow, and barrier families.

The volatility process is e^{V_t} with

    dV = (a - (c/2) e^{2V}) dt + eps * theta dW,

so the squared volatility mean-reverts towards 2a/c.  In the small vol-of-vol
limit (eps -> 0) the log-volatility becomes a deterministic function of time,
which makes the asset a geometric Brownian motion with time-dependent
volatility.  Everything in this module lives in that deterministic limit:
the log-vol flow, its integrated variance, the exponential barrier family
that admits closed-form hitting laws, and the parameter choices that fit the
family to a constant barrier level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "MarketState",
    "BarrierSpec",
    "OptionSpec",
    "VolSensitivities",
    "noiseless_logvol",
    "integrated_variance",
    "barrier_level",
    "vol_sensitivities",
    "choose_beta",
    "choose_multistage_betas",
    "matched_single_stage",
]

_BREAKPOINT_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Risk-neutral model parameters.

    a:     mean-reversion drift of the log-volatility (per year, > 0)
    c:     volatility drag coefficient (> 0); long-run squared vol is 2a/c
    eps:   expansion parameter scaling the vol of vol (>= 0)
    rho:   correlation between the spot and volatility Brownian motions
    r:     constant risk-free rate (per year)
    theta: base vol-of-vol scale; the effective vol of vol is eps * theta
    """

    a: float
    c: float
    eps: float
    rho: float
    r: float
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not self.a > 0.0:
            raise ValueError(f"mean-reversion drift a must be positive, got {self.a}")
        if not self.c > 0.0:
            raise ValueError(f"vol-drag coefficient c must be positive, got {self.c}")
        if not self.theta > 0.0:
            raise ValueError(f"vol-of-vol scale theta must be positive, got {self.theta}")
        if self.eps < 0.0:
            raise ValueError(f"expansion parameter eps must be >= 0, got {self.eps}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"correlation rho must lie in (-1, 1), got {self.rho}")

    @property
    def invariant_sq_vol(self) -> float:
        """Long-run squared volatility 2a/c."""
        return 2.0 * self.a / self.c

    @property
    def invariant_logvol(self) -> float:
        """Log-volatility level at which the deterministic drift vanishes."""
        return 0.5 * math.log(self.invariant_sq_vol)

    @property
    def vol_of_vol(self) -> float:
        return self.eps * self.theta


@dataclass(frozen=True)
class MarketState:
    """Evaluation point: time t (years), spot x (> 0) and log-volatility v.

    The spot must sit strictly above the active barrier level; that is
    checked by the pricing routines, which know the barrier.
    """

    t: float
    x: float
    v: float

    def __post_init__(self) -> None:
        if not self.x > 0.0:
            raise ValueError(f"spot must be positive, got {self.x}")
        if self.t < 0.0:
            raise ValueError(f"valuation time must be >= 0, got {self.t}")


@dataclass(frozen=True)
class BarrierSpec:
    """Piecewise exponential barrier family.

    ``stages`` is an ordered tuple of (breakpoint, beta) pairs with strictly
    increasing breakpoints; the last breakpoint is the option maturity.  A
    one-element tuple gives the single-stage family

        h(t, v) = h1 * exp{-r (T - t) + (1 + 2 beta)/2 * g2(t, T, v)}

    where g2 is the integrated variance along the deterministic vol flow.
    Multi-stage specs chain one such family per stage, which tracks a
    constant barrier level more closely over long maturities.
    """

    h1: float
    stages: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.h1 > 0.0:
            raise ValueError(f"barrier level h1 must be positive, got {self.h1}")
        stages = tuple((float(b), float(beta)) for b, beta in self.stages)
        if not stages:
            raise ValueError("barrier spec needs at least one stage")
        breakpoints = [b for b, _ in stages]
        for lo, hi in zip(breakpoints, breakpoints[1:]):
            if not hi > lo + _BREAKPOINT_TOL:
                raise ValueError(f"stage breakpoints must be strictly increasing, got {breakpoints}")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def single(cls, h1: float, maturity: float, beta: float) -> "BarrierSpec":
        return cls(h1=h1, stages=((maturity, beta),))

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def is_single_stage(self) -> bool:
        return len(self.stages) == 1

    @property
    def beta(self) -> float:
        """Exponent of a single-stage spec."""
        if not self.is_single_stage:
            raise ValueError("beta is only defined for single-stage barrier specs")
        return self.stages[0][1]


@dataclass(frozen=True)
class OptionSpec:
    """Down-and-out call: strike K, maturity T and the knock-out barrier."""

    strike: float
    maturity: float
    barrier: BarrierSpec

    def __post_init__(self) -> None:
        if not self.strike > 0.0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        last = self.barrier.stages[-1][0]
        if abs(last - self.maturity) > _BREAKPOINT_TOL * max(1.0, self.maturity):
            raise ValueError(
                f"last barrier breakpoint ({last}) must equal the option maturity ({self.maturity})"
            )

    @property
    def is_regular(self) -> bool:
        """Regular down-and-out call: strike at or above the terminal barrier."""
        return self.strike >= self.barrier.h1


def _is_scalar(*vals) -> bool:
    for z in vals:
        if not isinstance(z, (float, int)) and np.ndim(z) != 0:
            return False
    return True


def _check_time_order(t, u) -> None:
    if _is_scalar(t, u):
        if u < t:
            raise ValueError(f"end time must be >= start time, got t={t}, u={u}")
    elif np.any(np.asarray(u) < np.asarray(t)):
        raise ValueError(f"end time must be >= start time, got t={t}, u={u}")


def _as_scalar_or_array(out):
    if np.ndim(out) == 0:
        return float(out)
    return out


def noiseless_logvol(params: ModelParams, t: float, v, u):
    """Deterministic log-volatility at time u, started from (t, v).

    Solves dV = (a - (c/2) e^{2V}) du in closed form.  Accepts numpy arrays
    for ``v`` or ``u`` (broadcasting); rejects u < t.
    """
    _check_time_order(t, u)
    a, c = params.a, params.c
    if _is_scalar(v, u):
        tau = float(u) - t
        return v + a * tau - 0.5 * math.log1p(
            (c / (2.0 * a)) * math.exp(2.0 * v) * math.expm1(2.0 * a * tau)
        )
    tau = np.asarray(u, dtype=float) - t
    growth = np.expm1(2.0 * a * tau)
    out = v + a * tau - 0.5 * np.log1p((c / (2.0 * a)) * np.exp(2.0 * np.asarray(v, dtype=float)) * growth)
    return _as_scalar_or_array(out)


def integrated_variance(params: ModelParams, t: float, u, v):
    """Integrated squared volatility along the deterministic flow from (t, v).

    Equals (1/c) log(1 + (c/2a) e^{2v} (e^{2a(u-t)} - 1)); zero at u = t and
    strictly increasing in u.  Plays the role of sigma^2 (u - t) in the
    time-dependent Black-Scholes formulas.
    """
    _check_time_order(t, u)
    a, c = params.a, params.c
    if _is_scalar(v, u):
        tau = float(u) - t
        return math.log1p((c / (2.0 * a)) * math.exp(2.0 * v) * math.expm1(2.0 * a * tau)) / c
    tau = np.asarray(u, dtype=float) - t
    growth = np.expm1(2.0 * a * tau)
    out = np.log1p((c / (2.0 * a)) * np.exp(2.0 * np.asarray(v, dtype=float)) * growth) / c
    return _as_scalar_or_array(out)


def _dgamma2_dv(params: ModelParams, t: float, u, v):
    """Partial derivative of integrated_variance(t, u, .) in the log-vol argument."""
    a, c = params.a, params.c
    if _is_scalar(v, u):
        scaled = (c / (2.0 * a)) * math.exp(2.0 * v) * math.expm1(2.0 * a * (float(u) - t))
        return (2.0 / c) * scaled / (1.0 + scaled)
    tau = np.asarray(u, dtype=float) - t
    scaled = (c / (2.0 * a)) * np.exp(2.0 * np.asarray(v, dtype=float)) * np.expm1(2.0 * a * tau)
    return (2.0 / c) * scaled / (1.0 + scaled)


def barrier_level(params: ModelParams, option: OptionSpec, spec: BarrierSpec, t: float, v):
    """Barrier level h(t, v) for a single- or multi-stage spec.

    For a multi-stage spec each stage i contributes
    (1 + 2 beta_i)/2 * g2(max(t, T_{i-1}), T_i, V_at_anchor) while t < T_i,
    with the log-vol propagated deterministically to the stage anchor.
    Returns h1 exactly at t = T.  Accepts an array of log-vols.
    """
    T = option.maturity
    if t < 0.0 or t > T + _BREAKPOINT_TOL:
        raise ValueError(f"barrier evaluation time {t} outside [0, {T}]")
    t = min(t, T)
    exponent = -params.r * (T - t)
    prev_break = None
    for i, (t_i, beta_i) in enumerate(spec.stages):
        if t >= t_i:
            prev_break = t_i
            continue
        anchor = t if (i == 0 or prev_break is None or t >= prev_break) else prev_break
        v_anchor = noiseless_logvol(params, t, v, anchor)
        exponent = exponent + 0.5 * (1.0 + 2.0 * beta_i) * integrated_variance(params, anchor, t_i, v_anchor)
        prev_break = t_i
    if _is_scalar(exponent):
        return spec.h1 * math.exp(exponent)
    return spec.h1 * np.exp(exponent)


@dataclass(frozen=True)
class VolSensitivities:
    """Log-vol derivatives used by the mixed-derivative expansion.

    All four are partials in the log-vol argument, evaluated at (u, v_u):
    d gamma(u, T, .)/dv, d log h(u, .)/dv, d h^{2+2 beta}/dv, d h^{2 beta}/dv.
    """

    dgamma_dv: float
    dlog_barrier_dv: float
    dpow_2p2b_dv: float
    dpow_2b_dv: float


def vol_sensitivities(
    params: ModelParams, option: OptionSpec, spec: BarrierSpec, u: float, v_u: float
) -> VolSensitivities:
    """Analytic partials of gamma(u, T, .) and the single-stage barrier at v_u.

    Requires u < T so that gamma(u, T, v_u) > 0.
    """
    if not spec.is_single_stage:
        raise ValueError("vol sensitivities are defined for single-stage barrier specs")
    T = option.maturity
    if u >= T:
        raise ValueError(f"sensitivities need u < maturity, got u={u}, T={T}")
    beta = spec.beta
    g2 = integrated_variance(params, u, T, v_u)
    gamma = math.sqrt(g2)
    dg2 = float(_dgamma2_dv(params, u, T, v_u))
    dgamma = dg2 / (2.0 * gamma)
    dlog_h = 0.5 * (1.0 + 2.0 * beta) * dg2
    h = barrier_level(params, option, spec, u, v_u)
    pow_2p2b = h ** (2.0 + 2.0 * beta)
    pow_2b = h ** (2.0 * beta)
    return VolSensitivities(
        dgamma_dv=dgamma,
        dlog_barrier_dv=dlog_h,
        dpow_2p2b_dv=(2.0 + 2.0 * beta) * pow_2p2b * dlog_h,
        dpow_2b_dv=2.0 * beta * pow_2b * dlog_h,
    )


def choose_beta(params: ModelParams, option: OptionSpec, t_prime: float, v_prime: float) -> float:
    """Simplest single-stage exponent matching the barrier to h1 at (t', v').

    beta = r (T - t') / g2(t', T, v') - 1/2, so that the barrier family
    evaluated at the valuation point equals its terminal level exactly.
    """
    T = option.maturity
    if t_prime >= T:
        raise ValueError(f"valuation time {t_prime} must precede maturity {T}")
    g2 = integrated_variance(params, t_prime, T, v_prime)
    return params.r * (T - t_prime) / g2 - 0.5


def choose_multistage_betas(
    params: ModelParams,
    option: OptionSpec,
    t_prime: float,
    v_prime: float,
    breakpoints: list[float],
) -> list[float]:
    """Stage exponents matching the barrier stage by stage along the vol flow.

    beta_i = r (T_i - T_{i-1}) / g2(T_{i-1}, T_i, V_{T_{i-1}}) - 1/2 with
    T_0 = t' and the log-vol propagated deterministically from (t', v').
    Breakpoints must increase strictly from above t' to the maturity.
    """
    T = option.maturity
    pts = [float(b) for b in breakpoints]
    if not pts:
        raise ValueError("need at least one breakpoint")
    if abs(pts[-1] - T) > _BREAKPOINT_TOL * max(1.0, T):
        raise ValueError(f"last breakpoint {pts[-1]} must equal the maturity {T}")
    prev = t_prime
    betas: list[float] = []
    for t_i in pts:
        if not t_i > prev + _BREAKPOINT_TOL:
            raise ValueError(f"breakpoints must increase strictly from {t_prime}, got {pts}")
        v_prev = noiseless_logvol(params, t_prime, v_prime, prev)
        g2 = integrated_variance(params, prev, t_i, v_prev)
        betas.append(params.r * (t_i - prev) / g2 - 0.5)
        prev = t_i
    return betas


def matched_single_stage(
    params: ModelParams,
    strike: float,
    maturity: float,
    h: float,
    t_prime: float,
    v_prime: float,
) -> OptionSpec:
    """Build a DOC spec whose single-stage barrier matches level h at (t', v')."""
    if t_prime >= maturity:
        raise ValueError(f"valuation time {t_prime} must precede maturity {maturity}")
    g2 = integrated_variance(params, t_prime, maturity, v_prime)
    beta = params.r * (maturity - t_prime) / g2 - 0.5
    return OptionSpec(strike=strike, maturity=maturity, barrier=BarrierSpec.single(h, maturity, beta))

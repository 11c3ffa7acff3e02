"""Gaussian special functions and probability laws for the expansion.

Contains the standard and bivariate normal CDFs, the two families of
truncated-Gaussian expectations that make the first-order integrand closed
form, the coefficient table of the mixed spot/log-vol derivative of the
zero-order price, and the joint law of the deterministic-volatility spot
together with its barrier hitting time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .model import (
    BarrierSpec,
    ModelParams,
    OptionSpec,
    barrier_level,
    integrated_variance,
    noiseless_logvol,
    vol_sensitivities,
)

__all__ = [
    "norm_cdf",
    "norm_pdf",
    "binorm_cdf",
    "psi",
    "upsilon",
    "MixedDerivCoeffs",
    "mixed_dxdv_coeffs",
    "mixed_dxdv",
    "JointLawParams",
    "joint_law_density",
    "survival_probability",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / _SQRT_2PI


def norm_cdf(z):
    """Standard normal CDF; accepts scalars or arrays, saturates in the tails."""
    out = ndtr(z)
    if np.ndim(out) == 0:
        return float(out)
    return out


def norm_pdf(z):
    """Standard normal density."""
    z = np.asarray(z, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    if np.ndim(out) == 0:
        return float(out)
    return out


# Gauss-Legendre nodes/weights (positive half) for the bivariate normal CDF;
# the rule order grows with |corr| following Drezner-Genz.
_GL6_X = (0.9324695142031522, 0.6612093864662647, 0.2386191860831970)
_GL6_W = (0.1713244923791705, 0.3607615730481384, 0.4679139345726904)
_GL12_X = (
    0.9815606342467191,
    0.9041172563704750,
    0.7699026741943050,
    0.5873179542866171,
    0.3678314989981802,
    0.1252334085114692,
)
_GL12_W = (
    0.04717533638651177,
    0.1069393259953183,
    0.1600783285433464,
    0.2031674267230659,
    0.2334925365383547,
    0.2491470458134029,
)
_GL20_X = (
    0.9931285991850949,
    0.9639719272779138,
    0.9122344282513259,
    0.8391169718222188,
    0.7463319064601508,
    0.6360536807265150,
    0.5108670019508271,
    0.3737060887154196,
    0.2277858511416451,
    0.07652652113349733,
)
_GL20_W = (
    0.01761400713915212,
    0.04060142980038694,
    0.06267204833410906,
    0.08327674157670475,
    0.1019301198172404,
    0.1181945319615184,
    0.1316886384491766,
    0.1420961093183821,
    0.1491729864726037,
    0.1527533871307259,
)


def _norm_cdf_s(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _bvn_upper_s(h: float, k: float, corr: float) -> float:
    """Scalar P(X > h, Y > k); same algorithm as the vectorized version."""
    if abs(corr) < 0.3:
        gx, gw = _GL6_X, _GL6_W
    elif abs(corr) < 0.75:
        gx, gw = _GL12_X, _GL12_W
    else:
        gx, gw = _GL20_X, _GL20_W

    hk = h * k
    if abs(corr) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(corr)
        total = 0.0
        for xi, wi in zip(gx, gw):
            for sgn in (-1.0, 1.0):
                sn = math.sin(0.5 * asr * (sgn * xi + 1.0))
                total += wi * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        return total * asr / (4.0 * math.pi) + _norm_cdf_s(-h) * _norm_cdf_s(-k)

    if corr < 0.0:
        k = -k
        hk = -hk
    a_sq = (1.0 - corr) * (1.0 + corr)
    a_ = math.sqrt(a_sq)
    bs = (h - k) ** 2
    cc = (4.0 - hk) / 8.0
    dd = (12.0 - hk) / 16.0
    asr0 = -0.5 * (bs / a_sq + hk)
    bvn = 0.0
    if asr0 > -100.0:
        bvn = a_ * math.exp(asr0) * (
            1.0 - cc * (bs - a_sq) * (1.0 - dd * bs / 5.0) / 3.0 + cc * dd * a_sq * a_sq / 5.0
        )
    if -hk < 100.0:
        b_ = math.sqrt(bs)
        sp = _SQRT_2PI * _norm_cdf_s(-b_ / a_)
        bvn -= math.exp(min(-0.5 * hk, 700.0)) * sp * b_ * (1.0 - cc * bs * (1.0 - dd * bs / 5.0) / 3.0)
    half_a = 0.5 * a_
    for xi, wi in zip(gx, gw):
        for sgn in (-1.0, 1.0):
            xs = (half_a * (sgn * xi + 1.0)) ** 2
            rs = math.sqrt(1.0 - xs)
            asr1 = -0.5 * (bs / xs + hk)
            if asr1 > -100.0:
                sp1 = 1.0 + cc * xs * (1.0 + dd * xs)
                ep = math.exp(min(-hk * (1.0 - rs) / (2.0 * (1.0 + rs)), 700.0)) / rs
                bvn += half_a * wi * math.exp(asr1) * (ep - sp1)
    bvn = -bvn / (2.0 * math.pi)
    if corr > 0.0:
        bvn += _norm_cdf_s(-max(h, k))
    else:
        bvn = -bvn + max(0.0, _norm_cdf_s(-h) - _norm_cdf_s(-k))
    return bvn


def _bvn_upper(h, k, corr: float):
    """P(X > h, Y > k) for standard bivariate normals with correlation corr.

    Gauss-Legendre integration of the Drezner-Genz type: the tetrachoric
    integral over the correlation for moderate |corr|, and the expansion
    around the singular |corr| = 1 limit otherwise.  Vectorized over h, k.
    """
    if abs(corr) < 0.3:
        gx, gw = _GL6_X, _GL6_W
    elif abs(corr) < 0.75:
        gx, gw = _GL12_X, _GL12_W
    else:
        gx, gw = _GL20_X, _GL20_W
    x = np.asarray(gx)
    w = np.asarray(gw)

    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    hk = h * k

    if abs(corr) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(corr)
        sn = np.sin(0.5 * asr * np.concatenate([1.0 - x, 1.0 + x]))
        wq = np.concatenate([w, w])
        expo = (np.multiply.outer(hk, sn) - hs[..., None]) / (1.0 - sn * sn)
        bvn = np.exp(expo) @ wq
        return bvn * asr / (4.0 * math.pi) + ndtr(-h) * ndtr(-k)

    # |corr| in [0.925, 1): expand around the perfectly correlated limit
    if corr < 0.0:
        k = -k
        hk = -hk
    a_sq = (1.0 - corr) * (1.0 + corr)
    a_ = math.sqrt(a_sq)
    bs = (h - k) ** 2
    cc = (4.0 - hk) / 8.0
    dd = (12.0 - hk) / 16.0
    asr0 = -0.5 * (bs / a_sq + hk)
    bvn = np.where(
        asr0 > -100.0,
        a_ * np.exp(asr0) * (1.0 - cc * (bs - a_sq) * (1.0 - dd * bs / 5.0) / 3.0 + cc * dd * a_sq * a_sq / 5.0),
        0.0,
    )
    b_ = np.sqrt(bs)
    sp = _SQRT_2PI * ndtr(-b_ / a_)
    bvn = bvn - np.where(
        -hk < 100.0,
        np.exp(np.clip(-0.5 * hk, None, 700.0)) * sp * b_ * (1.0 - cc * bs * (1.0 - dd * bs / 5.0) / 3.0),
        0.0,
    )
    half_a = 0.5 * a_
    for xi, wi in zip(gx, gw):
        for sgn in (-1.0, 1.0):
            xs = (half_a * (sgn * xi + 1.0)) ** 2
            rs = math.sqrt(1.0 - xs)
            asr1 = -0.5 * (bs / xs + hk)
            sp1 = 1.0 + cc * xs * (1.0 + dd * xs)
            ep = np.exp(np.clip(-hk * (1.0 - rs) / (2.0 * (1.0 + rs)), None, 700.0)) / rs
            bvn = bvn + np.where(asr1 > -100.0, half_a * wi * np.exp(np.clip(asr1, -745.0, 0.0)) * (ep - sp1), 0.0)
    bvn = -bvn / (2.0 * math.pi)
    if corr > 0.0:
        bvn = bvn + ndtr(-np.maximum(h, k))
    else:
        bvn = -bvn + np.maximum(0.0, ndtr(-h) - ndtr(-k))
    return bvn


def binorm_cdf(x, y, corr: float):
    """Bivariate standard normal CDF P(X <= x, Y <= y) with correlation corr.

    Absolute accuracy around 1e-14; vectorized over x and y (corr scalar).
    Rejects |corr| >= 1.
    """
    if not abs(corr) < 1.0:
        raise ValueError(f"correlation must lie in (-1, 1), got {corr}")
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        xs = min(max(float(x), -40.0), 40.0)
        ys = min(max(float(y), -40.0), 40.0)
        return min(max(_bvn_upper_s(-xs, -ys, float(corr)), 0.0), 1.0)
    x = np.clip(np.asarray(x, dtype=float), -40.0, 40.0)
    y = np.clip(np.asarray(y, dtype=float), -40.0, 40.0)
    return np.clip(_bvn_upper(-x, -y, corr), 0.0, 1.0)


def _check_sigma2(sigma2) -> None:
    if isinstance(sigma2, (float, int)):
        if sigma2 <= 0.0:
            raise ValueError(f"variance must be positive, got {sigma2}")
    elif np.any(np.asarray(sigma2) <= 0.0):
        raise ValueError(f"variance must be positive, got {sigma2}")


def _all_scalar(*vals) -> bool:
    for z in vals:
        if not isinstance(z, (float, int)) and np.ndim(z) != 0:
            return False
    return True


def _psi_scalar(ell: int, nu: float, kappa: float, eta: float,
                mu: float, sigma2: float, lower: float) -> float:
    sigma = math.sqrt(sigma2)
    denom = 1.0 + sigma2 * nu * nu
    shift = nu * kappa - eta
    m = (mu - sigma2 * shift) / denom
    s2 = sigma2 / denom
    s = math.sqrt(s2)
    log_zeta = -0.5 * ((mu * mu * nu * nu + 2.0 * mu * shift - sigma2 * shift * shift) / denom + kappa * kappa)
    zeta = _INV_SQRT_2PI * math.exp(log_zeta)
    if ell == 0:
        c1, c2, c3 = 0.0, 0.0, 1.0
    elif ell == 1:
        c1, c2, c3 = 0.0, nu, kappa
    else:
        c1, c2, c3 = nu * nu, 2.0 * nu * kappa, kappa * kappa
    z = (m - lower) / s
    big_n = _norm_cdf_s(z)
    small_n = _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    return (
        zeta * s2 / sigma * c1 * (s * big_n + (lower - m) * small_n)
        + zeta * s2 / sigma * (c2 + 2.0 * c1 * m) * small_n
        + zeta * s / sigma * (c3 + c2 * m + c1 * m * m) * big_n
    )


def _upsilon_scalar(nu: float, kappa: float, eta: float,
                    mu: float, sigma2: float, lower: float) -> float:
    sigma = math.sqrt(sigma2)
    denom = 1.0 + sigma2 * nu * nu
    q1 = 1.0 / (2.0 * denom)
    q2 = (kappa + nu * (mu + sigma2 * eta)) / denom
    q3 = ((kappa + mu * nu) ** 2 - 2.0 * eta * (mu - kappa * nu * sigma2) - eta * eta * sigma2) / (2.0 * denom)
    q4 = -sigma * nu / math.sqrt(denom)
    q5 = (mu + sigma2 * (eta - kappa * nu) - lower * denom) / math.sqrt(sigma2 * denom)
    corr = -q4 / math.sqrt(2.0 * q1 + q4 * q4)
    arg1 = min(max(q2 / math.sqrt(2.0 * q1), -40.0), 40.0)
    arg2 = min(max((2.0 * q1 * q5 - q2 * q4) / math.sqrt(2.0 * q1 * (2.0 * q1 + q4 * q4)), -40.0), 40.0)
    n2 = min(max(_bvn_upper_s(-arg1, -arg2, corr), 0.0), 1.0)
    return math.exp(q2 * q2 / (4.0 * q1) - q3) * n2


def psi(ell: int, nu, kappa, eta, mu, sigma2, lower):
    """E[(nu W + kappa)^ell e^{eta W} n(nu W + kappa) 1{W > lower}], W ~ N(mu, sigma2).

    Closed form for ell in {0, 1, 2}.  The Gaussian prefactor is assembled in
    log space so large |eta| * sigma does not overflow prematurely.
    """
    if ell not in (0, 1, 2):
        raise ValueError(f"ell must be 0, 1 or 2, got {ell}")
    _check_sigma2(sigma2)
    if _all_scalar(nu, kappa, eta, mu, sigma2, lower):
        return _psi_scalar(ell, float(nu), float(kappa), float(eta),
                           float(mu), float(sigma2), float(lower))
    nu = np.asarray(nu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    eta = np.asarray(eta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    sigma = np.sqrt(sigma2)

    denom = 1.0 + sigma2 * nu * nu
    shift = nu * kappa - eta
    m = (mu - sigma2 * shift) / denom
    s2 = sigma2 / denom
    s = np.sqrt(s2)
    # exponent of the collapsed Gaussian prefactor, written without the
    # catastrophic mu^2/sigma^2 cancellation
    log_zeta = -0.5 * ((mu * mu * nu * nu + 2.0 * mu * shift - sigma2 * shift * shift) / denom + kappa * kappa)
    zeta = _INV_SQRT_2PI * np.exp(log_zeta)

    if ell == 0:
        c1, c2, c3 = 0.0, 0.0, 1.0
    elif ell == 1:
        c1, c2, c3 = 0.0, nu, kappa
    else:
        c1, c2, c3 = nu * nu, 2.0 * nu * kappa, kappa * kappa

    z = (m - np.asarray(lower, dtype=float)) / s
    big_n = ndtr(z)
    small_n = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    out = (
        zeta * s2 / sigma * c1 * (s * big_n + (np.asarray(lower) - m) * small_n)
        + zeta * s2 / sigma * (c2 + 2.0 * c1 * m) * small_n
        + zeta * s / sigma * (c3 + c2 * m + c1 * m * m) * big_n
    )
    if np.ndim(out) == 0:
        return float(out)
    return out


def upsilon(nu, kappa, eta, mu, sigma2, lower):
    """E[e^{eta W} N(nu W + kappa) 1{W > lower}] for W ~ N(mu, sigma2).

    Closed form in terms of the bivariate normal CDF; vectorized over mu,
    kappa and lower for fixed (nu, sigma2) so the implied correlation stays
    scalar.
    """
    _check_sigma2(sigma2)
    if _all_scalar(nu, kappa, eta, mu, sigma2, lower):
        return _upsilon_scalar(float(nu), float(kappa), float(eta),
                               float(mu), float(sigma2), float(lower))
    nu = float(nu)
    eta = np.asarray(eta, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma2 = float(sigma2)
    sigma = math.sqrt(sigma2)

    denom = 1.0 + sigma2 * nu * nu
    q1 = 1.0 / (2.0 * denom)
    q2 = (kappa + nu * (mu + sigma2 * eta)) / denom
    q3 = ((kappa + mu * nu) ** 2 - 2.0 * eta * (mu - kappa * nu * sigma2) - eta * eta * sigma2) / (2.0 * denom)
    q4 = -sigma * nu / math.sqrt(denom)
    q5 = (mu + sigma2 * (eta - kappa * nu) - np.asarray(lower, dtype=float) * denom) / math.sqrt(sigma2 * denom)

    corr = -q4 / math.sqrt(2.0 * q1 + q4 * q4)
    arg1 = q2 / math.sqrt(2.0 * q1)
    arg2 = (2.0 * q1 * q5 - q2 * q4) / math.sqrt(2.0 * q1 * (2.0 * q1 + q4 * q4))
    out = np.exp(q2 * q2 / (4.0 * q1) - q3) * binorm_cdf(arg1, arg2, corr)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class MixedDerivCoeffs:
    """Coefficients of the mixed spot/log-vol derivative of the zero-order price.

    Written at integration time u with log-spot w, the derivative
    e^w * d2 f0 / dx dv equals

        sum_j  a[j] e^{eta[j] w} N(nu[j] w + kappa[j])
             + sum_l b[j, l] (nu[j] w + kappa[j])^l e^{eta[j] w} n(.)

    with three terms j and powers l = 0, 1, 2.  ``strike_barrier_gap`` is the
    shared scalar 1 - K / max(K, h1); it vanishes for regular options and
    kills every term it multiplies.
    """

    a: np.ndarray
    eta: np.ndarray
    b: np.ndarray
    nu: np.ndarray
    kappa: np.ndarray
    strike_barrier_gap: float


def mixed_dxdv_coeffs(
    params: ModelParams, option: OptionSpec, spec: BarrierSpec, u: float, v_u: float
) -> MixedDerivCoeffs:
    """Populate the mixed-derivative coefficients at (u, v_u); requires u < T."""
    T = option.maturity
    if u >= T:
        raise ValueError(f"coefficients need u < maturity, got u={u}, T={T}")
    K = option.strike
    beta = spec.beta
    kh = max(K, spec.h1)
    gap = 1.0 - K / kh

    g2 = integrated_variance(params, u, T, v_u)
    g = math.sqrt(g2)
    h = barrier_level(params, option, spec, u, v_u)
    sens = vol_sensitivities(params, option, spec, u, v_u)
    dgam = sens.dgamma_dv
    dlogh = sens.dlog_barrier_dv
    pow_2p2b = h ** (2.0 + 2.0 * beta)
    pow_2b = h ** (2.0 * beta)
    k_disc = K * math.exp(-params.r * (T - u))
    one2b = 1.0 + 2.0 * beta

    a = np.array(
        [
            0.0,
            one2b * sens.dpow_2p2b_dv,
            -2.0 * beta * k_disc * sens.dpow_2b_dv,
        ]
    )
    eta = np.array([1.0, -one2b, -2.0 * beta])
    nu = np.array([1.0 / g, -1.0 / g, -1.0 / g])
    base = params.r * (T - u)
    kappa = np.array(
        [
            (-math.log(kh) + base + 0.5 * g2) / g,
            (math.log(h * h / kh) + base + 0.5 * g2) / g,
            (math.log(h * h / kh) + base - 0.5 * g2) / g,
        ]
    )
    b = np.array(
        [
            [
                dgam * (1.0 - gap / g2),
                -dgam * (1.0 + gap) / g,
                dgam * gap / g2,
            ],
            [
                -gap * dgam * pow_2p2b / g2
                + one2b * pow_2p2b * (dgam + 2.0 / g * dlogh)
                + gap / g * sens.dpow_2p2b_dv,
                -(pow_2p2b / g) * (gap * (dgam + 2.0 / g * dlogh) + one2b * dgam),
                pow_2p2b * dgam * gap / g2,
            ],
            [
                2.0 * beta * k_disc * pow_2b * (dgam - 2.0 / g * dlogh),
                2.0 * beta * k_disc * pow_2b * dgam / g,
                0.0,
            ],
        ]
    )
    return MixedDerivCoeffs(a=a, eta=eta, b=b, nu=nu, kappa=kappa, strike_barrier_gap=gap)


def mixed_dxdv(coeffs: MixedDerivCoeffs, log_spot):
    """Evaluate e^w * d2 f0 / dx dv at log-spot w from precomputed coefficients."""
    w = np.asarray(log_spot, dtype=float)
    out = np.zeros_like(w)
    for j in range(3):
        z = coeffs.nu[j] * w + coeffs.kappa[j]
        grow = np.exp(coeffs.eta[j] * w)
        term = coeffs.a[j] * ndtr(z)
        dens = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        term = term + (coeffs.b[j, 0] + coeffs.b[j, 1] * z + coeffs.b[j, 2] * z * z) * dens
        out = out + grow * term
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class JointLawParams:
    """Joint law of the deterministic-vol spot at time u and barrier survival.

    Started from spot x at time t with log-vol v; ``barrier_start`` and
    ``barrier_end`` are the barrier levels at t and u along the
    deterministic vol flow, beta the (stage-local) barrier exponent, gamma
    the square root of the integrated variance over [t, u].
    """

    t: float
    u: float
    x: float
    v: float
    barrier_start: float
    barrier_end: float
    beta: float
    gamma: float
    rate: float

    def __post_init__(self) -> None:
        if not self.x > self.barrier_start:
            raise ValueError(
                f"spot {self.x} must exceed the barrier level {self.barrier_start} at the start time"
            )
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @classmethod
    def from_model(
        cls,
        params: ModelParams,
        option: OptionSpec,
        spec: BarrierSpec,
        t: float,
        u: float,
        x: float,
        v: float,
    ) -> "JointLawParams":
        """Build the law of (S_u, survival) for a single-stage barrier from (t, x, v)."""
        if not spec.is_single_stage:
            raise ValueError("joint law parameters require a single-stage barrier spec")
        v_u = noiseless_logvol(params, t, v, u)
        return cls(
            t=t,
            u=u,
            x=x,
            v=v,
            barrier_start=barrier_level(params, option, spec, t, v),
            barrier_end=barrier_level(params, option, spec, u, v_u),
            beta=spec.beta,
            gamma=math.sqrt(integrated_variance(params, t, u, v)),
            rate=params.r,
        )

    @property
    def mu1(self) -> float:
        return math.log(self.x) + self.rate * (self.u - self.t) - 0.5 * self.gamma**2

    @property
    def mu2(self) -> float:
        x2 = self.barrier_start**2 / self.x
        return math.log(x2) + self.rate * (self.u - self.t) - 0.5 * self.gamma**2

    @property
    def reflection_weight(self) -> float:
        return (self.barrier_start / self.x) ** (2.0 * self.beta)


def joint_law_density(p: JointLawParams, w):
    """Defective density of (S_u in dw, no barrier touch before u).

    Zero at and below the barrier level at u; integrates over its support to
    the survival probability.  Vectorized over w.
    """
    w = np.asarray(w, dtype=float)
    lw = np.log(np.where(w > 0.0, w, np.nan))
    g = p.gamma
    dens = (
        norm_pdf((lw - p.mu1) / g) - p.reflection_weight * norm_pdf((lw - p.mu2) / g)
    ) / (g * w)
    out = np.where(w > p.barrier_end, dens, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def survival_probability(p: JointLawParams, w=None):
    """P(S_u > w, no barrier touch before u); defaults to the full survival mass."""
    if w is None:
        w = p.barrier_end
    lw = np.log(np.asarray(w, dtype=float))
    g = p.gamma
    out = ndtr(-(lw - p.mu1) / g) - p.reflection_weight * ndtr(-(lw - p.mu2) / g)
    if np.ndim(out) == 0:
        return float(out)
    return out

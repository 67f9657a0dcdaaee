"""The polynomial Bregman (beta-) divergence family and its Gaussian closed forms.

The divergence between a nominal density f and a perturbation g is the
expectation, under f, of the scalar convex function G applied to the
likelihood ratio E = g/f:

    lam > 0:  G(E) = (1/lam) E^(lam+1) - ((lam+1)/lam) E + 1
    lam = 0:  G(E) = E log E - E + 1        (Kullback-Leibler limit)

lam = 0 is admitted as a first-class KL mode everywhere rather than asking
callers to take numerical limits.

The generator's density weighting (each point re-scaled by f(x)^{-lam}) is
folded into G; no separate weight-function evaluation exists anywhere in
the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import gammaln

from .model import NominalModel, sample_model


@dataclass(frozen=True)
class DivergenceBall:
    """Ambiguity ball configuration: exponent lam >= 0 and radius eta >= 0.

    lam = 0 selects the KL mode; eta = 0 collapses the ball to the nominal
    distribution alone (no robustification).
    """

    lam: float
    eta: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError("lam must be finite and >= 0")
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValueError("eta must be finite and >= 0")

    @property
    def is_kl(self) -> bool:
        return self.lam == 0.0


@dataclass(frozen=True)
class MCEstimate:
    """Monte-Carlo estimate with its standard error."""

    estimate: float
    std_error: float


def generator_F(z, lam: float):
    """Convex generator F(z) = (z^(lam+1) - (lam+1) z) / lam for z > 0.

    Evaluated in the cancellation-free form z*expm1(lam*log z)/lam - z,
    which converges to z log z - z as lam -> 0.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("generator_F requires z > 0")
    if lam <= 0:
        raise ValueError("generator_F requires lam > 0")
    out = z * np.expm1(lam * np.log(z)) / lam - z
    return float(out) if out.ndim == 0 else out


def scalar_G(e, lam: float):
    """Pointwise divergence integrand G(e); G(1) = 0 and G >= 0.

    lam = 0 gives the KL integrand e log e - e + 1.
    """
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0):
        raise ValueError("scalar_G requires e > 0")
    loge = np.log(e)
    if lam == 0.0:
        out = e * loge - e + 1.0
    else:
        out = e * np.expm1(lam * loge) / lam - e + 1.0
    return float(out) if out.ndim == 0 else out


def _G_from_log(loge: np.ndarray, lam: float) -> np.ndarray:
    # Same as scalar_G but taking log-ratios; exponentiation happens only here.
    e = np.exp(loge)
    if lam == 0.0:
        return e * loge - e + 1.0
    return e * np.expm1(lam * loge) / lam - e + 1.0


def divergence_mc(draws: np.ndarray, ratio: Callable[[np.ndarray], np.ndarray],
                  lam: float) -> MCEstimate:
    """Monte-Carlo divergence estimate mean(G(ratio(x))) over draws from f.

    ``ratio`` evaluates the likelihood ratio g/f per draw; all values must be
    positive and finite.
    """
    values = np.asarray(ratio(np.asarray(draws, dtype=float)), dtype=float)
    if values.ndim != 1 or values.shape[0] != np.shape(draws)[0]:
        raise ValueError("ratio must return one value per draw")
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise ValueError("ratio values must be positive and finite")
    g = scalar_G(values, lam)
    g = np.atleast_1d(g)
    n = g.shape[0]
    return MCEstimate(estimate=float(g.mean()),
                      std_error=float(g.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0)


def _chol_quad(chol_factor_tuple, v: np.ndarray) -> float:
    # v' M^{-1} v through the Cholesky factorization of M
    return float(v @ cho_solve(chol_factor_tuple, v))


def divergence_gaussian(mu1, Sigma1, mu2, Sigma2, lam: float) -> float:
    """Closed-form divergence between two multivariate normals.

    Valid when ((lam+1) Sigma2^{-1} - lam Sigma1^{-1}) is positive definite;
    outside that region a ValueError is raised.  All matrix inversions go
    through Cholesky factorizations.
    """
    if lam <= 0:
        raise ValueError("divergence_gaussian requires lam > 0 (use the KL mode helpers for lam=0)")
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    S1 = np.asarray(Sigma1, dtype=float)
    S2 = np.asarray(Sigma2, dtype=float)
    d = mu1.size
    c1 = cho_factor(S1, lower=True)
    c2 = cho_factor(S2, lower=True)
    eye = np.eye(d)
    inv1 = cho_solve(c1, eye)
    inv2 = cho_solve(c2, eye)
    M = (lam + 1.0) * inv2 - lam * inv1          # = Sigma_tilde^{-1}
    try:
        cM = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "outside validity region: (lam+1)*Sigma2^-1 - lam*Sigma1^-1 "
            "is not positive definite"
        ) from exc
    logdet1 = 2.0 * np.log(np.diag(c1[0])).sum()
    logdet2 = 2.0 * np.log(np.diag(c2[0])).sum()
    logdet_tilde = -2.0 * np.log(np.diag(cM)).sum()

    q1 = _chol_quad(c1, mu1)
    q2 = _chol_quad(c2, mu2)
    rhs = (lam + 1.0) * (inv2 @ mu2) - lam * (inv1 @ mu1)
    # mu_tilde' Sigma_tilde^{-1} mu_tilde = rhs' M^{-1} rhs
    y = solve_triangular(cM, rhs, lower=True)
    q_tilde = float(y @ y)

    log_pref = 0.5 * ((lam + 1.0) * (logdet1 - logdet2) + logdet_tilde - logdet1)
    log_exp = 0.5 * (-(lam + 1.0) * q2 + lam * q1 + q_tilde)
    return (np.exp(log_pref + log_exp) - 1.0) / lam


def divergence_gaussian_equal_cov(mu1, mu2, Sigma, lam: float) -> float:
    """Equal-covariance special case.

    lam > 0: (1/lam) * (exp(lam(lam+1)/2 * maha2) - 1) with
    maha2 = (mu2-mu1)' Sigma^{-1} (mu2-mu1); the lam = 0 KL mode returns the
    limit maha2 / 2 (half the squared Mahalanobis distance).
    """
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    c = cho_factor(np.asarray(Sigma, dtype=float), lower=True)
    maha2 = _chol_quad(c, mu2 - mu1)
    if lam == 0.0:
        return 0.5 * maha2
    return np.expm1(lam * (lam + 1.0) / 2.0 * maha2) / lam


def k_from_eta(eta: float, lam: float, mu1, Sigma1, sign: str = "-") -> float:
    """Mean-scaling factor k with divergence(N(mu1,S), N(k mu1,S)) = eta.

    k = 1 +/- sqrt( log(eta*lam + 1) / (lam(lam+1)/2 * mu1' Sigma1^{-1} mu1) ).
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if lam <= 0:
        raise ValueError("k_from_eta requires lam > 0")
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    mu1 = np.asarray(mu1, dtype=float)
    c = cho_factor(np.asarray(Sigma1, dtype=float), lower=True)
    quad = _chol_quad(c, mu1)
    if quad <= 0:
        raise ValueError("mu1' Sigma1^{-1} mu1 must be positive")
    root = np.sqrt(np.log1p(eta * lam) / (lam * (lam + 1.0) / 2.0 * quad))
    return 1.0 + root if sign == "+" else 1.0 - root


def log_density(model: NominalModel, x: np.ndarray) -> np.ndarray:
    """Pointwise log density of a gaussian or student_t model."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dev = x - model.mean
    chol = model._chol
    half = solve_triangular(chol, dev.T, lower=True).T
    quad = np.einsum("ij,ij->i", half, half)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    d = model.dim
    if model.kind == "gaussian":
        return -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
    if model.kind == "student_t":
        nu = model.dof
        const = (gammaln((d + nu) / 2.0) - gammaln(nu / 2.0)
                 - 0.5 * d * np.log(np.pi * nu) - 0.5 * logdet)
        return const - 0.5 * (d + nu) * np.log1p(quad / nu)
    raise ValueError("log_density requires a gaussian or student_t model")


def eta_from_ratio_mc(nominal: NominalModel, actual: NominalModel, lam: float,
                      n: int, seed: int) -> MCEstimate:
    """Monte-Carlo divergence radius between two parametric models.

    Draws from the nominal model and averages G(g/f) using the analytic
    log-density ratio; the ratio is kept in log space and exponentiated only
    inside G, so heavy-tailed ratios cannot overflow prematurely.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    draws = sample_model(nominal, n, seed)
    logratio = log_density(actual, draws) - log_density(nominal, draws)
    if np.all(logratio == 0.0):
        return MCEstimate(estimate=0.0, std_error=0.0)
    scale = lam + 1.0 if lam > 0 else 1.0
    if np.max(scale * logratio) > 700.0:
        raise OverflowError(
            "density ratio overflows the divergence integrand; "
            "a smaller lam keeps the estimate finite"
        )
    g = _G_from_log(logratio, lam)
    return MCEstimate(estimate=float(g.mean()),
                      std_error=float(g.std(ddof=1) / np.sqrt(n)))

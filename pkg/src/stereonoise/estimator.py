"""Joint maximum-likelihood estimation of the power-law range-error model.

Each measurement z_i is modeled as N(zbar_i, (scale * zbar_i**exponent)**2)
with the per-pixel mean zbar_i treated as the true range. For a fixed
exponent the maximizing scale has a closed form, so the 2-D problem reduces
to a 1-D root-solve of the profile score in the exponent. Standard errors
come from the observed information (negative Hessian) at the optimum.

With w_i = r_i**2 * zbar_i**(-2*exponent), r_i = z_i - zbar_i, the sums

    S0 = sum(w_i),  S1 = sum(w_i * ln zbar_i),  S2 = sum(w_i * ln^2 zbar_i)

give scale(exponent) = sqrt(S0/N), profile score N*S1/S0 - sum(ln zbar_i),
and the Hessian in closed form. The score is monotone non-increasing
(Cauchy-Schwarz on S2*S0 >= S1**2), so any sign change brackets the unique
root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateDataError, DomainError, NoRootError, SaddleError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

DEFAULT_BRACKET = (0.0, 5.0)
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class FitInput:
    """Measurement pairs (z, zbar) with zbar the per-pixel mean range.

    Requires at least 10 pairs unless allow_small is set (used by unit tests
    exercising the closed-form pieces on tiny inputs).
    """

    z: np.ndarray
    zbar: np.ndarray

    def __init__(self, z, zbar, allow_small: bool = False):
        z = np.asarray(z, dtype=float)
        zbar = np.asarray(zbar, dtype=float)
        if z.shape != zbar.shape or z.ndim != 1:
            raise DomainError("z and zbar must be 1-D arrays of equal length")
        if not allow_small and z.size < 10:
            raise DomainError(f"need at least 10 pairs, got {z.size}")
        if z.size < 1:
            raise DomainError("need at least one pair")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(zbar))):
            raise DomainError("pairs must be finite")
        if np.any(zbar <= 0):
            raise DomainError("all zbar must be > 0")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "zbar", zbar)

    def __len__(self) -> int:
        return self.z.size

    def restrict(self, z_lo: float, z_hi: float) -> "FitInput":
        """Keep pairs whose zbar lies in [z_lo, z_hi]."""
        keep = (self.zbar >= z_lo) & (self.zbar <= z_hi)
        return FitInput(self.z[keep], self.zbar[keep], allow_small=True)


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted power law with Cramér-Rao standard errors.

    hessian holds the second derivatives of the log-likelihood at the
    optimum in (scale, exponent) order; the standard errors are the square
    roots of the diagonal of inv(-hessian).
    """

    scale: float
    exponent: float
    se_scale: float
    se_exponent: float
    log_likelihood: float
    hessian: np.ndarray
    converged: bool
    data_range: tuple[float, float]
    n_samples: int


def _sums(data: FitInput, exponent: float):
    r2 = (data.z - data.zbar) ** 2
    ln = np.log(data.zbar)
    w = r2 * np.exp(-2.0 * exponent * ln)
    return float(w.sum()), float((w * ln).sum()), float((w * ln * ln).sum()), ln


def scale_for_exponent(data: FitInput, exponent: float) -> float:
    """Closed-form maximizing scale for a fixed exponent: sqrt(mean(w))."""
    if not np.isfinite(exponent):
        raise DomainError("exponent must be finite")
    s0, _, _, _ = _sums(data, exponent)
    if s0 <= 0.0:
        raise DegenerateDataError("all residuals are zero; scale would vanish")
    return float(np.sqrt(s0 / len(data)))


def exponent_score(data: FitInput, exponent: float) -> float:
    """Profile score d ell / d exponent with the scale profiled out."""
    s0, s1, _, ln = _sums(data, exponent)
    if s0 <= 0.0:
        raise DegenerateDataError("all residuals are zero")
    return len(data) * s1 / s0 - float(ln.sum())


def log_likelihood(data: FitInput, scale: float, exponent: float) -> float:
    """Gaussian log-likelihood of the pairs under sigma = scale * zbar**exponent."""
    if scale <= 0:
        raise DomainError("scale must be > 0")
    s0, _, _, ln = _sums(data, exponent)
    n = len(data)
    return float(
        -n * _LOG_SQRT_2PI
        - n * np.log(scale)
        - exponent * ln.sum()
        - s0 / (2.0 * scale**2)
    )


def hessian_at(data: FitInput, scale: float, exponent: float) -> np.ndarray:
    """Analytic Hessian of the log-likelihood at (scale, exponent)."""
    if scale <= 0:
        raise DomainError("scale must be > 0")
    s0, s1, s2, _ = _sums(data, exponent)
    n = len(data)
    k = scale
    h_kk = n / k**2 - 3.0 * s0 / k**4
    h_kl = -2.0 * s1 / k**3
    h_ll = -2.0 * s2 / k**2
    return np.array([[h_kk, h_kl], [h_kl, h_ll]])


def _check_identifiable(data: FitInput):
    if np.all(data.zbar == data.zbar[0]):
        raise DegenerateDataError("all zbar equal: exponent is unidentifiable")
    if np.count_nonzero(data.z != data.zbar) == 0:
        raise DegenerateDataError("all residuals are zero")


def fit_power_law(
    data: FitInput,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    data_range: tuple[float, float] | None = None,
) -> PowerLawFit:
    """Jointly fit (scale, exponent) by profile-likelihood root finding.

    The exponent solves exponent_score == 0 inside the bracket (the score
    must change sign there), the scale follows in closed form, and the
    observed information at the optimum must be positive definite.

    Raises NoRootError when the score does not change sign on the bracket,
    SaddleError when the critical point is not a maximum, and
    DegenerateDataError for unidentifiable inputs.
    """
    lo, hi = bracket
    if not lo < hi:
        raise DomainError("bracket must satisfy lo < hi")
    if data_range is not None:
        data = data.restrict(*data_range)
        if len(data) < 10:
            raise DegenerateDataError(
                f"only {len(data)} pairs inside data range {data_range}"
            )
    _check_identifiable(data)

    g_lo = exponent_score(data, lo)
    g_hi = exponent_score(data, hi)
    if g_lo == 0.0:
        exponent = lo
    elif g_hi == 0.0:
        exponent = hi
    elif np.sign(g_lo) == np.sign(g_hi):
        raise NoRootError(
            f"profile score has no sign change on [{lo}, {hi}] "
            f"(score {g_lo:.3g} -> {g_hi:.3g})"
        )
    else:
        exponent = float(brentq(lambda lam: exponent_score(data, lam), lo, hi, xtol=tol))

    scale = scale_for_exponent(data, exponent)
    hess = hessian_at(data, scale, exponent)
    info = -hess
    # 2x2 positive definiteness via leading minors
    if not (info[0, 0] > 0 and np.linalg.det(info) > 0):
        raise SaddleError("observed information is not positive definite")
    cov = np.linalg.inv(info)
    rng_lo = float(data.zbar.min()) if data_range is None else float(data_range[0])
    rng_hi = float(data.zbar.max()) if data_range is None else float(data_range[1])
    return PowerLawFit(
        scale=scale,
        exponent=exponent,
        se_scale=float(np.sqrt(cov[0, 0])),
        se_exponent=float(np.sqrt(cov[1, 1])),
        log_likelihood=log_likelihood(data, scale, exponent),
        hessian=hess,
        converged=True,
        data_range=(rng_lo, rng_hi),
        n_samples=len(data),
    )

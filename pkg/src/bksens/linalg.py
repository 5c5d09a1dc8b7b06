"""Dense least-squares primitives shared by every estimator.

All routines are pure functions of ndarray inputs. Vectors may be passed as
1-D arrays; they are treated as single columns. Sample covariances use the
n-1 divisor throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateResponse,
    DimensionMismatch,
    NegativeEigenvalue,
    NotSymmetric,
    RankDeficient,
    SingularCovariance,
)

RANK_RTOL = 1e-10
PSD_TOL = 1e-10


def as_matrix(x) -> np.ndarray:
    """Return ``x`` as a 2-D float array, promoting 1-D input to one column."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f"expected 1-D or 2-D array, got ndim={x.ndim}")
    return x


def add_intercept(x: np.ndarray | None, n: int | None = None) -> np.ndarray:
    """Prepend a column of ones to ``x`` (or return just the intercept)."""
    if x is None:
        if n is None:
            raise DimensionMismatch("need n when x is None")
        return np.ones((n, 1))
    x = as_matrix(x)
    return np.column_stack([np.ones(x.shape[0]), x])


@dataclass(frozen=True)
class LsFit:
    """Sample least-squares fit: response = design @ coefficients + residuals."""

    coefficients: np.ndarray  # (d, k)
    fitted: np.ndarray        # (n, k)
    residuals: np.ndarray     # (n, k)


def _check_full_rank(design: np.ndarray, what: str = "design") -> None:
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(f"{what} is numerically rank deficient "
                            f"(smallest/largest singular value = {sv[-1]:.3e}/{sv[0]:.3e})")


def ols_fit(response, design) -> LsFit:
    """Least squares of ``response`` on ``design`` (no intercept added here).

    Raises RankDeficient if the design is numerically singular and
    DimensionMismatch if the row counts differ.
    """
    y = as_matrix(response)
    x = as_matrix(design)
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"row counts differ: {y.shape[0]} vs {x.shape[0]}")
    _check_full_rank(x)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    fitted = x @ coef
    return LsFit(coefficients=coef, fitted=fitted, residuals=y - fitted)


def residualize(target, controls) -> np.ndarray:
    """Residuals of ``target`` after regressing out ``controls``."""
    return ols_fit(target, controls).residuals


def sample_cov(x, y=None) -> np.ndarray:
    """Sample covariance (divisor n-1) of columns of ``x`` with columns of ``y``."""
    x = as_matrix(x)
    y = x if y is None else as_matrix(y)
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch("row counts differ in sample_cov")
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    return xc.T @ yc / (n - 1)


def _check_symmetric(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim == 0:
        s = s.reshape(1, 1)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {s.shape}")
    scale = max(np.abs(s).max(), 1.0)
    if np.abs(s - s.T).max() > 1e-8 * scale:
        raise NotSymmetric("matrix is not symmetric")
    return 0.5 * (s + s.T)


def sym_sqrt(s) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-PSD_TOL*scale, 0) are clamped to 0; anything more
    negative raises NegativeEigenvalue.
    """
    s = _check_symmetric(s)
    w, v = np.linalg.eigh(s)
    scale = max(abs(w[-1]), 1.0)
    if w[0] < -PSD_TOL * scale:
        raise NegativeEigenvalue(f"eigenvalue {w[0]:.3e} below tolerance")
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


def sym_inv_sqrt(s) -> np.ndarray:
    """Inverse symmetric square root of a positive definite matrix."""
    s = _check_symmetric(s)
    w, v = np.linalg.eigh(s)
    scale = max(abs(w[-1]), 0.0)
    if scale == 0.0 or w[0] <= PSD_TOL * scale:
        raise SingularCovariance(f"matrix not positive definite (eigenvalues in "
                                 f"[{w[0]:.3e}, {w[-1]:.3e}])")
    inv_root = (v / np.sqrt(w)) @ v.T
    return 0.5 * (inv_root + inv_root.T)


def _check_joint_pd(cov_yy, cov_yx, cov_xx) -> None:
    joint = np.block([[cov_yy, cov_yx], [cov_yx.T, cov_xx]])
    w = np.linalg.eigvalsh(0.5 * (joint + joint.T))
    if w[0] <= PSD_TOL * max(abs(w[-1]), 0.0) or w[-1] <= 0.0:
        raise SingularCovariance("joint residual covariance is not positive definite")


def r_matrix(y_cols, x_cols, z_cols) -> np.ndarray:
    """Partial-correlation matrix of y and x given z.

    Residualizes both blocks on ``z`` (which must include the intercept
    column, so the residuals are centered) and returns
    cov(y|z)^{-1/2} cov(y|z, x|z) cov(x|z)^{-1/2}. Scalar blocks give the
    usual sample partial correlation coefficient.
    """
    ry = residualize(y_cols, z_cols)
    rx = residualize(x_cols, z_cols)
    cov_yy = sample_cov(ry)
    cov_xx = sample_cov(rx)
    cov_yx = sample_cov(ry, rx)
    _check_joint_pd(cov_yy, cov_yx, cov_xx)
    return sym_inv_sqrt(cov_yy) @ cov_yx @ sym_inv_sqrt(cov_xx)


def partial_r2(y, x_cols, z_cols) -> float:
    """Sample partial R-squared of scalar ``y`` on ``x`` given ``z``."""
    y = as_matrix(y)
    if y.shape[1] != 1:
        raise DimensionMismatch("partial_r2 expects a single response column")
    ry = residualize(y, z_cols)
    var_yz = float(sample_cov(ry)[0, 0])
    if var_yz <= PSD_TOL:
        raise DegenerateResponse("response has no residual variance given z")
    xz = np.column_stack([as_matrix(x_cols), as_matrix(z_cols)])
    ryxz = residualize(y, xz)
    var_yxz = float(sample_cov(ryxz)[0, 0])
    return float(np.clip(1.0 - var_yxz / var_yz, 0.0, 1.0))

"""Dense matrix primitives: column standardization, truncated left SVD, entrywise clipping."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGapWarning, NoConvergence, ZeroVarianceColumn


@dataclass(frozen=True)
class StandardizedMatrix:
    """Column-standardized data with the per-column provenance that produced it.

    values[i, j] = (X[i, j] - col_mean[j]) / col_sd[j], with col_sd using the
    n-1 denominator.  kept_columns maps output columns back to input columns
    when constant columns were dropped (identity otherwise).
    """

    values: np.ndarray
    col_mean: np.ndarray
    col_sd: np.ndarray
    kept_columns: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class SpectralEmbedding:
    """Leading left singular vectors (columns of u) with singular values, descending."""

    u: np.ndarray
    singular_values: np.ndarray

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def k(self):
        return self.u.shape[1]


def validate_data_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("data matrix must be 2-dimensional")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 samples (rows)")
    if x.shape[1] < 1:
        raise ValueError("need at least 1 feature (column)")
    if not np.all(np.isfinite(x)):
        raise ValueError("data matrix contains non-finite entries")
    return x


def standardize_columns(x, drop_constant=False):
    """Center each column and scale to unit sample SD (n-1 denominator).

    Constant columns raise ZeroVarianceColumn unless drop_constant is set, in
    which case they are removed and the surviving index map is recorded.
    """
    x = validate_data_matrix(x)
    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    zero = np.flatnonzero(sd == 0.0)
    if zero.size:
        if not drop_constant:
            raise ZeroVarianceColumn(int(zero[0]))
        keep = np.flatnonzero(sd > 0.0)
        if keep.size == 0:
            raise ZeroVarianceColumn(int(zero[0]))
    else:
        keep = np.arange(x.shape[1])
    w = (x[:, keep] - mean[keep]) / sd[keep]
    return StandardizedMatrix(values=w, col_mean=mean[keep], col_sd=sd[keep],
                              kept_columns=keep)


def _fix_signs(u):
    # Largest-magnitude entry of each column made positive; ties to lowest row.
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def truncated_left_svd(a, k, tol=1e-10, max_iter=20000):
    """Leading k left singular vectors/values of a, by orthogonal iteration.

    The iteration runs on the smaller Gram matrix (a a' when n <= p), with
    Rayleigh-Ritz rotation each sweep.  Warns DegenerateGapWarning when the
    k-th and (k+1)-th singular values are separated by less than tol * sigma_1.
    """
    a = np.asarray(a, dtype=np.float64)
    n, p = a.shape
    if not 1 <= k <= min(n, p):
        raise ValueError(f"k={k} must lie in [1, min(n, p)={min(n, p)}]")
    if tol <= 0:
        raise ValueError("tol must be positive")

    left_side = n <= p
    g = a @ a.T if left_side else a.T @ a
    m = g.shape[0]
    # One extra Ritz vector (when available) to measure the trailing gap.
    kb = min(k + 1, m)

    rng = np.random.default_rng(0)
    q = np.linalg.qr(rng.standard_normal((m, kb)))[0]
    eigs = np.zeros(kb)
    converged = False
    for _ in range(max_iter):
        z = g @ q
        q_new, _ = np.linalg.qr(z)
        # Ritz rotation keeps individual columns aligned with eigenvectors.
        b = q_new.T @ g @ q_new
        evals, vecs = np.linalg.eigh(b)
        order = np.argsort(evals)[::-1]
        eigs = evals[order]
        q_new = q_new @ vecs[:, order]
        q = q_new
        # Residual test on the leading k Ritz pairs; a subspace-drift test
        # would never settle when eigenvalues are degenerate (the Ritz
        # rotation is arbitrary inside a repeated eigenspace).
        resid = np.linalg.norm(g @ q[:, :k] - q[:, :k] * eigs[:k], ord="fro")
        scale = eigs[0] if eigs[0] > 0 else 1.0
        if resid <= tol * scale:
            converged = True
            break
    if not converged:
        raise NoConvergence(max_iter)

    sigma = np.sqrt(np.clip(eigs, 0.0, None))
    if kb > k and sigma[0] > 0 and (sigma[k - 1] - sigma[k]) < tol * sigma[0]:
        warnings.warn("singular-value gap below tol * sigma_1", DegenerateGapWarning)
    sigma = sigma[:k]

    if left_side:
        u = q[:, :k]
    else:
        v = q[:, :k]
        av = a @ v
        safe = np.where(sigma > 0, sigma, 1.0)
        u = av / safe
        # Re-orthonormalize against roundoff for tiny singular values.
        u, _ = np.linalg.qr(u)
    u = _fix_signs(u)
    return SpectralEmbedding(u=u, singular_values=sigma)


def entrywise_truncate(emb, threshold):
    """Clip every entry of the embedding to [-threshold, threshold].

    Column orthonormality is not preserved.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    u = np.clip(emb.u, -threshold, threshold)
    return SpectralEmbedding(u=u, singular_values=emb.singular_values.copy())

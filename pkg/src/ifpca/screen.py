"""Feature screening: KS scores, Monte-Carlo null tables, renormalization, p-values."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import EmptySelection, ZeroSpread

# Consistency factor making MAD match the SD under normality.
MAD_SCALE = 1.4826

# Fixed so that null-table contents do not depend on the worker count.
_NULL_CHUNK_TARGET = 4_000_000


@dataclass(frozen=True)
class KsScores:
    """Per-feature KS scores with the normalization applied ('none' = raw)."""

    scores: np.ndarray
    n: int
    normalization: str = "none"

    @property
    def p(self):
        return self.scores.size


@dataclass(frozen=True)
class NullTable:
    """Sorted Monte-Carlo sample of the null screening statistic."""

    n: int
    seed: int
    values: np.ndarray  # ascending

    @property
    def size(self):
        return self.values.size


@dataclass(frozen=True)
class FeatureSet:
    """Selected feature indices (1-based, sorted) and the threshold that produced them."""

    indices: np.ndarray
    threshold: float

    @property
    def size(self):
        return self.indices.size


def ks_of_standardized(v):
    """sqrt(n) * sup-distance between the empirical CDF of v and the N(0,1) CDF.

    Uses the closed form over the sorted values: the sup is attained at a jump
    point of the empirical CDF, from one side or the other.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    if n < 1:
        raise ValueError("need at least one value")
    w = np.sort(v)
    phi = ndtr(w)
    i = np.arange(1, n + 1)
    d = np.maximum(i / n - phi, phi - (i - 1) / n)
    return float(np.sqrt(n) * d.max())


def ks_scores(w):
    """KS score of every column of a StandardizedMatrix (vectorized over columns)."""
    vals = w.values
    n = vals.shape[0]
    srt = np.sort(vals, axis=0)
    phi = ndtr(srt)
    i = np.arange(1, n + 1, dtype=np.float64)[:, None]
    d = np.maximum(i / n - phi, phi - (i - 1.0) / n)
    return KsScores(scores=np.sqrt(n) * d.max(axis=0), n=n)


def _null_psi_batch(z):
    """KS scores for a batch of null draws, one draw per row, after row standardization."""
    z = (z - z.mean(axis=1, keepdims=True)) / z.std(axis=1, ddof=1, keepdims=True)
    z.sort(axis=1)
    n = z.shape[1]
    phi = ndtr(z)
    i = np.arange(1, n + 1, dtype=np.float64)
    d = np.maximum(i / n - phi, phi - (i - 1.0) / n)
    return np.sqrt(n) * d.max(axis=1)


def build_null_table(n, reps, seed, threads=1):
    """Simulate `reps` draws of the null statistic at sample size n.

    Each draw standardizes n iid N(0,1) samples and scores them, matching the
    pipeline statistic exactly.  Chunk seeds derive from (seed, chunk index)
    with a chunk size that depends only on n, so the table is identical for
    any thread count.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    chunk = max(1, _NULL_CHUNK_TARGET // n)
    starts = range(0, reps, chunk)

    def one_chunk(ci_start):
        ci = ci_start // chunk
        rng = np.random.default_rng([seed, ci])
        m = min(chunk, reps - ci_start)
        return _null_psi_batch(rng.standard_normal((m, n)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(one_chunk, starts))
    else:
        parts = [one_chunk(s) for s in starts]
    values = np.sort(np.concatenate(parts))
    return NullTable(n=n, seed=seed, values=values)


def default_null_size(p):
    """Desk-scale default table size; resolution stays far below 1/p."""
    return max(10**6, 100 * p)


def normalize_scores(ks, mode, null=None):
    """Renormalize raw KS scores: 'meanstd', 'medmad', 'lower50', or 'none'."""
    s = ks.scores
    if mode == "none":
        return ks
    if s.size < 2:
        raise ValueError("need at least 2 scores to normalize")
    if mode == "meanstd":
        sd = s.std(ddof=1)
        if sd == 0:
            raise ZeroSpread("SD of KS scores is zero")
        out = (s - s.mean()) / sd
    elif mode == "medmad":
        med = np.median(s)
        mad = np.median(np.abs(s - med))
        if mad == 0:
            raise ZeroSpread("MAD of KS scores is zero")
        out = (s - med) / (MAD_SCALE * mad)
    elif mode == "lower50":
        if null is None:
            raise ValueError("lower50 normalization requires a null table")
        low_obs = np.sort(s)[: s.size // 2]
        low_null = null.values[: null.size // 2]
        sd_obs = low_obs.std(ddof=1)
        if sd_obs == 0:
            raise ZeroSpread("SD of the lower half of KS scores is zero")
        out = (s - low_obs.mean()) / sd_obs * low_null.std(ddof=1) + low_null.mean()
    else:
        raise ValueError(f"unknown normalization mode: {mode}")
    return KsScores(scores=out, n=ks.n, normalization=mode)


def null_reference_values(null, mode):
    """Null-table values on the same scale as `mode`-normalized scores.

    The empirical-null matching normalizes both sides: observed scores to
    their own center/spread and the null to its own, which is the same as
    shifting/scaling F0.  lower50 maps the scores onto the null scale, so the
    raw table is the reference.
    """
    v = null.values
    if mode in ("none", "lower50"):
        return v
    if mode == "meanstd":
        sd = v.std(ddof=1)
        if sd == 0:
            raise ZeroSpread("SD of null table is zero")
        return (v - v.mean()) / sd
    if mode == "medmad":
        med = np.median(v)
        mad = np.median(np.abs(v - med))
        if mad == 0:
            raise ZeroSpread("MAD of null table is zero")
        return (v - med) / (MAD_SCALE * mad)
    raise ValueError(f"unknown normalization mode: {mode}")


def pvalues(scores, null_values):
    """Empirical p-values with add-one smoothing: (1 + #{null >= score}) / (N + 1).

    null_values must be sorted ascending and on the same scale as the scores.
    """
    s = np.atleast_1d(np.asarray(scores, dtype=np.float64))
    nv = np.asarray(null_values)
    big = nv.size - np.searchsorted(nv, s, side="left")
    return (1.0 + big) / (nv.size + 1.0)


def select_features(ks, t):
    """Indices (1-based) of features whose score is >= t; raises EmptySelection if none."""
    idx = np.flatnonzero(ks.scores >= t) + 1
    if idx.size == 0:
        raise EmptySelection(f"no score reaches threshold {t}")
    return FeatureSet(indices=idx, threshold=float(t))


# ---------------------------------------------------------------------------
# NullTable serialization: text (.txt or anything non-.bin) and binary (.bin).

def _null_header(table, reps):
    return f"ifpca-null v1, n={table.n}, N={reps}, seed={table.seed}"


def _parse_null_header(line):
    prefix = "ifpca-null v1, "
    if not line.startswith(prefix):
        raise ValueError(f"not an ifpca null-table header: {line!r}")
    fields = dict(part.split("=") for part in line[len(prefix):].split(", "))
    return int(fields["n"]), int(fields["N"]), int(fields["seed"])


def save_null_table(table, path):
    path = str(path)
    header = _null_header(table, table.size)
    if path.endswith(".bin"):
        with open(path, "wb") as f:
            f.write((header + "\n").encode("ascii"))
            f.write(table.values.astype("<f8").tobytes())
    else:
        with open(path, "w") as f:
            f.write(header + "\n")
            for v in table.values:
                f.write(f"{v:.17g}\n")


def load_null_table(path):
    path = str(path)
    if path.endswith(".bin"):
        with open(path, "rb") as f:
            header = f.readline().decode("ascii").rstrip("\n")
            n, reps, seed = _parse_null_header(header)
            values = np.frombuffer(f.read(8 * reps), dtype="<f8").copy()
    else:
        with open(path) as f:
            n, reps, seed = _parse_null_header(f.readline().rstrip("\n"))
            values = np.loadtxt(f, dtype=np.float64, ndmin=1)
    if values.size != reps:
        raise ValueError(f"expected {reps} values, found {values.size}")
    return NullTable(n=n, seed=seed, values=values)

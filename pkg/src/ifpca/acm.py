"""Synthetic data under the asymptotic clustering model, with the signal-strength
diagnostics (kappa, tau, omega), theoretical thresholds, and experiment presets."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import InvalidConfig, UnknownExperiment

# Tail constant of the null KS statistic: sqrt((pi - 2) / (4 pi)).
A0 = math.sqrt((math.pi - 2.0) / (4.0 * math.pi))

SIGNAL_SCALE = 72.0 * math.pi


@dataclass(frozen=True)
class DistributionSpec:
    """One of: pointmass(c), uniform(a, b) over (a-b, a+b), normal(m, s2),
    truncnormal(u, b2, a) = N(u, b2) conditioned on [u-a, u+a], and
    truncshiftexp(lam, b, a1, a2) = b + Exp(mean lam) conditioned on [a1, a2]."""

    kind: str
    params: tuple

    def __post_init__(self):
        kinds = {"pointmass": 1, "uniform": 2, "normal": 2, "truncnormal": 3,
                 "truncshiftexp": 4}
        if self.kind not in kinds:
            raise InvalidConfig(f"unknown distribution kind: {self.kind}")
        if len(self.params) != kinds[self.kind]:
            raise InvalidConfig(f"{self.kind} takes {kinds[self.kind]} parameters")
        if self.kind == "uniform" and self.params[1] <= 0:
            raise InvalidConfig("uniform half-width must be positive")
        if self.kind == "truncshiftexp":
            lam, _, a1, a2 = self.params
            if lam <= 0:
                raise InvalidConfig("exponential mean must be positive")
            if a1 > a2:
                raise InvalidConfig("need a1 <= a2")

    def sample(self, size, rng):
        if self.kind == "pointmass":
            return np.full(size, self.params[0])
        if self.kind == "uniform":
            a, b = self.params
            return rng.uniform(a - b, a + b, size)
        if self.kind == "normal":
            m, s2 = self.params
            return m + math.sqrt(s2) * rng.standard_normal(size)
        if self.kind == "truncnormal":
            u, b2, a = self.params
            b = math.sqrt(b2)
            lo, hi = ndtr(-a / b), ndtr(a / b)
            return u + b * ndtri(lo + rng.uniform(size=size) * (hi - lo))
        # truncshiftexp: inverse-CDF sampling of an exponential restricted
        # to [max(a1 - b, 0), a2 - b].
        lam, b, a1, a2 = self.params
        lo = max(a1 - b, 0.0)
        hi = a2 - b
        if hi <= lo:
            raise InvalidConfig("truncshiftexp window is empty")
        c_lo = -math.expm1(-lo / lam)
        c_hi = 1.0 if math.isinf(hi) else -math.expm1(-hi / lam)
        u = c_lo + rng.uniform(size=size) * (c_hi - c_lo)
        return b + (-lam) * np.log1p(-u)

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d):
        params = tuple(math.inf if x == "inf" else -math.inf if x == "-inf" else x
                       for x in d["params"])
        return cls(kind=d["kind"], params=params)


@dataclass(frozen=True)
class NoiseModel:
    """iid-gaussian, class-scaled (per-class variances), student-t6, chisq6,
    or correlated with variant 'band' or 'random' (size-N column supports)."""

    kind: str = "iid-gaussian"
    class_variances: tuple = ()
    variant: str = "band"
    d: float = 0.0
    subset_size: int = 0

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "class-scaled":
            out["class_variances"] = list(self.class_variances)
        if self.kind == "correlated":
            out.update(variant=self.variant, d=self.d)
            if self.variant == "random":
                out["subset_size"] = self.subset_size
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"],
                   class_variances=tuple(d.get("class_variances", ())),
                   variant=d.get("variant", "band"), d=d.get("d", 0.0),
                   subset_size=d.get("subset_size", 0))


@dataclass(frozen=True)
class AcmConfig:
    k: int
    p: int
    theta: float
    vartheta: float
    r: float
    rep: int
    delta: tuple
    gamma: tuple
    g_mubar: DistributionSpec
    g_mu: DistributionSpec
    g_sigma: DistributionSpec
    noise: NoiseModel = field(default_factory=NoiseModel)
    threshold_q: float = 0.06

    def __post_init__(self):
        if self.k < 2 or len(self.delta) != self.k:
            raise InvalidConfig("delta must have K >= 2 entries")
        if abs(sum(self.delta) - 1.0) > 1e-12 or min(self.delta) <= 0:
            raise InvalidConfig("delta must be a positive probability vector")
        if len(self.gamma) != 3 or abs(sum(self.gamma) - 1.0) > 1e-12:
            raise InvalidConfig("gamma must be 3 probabilities summing to 1")
        if not (0 < self.theta < 1 and 0 < self.vartheta < 1):
            raise InvalidConfig("theta and vartheta must lie in (0, 1)")
        if self.r <= 0:
            raise InvalidConfig("r must be positive")

    @property
    def n(self):
        return int(round(self.p ** self.theta))

    def to_dict(self):
        return {"k": self.k, "p": self.p, "theta": self.theta,
                "vartheta": self.vartheta, "r": self.r, "rep": self.rep,
                "delta": list(self.delta), "gamma": list(self.gamma),
                "g_mubar": self.g_mubar.to_dict(), "g_mu": self.g_mu.to_dict(),
                "g_sigma": self.g_sigma.to_dict(),
                "noise": self.noise.to_dict(), "threshold_q": self.threshold_q}

    @classmethod
    def from_dict(cls, d):
        return cls(k=d["k"], p=d["p"], theta=d["theta"], vartheta=d["vartheta"],
                   r=d["r"], rep=d["rep"], delta=tuple(d["delta"]),
                   gamma=tuple(d["gamma"]),
                   g_mubar=DistributionSpec.from_dict(d["g_mubar"]),
                   g_mu=DistributionSpec.from_dict(d["g_mu"]),
                   g_sigma=DistributionSpec.from_dict(d["g_sigma"]),
                   noise=NoiseModel.from_dict(d.get("noise", {"kind": "iid-gaussian"})),
                   threshold_q=d.get("threshold_q", 0.06))


@dataclass(frozen=True)
class GroundTruth:
    y: np.ndarray               # labels in {1..K}
    mubar: np.ndarray
    mu: np.ndarray              # K x p contrast means
    sigma: np.ndarray
    useful: np.ndarray          # boolean mask over features
    kappa: np.ndarray
    tau: np.ndarray


# ---------------------------------------------------------------------------
# Diagnostics.

def kappa(m, delta):
    """Weighted second-moment signal strength per feature; m is K x p."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    delta = np.asarray(delta, dtype=np.float64)
    return np.sqrt(delta @ (m ** 2))


def tau(m, delta, n):
    """Weighted third-moment signal strength per feature (KS screening SNR)."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    delta = np.asarray(delta, dtype=np.float64)
    return np.sqrt(n) / (6.0 * math.sqrt(2.0 * math.pi)) * np.abs(delta @ (m ** 3))


def _phi(y):
    return np.exp(-0.5 * y ** 2) / math.sqrt(2.0 * math.pi)


def _omega_integrand(y, m2, m4):
    # phi'''(y) = (3y - y^3) phi(y)
    ph = _phi(y)
    return 0.125 * y * (1.0 - 3.0 * y ** 2) * ph * m2 ** 2 \
        + (3.0 * y - y ** 3) * ph * m4 / 24.0


def omega(m, delta, n, grid_half_width=8.0, grid_step=1e-3):
    """Fourth-moment signal strength: sqrt(n) times the sup over y of the
    second-order Edgeworth term.  Grid search with one 10x local refinement."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    delta = np.asarray(delta, dtype=np.float64)
    # Work feature-by-feature to keep memory flat for wide m.
    out = np.empty(m.shape[1])
    y = np.arange(-grid_half_width, grid_half_width + grid_step / 2, grid_step)
    for j in range(m.shape[1]):
        m2j = float(delta @ m[:, j] ** 2)
        m4j = float(delta @ m[:, j] ** 4)
        vals = _omega_integrand(y, m2j, m4j)
        i = int(np.argmax(vals))
        lo = y[max(i - 1, 0)]
        hi = y[min(i + 1, y.size - 1)]
        fine = np.linspace(lo, hi, 41)
        best = max(vals[i], _omega_integrand(fine, m2j, m4j).max())
        out[j] = math.sqrt(n) * best
    return out


def threshold_tpq(q, p):
    """Theoretical screening threshold a0 * sqrt(2 q log p)."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    return A0 * math.sqrt(2.0 * q * math.log(p))


def threshold_fixed(q_tilde, p):
    """Simulation threshold sqrt(2 q~ log p) (no a0 factor)."""
    if q_tilde < 0:
        raise ValueError("q~ must be nonnegative")
    return math.sqrt(2.0 * q_tilde * math.log(p))


def err_p(vartheta, q, r, k, n, p, kappa_norm, rho1, rho2):
    """Theoretical clustering-error scale: bias plus variance terms."""
    bias = (1.0 + math.sqrt(p ** (1.0 - min(vartheta, q)) / n)) / kappa_norm
    miss = p ** (-max(math.sqrt(r) - math.sqrt(q), 0.0) ** 2 / (2.0 * k))
    var = math.sqrt(p ** (vartheta - 1.0) + p ** max(vartheta - q, 0.0) / n) \
        * math.sqrt(rho1)
    return rho2 * (bias + miss + var)


# ---------------------------------------------------------------------------
# Generation.

def correlated_noise_matrix(variant, d, subset_size, p, rng):
    """Column-mixing matrix A for correlated noise: identity plus d on either
    the superdiagonal ('band') or a random size-N subset per column ('random').

    Returned sparse (CSC); at p in the tens of thousands the dense form would
    not fit in memory.
    """
    if abs(d) >= 1:
        raise InvalidConfig("|d| must be < 1")
    rows = list(range(p))
    cols = list(range(p))
    vals = [1.0] * p
    if variant == "band":
        if d != 0.0:
            rows += list(range(p - 1))
            cols += list(range(1, p))
            vals += [d] * (p - 1)
    elif variant == "random":
        if subset_size < 1:
            raise InvalidConfig("subset size must be >= 1")
        for j in range(p):
            pool = rng.choice(p - 1, size=subset_size, replace=False)
            off = np.where(pool >= j, pool + 1, pool)  # skip the diagonal
            rows += off.tolist()
            cols += [j] * subset_size
            vals += [d] * subset_size
    else:
        raise InvalidConfig(f"unknown correlation variant: {variant}")
    return sparse.csc_array((vals, (rows, cols)), shape=(p, p))


def signal_magnitude(r, p, n, h):
    """|mu_k(j)| before sign: [72 pi * 2 r log(p) / n * h]^(1/6)."""
    return (SIGNAL_SCALE * 2.0 * r * math.log(p) / n * h) ** (1.0 / 6.0)


def generate(config, seed, use_realized_delta=False):
    """Draw one (X, truth) pair from the model.

    X = 1 mubar' + L [mu_1..mu_K] + Z, with labels multinomial(delta), useful
    features Bernoulli(p^-vartheta), and mu_K back-solved so the delta-weighted
    contrast means sum to zero (prior delta by default).
    """
    n, p, k = config.n, config.p, config.k
    if n < k:
        raise InvalidConfig(f"n={n} < K={k}")
    rng = np.random.default_rng(seed)
    delta = np.asarray(config.delta, dtype=np.float64)
    gamma = np.asarray(config.gamma, dtype=np.float64)

    y = rng.choice(k, size=n, p=delta) + 1
    mubar = config.g_mubar.sample(p, rng)
    eps = p ** (-config.vartheta)
    b = rng.uniform(size=p) < eps
    signs = rng.choice(np.array([-1.0, 0.0, 1.0]), size=(k - 1, p), p=gamma)
    h = config.g_mu.sample((k - 1, p), rng)
    mu = np.zeros((k, p))
    mu[: k - 1] = signal_magnitude(config.r, p, n, h) * signs * b
    back_delta = delta
    if use_realized_delta:
        back_delta = np.bincount(y - 1, minlength=k) / n
        if back_delta[k - 1] == 0:
            raise InvalidConfig("realized fraction of class K is zero")
    mu[k - 1] = -(back_delta[: k - 1] @ mu[: k - 1]) / back_delta[k - 1]

    noise = config.noise
    if noise.kind == "iid-gaussian":
        sigma = config.g_sigma.sample(p, rng)
        z = rng.standard_normal((n, p)) * sigma
    elif noise.kind == "correlated":
        sigma = config.g_sigma.sample(p, rng)
        a = correlated_noise_matrix(noise.variant, noise.d, noise.subset_size, p, rng)
        z = (a.T @ (rng.standard_normal((n, p)) * sigma).T).T
    elif noise.kind == "class-scaled":
        if len(noise.class_variances) != k:
            raise InvalidConfig("class-scaled noise needs K variances")
        sigma = np.ones(p)
        scale = np.sqrt(np.asarray(noise.class_variances))[y - 1]
        z = rng.standard_normal((n, p)) * scale[:, None]
    elif noise.kind == "student-t6":
        sigma = np.ones(p)
        z = math.sqrt(2.0 / 3.0) * rng.standard_t(6, size=(n, p))
    elif noise.kind == "chisq6":
        sigma = np.ones(p)
        z = (rng.chisquare(6, size=(n, p)) - 6.0) / math.sqrt(12.0)
    else:
        raise InvalidConfig(f"unknown noise model: {noise.kind}")

    x = mubar[None, :] + mu[y - 1] + z
    useful = b & (np.abs(mu).max(axis=0) > 0)
    m = mu / sigma
    truth = GroundTruth(y=y, mubar=mubar, mu=mu, sigma=sigma, useful=useful,
                        kappa=kappa(m, delta), tau=tau(m, delta, n))
    return x, truth


# ---------------------------------------------------------------------------
# Experiment presets.

def _symmetric_scale():
    """Constant c0 with: r (asymmetric delta) and c0*r (symmetric delta) give
    equal kappa(j) at unit feature magnitude and sign."""
    def gap(c0, r=0.5, p=4 * 10**4, n=577):
        u_a = signal_magnitude(r, p, n, 1.0)
        m_asym = np.array([[u_a], [-0.5 * u_a]])
        k_asym = kappa(m_asym, [1.0 / 3.0, 2.0 / 3.0])[0]
        u_s = signal_magnitude(c0 * r, p, n, 1.0)
        k_sym = kappa(np.array([[u_s], [-u_s]]), [0.5, 0.5])[0]
        return k_sym - k_asym
    return brentq(gap, 1e-4, 1.0, xtol=1e-12)


def experiment_preset(exp_id):
    """Parameter grids of the five simulation experiments, as AcmConfig lists."""
    normal01 = DistributionSpec("normal", (0.0, 1.0))
    if exp_id in ("1a", "1b"):
        base = dict(k=2, p=4 * 10**4, theta=0.6, vartheta=0.7, rep=100,
                    gamma=(0.5, 0.0, 0.5), g_mubar=normal01,
                    g_mu=DistributionSpec("uniform", (1.0, 0.2)),
                    g_sigma=DistributionSpec("uniform", (1.1, 0.1)),
                    threshold_q=0.06)
        r_asym = [0.20, 0.35, 0.50, 0.65]
        if exp_id == "1a":
            r_sym = [0.06, 0.14, 0.22, 0.30]
        else:
            c0 = _symmetric_scale()
            r_sym = [c0 * r for r in r_asym]
        configs = [AcmConfig(delta=(1.0 / 3.0, 2.0 / 3.0), r=r, **base)
                   for r in r_asym]
        configs += [AcmConfig(delta=(0.5, 0.5), r=r, **base) for r in r_sym]
        return configs

    if exp_id in ("2a", "2b"):
        g_mu = (DistributionSpec("truncnormal", (1.0, 0.01, 0.2)) if exp_id == "2a"
                else DistributionSpec("truncnormal", (1.0, 0.1, 0.7)))
        g_sigma = (DistributionSpec("truncnormal", (1.0, 0.01, 0.1)) if exp_id == "2a"
                   else DistributionSpec("pointmass", (1.0,)))
        return [AcmConfig(k=2, p=4 * 10**4, theta=0.6, vartheta=v, r=0.3, rep=100,
                          delta=(1.0 / 3.0, 2.0 / 3.0), gamma=(0.5, 0.0, 0.5),
                          g_mubar=normal01, g_mu=g_mu, g_sigma=g_sigma,
                          threshold_q=0.05)
                for v in (0.68, 0.72, 0.76, 0.80)]

    if exp_id == "3":
        return [AcmConfig(k=2, p=4 * 10**4, theta=0.6, vartheta=v, r=0.3, rep=100,
                          delta=(1.0 / 3.0, 2.0 / 3.0), gamma=(0.5, 0.0, 0.5),
                          g_mubar=normal01,
                          g_mu=DistributionSpec("truncnormal", (1.0, 0.1, 0.7)),
                          g_sigma=DistributionSpec("pointmass", (1.0,)),
                          threshold_q=q)
                for v in (0.68, 0.72, 0.76, 0.80)
                for q in (0.03, 0.04, 0.05, 0.06)]

    if exp_id == "4":
        base = dict(k=4, p=2 * 10**4, theta=0.5, vartheta=0.6, r=0.7, rep=100,
                    delta=(0.25, 0.25, 0.25, 0.25), gamma=(0.3, 0.05, 0.65),
                    g_mubar=normal01,
                    g_mu=DistributionSpec("truncshiftexp",
                                          (0.1, 0.9, -math.inf, math.inf)),
                    g_sigma=DistributionSpec("truncshiftexp", (0.1, 0.9, 0.9, 1.2)),
                    threshold_q=0.03)
        noises = [NoiseModel(kind="correlated", variant="band", d=0.1),
                  NoiseModel(kind="correlated", variant="random", d=0.1,
                             subset_size=5),
                  NoiseModel(kind="correlated", variant="random", d=0.1,
                             subset_size=20)]
        return [AcmConfig(noise=nm, **base) for nm in noises]

    if exp_id == "5":
        base = dict(k=4, p=2 * 10**4, theta=0.5, vartheta=0.55, r=1.0, rep=100,
                    delta=(0.25, 0.25, 1.0 / 3.0, 1.0 / 6.0),
                    gamma=(0.4, 0.1, 0.5), g_mubar=normal01,
                    g_mu=DistributionSpec("truncshiftexp",
                                          (0.1, 0.9, -math.inf, math.inf)),
                    g_sigma=DistributionSpec("pointmass", (1.0,)),
                    threshold_q=0.03)
        noises = [NoiseModel(kind="class-scaled",
                             class_variances=(0.8, 1.0, 1.2, 1.4)),
                  NoiseModel(kind="student-t6"),
                  NoiseModel(kind="chisq6")]
        return [AcmConfig(noise=nm, **base) for nm in noises]

    raise UnknownExperiment(f"unknown experiment id: {exp_id}")

"""Connection-probability and update-speed kernels, plus percolated offspring.

The parametric family is

    p(dx, dy) = 1 ^ kappa * ((dx ^ dy)^sigma * (dx v dy))^-alpha
    v(dx, dy) = nu * (dx v dy)^eta

with sigma in [0, 1] interpolating between the maximum kernel (sigma=0) and
the product kernel (sigma=1). Custom tabulated/functional kernels are
supported with envelope diagnostics against the polynomial bounds
kappa1 n^-alpha <= p(n, m) <= kappa2 n^-alpha and nu1 n^eta <= v <= nu2 n^eta.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .graph import OffspringDistribution


class KernelError(ValueError):
    """Invalid kernel parameters or custom-kernel input."""


@dataclass(frozen=True)
class KernelSpec:
    alpha: float
    sigma: float = 1.0
    kappa: float = 1.0
    eta: float = 0.0
    nu: float = 1.0
    custom_p: object = None  # callable (dx, dy) -> prob, or dict {(n, m): p}

    def __post_init__(self):
        if self.alpha < 0:
            raise KernelError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 <= self.sigma <= 1.0:
            raise KernelError(f"sigma must lie in [0, 1], got {self.sigma}")
        if self.kappa <= 0:
            raise KernelError(f"kappa must be > 0, got {self.kappa}")
        if self.nu <= 0:
            raise KernelError(f"nu must be > 0, got {self.nu}")

    @property
    def mode(self) -> str:
        return "custom" if self.custom_p is not None else "sigma"


def p_value(spec: KernelSpec, dx: int, dy: int) -> float:
    """Probability that an edge between degrees dx, dy is open."""
    if dx < 1 or dy < 1:
        raise KernelError("degrees must be >= 1")
    if spec.custom_p is not None:
        p = _custom_lookup(spec.custom_p, dx, dy)
        if not 0.0 <= p <= 1.0:
            raise KernelError(f"custom kernel returned {p} outside [0, 1]")
        return p
    lo, hi = (dx, dy) if dx <= dy else (dy, dx)
    return min(1.0, spec.kappa * (lo ** spec.sigma * hi) ** (-spec.alpha))


def p_value_array(spec: KernelSpec, dx, dy) -> np.ndarray:
    """Vectorized p_value for integer arrays (sigma kernels only)."""
    if spec.custom_p is not None:
        raise KernelError("vectorized evaluation supports sigma kernels only")
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    lo = np.minimum(dx, dy)
    hi = np.maximum(dx, dy)
    return np.minimum(1.0, spec.kappa * (lo ** spec.sigma * hi) ** (-spec.alpha))


def v_value(spec: KernelSpec, dx: int, dy: int) -> float:
    """Update rate of an edge between degrees dx, dy."""
    if dx < 1 or dy < 1:
        raise KernelError("degrees must be >= 1")
    return spec.nu * float(max(dx, dy)) ** spec.eta


def _custom_lookup(custom, dx, dy):
    if callable(custom):
        return float(custom(dx, dy))
    key = (min(dx, dy), max(dx, dy))
    try:
        return float(custom[key])
    except KeyError:
        raise KernelError(f"custom kernel table has no entry for degrees {key}") from None


def load_kernel_table(path: str) -> dict:
    """Read a custom connection-probability table ("n m p" per line)."""
    table = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            n, m, p = line.split()
            table[(min(int(n), int(m)), max(int(n), int(m)))] = float(p)
    if not table:
        raise KernelError(f"kernel table {path} is empty")
    return table


# ---------------------------------------------------------------------------
# envelope diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeReport:
    kappa1: float
    kappa2: float
    nu1: float
    nu2: float
    violation: bool
    message: str = ""


# a genuine polynomial envelope keeps p(n,m) * n^alpha within a bounded band;
# a spread beyond this factor over the sampled range flags a broken envelope
_ENVELOPE_SPREAD_TOL = 1e3


def envelope_check(spec: KernelSpec, m: int, n_values) -> EnvelopeReport:
    """Tightest envelope constants for p(n, m), v(n, m) over sampled n >= m."""
    ns = sorted(int(n) for n in n_values)
    if not ns:
        raise KernelError("empty degree range")
    if ns[0] < m:
        raise KernelError("envelope is defined for n >= m")
    p_ratios = [p_value(spec, n, m) * n ** spec.alpha for n in ns]
    v_ratios = [v_value(spec, n, m) / n ** spec.eta for n in ns]
    kappa1, kappa2 = min(p_ratios), max(p_ratios)
    nu1, nu2 = min(v_ratios), max(v_ratios)
    violation = False
    message = ""
    if kappa1 <= 0.0:
        violation = True
        message = "connection probability vanishes on the sampled range"
    elif kappa2 / kappa1 > _ENVELOPE_SPREAD_TOL:
        violation = True
        message = (f"p(n,{m})*n^{spec.alpha} spans a factor {kappa2 / kappa1:.3g}; "
                   "no polynomial envelope of this order")
    elif nu1 <= 0.0 or nu2 / nu1 > _ENVELOPE_SPREAD_TOL:
        violation = True
        message = f"v(n,{m})/n^{spec.eta} spans a factor {nu2 / max(nu1, 1e-300):.3g}"
    return EnvelopeReport(kappa1, kappa2, nu1, nu2, violation, message)


# ---------------------------------------------------------------------------
# percolated offspring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PercolatedOffspring:
    """Offspring thinned by edge-openness at a fixed time.

    A sample is sum_i Bernoulli(p(z, z_i)) over i = 1..z where z and the z_i
    are independent offspring draws. Zero counts are clamped to 1 inside the
    kernel (degree arguments must be >= 1; a childless vertex has degree 1).
    """

    base: OffspringDistribution
    kernel: KernelSpec

    def mixed_binomial_success(self, z: int) -> float:
        """E[p(z', z)] for an offspring count z, with z' an independent copy."""
        if z < 1:
            return 0.0
        vals = self.base.values
        probs = self.base.pmf
        ps = p_value_array(self.kernel, np.full(vals.shape, z), np.maximum(vals, 1))
        acc = float(np.dot(ps, probs))
        if self.base.tail is not None:
            # analytic-tail children sit beyond the head, where the sigma
            # kernel is monotone; their total mass (<=1e-6) is bounded by the
            # kernel value at the head end
            tail_mass = 1.0 - self.base.head_mass
            acc += tail_mass * p_value(self.kernel, z, int(vals[-1]) + 1)
        return min(1.0, acc)


def sample_zeta_p(pd: PercolatedOffspring, rng: random.Random) -> int:
    """One two-stage draw: offspring count, then Bernoulli thinning per child."""
    z = pd.base.sample(rng)
    if z == 0:
        return 0
    count = 0
    for _ in range(z):
        zi = pd.base.sample(rng)
        if rng.random() < p_value(pd.kernel, z, max(zi, 1)):
            count += 1
    return count


def sample_zeta_p_array(pd: PercolatedOffspring, gen: np.random.Generator, n: int) -> np.ndarray:
    """Vectorized two-stage sampler for large Monte Carlo runs."""
    z = pd.base.sample_array(gen, n)
    total = int(z.sum())
    out = np.zeros(n, dtype=np.int64)
    if total == 0:
        return out
    child = pd.base.sample_array(gen, total)
    parent = np.repeat(z, z)
    ps = p_value_array(pd.kernel, parent, np.maximum(child, 1))
    hits = (gen.random(total) < ps).astype(np.int64)
    bounds = np.concatenate(([0], np.cumsum(z)))
    sums = np.add.reduceat(np.concatenate((hits, [0])), bounds[:-1])
    nonempty = z > 0
    out[nonempty] = sums[nonempty]
    return out


def sample_mixed_binomial_array(pd: PercolatedOffspring, gen: np.random.Generator, n: int) -> np.ndarray:
    """Direct Bin(z, E[p(z', z) | z]) sampler; distributionally equals the two-stage one."""
    z = pd.base.sample_array(gen, n)
    qs = np.array([pd.mixed_binomial_success(int(k)) for k in np.unique(z)])
    lut = dict(zip((int(k) for k in np.unique(z)), qs))
    q = np.array([lut[int(k)] for k in z])
    return gen.binomial(z, q)


# ---------------------------------------------------------------------------
# tail exponent estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailEstimate:
    exponent: float  # pmf exponent: P(X = k) ~ k^-exponent
    ccdf_exponent: float
    tail_points: int
    reliable: bool
    note: str = ""
    diagnostics: dict = field(default_factory=dict)


def _hill(xs_desc: np.ndarray, k: int) -> float:
    """Hill estimator of the ccdf exponent from the top k order statistics."""
    top = xs_desc[:k].astype(float)
    ref = float(xs_desc[k])
    return 1.0 / float(np.mean(np.log(top / ref)))


def tail_exponent_estimate(samples, top_fraction: float = 0.01,
                           min_tail: int = 100) -> TailEstimate:
    """Hill-type estimate of the power-law pmf exponent of integer samples.

    Cutoff rule: the top `top_fraction` order statistics (at least `min_tail`
    points). The tail's empirical ccdf is then fit both log-log (power) and
    log-linear (exponential-type); the estimate is flagged unreliable when
    the tail is too thin or the exponential shape fits better.
    """
    xs = np.sort(np.asarray(samples, dtype=np.int64))[::-1]
    n = xs.size
    if n < 10_000:
        raise KernelError("tail estimation needs at least 1e4 samples")
    k = max(int(n * top_fraction), min_tail)
    if k >= n:
        raise KernelError("cutoff leaves no bulk below the tail")
    if xs[k] < 1 or xs[0] <= xs[k]:
        return TailEstimate(math.nan, math.nan, k, False, "no usable tail above the cutoff")
    a_hat = _hill(xs, k)
    # shape diagnostic on the tail ccdf: power tails are linear in log-log,
    # (stretched) exponential ones closer to linear in x vs log ccdf
    tail = xs[:k]
    vals, counts = np.unique(tail, return_counts=True)
    r2_power = r2_exp = math.nan
    if vals.size >= 5:
        ccdf = counts[::-1].cumsum()[::-1] / n
        ly = np.log(ccdf)
        r2_power = _corr2(np.log(vals.astype(float)), ly)
        r2_exp = _corr2(vals.astype(float), ly)
    thin = vals.size < 5
    reliable = not thin and r2_power >= r2_exp
    note = "" if reliable else (
        "tail too coarse above the cutoff" if thin else
        f"exponential shape fits the tail better (R2 {r2_exp:.3f} vs {r2_power:.3f})")
    return TailEstimate(
        exponent=a_hat + 1.0,
        ccdf_exponent=a_hat,
        tail_points=k,
        reliable=bool(reliable),
        note=note,
        diagnostics={"cutoff_value": float(xs[k]), "r2_power": r2_power,
                     "r2_exp": r2_exp},
    )


def _corr2(x, y):
    if x.size < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    return float(np.corrcoef(x, y)[0, 1] ** 2)

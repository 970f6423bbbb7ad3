"""Synthetic data generation and convergence experiments.

Directions are drawn either uniformly on the sphere or concentrated in
prescribed neighborhoods of the normalized rays, support values get
independent Gaussian noise, and repeated reconstructions measure how the
exact Hausdorff error decays with the sample count.  The theoretical
error bound and the eigenvalue inequalities behind it are evaluated from
the same plan parameters.

All randomness flows through a seeded 64-bit PCG64 generator with
Gaussians produced by the Marsaglia polar transform, so every experiment
is reproducible bit for bit from its seeds; ``GENERATOR_ID`` names the
scheme in output metadata.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .design import Dataset, DesignMatrix, build_design
from .estimator import reconstruct
from .fan import SimplicialFan, carrier
from .geometry import hausdorff

GENERATOR_ID = "pcg64/marsaglia-polar/1"


class QuotaInfeasible(Exception):
    """The per-ray sample quotas cannot fit into the sample budget."""


class NonpositiveLambda(Exception):
    """The variance-proxy factor of the error bound is not positive.

    Signals plan parameters outside the regime where the high-probability
    error bound applies; no bound value is available there.
    """


class HypothesisUnmet(Exception):
    """A dataset misses the per-ray concentration counts.

    The eigenvalue report built so far is attached as ``.report``; the
    upper bound has still been checked, the lower bound does not apply.
    """

    def __init__(self, message: str, report: "EigenReport"):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# Seeded Gaussian sampling (Marsaglia polar)
# ---------------------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(*key) -> int:
    """Stable 64-bit stream seed from a tuple of integers."""
    ss = np.random.SeedSequence([int(k) & 0xFFFFFFFF for k in key])
    return int(ss.generate_state(1, np.uint64)[0])


def gaussian_polar(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals via the polar rejection transform on ``rng``."""
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        pairs = (need + 1) // 2 + 8
        u = 2.0 * rng.random(pairs) - 1.0
        v = 2.0 * rng.random(pairs) - 1.0
        s = u * u + v * v
        ok = (s > 0.0) & (s < 1.0)
        factor = np.sqrt(-2.0 * np.log(s[ok]) / s[ok])
        draws = np.concatenate([u[ok] * factor, v[ok] * factor])
        take = min(draws.size, need)
        out[filled:filled + take] = draws[:take]
        filled += take
    return out


def sample_uniform_sphere(d: int, m: int, seed) -> np.ndarray:
    """m unit vectors, rotation invariant, deterministic per seed."""
    if m < 1:
        raise ValueError("m must be positive")
    rng = _rng(seed)
    out = np.empty((m, d))
    for i in range(m):
        while True:
            g = gaussian_polar(rng, d)
            norm = np.linalg.norm(g)
            if norm > 1e-12:
                out[i] = g / norm
                break
    return out


# ---------------------------------------------------------------------------
# Plans and noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingPlan:
    """Concentration plan: per-ray quotas of directions near each ray.

    ``quotas[j]`` directions are drawn from the neighborhood of ray j with
    concentration width ``t`` (``t = 0`` means the exact normalized ray);
    the remaining ``m - sum(quotas)`` directions are uniform on the sphere.
    """

    t: float
    delta: float
    m: int
    seed: int
    quotas: tuple[int, ...]

    def __post_init__(self):
        if not 0.0 <= self.t < 0.5:
            raise ValueError("t must lie in [0, 1/2)")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.m < 1:
            raise ValueError("m must be positive")
        if any(q < 0 for q in self.quotas):
            raise ValueError("negative quota")
        if sum(self.quotas) > self.m:
            raise QuotaInfeasible(
                f"quotas sum to {sum(self.quotas)} > m = {self.m}")


def make_plan(fan: SimplicialFan, t: float, delta: float, m: int, seed: int) -> SamplingPlan:
    """Plan with default quotas for the concentration hypothesis.

    Each ray needs ``m * (2.5 n t + delta)`` samples in its neighborhood.
    When the rounded-up quota fits n times into m it is used directly;
    when only the fractional requirement fits, the leftover is spread one
    sample at a time over the leading rays (the requirement is then met up
    to the integer rounding, which is the best any dataset of size m can
    do).  Raises ``QuotaInfeasible`` when even that fails.
    """
    n = fan.n_rays
    if not 0.0 <= t < 0.5:
        raise ValueError("t must lie in [0, 1/2)")
    required = m * (2.5 * n * t + delta)
    hi = math.ceil(required - 1e-9)
    if n * hi <= m:
        quotas = (hi,) * n
    else:
        lo = math.floor(required + 1e-9)
        if n * lo > m:
            raise QuotaInfeasible(
                f"each ray needs {required:.2f} of {m} samples; "
                f"{n} rays cannot be served")
        extra = m - n * lo
        quotas = tuple(lo + 1 if j < extra else lo for j in range(n))
    return SamplingPlan(t=t, delta=delta, m=m, seed=seed, quotas=quotas)


def facet_direction_plan(fan: SimplicialFan, m: int, delta: float | None = None,
                         seed: int = 0) -> SamplingPlan:
    """Plan that samples the exact normalized rays (t = 0) round robin."""
    if delta is None:
        delta = 1.0 / fan.n_rays
    return make_plan(fan, 0.0, delta, m, seed)


@dataclass(frozen=True)
class NoiseModel:
    """Independent centered Gaussian noise with uniformly bounded variance."""

    sigma: float
    seed: int
    gamma: float | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        gamma = self.gamma if self.gamma is not None else self.sigma ** 2
        if self.sigma ** 2 > gamma * (1 + 1e-12):
            raise ValueError("sigma exceeds the variance bound")
        object.__setattr__(self, "gamma", gamma)

    def sample(self, m: int, key: tuple[int, ...] = ()) -> np.ndarray:
        rng = _rng(derive_seed(self.seed, *key))
        return self.sigma * gaussian_polar(rng, m)


# ---------------------------------------------------------------------------
# Concentration neighborhoods
# ---------------------------------------------------------------------------

def in_ct(fan: SimplicialFan, x, j: int, t: float) -> bool:
    """Membership of ``x`` in the concentration neighborhood of ray j.

    The barycentric coefficients of ``x``, scaled by the ray norms, must be
    within ``t`` of the j-th unit vector in the sup norm.  A relative slack
    of 1e-9 absorbs round-off so the exact normalized ray passes at t = 0.
    """
    coeffs = carrier(fan, x).coeffs
    scaled = coeffs * fan.constants.ray_norms
    target = np.zeros(fan.n_rays)
    target[j] = 1.0
    return float(np.max(np.abs(scaled - target))) <= t + 1e-9


def _concentration_counts_from_rows(matrix: np.ndarray, ray_norms: np.ndarray,
                                    t: float) -> np.ndarray:
    """Per-ray neighborhood counts computed from design rows."""
    scaled = matrix * ray_norms[None, :]
    n = matrix.shape[1]
    counts = np.zeros(n, int)
    for j in range(n):
        target = np.zeros(n)
        target[j] = 1.0
        dist = np.max(np.abs(scaled - target[None, :]), axis=1)
        counts[j] = int(np.sum(dist <= t + 1e-9))
    return counts


def audit_concentration(fan: SimplicialFan, directions, plan: SamplingPlan) -> np.ndarray:
    """Count how many directions fall in each ray's neighborhood."""
    design = build_design(fan, directions)
    return _concentration_counts_from_rows(design.matrix, fan.constants.ray_norms, plan.t)


def sample_concentrated(fan: SimplicialFan, plan: SamplingPlan) -> np.ndarray:
    """Directions honoring the plan: quota samples first, round robin by ray.

    Quota samples for ray j are rejection-sampled perturbations of the
    normalized ray verified by ``in_ct`` (``t = 0`` short-circuits to the
    exact ray); the remaining budget is uniform on the sphere.  The
    interleaving is fixed so every prefix is as balanced as the quotas
    allow.
    """
    fan.require_valid()
    n = fan.n_rays
    if len(plan.quotas) != n:
        raise ValueError("plan quotas do not match the fan's ray count")
    rng = _rng(plan.seed)
    norms = fan.constants.ray_norms
    units = fan.rays / norms[:, None]
    radius = 0.5 * plan.t * float(np.min(norms))

    out = []
    remaining = list(plan.quotas)
    while any(q > 0 for q in remaining):
        for j in range(n):
            if remaining[j] <= 0:
                continue
            remaining[j] -= 1
            if plan.t == 0.0:
                out.append(units[j].copy())
                continue
            for _ in range(10000):
                x = units[j] + radius * gaussian_polar(rng, fan.dim)
                norm = np.linalg.norm(x)
                if norm < 1e-12:
                    continue
                x /= norm
                if in_ct(fan, x, j, plan.t):
                    out.append(x)
                    break
            else:
                raise RuntimeError(
                    f"rejection sampling starved for ray {j} at t={plan.t}")
    fill = plan.m - len(out)
    for _ in range(fill):
        while True:
            g = gaussian_polar(rng, fan.dim)
            norm = np.linalg.norm(g)
            if norm > 1e-12:
                out.append(g / norm)
                break
    return np.array(out)


# ---------------------------------------------------------------------------
# Theoretical bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundParameters:
    """Constants of the high-probability error bound for a plan.

    ``value(m)`` evaluates the bound at sample count m; it decays like
    ``1/sqrt(m)`` by construction.
    """

    kappa: float
    lam: float
    eta: float
    gamma: float
    prefactor: float

    def value(self, m: int) -> float:
        return self.prefactor / math.sqrt(m)


def bound_parameters(fan: SimplicialFan, plan: SamplingPlan, gamma: float,
                     eta: float) -> BoundParameters:
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    norms = fan.constants.ray_norms
    c = fan.constants.c_delta
    n = fan.n_rays
    d = fan.dim
    kappa = (plan.delta / float(np.max(norms)) ** 2) ** 1.5
    lam = c ** 2 - (c ** 2 - plan.t ** 2 / float(np.min(norms)) ** 2) \
        * (n - 1) * (2.5 * n * plan.t + plan.delta)
    if lam <= 0.0:
        raise NonpositiveLambda(
            f"variance factor is {lam:.3e}; plan parameters are outside the "
            f"bound's regime")
    prefactor = (n * c ** 2 / kappa) * math.sqrt(
        2.0 * d * gamma * lam * math.log(2.0 * n / eta))
    return BoundParameters(kappa=kappa, lam=lam, eta=eta, gamma=gamma,
                           prefactor=prefactor)


def theoretical_bound(fan: SimplicialFan, plan: SamplingPlan, gamma: float,
                      eta: float, m: int) -> float:
    """High-probability Hausdorff error bound at sample count m."""
    if m < 1:
        raise ValueError("m must be positive")
    return bound_parameters(fan, plan, gamma, eta).value(m)


# ---------------------------------------------------------------------------
# Eigenvalue checks
# ---------------------------------------------------------------------------

@dataclass
class EigenReport:
    lambda_min: float
    lambda_max: float
    upper_bound: float
    lower_bound: float | None
    upper_ok: bool
    lower_ok: bool | None
    counts: np.ndarray
    required: float
    hypothesis_met: bool


def eigen_checks(design: DesignMatrix, fan: SimplicialFan,
                 plan: SamplingPlan) -> EigenReport:
    """Extreme eigenvalues of the normal matrix against their bounds.

    The largest eigenvalue must not exceed ``m n c^2``; under the
    concentration counts the smallest must reach ``m delta / max||v||^2``.
    Raises ``HypothesisUnmet`` (report attached) when the counts fall short
    of ``m (2.5 n t + delta)``; the upper bound is checked either way.
    """
    gram = design.matrix.T @ design.matrix
    eigvals = np.linalg.eigvalsh(gram)
    lam_min, lam_max = float(eigvals[0]), float(eigvals[-1])
    norms = fan.constants.ray_norms
    c = fan.constants.c_delta
    m, n = design.m, design.n
    upper = m * n * c ** 2
    upper_ok = lam_max <= upper * (1.0 + 1e-9)

    counts = _concentration_counts_from_rows(design.matrix, norms, plan.t)
    required = m * (2.5 * n * plan.t + plan.delta)
    met = bool(np.all(counts >= required - 1e-9))
    report = EigenReport(
        lambda_min=lam_min, lambda_max=lam_max,
        upper_bound=upper, lower_bound=None,
        upper_ok=upper_ok, lower_ok=None,
        counts=counts, required=required, hypothesis_met=met)
    if not met:
        raise HypothesisUnmet(
            f"concentration counts {counts.tolist()} fall short of "
            f"{required:.2f}", report)
    lower = m * plan.delta / float(np.max(norms)) ** 2
    report.lower_bound = lower
    report.lower_ok = lam_min >= lower * (1.0 - 1e-9)
    return report


# ---------------------------------------------------------------------------
# Convergence experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRecord:
    m: int
    replicate: int
    hausdorff_error: float
    objective: float
    elapsed: float
    failed: bool = False
    message: str = ""


def run_convergence(fan: SimplicialFan, h0, plan_family, m_schedule,
                    replicates: int, noise: NoiseModel) -> list[ConvergenceRecord]:
    """Reconstruct from synthetic data over a schedule of sample counts.

    ``plan_family`` maps a sample count to a ``SamplingPlan``; each
    replicate reseeds the plan and the noise from (seed, m, replicate), so
    replicates are independent streams and the whole experiment is
    reproducible.  Failed reconstructions become failed records rather
    than aborting the run.
    """
    h0 = np.asarray(h0, float)
    m_schedule = list(m_schedule)
    if any(b <= a for a, b in zip(m_schedule, m_schedule[1:])):
        raise ValueError("m_schedule must be strictly increasing")
    records = []
    for m in m_schedule:
        base_plan = plan_family(m)
        for rep in range(replicates):
            plan = replace(base_plan, seed=derive_seed(base_plan.seed, m, rep))
            start = time.perf_counter()
            try:
                dirs = sample_concentrated(fan, plan)
                eps = noise.sample(m, key=(m, rep))
                design = build_design(fan, dirs)
                y = design.matrix @ h0 + eps
                result = reconstruct(fan, Dataset(dirs, y))
                err = hausdorff(fan, result.h_hat, h0)
                records.append(ConvergenceRecord(
                    m=m, replicate=rep, hausdorff_error=float(err),
                    objective=result.objective,
                    elapsed=time.perf_counter() - start))
            except Exception as exc:  # noqa: BLE001 - recorded per replicate
                records.append(ConvergenceRecord(
                    m=m, replicate=rep, hausdorff_error=float("nan"),
                    objective=float("nan"),
                    elapsed=time.perf_counter() - start,
                    failed=True, message=str(exc)))
    return records


def fit_loglog_slope(records: list[ConvergenceRecord]) -> float:
    """Least-squares slope of log median error against log m."""
    by_m: dict[int, list[float]] = {}
    for rec in records:
        if not rec.failed:
            by_m.setdefault(rec.m, []).append(rec.hausdorff_error)
    ms = sorted(by_m)
    if len(ms) < 2:
        raise ValueError("need at least two sample counts to fit a slope")
    xs = np.log([float(m) for m in ms])
    ys = np.log([float(np.median(by_m[m])) for m in ms])
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)

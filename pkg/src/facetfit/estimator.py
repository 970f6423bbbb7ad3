"""Least-squares reconstruction of a polytope from support evaluations.

For a fixed fan the estimate is the constrained least-squares minimizer
over the deformation cone; the fitted value vector is always unique even
when the minimizing support vector is not, and the solution set is a
polyhedron whose geometry is reported alongside the estimate.  A list of
candidate fans over the same rays turns the problem piecewise quadratic;
ties between fans are reported, never broken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import design as design_mod
from . import qp
from .design import Dataset, DesignMatrix, UniquenessReport, uniqueness_report
from .fan import SimplicialFan


@dataclass(frozen=True)
class SolutionSetDescription:
    """Shape of the minimizer set in parameter space.

    ``dimension`` 0 means the reconstruction is unique for this data.  For
    a bounded one-dimensional set the two endpoints are reported; higher
    dimensions report dimension and boundedness only.
    """

    dimension: int
    bounded: bool
    segment_endpoints: tuple[np.ndarray, np.ndarray] | None = None


@dataclass(frozen=True)
class ReconstructionResult:
    h_hat: np.ndarray
    y_hat: np.ndarray
    objective: float
    solution_set: SolutionSetDescription
    uniqueness: UniquenessReport
    qp_solution: qp.QPSolution


@dataclass(frozen=True)
class MultiReconstruction:
    """Per-fan results plus the set of fans attaining the best objective."""

    results: tuple[ReconstructionResult | None, ...]
    errors: tuple[Exception | None, ...]
    best_objective: float
    minimizing_fans: tuple[int, ...]

    @property
    def is_tie(self) -> bool:
        return len(self.minimizing_fans) > 1


def reconstruct(fan: SimplicialFan, dataset: Dataset,
                opts: qp.SolverOptions | None = None) -> ReconstructionResult:
    """Least-squares estimate of the support vector for one fan.

    Builds the wall system and design matrix, solves the constrained
    program, and attaches the uniqueness diagnostics and solution-set
    description.  Noiseless data from a member of the deformation cone
    yields objective zero.
    """
    fan.require_valid()
    dm = design_mod.build_design(fan, dataset.directions)
    walls = fan.wall_system
    problem = qp.ConstrainedLS(A=dm.matrix, y=dataset.values, B=walls.matrix)
    sol = qp.solve_cls(problem, opts)
    y_hat = dm.matrix @ sol.h_star
    report = uniqueness_report(fan, dm)
    sset = solution_set(fan, dm, y_hat, sol.h_star)
    return ReconstructionResult(
        h_hat=sol.h_star,
        y_hat=y_hat,
        objective=sol.objective,
        solution_set=sset,
        uniqueness=report,
        qp_solution=sol,
    )


def solution_set(fan: SimplicialFan, design: DesignMatrix, y_hat, h_hat) -> SolutionSetDescription:
    """Describe ``{h in cone : A h = y_hat}`` around an optimal ``h_hat``.

    Kernel directions of the design are probed by linear programs for how
    far ``h_hat`` can move while staying in the cone.  Dimension counts the
    kernel directions with room to move; for a single kernel direction the
    probe optima are the exact segment endpoints.
    """
    h_hat = np.asarray(h_hat, float)
    rank, kernel = design_mod.numeric_rank(design)
    n = design.n
    B = fan.wall_system.matrix
    if rank == n:
        return SolutionSetDescription(dimension=0, bounded=True)

    scale = 1.0 + float(np.linalg.norm(h_hat))
    tol = 1e-9 * scale
    movable = 0
    bounded = not detect_unbounded(fan, design)
    endpoints = None
    lambdas: list[tuple[float, float]] = []
    for z in kernel:
        lo, lo_unbounded = _extent(B, h_hat, z, sense=-1.0)
        hi, hi_unbounded = _extent(B, h_hat, z, sense=+1.0)
        if hi - lo > tol or hi_unbounded or lo_unbounded:
            movable += 1
        lambdas.append((lo, hi))
    if kernel.shape[0] == 1 and movable == 1 and bounded:
        lo, hi = lambdas[0]
        endpoints = (h_hat + lo * kernel[0], h_hat + hi * kernel[0])
    return SolutionSetDescription(dimension=movable, bounded=bounded,
                                  segment_endpoints=endpoints)


def _extent(B, h_hat, z, sense):
    """Extremal step ``lambda`` with ``B (h_hat + lambda z) >= 0``.

    Returns ``(lambda, unbounded_flag)``; solved in (h, lambda) variables
    so the inequality block stays homogeneous.
    """
    n = h_hat.shape[0]
    c = np.zeros(n + 1)
    c[n] = -sense
    Bx = np.hstack([B, np.zeros((B.shape[0], 1))]) if B.shape[0] else np.zeros((0, n + 1))
    E = np.hstack([np.eye(n), -z[:, None]])
    try:
        sol = qp.solve_lp(c, Bx, E, h_hat)
    except qp.Unbounded:
        return sense * np.inf, True
    return float(sol.x[n]), False


def detect_unbounded(fan: SimplicialFan, design: DesignMatrix) -> bool:
    """Whether the solution set is unbounded, i.e. the cone meets the kernel.

    The quick probe maximizes the coordinate sum over the kernel slice of
    the cone boxed by ``h <= 1`` (both signs); if that is inconclusive,
    each coordinate is probed separately, which decides the question
    exactly since a nontrivial cone point has some nonzero coordinate.
    """
    B = fan.wall_system.matrix
    A = design.matrix
    n = design.n
    objectives = [np.ones(n), -np.ones(n)]
    objectives += [row for i in range(n) for row in (np.eye(n)[i], -np.eye(n)[i])]
    bounds = [(-1.0, 1.0)] * n
    for w in objectives:
        try:
            sol = qp.solve_lp(-w, B, A, np.zeros(A.shape[0]), bounds)
        except (qp.Infeasible, qp.Unbounded):
            continue
        if w @ sol.x > 1e-9:
            return True
    return False


def reconstruct_multi(fans: list[SimplicialFan], dataset: Dataset,
                      opts: qp.SolverOptions | None = None,
                      tie_tol: float | None = None) -> MultiReconstruction:
    """Run the estimator for every candidate fan over the same rays.

    Per-fan failures are recorded and do not stop the remaining fans.  All
    fans whose objective is within ``tie_tol`` of the best are reported as
    minimizers; the default tolerance is relative to ``||y||^2`` so exact
    ties survive floating point.
    """
    if not fans:
        raise ValueError("need at least one fan")
    rays0 = fans[0].rays
    for k, f in enumerate(fans[1:], start=1):
        if f.rays.shape != rays0.shape or not np.allclose(f.rays, rays0, atol=1e-12):
            raise ValueError(f"fan {k} has a different ray list")
    if tie_tol is None:
        tie_tol = 1e-8 * (1.0 + float(dataset.values @ dataset.values))

    results: list[ReconstructionResult | None] = []
    errors: list[Exception | None] = []
    for f in fans:
        try:
            results.append(reconstruct(f, dataset, opts))
            errors.append(None)
        except Exception as exc:  # noqa: BLE001 - reported per fan
            results.append(None)
            errors.append(exc)
    objectives = [r.objective for r in results if r is not None]
    if not objectives:
        raise RuntimeError("reconstruction failed for every fan") from errors[0]
    best = min(objectives)
    minimizers = tuple(i for i, r in enumerate(results)
                       if r is not None and r.objective <= best + tie_tol)
    return MultiReconstruction(results=tuple(results), errors=tuple(errors),
                               best_objective=best, minimizing_fans=minimizers)


def gk_estimate(rays, dataset: Dataset,
                opts: qp.SolverOptions | None = None) -> np.ndarray:
    """Support-point baseline: fit one touching point per measurement.

    Solves the lifted least-squares problem in the m point variables
    ``x_1 .. x_m`` with the pairwise comparison constraints
    ``<x_j, u_i> <= <x_i, u_i>``, then returns the smallest polytope with
    the given facet directions containing the fitted points:
    ``h_i = max_j <x_j, v_i>``.  With measurements taken in the facet
    directions themselves this reproduces the constrained estimator; for
    other directions it may drift far from it.
    """
    rays = np.asarray(rays, float)
    U = dataset.directions
    y = dataset.values
    m, d = U.shape
    A = np.zeros((m, m * d))
    for i in range(m):
        A[i, i * d:(i + 1) * d] = U[i]
    rows = []
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            row = np.zeros(m * d)
            row[i * d:(i + 1) * d] = U[i]
            row[j * d:(j + 1) * d] = -U[i]
            rows.append(row)
    B = np.array(rows) if rows else np.zeros((0, m * d))
    sol = qp.solve_cls(qp.ConstrainedLS(A=A, y=y, B=B), opts)
    points = sol.h_star.reshape(m, d)
    return (points @ rays.T).max(axis=0)

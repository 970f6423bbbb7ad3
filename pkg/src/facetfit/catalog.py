"""Ready-made fans: regular polygons, the two roof fans, cubes, random fans.

These cover the recurring geometries of the test suite and give the CLI
something to write example files from.  ``random_polytopal_fan`` builds a
fan as the normal fan of a randomly generated simple polytope, so the
result is polytopal by construction.
"""

from __future__ import annotations

import itertools

import numpy as np

from .fan import SimplicialFan


def regular_polygon_fan(k: int) -> SimplicialFan:
    """Fan of the regular k-gon: unit rays at angles 2*pi*i/k, consecutive cells."""
    if k < 3:
        raise ValueError("need at least 3 rays")
    angles = 2.0 * np.pi * np.arange(k) / k
    rays = np.column_stack([np.cos(angles), np.sin(angles)])
    cells = [(i, (i + 1) % k) for i in range(k)]
    return SimplicialFan(rays, cells)


def hexagon_fan() -> SimplicialFan:
    return regular_polygon_fan(6)


_ROOF_RAYS = np.array([
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 1.0],
    [1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
])


def roof_fan_y() -> SimplicialFan:
    """Normal fan of the roof-shaped solid whose top ridge runs along the y axis."""
    cells = [(0, 2, 4), (1, 2, 4), (0, 3, 4), (1, 3, 4), (0, 2, 3), (1, 2, 3)]
    return SimplicialFan(_ROOF_RAYS.copy(), cells)


def roof_fan_x() -> SimplicialFan:
    """Same five rays as ``roof_fan_y`` but the ridge runs along the x axis."""
    cells = [(0, 2, 4), (1, 2, 4), (0, 3, 4), (1, 3, 4), (0, 1, 2), (0, 1, 3)]
    return SimplicialFan(_ROOF_RAYS.copy(), cells)


def cube_fan(d: int) -> SimplicialFan:
    """Normal fan of the cube [-1, 1]^d: rays +-e_i, one cell per orthant."""
    rays = np.vstack([np.eye(d), -np.eye(d)])
    cells = []
    for signs in itertools.product((0, 1), repeat=d):
        cells.append(tuple(i + d * s for i, s in enumerate(signs)))
    return SimplicialFan(rays, cells)


def orthant_fan(d: int) -> SimplicialFan:
    """Single cell spanned by the standard basis.  Not complete; only the
    per-cell operations are meaningful on it."""
    return SimplicialFan(np.eye(d), [tuple(range(d))])


def random_polytopal_fan(d: int, n: int, seed: int,
                         max_attempts: int = 200) -> SimplicialFan:
    """Normal fan of a random simple polytope with n facets in R^d.

    Samples unit facet normals and keeps a draw when the polytope
    ``{x : <v_i, x> <= 1}`` is bounded, simple and has all n facets; its
    vertex normal cones are then the maximal cells.  The support vector of
    all ones lies strictly inside the deformation cone of the result.
    """
    if d not in (2, 3):
        raise ValueError("random fans are generated for d in {2, 3}")
    if n < d + 1:
        raise ValueError("need at least d+1 facet normals")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        rays = rng.standard_normal((n, d))
        rays /= np.linalg.norm(rays, axis=1)[:, None]
        cells = _simple_polytope_cells(rays)
        if cells is None:
            continue
        fan = SimplicialFan(rays, cells)
        try:
            fan.require_valid()
        except Exception:
            continue
        return fan
    raise RuntimeError(f"no valid random fan after {max_attempts} attempts")


def _simple_polytope_cells(rays: np.ndarray):
    """Vertex/facet incidences of ``{x : rays @ x <= 1}`` if simple, else None."""
    n, d = rays.shape
    tol = 1e-9
    cells = []
    used = np.zeros(n, bool)
    for subset in itertools.combinations(range(n), d):
        M = rays[list(subset)]
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.ones(d))
        slack = rays @ x - 1.0
        if np.max(slack) > tol:
            continue
        # Simplicity: exactly d constraints tight at the vertex.
        tight = np.sum(slack > -tol)
        if tight != d:
            return None
        if np.linalg.norm(x) > 1e6:
            return None
        cells.append(subset)
        used[list(subset)] = True
    if not cells or not used.all():
        return None  # unbounded or a redundant facet
    return cells

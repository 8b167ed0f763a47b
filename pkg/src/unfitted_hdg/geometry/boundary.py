"""
Curved physical boundaries and the geometric queries behind transfer paths.

A boundary is either a closed parametric curve t in [0, 1) -> R^2 traversed
counterclockwise, or the zero level set of a function that is negative inside.
Both kinds answer signed-distance and ray-anchoring queries; all queries are
vectorized over point batches and read-only.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import shapely
import sympy as sp
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist

from ..core.errors import BoundaryDefinitionError, NoIntersection, NonConvergence
from .expressions import parse_expression, symbols, vectorize

logger = logging.getLogger(__name__)

POLYLINE_SAMPLES = 10_000
MAX_ITERATIONS = 100
ROOT_TOL = 1e-12
PARAM_TOL = 1e-15
BRACKET_EXPANSIONS = 20


class BoundaryKind(Enum):
    """Representation of the curve."""

    PARAMETRIC = "parametric-curve"
    IMPLICIT = "implicit-level-set"


@dataclass(frozen=True)
class AnchorResult:
    """Transfer-path data for one point x of the computational boundary."""

    anchor: np.ndarray
    length: float
    direction: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "anchor": [float(c) for c in self.anchor],
            "length": float(self.length),
            "direction": [float(c) for c in self.direction],
        }


@dataclass(frozen=True)
class AnchorBatch:
    """Batched anchoring result: lengths (P,), anchors (P, 2), multiple-root flags (P,)."""

    lengths: np.ndarray
    anchors: np.ndarray
    multiple_roots: np.ndarray


@dataclass(frozen=True, eq=False)
class DomainBoundary:
    """Closed, simple curve bounding the physical domain."""

    kind: BoundaryKind
    name: str
    interior_point: np.ndarray
    param_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    param_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    param_second: Optional[Callable[[np.ndarray], np.ndarray]] = None
    level_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    level_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    # ------------------------------------------------------------------ shape
    @cached_property
    def _polyline_params(self) -> np.ndarray:
        return np.arange(POLYLINE_SAMPLES) / POLYLINE_SAMPLES

    @cached_property
    def polyline(self) -> np.ndarray:
        """Dense closed polyline proxy (without the repeated first point)."""
        pts = self.points_at(self._polyline_params)
        pts.setflags(write=False)
        return pts

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.polyline)

    @cached_property
    def bounding_box(self) -> Tuple[float, float, float, float]:
        lo = self.polyline.min(axis=0)
        hi = self.polyline.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @cached_property
    def diameter(self) -> float:
        hull = ConvexHull(self.polyline)
        return float(pdist(self.polyline[hull.vertices]).max())

    @cached_property
    def area(self) -> float:
        """Enclosed area; periodic trapezoid rule on Green's formula."""
        t = self._polyline_params
        if self.kind is BoundaryKind.PARAMETRIC:
            p = self.param_eval(t)
            d = self.param_derivative(t)
            return 0.5 * float(np.mean(p[:, 0] * d[:, 1] - p[:, 1] * d[:, 0]))
        radii = np.linalg.norm(self.polyline - self.interior_point, axis=1)
        return 0.5 * float(np.mean(radii ** 2)) * 2.0 * np.pi

    def points_at(self, t: np.ndarray) -> np.ndarray:
        """Curve points for parameters t in [0, 1)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind is BoundaryKind.PARAMETRIC:
            return self.param_eval(t)
        return self._radial_points(2.0 * np.pi * t)

    def outward_normals(self, points: np.ndarray, t: Optional[np.ndarray] = None) -> np.ndarray:
        """Unit outward normals at boundary points (parameters needed for curves)."""
        if self.kind is BoundaryKind.PARAMETRIC:
            if t is None:
                t = self._project(points)[0]
            d = self.param_derivative(np.asarray(t, dtype=float))
            n = np.column_stack([d[:, 1], -d[:, 0]])
        else:
            n = self.level_gradient(points)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def sample_arclength(self, h: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Sample the curve at (nearly) equal arc-length spacing h.

        Args:
            h: Target spacing

        Returns:
            (points (n, 2), outward unit normals (n, 2)), counterclockwise
        """
        t = self._polyline_params
        closed = np.vstack([self.polyline, self.polyline[:1]])
        cumulative = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
        total = cumulative[-1]
        n = max(3, int(np.ceil(total / h)))
        targets = total * np.arange(n) / n
        t_samples = np.interp(targets, cumulative, np.append(t, 1.0))
        points = self.points_at(t_samples)
        return points, self.outward_normals(points, t_samples)

    # ------------------------------------------------------------ validation
    def validate(self) -> "DomainBoundary":
        """
        Check closedness, simplicity and orientation conventions.

        Raises:
            BoundaryDefinitionError: If any convention is violated
        """
        if self.kind is BoundaryKind.PARAMETRIC:
            gap = np.linalg.norm(self.param_eval(np.array([0.0]))[0] - self.param_eval(np.array([1.0]))[0])
            if gap > 1e-12 * max(1.0, float(np.abs(self.polyline).max())):
                raise BoundaryDefinitionError(f"curve '{self.name}' is not closed (gap {gap:.3e})", "boundary")
        else:
            interior_value = float(self.level_eval(self.interior_point[None, :])[0])
            if not interior_value < 0:
                raise BoundaryDefinitionError(
                    f"level set '{self.name}' is not negative at the interior point", "boundary.interior_point"
                )
            x0, y0, x1, y1 = self.bounding_box
            outside = np.array([[x1 + (x1 - x0), y1 + (y1 - y0)]])
            if not float(self.level_eval(outside)[0]) > 0:
                raise BoundaryDefinitionError(
                    f"level set '{self.name}' is not positive outside its bounding box", "boundary.expression"
                )
        ring = shapely.LineString(np.vstack([self.polyline, self.polyline[:1]]))
        if not ring.is_simple:
            raise BoundaryDefinitionError(f"curve '{self.name}' self-intersects", "boundary")
        if self.kind is BoundaryKind.PARAMETRIC and self.area <= 0:
            raise BoundaryDefinitionError(f"curve '{self.name}' must run counterclockwise", "boundary")
        logger.info(f"Boundary '{self.name}' validated: area {self.area:.6g}, diameter {self.diameter:.6g}")
        return self

    # ----------------------------------------------------------- level values
    def level(self, points: np.ndarray) -> np.ndarray:
        """Negative-inside level values used for root bracketing."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is BoundaryKind.PARAMETRIC:
            return self._signed_distance_parametric(points)
        return self.level_eval(points)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed distance, negative inside (see module function signed_distance)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is BoundaryKind.PARAMETRIC:
            return self._signed_distance_parametric(points)
        foot = self._project_level(points)
        return np.sign(self.level_eval(points)) * np.linalg.norm(points - foot, axis=1)

    def _stationarity(self, t: np.ndarray, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """f = (gamma(t) - p) . gamma'(t), its t-derivative and the scale |gamma(t) - p| |gamma'(t)|."""
        t = np.mod(t, 1.0)
        d1 = self.param_derivative(t)
        r = self.param_eval(t) - points
        f = np.einsum("nd,nd->n", r, d1)
        fprime = np.einsum("nd,nd->n", d1, d1) + np.einsum("nd,nd->n", r, self.param_second(t))
        scale = np.linalg.norm(r, axis=1) * np.linalg.norm(d1, axis=1)
        return f, fprime, scale

    def _project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Nearest-point projection onto a parametric curve: (t, foot points).

        The minimiser of |gamma(t) - p| lies within one polyline spacing of the
        nearest polyline sample, where f(t) = (gamma(t) - p) . gamma'(t) changes
        sign from negative to positive. Newton steps on f are kept inside that
        bracket and replaced by bisection when they leave it or f' <= 0; the
        iteration stops once |f| <= ROOT_TOL |gamma(t) - p| |gamma'(t)|.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _, idx = self._tree.query(points)
        seed = self._polyline_params[idx]
        width = np.full(len(points), 1.0 / POLYLINE_SAMPLES)
        lo, hi = seed - width, seed + width
        for _ in range(BRACKET_EXPANSIONS):
            f_lo = self._stationarity(lo, points)[0]
            f_hi = self._stationarity(hi, points)[0]
            open_lo, open_hi = f_lo > 0, f_hi < 0
            if not np.any(open_lo | open_hi):
                break
            width = np.where(open_lo | open_hi, 2.0 * width, width)
            lo = np.where(open_lo, lo - width, lo)
            hi = np.where(open_hi, hi + width, hi)
        else:
            raise NonConvergence(f"could not bracket the nearest point on '{self.name}'")

        t = np.clip(seed, lo, hi)
        for _ in range(MAX_ITERATIONS):
            f, fprime, scale = self._stationarity(t, points)
            done = (np.abs(f) <= ROOT_TOL * scale) | (hi - lo <= PARAM_TOL)
            if np.all(done):
                t = np.mod(t, 1.0)
                return t, self.param_eval(t)
            lo = np.where(f < 0, t, lo)
            hi = np.where(f > 0, t, hi)
            newton = t - f / np.where(fprime > 0, fprime, 1.0)
            inside = (fprime > 0) & (newton > lo) & (newton < hi)
            t = np.where(done, t, np.where(inside, newton, 0.5 * (lo + hi)))
        raise NonConvergence(
            f"nearest-point projection onto '{self.name}' did not converge in {MAX_ITERATIONS} iterations"
        )

    def _signed_distance_parametric(self, points: np.ndarray) -> np.ndarray:
        t, foot = self._project(points)
        d = self.param_derivative(t)
        normal = np.column_stack([d[:, 1], -d[:, 0]])
        offset = points - foot
        sign = np.sign(np.einsum("nd,nd->n", offset, normal))
        return sign * np.linalg.norm(offset, axis=1)

    def _project_level(self, points: np.ndarray) -> np.ndarray:
        x = points.copy()
        scale = max(self.diameter, 1.0)
        for _ in range(MAX_ITERATIONS):
            phi = self.level_eval(x)
            grad = self.level_gradient(x)
            g2 = np.einsum("nd,nd->n", grad, grad)
            if np.any(g2 == 0):
                break
            x = x - (phi / g2)[:, None] * grad
            if np.all(np.abs(phi) <= ROOT_TOL * scale * np.sqrt(g2)):
                return x
        raise NonConvergence(f"projection onto level set '{self.name}' did not converge")

    def _radial_points(self, theta: np.ndarray) -> np.ndarray:
        """First exit of rays from the interior point (star-shaped level sets)."""
        direction = np.column_stack([np.cos(theta), np.sin(theta)])
        lo = np.zeros(len(theta))
        hi = np.full(len(theta), 0.01)
        for _ in range(200):
            inside = self.level_eval(self.interior_point + hi[:, None] * direction) < 0
            if not inside.any():
                break
            lo = np.where(inside, hi, lo)
            hi = np.where(inside, hi * 1.5, hi)
        else:
            raise NonConvergence(f"level set '{self.name}' is unbounded along some ray")
        for _ in range(MAX_ITERATIONS):
            mid = 0.5 * (lo + hi)
            inside = self.level_eval(self.interior_point + mid[:, None] * direction) < 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
            if np.all(hi - lo <= ROOT_TOL * np.maximum(hi, 1.0)):
                break
        return self.interior_point + (0.5 * (lo + hi))[:, None] * direction


def signed_distance(boundary: DomainBoundary, p: np.ndarray) -> np.ndarray:
    """
    Signed distance from points to the boundary, negative strictly inside.

    Parametric curves use nearest-point projection (safeguarded Newton on
    the curve parameter inside a bracket around the nearest polyline sample); level sets use gradient
    projection onto the zero level.

    Raises:
        NonConvergence: If the projection fails within 100 iterations
    """
    values = boundary.signed_distance(p)
    return values if np.ndim(p) > 1 else values[0]


def anchor_points(
    boundary: DomainBoundary,
    xs: np.ndarray,
    ns: np.ndarray,
    step: Optional[float] = None,
) -> AnchorBatch:
    """
    Smallest s >= 0 with x + s n on the boundary, for a batch of rays.

    Args:
        boundary: The physical boundary
        xs: Ray origins (P, 2), inside or on the boundary
        ns: Unit directions (P, 2)
        step: Bracketing step along the rays (default diameter / 200)

    Returns:
        AnchorBatch with lengths, anchor points and multiple-root flags

    Raises:
        NoIntersection: If a ray shows no sign change within 2 diameters
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ns = np.atleast_2d(np.asarray(ns, dtype=float))
    diameter = boundary.diameter
    step = step if step is not None and step > 0 else diameter / 200.0
    tol = ROOT_TOL * diameter
    count = len(xs)

    start_level = boundary.level(xs)
    lo = np.zeros(count)
    hi = np.zeros(count)
    found = np.abs(start_level) <= tol
    on_curve = found.copy()
    active = ~found
    s = 0.0
    while active.any():
        s += step
        if s > 2.0 * diameter:
            bad = np.flatnonzero(active)
            raise NoIntersection(f"{len(bad)} ray(s) never leave the domain, first origin {xs[bad[0]].tolist()}")
        idx = np.flatnonzero(active)
        values = boundary.level(xs[idx] + s * ns[idx])
        crossed = values >= 0
        hit = idx[crossed]
        lo[hit] = s - step
        hi[hit] = s
        found[hit] = True
        active[hit] = False

    bracket = np.flatnonzero(~on_curve)
    multiple = np.zeros(count, dtype=bool)
    if bracket.size:
        offsets = lo[bracket, None] + (hi - lo)[bracket, None] * np.linspace(0.0, 1.0, 9)[None, :]
        pts = xs[bracket, None, :] + offsets[..., None] * ns[bracket, None, :]
        signs = boundary.level(pts.reshape(-1, 2)).reshape(len(bracket), -1) >= 0
        multiple[bracket] = np.count_nonzero(np.diff(signs.astype(int), axis=1), axis=1) > 1
        a = lo[bracket]
        b = hi[bracket]
        for _ in range(MAX_ITERATIONS):
            mid = 0.5 * (a + b)
            outside = boundary.level(xs[bracket] + mid[:, None] * ns[bracket]) >= 0
            a = np.where(outside, a, mid)
            b = np.where(outside, mid, b)
            if np.all(b - a <= tol):
                break
        lo[bracket] = 0.5 * (a + b)
    lengths = np.where(on_curve, 0.0, lo)
    anchors = xs + lengths[:, None] * ns
    if multiple.any():
        logger.warning(f"{int(multiple.sum())} transfer ray(s) cross the boundary more than once near their anchor")
    return AnchorBatch(lengths=lengths, anchors=anchors, multiple_roots=multiple)


def anchor_point(
    boundary: DomainBoundary, x: np.ndarray, n: np.ndarray, step: Optional[float] = None
) -> AnchorResult:
    """Anchor of a single transfer path: x + length * n on the boundary."""
    batch = anchor_points(boundary, np.asarray(x, dtype=float)[None, :], np.asarray(n, dtype=float)[None, :], step)
    return AnchorResult(
        anchor=batch.anchors[0], length=float(batch.lengths[0]), direction=np.asarray(n, dtype=float)
    )


# ---------------------------------------------------------------- catalog
def _parametric(name: str, x_expr: sp.Expr, y_expr: sp.Expr, interior: Tuple[float, float]) -> DomainBoundary:
    (t,) = symbols("t")
    exprs = [x_expr, y_expr]
    first = [sp.diff(e, t) for e in exprs]
    second = [sp.diff(e, t, 2) for e in exprs]

    def stack(parts: Any) -> Callable[[np.ndarray], np.ndarray]:
        funcs = [vectorize(e, ["t"]) for e in parts]
        return lambda tt: np.column_stack([f(np.atleast_1d(tt)) for f in funcs])

    return DomainBoundary(
        kind=BoundaryKind.PARAMETRIC,
        name=name,
        interior_point=np.asarray(interior, dtype=float),
        param_eval=stack(exprs),
        param_derivative=stack(first),
        param_second=stack(second),
    )


def circle(center: Tuple[float, float] = (0.0, 0.0), radius: float = 1.0) -> DomainBoundary:
    (t,) = symbols("t")
    cx, cy = (sp.nsimplify(c) for c in center)
    r = sp.nsimplify(radius)
    angle = 2 * sp.pi * t
    return _parametric("circle", cx + r * sp.cos(angle), cy + r * sp.sin(angle), center)


def ellipse(center: Tuple[float, float] = (0.0, 0.0), a: float = 1.0, b: float = 0.5) -> DomainBoundary:
    (t,) = symbols("t")
    cx, cy = (sp.nsimplify(c) for c in center)
    angle = 2 * sp.pi * t
    return _parametric("ellipse", cx + sp.nsimplify(a) * sp.cos(angle), cy + sp.nsimplify(b) * sp.sin(angle), center)


def kite(scale: float = 1.0) -> DomainBoundary:
    (t,) = symbols("t")
    angle = 2 * sp.pi * t
    s = sp.nsimplify(scale)
    x = s * (sp.cos(angle) + sp.Rational(13, 20) * sp.cos(2 * angle) - sp.Rational(13, 20))
    y = s * sp.Rational(3, 2) * sp.sin(angle)
    return _parametric("kite", x, y, (0.0, 0.0))


def parametric_curve(x_text: str, y_text: str, interior: Tuple[float, float] = (0.0, 0.0)) -> DomainBoundary:
    """User curve from expressions in t over [0, 1)."""
    return _parametric(
        f"parametric({x_text}, {y_text})",
        parse_expression(x_text, ["t"]),
        parse_expression(y_text, ["t"]),
        interior,
    )


def level_set(text: str, interior: Tuple[float, float] = (0.0, 0.0)) -> DomainBoundary:
    """User boundary as the zero level set of an expression in x, y."""
    expr = parse_expression(text, ["x", "y"])
    x, y = symbols("x", "y")
    value = vectorize(expr, ["x", "y"])
    gx = vectorize(sp.diff(expr, x), ["x", "y"])
    gy = vectorize(sp.diff(expr, y), ["x", "y"])
    return DomainBoundary(
        kind=BoundaryKind.IMPLICIT,
        name=f"level-set({text})",
        interior_point=np.asarray(interior, dtype=float),
        level_eval=lambda p: value(p[..., 0], p[..., 1]),
        level_gradient=lambda p: np.stack([gx(p[..., 0], p[..., 1]), gy(p[..., 0], p[..., 1])], axis=-1),
    )


def boundary_from_config(section: Dict[str, Any]) -> DomainBoundary:
    """
    Build and validate a boundary from its run-config description.

    Args:
        section: Dictionary with 'kind' and kind-specific parameters

    Returns:
        Validated DomainBoundary
    """
    kind = section.get("kind")
    interior = tuple(section.get("interior_point") or (0.0, 0.0))
    if kind == "circle":
        boundary = circle(tuple(section.get("center", (0.0, 0.0))), float(section.get("radius", 1.0)))
    elif kind == "ellipse":
        boundary = ellipse(tuple(section.get("center", (0.0, 0.0))), float(section.get("a", 1.0)), float(section.get("b", 0.5)))
    elif kind == "kite":
        boundary = kite(float(section.get("scale", 1.0)))
    elif kind == "parametric":
        boundary = parametric_curve(section["x"], section["y"], interior)
    elif kind == "level-set":
        boundary = level_set(section["expression"], interior)
    else:
        raise BoundaryDefinitionError(f"unknown boundary kind '{kind}'", "boundary.kind")
    return boundary.validate()

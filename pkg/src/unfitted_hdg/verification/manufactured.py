"""
Manufactured solutions: a chosen u* with its flux, gradient and the
compensating source derived symbolically.

The problem solved is -div(kappa grad u) = f0(u) + f_c(x, y), where f_c is
chosen so that u* satisfies it exactly.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import sympy as sp

from ..core.errors import ExpressionError, NonDifferentiable
from ..core.problem import KappaVariant, LipschitzConstants, ProblemSpec
from ..geometry.expressions import parse_expression, symbols, vectorize

logger = logging.getLogger(__name__)

KAPPA_VARIABLES = {KappaVariant.OF_U: ("u",), KappaVariant.OF_GRAD: ("sx", "sy")}
SOURCE_VARIABLES = ("x", "y", "u")

_NON_SMOOTH = (sp.sign, sp.DiracDelta, sp.Heaviside, sp.Derivative, sp.Subs)


def _check_smooth(expr: sp.Expr, what: str) -> sp.Expr:
    if expr.has(*_NON_SMOOTH) or expr.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise NonDifferentiable(f"{what} is not differentiable in closed form: {expr}")
    return expr


def _vector(components: Tuple[sp.Expr, sp.Expr]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    fx, fy = (vectorize(c, ("x", "y")) for c in components)

    def evaluate(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.stack([fx(x, y), fy(x, y)], axis=-1)

    return evaluate


def _matrix(rows: Tuple[Tuple[sp.Expr, sp.Expr], ...]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    funcs = [[vectorize(c, ("x", "y")) for c in row] for row in rows]

    def evaluate(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.stack([np.stack([f(x, y) for f in row], axis=-1) for row in funcs], axis=-2)

    return evaluate


@dataclass(frozen=True)
class ManufacturedCase:
    """
    Exact fields of a manufactured problem.

    Vector fields return (..., 2) and Jacobians (..., 2, 2) with
    J[i, j] = d_j v_i.
    """

    u_text: str
    kappa_text: str
    f0_text: str
    kappa_variant: KappaVariant
    u_expr: sp.Expr
    kappa_expr: sp.Expr
    f0_expr: sp.Expr
    fc_expr: sp.Expr
    u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray, np.ndarray], np.ndarray]
    q: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma_jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    q_jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kappa: Callable[..., np.ndarray]
    f0: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    f_c: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def source(self, x: np.ndarray, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        """f(x, y, u) = f0(x, y, u) + f_c(x, y)."""
        return self.f0(x, y, u) + self.f_c(x, y)

    def g(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.u(x, y)

    def to_problem(
        self,
        degree: int,
        kappa_lo: float,
        kappa_hi: float,
        tau: float = 1.0,
        tau_boundary: Optional[float] = None,
        lipschitz: Optional[LipschitzConstants] = None,
    ) -> ProblemSpec:
        """Problem whose exact solution is u*, with g = u* on the boundary."""
        return ProblemSpec(
            kappa_variant=self.kappa_variant,
            kappa=self.kappa,
            kappa_lo=kappa_lo,
            kappa_hi=kappa_hi,
            source=self.source,
            g=self.g,
            degree=degree,
            tau=tau,
            tau_boundary=tau_boundary,
            lipschitz=lipschitz or LipschitzConstants(),
        )

    def pde_residual(self, x: np.ndarray, y: np.ndarray, step: float = 1e-4) -> np.ndarray:
        """
        div q - f0(u*) - f_c at the given points, with div q from central
        differences of the exact flux.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dqx = (self.q(x + step, y)[..., 0] - self.q(x - step, y)[..., 0]) / (2 * step)
        dqy = (self.q(x, y + step)[..., 1] - self.q(x, y - step)[..., 1]) / (2 * step)
        return dqx + dqy - self.source(x, y, self.u(x, y))


def make_manufactured(
    u_text: str,
    kappa_text: str = "1",
    kappa_variant: KappaVariant = KappaVariant.OF_U,
    f0_text: str = "0",
) -> ManufacturedCase:
    """
    Build a manufactured case from expression strings.

    Args:
        u_text: Exact solution u*(x, y)
        kappa_text: kappa(u) or kappa(sx, sy), depending on the variant
        kappa_variant: Diffusivity dependence
        f0_text: Solution-dependent source part f0(x, y, u)

    Returns:
        ManufacturedCase

    Raises:
        ExpressionError: If an expression leaves the grammar
        NonDifferentiable: If a derivative has no closed form
    """
    variant = KappaVariant(kappa_variant)
    x, y = symbols("x", "y")
    u_sym, sx_sym, sy_sym = symbols("u", "sx", "sy")
    u_expr = parse_expression(u_text, ("x", "y"))
    kappa_expr = parse_expression(kappa_text, KAPPA_VARIABLES[variant])
    f0_expr = parse_expression(f0_text, SOURCE_VARIABLES)

    try:
        grad = (sp.diff(u_expr, x), sp.diff(u_expr, y))
        for i, component in enumerate(grad):
            _check_smooth(component, f"d u*/d{'xy'[i]}")
        if variant is KappaVariant.OF_U:
            kappa_exact = kappa_expr.subs(u_sym, u_expr)
        else:
            kappa_exact = kappa_expr.subs({sx_sym: grad[0], sy_sym: grad[1]}, simultaneous=True)
        flux = (-kappa_exact * grad[0], -kappa_exact * grad[1])
        divergence = sp.diff(flux[0], x) + sp.diff(flux[1], y)
        f_c = _check_smooth(divergence - f0_expr.subs(u_sym, u_expr), "compensating source")
        hessian = tuple(tuple(_check_smooth(sp.diff(g, v), "Hessian of u*") for v in (x, y)) for g in grad)
        flux_jacobian = tuple(tuple(_check_smooth(sp.diff(q, v), "flux Jacobian") for v in (x, y)) for q in flux)
    except (NonDifferentiable, ExpressionError):
        raise
    except Exception as e:
        raise NonDifferentiable(f"cannot differentiate '{u_text}' with kappa '{kappa_text}': {e}") from e

    logger.info(f"Manufactured case u* = {u_text}, kappa = {kappa_text}: f_c = {f_c}")
    return ManufacturedCase(
        u_text=u_text,
        kappa_text=kappa_text,
        f0_text=f0_text,
        kappa_variant=variant,
        u_expr=u_expr,
        kappa_expr=kappa_expr,
        f0_expr=f0_expr,
        fc_expr=f_c,
        u=vectorize(u_expr, ("x", "y")),
        sigma=_vector(grad),
        q=_vector(flux),
        sigma_jacobian=_matrix(hessian),
        q_jacobian=_matrix(flux_jacobian),
        kappa=vectorize(kappa_expr, KAPPA_VARIABLES[variant]),
        f0=vectorize(f0_expr, SOURCE_VARIABLES),
        f_c=vectorize(f_c, ("x", "y")),
    )

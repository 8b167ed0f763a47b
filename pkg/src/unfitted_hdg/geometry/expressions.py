"""
Expression strings for boundaries, coefficients and manufactured solutions.

Grammar: arithmetic (+ - * / ** and parentheses), sin, cos, exp, sqrt, abs,
and the constants pi and e. Parsing goes through sympy; evaluation through
lambdified numpy functions.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from ..core.errors import ExpressionError

logger = logging.getLogger(__name__)

ALLOWED_FUNCTIONS = (sp.sin, sp.cos, sp.exp, sp.Abs)


def _namespace(variables: Sequence[str]) -> Dict[str, object]:
    names: Dict[str, object] = {
        "sin": sp.sin,
        "cos": sp.cos,
        "exp": sp.exp,
        "sqrt": sp.sqrt,
        "abs": sp.Abs,
        "pi": sp.pi,
        "e": sp.E,
    }
    for name in variables:
        names[name] = sp.Symbol(name, real=True)
    return names


def _check_grammar(expr: sp.Expr, variables: Sequence[str], text: str) -> None:
    allowed_symbols = set(variables)
    for symbol in expr.free_symbols:
        if symbol.name not in allowed_symbols:
            raise ExpressionError(
                f"unknown symbol '{symbol.name}' in '{text}' (allowed: {sorted(allowed_symbols)})"
            )
    for node in sp.preorder_traversal(expr):
        if isinstance(node, sp.Function) and not isinstance(node, ALLOWED_FUNCTIONS):
            raise ExpressionError(f"function '{node.func}' is not supported in '{text}'")


def parse_expression(text: str, variables: Sequence[str]) -> sp.Expr:
    """
    Parse an expression string into a sympy expression.

    Args:
        text: Expression text
        variables: Names of the free variables allowed in the expression

    Returns:
        Parsed sympy expression

    Raises:
        ExpressionError: If the text cannot be parsed or leaves the grammar
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    try:
        expr = parse_expr(
            text.replace("^", "**"),
            local_dict=_namespace(variables),
            global_dict={"__builtins__": {}, **_sympy_atoms()},
            transformations=standard_transformations,
            evaluate=True,
        )
    except ExpressionError:
        raise
    except Exception as e:
        raise ExpressionError(f"cannot parse '{text}': {e}") from e
    if not isinstance(expr, sp.Expr):
        raise ExpressionError(f"'{text}' is not a scalar expression")
    _check_grammar(expr, variables, text)
    return expr


def _sympy_atoms() -> Dict[str, object]:
    return {
        "Integer": sp.Integer,
        "Float": sp.Float,
        "Rational": sp.Rational,
        "Symbol": sp.Symbol,
    }


def symbols(*names: str) -> Tuple[sp.Symbol, ...]:
    """Real symbols matching the names used by parse_expression."""
    return tuple(sp.Symbol(name, real=True) for name in names)


def vectorize(expr: sp.Expr, variables: Sequence[str]) -> Callable[..., np.ndarray]:
    """
    Lambdify an expression into a numpy function that always returns an array
    broadcast to the shape of its inputs (constants included).
    """
    syms = symbols(*variables)
    func = sp.lambdify(syms, expr, modules="numpy")

    def evaluate(*args: np.ndarray) -> np.ndarray:
        arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
        value = np.asarray(func(*arrays), dtype=float)
        return np.broadcast_to(value, arrays[0].shape if arrays else value.shape).copy()

    return evaluate


@dataclass(frozen=True)
class CompiledExpression:
    """A parsed expression with its numpy evaluator."""

    text: str
    variables: Tuple[str, ...]
    expr: sp.Expr
    func: Callable[..., np.ndarray]

    def __call__(self, *args: np.ndarray) -> np.ndarray:
        return self.func(*args)


def compile_expression(text: str, variables: Sequence[str]) -> CompiledExpression:
    """Parse and lambdify an expression string."""
    expr = parse_expression(text, variables)
    logger.debug(f"Compiled expression '{text}' over {tuple(variables)}")
    return CompiledExpression(text, tuple(variables), expr, vectorize(expr, variables))

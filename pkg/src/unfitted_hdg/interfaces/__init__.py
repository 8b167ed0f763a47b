"""
Command-line interface for the unfitted HDG solver.
"""

from .cli import build_parser, main, run_cli

__all__ = ["build_parser", "main", "run_cli"]

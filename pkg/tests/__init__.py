"""
Test package for the unfitted HDG solver.
"""

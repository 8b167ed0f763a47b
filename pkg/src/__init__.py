"""
Unfitted HDG - Source Package
"""

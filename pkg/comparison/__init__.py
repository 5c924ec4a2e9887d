"""
Comparison Module
Side-by-side comparison of estimation methods
"""

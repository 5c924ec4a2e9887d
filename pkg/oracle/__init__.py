"""
Oracle Module
Monte Carlo ground truth for the Taylor approximations
"""

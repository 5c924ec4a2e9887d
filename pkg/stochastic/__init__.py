"""
Stochastic Module
Random vector models, covariance factorization and sampling
"""

"""
Autodiff Module
Exact gradients and Hessians by hyper-dual forward propagation
"""

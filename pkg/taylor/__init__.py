"""
Taylor Module
First-order, second-order and trace-form approximations of E f(x)
"""

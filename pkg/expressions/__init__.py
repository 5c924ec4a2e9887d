"""
Expressions Module
Parsing, serializing and evaluating scalar functions of x1..xn
"""

"""
Core Module
Settings and the error hierarchy shared by every package
"""

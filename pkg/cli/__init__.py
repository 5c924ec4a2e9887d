"""
CLI Module
Command-line surface: job files, runners and report rendering
"""

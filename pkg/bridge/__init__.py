"""
Bridge Module
Trace-rule averages as the small-dispersion limit of classical averages
"""

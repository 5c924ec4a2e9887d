"""
Storage Module
SQLite run history for estimate and bridge reports
"""

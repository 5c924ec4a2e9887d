"""
Database Module
Initialize and manage the SQLite run history
"""

import sqlite3
import logging

logger = logging.getLogger(__name__)


def init_database(db_path='moments.db'):
    """
    Initialize SQLite database with all required tables

    Args:
        db_path: Path to database file
    """
    conn = sqlite3.connect(db_path)
    cursor = conn.cursor()

    # Runs table (one row per CLI invocation)
    cursor.execute('''
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            kind TEXT NOT NULL,
            expression TEXT NOT NULL,
            family TEXT,
            seed TEXT,
            report TEXT NOT NULL,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    ''')

    # Estimates table (one row per method of an estimate run)
    cursor.execute('''
        CREATE TABLE IF NOT EXISTS estimates (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id INTEGER,
            method TEXT NOT NULL,
            value REAL,
            constant_term REAL,
            correction_term REAL,
            std_error REAL,
            closest INTEGER DEFAULT 0,
            FOREIGN KEY (run_id) REFERENCES runs(id)
        )
    ''')

    # Convergence rows table (one row per alpha of a bridge run)
    cursor.execute('''
        CREATE TABLE IF NOT EXISTS convergence_rows (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id INTEGER,
            alpha REAL,
            classical_mean REAL,
            rescaled REAL,
            quantum_value REAL,
            gap REAL,
            mc_std_error REAL,
            FOREIGN KEY (run_id) REFERENCES runs(id)
        )
    ''')

    conn.commit()
    conn.close()

    logger.info(f"Database initialized: {db_path}")


def get_connection(db_path='moments.db'):
    """
    Get database connection

    Args:
        db_path: Path to database file

    Returns:
        SQLite connection
    """
    conn = sqlite3.connect(db_path)
    conn.row_factory = sqlite3.Row
    return conn

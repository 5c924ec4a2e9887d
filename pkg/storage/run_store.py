"""
Run Store
Record estimate and bridge reports and read them back
"""

import json
import logging
from contextlib import closing

from storage.database import get_connection

logger = logging.getLogger(__name__)


class RunStore:
    """
    Store CLI reports in the run history database
    """

    def __init__(self, db_path='moments.db'):
        """
        Initialize run store

        Args:
            db_path: Path to database file
        """
        self.db_path = db_path

    def _insert_run(self, cursor, kind, report):
        cursor.execute('''
            INSERT INTO runs (kind, expression, family, seed, report)
            VALUES (?, ?, ?, ?, ?)
        ''', (
            kind,
            report['expression'],
            report.get('family'),
            str(report.get('seed')),
            json.dumps(report),
        ))
        return cursor.lastrowid

    def store_estimate(self, report):
        """
        Store an estimate report

        Args:
            report: Dictionary produced by run_estimate

        Returns:
            Run ID
        """
        # the inner "with conn" commits, or rolls back if an insert fails
        with closing(get_connection(self.db_path)) as conn, conn:
            cursor = conn.cursor()

            run_id = self._insert_run(cursor, 'estimate', report)
            closest = report.get('comparison', {}).get('closest_to_reference')

            for method, result in report['methods'].items():
                cursor.execute('''
                    INSERT INTO estimates (
                        run_id, method, value, constant_term, correction_term, std_error, closest
                    ) VALUES (?, ?, ?, ?, ?, ?, ?)
                ''', (
                    run_id,
                    method,
                    result['value'],
                    result.get('constant_term'),
                    result.get('correction_term'),
                    result.get('std_error'),
                    1 if method == closest else 0,
                ))

        logger.info(f"Estimate run stored: {run_id}")
        return run_id

    def store_bridge(self, report):
        """
        Store a bridge report

        Args:
            report: Dictionary produced by run_bridge

        Returns:
            Run ID
        """
        with closing(get_connection(self.db_path)) as conn, conn:
            cursor = conn.cursor()

            run_id = self._insert_run(cursor, 'bridge', report)

            for row in report['rows']:
                cursor.execute('''
                    INSERT INTO convergence_rows (
                        run_id, alpha, classical_mean, rescaled, quantum_value, gap, mc_std_error
                    ) VALUES (?, ?, ?, ?, ?, ?, ?)
                ''', (
                    run_id,
                    row['alpha'],
                    row['classical_mean'],
                    row['rescaled'],
                    row['quantum_value'],
                    row['gap'],
                    row['mc_std_error'],
                ))

        logger.info(f"Bridge run stored: {run_id}")
        return run_id

    def get_run(self, run_id):
        """
        Get one run with its decoded report

        Args:
            run_id: Run ID

        Returns:
            Dictionary or None
        """
        with closing(get_connection(self.db_path)) as conn:
            cursor = conn.cursor()
            cursor.execute('SELECT * FROM runs WHERE id = ?', (run_id,))
            row = cursor.fetchone()

        if not row:
            return None
        run = dict(row)
        run['report'] = json.loads(run['report'])
        return run

    def get_run_history(self, limit=10):
        """
        Get recent runs

        Args:
            limit: Number of records to retrieve

        Returns:
            List of run summaries, newest first
        """
        with closing(get_connection(self.db_path)) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                SELECT id, kind, expression, family, seed, created_at
                FROM runs
                ORDER BY id DESC
                LIMIT ?
            ''', (limit,))
            rows = cursor.fetchall()

        return [dict(row) for row in rows]

    def get_method_win_rate(self, method):
        """
        Share of estimate runs in which a method was closest to the MC reference

        Args:
            method: Method name

        Returns:
            Win rate percentage
        """
        with closing(get_connection(self.db_path)) as conn:
            cursor = conn.cursor()

            cursor.execute('''
                SELECT COUNT(DISTINCT run_id) as total
                FROM estimates
                WHERE run_id IN (SELECT run_id FROM estimates WHERE closest = 1)
                  AND method = ?
            ''', (method,))
            total = cursor.fetchone()['total']
            if total == 0:
                return 0.0

            cursor.execute('''
                SELECT COUNT(*) as wins
                FROM estimates
                WHERE method = ? AND closest = 1
            ''', (method,))
            wins = cursor.fetchone()['wins']

        return (wins / total) * 100

"""
Method Comparator
Compare the estimators of one job side by side
"""

import logging

logger = logging.getLogger(__name__)

METHOD_ORDER = ('taylor1', 'taylor2', 'trace', 'mc')


def ordered_methods(methods):
    """
    Canonical method order

    Args:
        methods: Iterable of method names

    Returns:
        List following METHOD_ORDER
    """
    chosen = set(methods)
    return [name for name in METHOD_ORDER if name in chosen]


class MethodComparator:
    """
    Compare estimates of the same mean produced by different methods
    """

    def __init__(self, reference='mc'):
        """
        Initialize method comparator

        Args:
            reference: Method treated as ground truth when present
        """
        self.reference = reference

    def compare_methods(self, results):
        """
        Pairwise deltas and the method closest to the reference

        Args:
            results: Dictionary method name -> dict with at least 'value'

        Returns:
            Dictionary with deltas, closest method and comparison metrics
        """
        names = ordered_methods(results)
        deltas = []
        for a, first in enumerate(names):
            for second in names[a + 1:]:
                deltas.append({
                    'from': first,
                    'to': second,
                    'delta': results[second]['value'] - results[first]['value'],
                })

        closest = self._determine_closest(results, names)
        if closest:
            logger.info(f"Closest to {self.reference}: {closest}")

        return {
            'deltas': deltas,
            'reference': self.reference if self.reference in results else None,
            'closest_to_reference': closest,
            'comparison_metrics': self._calculate_metrics(results, names),
        }

    def _determine_closest(self, results, names):
        """
        Method whose value is nearest the reference value

        Args:
            results: Method results
            names: Methods in canonical order

        Returns:
            Method name, or None without a reference or candidates
        """
        if self.reference not in results:
            return None

        target = results[self.reference]['value']
        best_distance = float('inf')
        closest = None

        # strict comparison keeps the earlier method on ties
        for name in names:
            if name == self.reference:
                continue
            distance = abs(results[name]['value'] - target)
            if distance < best_distance:
                best_distance = distance
                closest = name

        return closest

    def _calculate_metrics(self, results, names):
        """
        Summary statistics over the compared methods

        Args:
            results: Method results
            names: Methods in canonical order

        Returns:
            Dictionary with the value spread and, with a reference, the
            discrepancy of each method in reference standard errors
        """
        if not names:
            return {}

        values = [results[name]['value'] for name in names]
        metrics = {
            'spread': max(values) - min(values),
        }

        reference = results.get(self.reference)
        if reference and reference.get('std_error'):
            metrics['standard_errors_from_reference'] = {
                name: abs(results[name]['value'] - reference['value']) / reference['std_error']
                for name in names if name != self.reference
            }
        return metrics

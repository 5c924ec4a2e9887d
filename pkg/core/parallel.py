"""
Parallel
Order-preserving thread map used by the sampler and the Monte Carlo oracle
"""

from concurrent.futures import ThreadPoolExecutor


def ordered_map(function, items, workers=1, window=None):
    """
    Apply function to items on a thread pool, yielding results in input order

    At most `window` tasks are in flight, so results of large streams never
    pile up in memory.

    Args:
        function: Callable of one argument
        items: Sequence of arguments
        workers: Thread count; 1 runs inline
        window: In-flight task limit (default 4 * workers)

    Yields:
        function(item) for each item, in order
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        for item in items:
            yield function(item)
        return
    window = window or 4 * workers
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for start in range(0, len(items), window):
            yield from executor.map(function, items[start:start + window])

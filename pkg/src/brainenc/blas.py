"""BLAS thread pinning.

The threaded OpenBLAS barrier busy-waits, which under CPU quotas makes the
small repeated factorizations this engine lives on dramatically slower than
single-threaded execution. Numerical stages therefore pin BLAS to one thread
and parallelize over their own work units (layers, resamples), which also
keeps results independent of thread count.
"""

from __future__ import annotations

from threadpoolctl import threadpool_limits


def single_thread_blas():
    """Context manager limiting all BLAS pools to one thread."""
    return threadpool_limits(limits=1)

"""Persistent worker pool.

All threads are created up front and reused across every reduction call for
the engine's lifetime; each call is a full barrier.  Work items are claimed
in dynamic chunks so stragglers cannot stall the others.
"""

from __future__ import annotations

import os
import threading


class WorkPool:
    """Fixed-size pool of reusable worker threads.

    ``run_workers(fn)`` invokes ``fn(tid)`` once per worker and returns after
    all complete; ``run_parallel(n_items, body)`` hands out dynamically
    claimed ``body(lo, hi)`` chunks.  Worker exceptions propagate after the
    barrier.
    """

    def __init__(self, n_threads: int, pin: bool = False):
        if n_threads < 1:
            raise ValueError("pool needs at least one thread")
        self.n_threads = n_threads
        self._pin = pin
        self._lock = threading.Lock()
        self._cv = threading.Condition(self._lock)
        self._generation = 0
        self._task = None
        self._pending = 0
        self._errors = []
        self._closed = False
        self.worker_idents = [None] * n_threads
        self._threads = []
        for tid in range(n_threads):
            t = threading.Thread(target=self._worker, args=(tid,), daemon=True)
            t.start()
            self._threads.append(t)

    def _worker(self, tid):
        self.worker_idents[tid] = threading.get_ident()
        if self._pin and hasattr(os, "sched_setaffinity"):
            try:
                ncpu = os.cpu_count() or 1
                os.sched_setaffinity(0, {tid % ncpu})
            except OSError:
                pass
        seen = 0
        while True:
            with self._cv:
                while self._generation == seen and not self._closed:
                    self._cv.wait()
                if self._closed:
                    return
                seen = self._generation
                task = self._task
            try:
                task(tid)
            except BaseException as exc:  # propagated after the barrier
                with self._cv:
                    self._errors.append((tid, exc))
            finally:
                with self._cv:
                    self._pending -= 1
                    if self._pending == 0:
                        self._cv.notify_all()

    def run_workers(self, fn):
        """Run ``fn(tid)`` on every worker; full barrier; reraise worker errors."""
        with self._cv:
            if self._closed:
                raise RuntimeError("pool is closed")
            self._task = fn
            self._errors = []
            self._pending = self.n_threads
            self._generation += 1
            self._cv.notify_all()
            while self._pending:
                self._cv.wait()
            errors = sorted(self._errors)
            self._task = None
        if errors:
            raise errors[0][1]

    def run_parallel(self, n_items: int, body, chunk_size=None):
        """Partition [0, n_items) into dynamically claimed chunks of work.

        ``body(lo, hi)`` is called for each claimed chunk; returns only after
        every item completed.  Chunk size defaults to n_items/(8*N), the
        point where claim overhead stops mattering.
        """
        if n_items <= 0:
            return
        if chunk_size is None:
            chunk_size = max(1, n_items // (8 * self.n_threads))
        cursor = [0]
        lock = threading.Lock()

        def worker(tid):
            while True:
                with lock:
                    lo = cursor[0]
                    if lo >= n_items:
                        return
                    hi = min(lo + chunk_size, n_items)
                    cursor[0] = hi
                body(lo, hi)

        self.run_workers(worker)

    def close(self):
        with self._cv:
            self._closed = True
            self._cv.notify_all()
        for t in self._threads:
            t.join(timeout=5.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

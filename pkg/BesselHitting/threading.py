# BesselHitting - first hitting times of Bessel processes
# Copyright (C) 2026 The BesselHitting developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

from threading import Thread, current_thread, Lock
from queue import Queue

import logging

__all__ = ['StreamWorker', 'WorkerPool', 'getWorkerPool', 'shutdown']

class StreamWorker(object):
    """A thread that runs jobs handed to it through a queue, one at a time."""

    def __init__(self, name):
        self.name = name

        self._queue = Queue()
        self._thread = None
        self._running = False
        self.jobs_run = 0

        self.start()

    @property
    def running(self):
        return self._running

    def current(self):
        return current_thread() == self._thread

    def execute(self, func, args=(), kw=None, waitForReturn=True):
        """ Executes a given function on this thread with the *args and **kw.

        If 'waitForReturn' is True, then it will block until the function has
        executed and return its return value.  If False, it will return a queue
        immediately on which the return value (or the raised exception) will be
        put once the function has run.
        """

        return_queue = Queue()
        self._queue.put((func, tuple(args), dict(kw or {}), return_queue))

        if waitForReturn:
            return self.collect(return_queue)
        return return_queue

    @staticmethod
    def collect(return_queue):
        """Waits on a queue returned by execute(waitForReturn=False)."""
        ret = return_queue.get(True)
        if isinstance(ret, Exception):
            raise ret
        return ret

    def _run(self):
        logging.debug('StreamWorker[%s]: Starting...', self.name)

        try:
            while self._running:
                func, args, kw, return_queue = self._queue.get(True)

                func_name = getattr(func, '__name__', func.__class__.__name__)
                logging.debug('StreamWorker[%s]: Running %s(*%s)', self.name, func_name, repr(args))

                try:
                    ret = func(*args, **kw)
                    self.jobs_run += 1
                except Exception as e:
                    logging.error('StreamWorker[%s]: Unable to %s(*%s, **%s): %s',
                        self.name, func_name, repr(args), repr(kw), e, exc_info=True)
                    # we return the Exception which will be raise'd on the other end
                    ret = e

                if return_queue is not None:
                    return_queue.put(ret)
        except Exception as e:
            logging.error('StreamWorker[%s]: Thread crashed! Exception: %s', self.name, e, exc_info=True)
        finally:
            self._thread = None
            self._running = False

            logging.debug('StreamWorker[%s]: Stopped!', self.name)

    def start(self):
        if not self._running:
            self._running = True
            assert self._thread is None
            self._thread = Thread(target=self._run, name='StreamWorker-%s' % self.name)
            self._thread.daemon = True
            self._thread.start()

    def stop(self):
        def _stop():
            self._running = False
        self._queue.put((_stop, (), {}, None))

    def stop_and_wait(self):
        """ Tell the thread to stop and wait for it to happen. """
        thread = self._thread
        self.stop()
        if thread is not None:
            thread.join()

class WorkerPool(object):
    """A fixed set of StreamWorkers.

    Jobs are dealt round-robin; results always come back in job order, so a
    reduction over them does not depend on the number of workers.
    """

    def __init__(self, threads):
        if threads < 1:
            raise ValueError('a worker pool needs at least one thread, got %r' % threads)
        self.threads = threads
        self.workers = [StreamWorker(str(i)) for i in range(threads)]

    def map_streams(self, func, jobs):
        """Runs func(*job) for every job and returns the results in job order."""
        pending = []
        for i, job in enumerate(jobs):
            worker = self.workers[i % len(self.workers)]
            pending.append(worker.execute(func, job, waitForReturn=False))

        results = []
        failure = None
        for return_queue in pending:
            # drain every queue before re-raising
            try:
                results.append(StreamWorker.collect(return_queue))
            except Exception as e:
                if failure is None:
                    failure = e
        if failure is not None:
            raise failure
        return results

    def shutdown(self):
        for worker in self.workers:
            worker.stop_and_wait()
        self.workers = []

#
# For working with the global WorkerPool:
#

worker_pool = None
_pool_lock = Lock()

def getWorkerPool(threads):
    """Return the global WorkerPool for this process, resized to 'threads' if needed."""
    global worker_pool
    with _pool_lock:
        if worker_pool is not None and worker_pool.threads != threads:
            worker_pool.shutdown()
            worker_pool = None
        if worker_pool is None:
            worker_pool = WorkerPool(threads)
        return worker_pool

def shutdown():
    """If the global WorkerPool exists, shut it down."""
    global worker_pool
    with _pool_lock:
        if worker_pool is not None:
            worker_pool.shutdown()
            worker_pool = None

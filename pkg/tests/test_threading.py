
import logging
import threading as std_threading
import unittest

from BesselHitting import threading
from BesselHitting.threading import StreamWorker, WorkerPool, getWorkerPool

class StreamWorkerTest(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)
        self.worker = StreamWorker('test')

    def tearDown(self):
        self.worker.stop_and_wait()
        logging.disable(logging.NOTSET)

    def test_execute(self):
        self.assertTrue(self.worker.running)
        self.assertEqual(self.worker.execute(pow, (2, 10)), 1024)
        self.assertEqual(self.worker.execute(int, ('ff',), {'base': 16}), 255)
        self.assertEqual(self.worker.jobs_run, 2)

    def test_runs_on_its_own_thread(self):
        name = self.worker.execute(lambda: std_threading.current_thread().name)
        self.assertEqual(name, 'StreamWorker-test')
        self.assertFalse(self.worker.current())

    def test_exception_is_reraised(self):
        def fail():
            raise ValueError('boom')
        self.assertRaises(ValueError, self.worker.execute, fail)
        # the worker survives a failing job
        self.assertEqual(self.worker.execute(abs, (-3,)), 3)

    def test_no_wait(self):
        queue = self.worker.execute(sum, ([1, 2, 3],), waitForReturn=False)
        self.assertEqual(StreamWorker.collect(queue), 6)

    def test_stop(self):
        self.worker.stop_and_wait()
        self.assertFalse(self.worker.running)

class WorkerPoolTest(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        threading.shutdown()
        logging.disable(logging.NOTSET)

    def test_results_in_job_order(self):
        pool = WorkerPool(3)
        try:
            results = pool.map_streams(lambda i, j: (i, j), [(i, i * i) for i in range(10)])
        finally:
            pool.shutdown()
        self.assertEqual(results, [(i, i * i) for i in range(10)])

    def test_failure_after_draining(self):
        def job(i):
            if i == 2:
                raise ArithmeticError('bad job')
            return i

        pool = WorkerPool(2)
        try:
            self.assertRaises(ArithmeticError, pool.map_streams, job, [(i,) for i in range(5)])
            # the pool is still usable
            self.assertEqual(pool.map_streams(job, [(0,), (1,)]), [0, 1])
        finally:
            pool.shutdown()

    def test_invalid_size(self):
        self.assertRaises(ValueError, WorkerPool, 0)

    def test_global_pool(self):
        pool = getWorkerPool(2)
        self.assertIs(getWorkerPool(2), pool)
        resized = getWorkerPool(3)
        self.assertIsNot(resized, pool)
        self.assertEqual(resized.threads, 3)
        threading.shutdown()
        self.assertIsNone(threading.worker_pool)

if __name__ == '__main__':
    unittest.main()

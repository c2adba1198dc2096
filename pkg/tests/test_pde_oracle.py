
import csv
import unittest

import numpy as np

from BesselHitting import closed_form
from BesselHitting.cache import SimpleSolutionCache
from BesselHitting.pde_oracle import (VALIDATION_B, GridError, InstabilityError, SurvivalGrid, export_csv,
                                      solution_key, solve_survival, tail_at, tail_curve)

from BesselTestBase import BesselTestBase

class SurvivalGridTest(unittest.TestCase):
    def test_invalid(self):
        self.assertRaises(GridError, SurvivalGrid, b=2.0, x_max=1.0, n_x=64, t_max=1.0, n_t=64)
        self.assertRaises(GridError, SurvivalGrid, b=0.5, x_max=1.0, n_x=8, t_max=1.0, n_t=64)
        self.assertRaises(GridError, SurvivalGrid, b=0.5, x_max=1.0, n_x=64, t_max=0.0, n_t=64)
        self.assertRaises(GridError, SurvivalGrid, b=0.5, x_max=1.0, n_x=64, t_max=1.0, n_t=64, theta=1.5)
        self.assertRaises(GridError, SurvivalGrid, b=0.5, x_max=1.0, n_x=64, t_max=1.0, n_t=64, spacing='random')
        self.assertRaises(GridError, SurvivalGrid, b=0.5, x_max=1.0, n_x=64, t_max=1.0, n_t=64, t_first=2.0)

    def test_for_query(self):
        grid = SurvivalGrid.for_query(1.0, 2.0, 100.0, n_x=64, n_t=32)
        self.assertEqual(grid.x_max, 102.0)
        self.assertEqual((grid.n_x, grid.n_t), (64, 32))

    def test_graded_nodes(self):
        grid = SurvivalGrid.for_query(1.0, 2.0, 100.0, n_x=256, n_t=32)
        x = grid.x_nodes()
        self.assertEqual(x.size, 257)
        self.assertEqual(x[0], 1.0)
        self.assertEqual(x[-1], grid.x_max)
        h = np.diff(x)
        self.assertTrue(np.all(h > 0.0))
        self.assertLess(h[0], (grid.x_max - 1.0) / 256)
        self.assertTrue(np.all(h[1:] / h[:-1] <= 1.05 + 1e-9))

    def test_uniform_nodes(self):
        grid = SurvivalGrid(b=1.0, x_max=13.0, n_x=96, t_max=1.0, n_t=96, spacing='uniform', time_spacing='uniform')
        np.testing.assert_allclose(np.diff(grid.x_nodes()), 0.125)
        np.testing.assert_allclose(np.diff(grid.time_nodes()), 1.0 / 96)

    def test_geometric_times(self):
        grid = SurvivalGrid(b=1.0, x_max=13.0, n_x=32, t_max=10.0, n_t=32)
        times = grid.time_nodes()
        self.assertEqual(times[0], 0.0)
        self.assertAlmostEqual(times[1], 1e-5, delta=1e-18)
        self.assertEqual(times[-1], 10.0)
        self.assertTrue(np.all(np.diff(times) > 0.0))

    def test_with_b_and_refined(self):
        grid = SurvivalGrid(b=1.0, x_max=13.0, n_x=32, t_max=10.0, n_t=32)
        self.assertEqual(grid.with_b(0.5).b, 0.5)
        finer = grid.refined()
        self.assertEqual((finer.n_x, finer.n_t), (64, 64))
        self.assertEqual(finer.x_max, grid.x_max)

class SolveSurvivalTest(BesselTestBase):
    def test_half_index_against_erf(self):
        a, b = 2.0, 1.0
        sol = solve_survival(0.5, b, self.small_grid(b, a, 5.0))
        for t in (0.5, 1.0, 5.0):
            self.assertAlmostEqual(tail_at(sol, a, t), closed_form.halfindex_minus_tail(a, b, t), delta=5e-3)

    def test_solution_shape(self):
        sol = solve_survival(1.5, 1.0, self.small_grid(1.0, 2.0, 1.0, n=32, theta=1.0))
        self.assertEqual(sol.u.shape, (33, 33))
        self.assertTrue(np.all(sol.u[:, 0] == 0.0))
        self.assertTrue(np.all(sol.u[0, 1:] == 1.0))
        self.assertTrue(np.all((sol.u >= 0.0) & (sol.u <= 1.0 + 1e-6)))
        self.assertEqual(sol.b, 1.0)

    def test_survival_decreases_in_time(self):
        sol = solve_survival(0.7, 1.0, self.small_grid(1.0, 2.0, 10.0, n=128))
        values = tail_curve(sol, 2.0, [0.1, 1.0, 10.0])
        self.assertTrue(values[0] > values[1] > values[2] > 0.0)

    def test_below_zero_level_law(self):
        nu, b = 0.7, 1.0
        sol = solve_survival(nu, b, self.small_grid(b, 2.0, 10.0, n=128))
        columns = np.flatnonzero((sol.x > b) & (sol.x <= 4.0))
        for k in range(1, sol.times.size, 4):
            t = sol.times[k]
            for i in columns:
                self.assertLessEqual(sol.u[k, i], closed_form.tau0_tail(nu, sol.x[i], t) + 1e-9,
                                     'x=%r, t=%r' % (sol.x[i], t))

    def test_second_order_convergence(self):
        nu, a, b, t = 0.5, 2.0, 1.0, 1.0
        exact = closed_form.halfindex_minus_tail(a, b, t)
        errors = []
        for n in (96, 192, 384):
            grid = SurvivalGrid(b=b, x_max=13.0, n_x=n, t_max=t, n_t=n, spacing='uniform', time_spacing='uniform')
            errors.append(abs(tail_at(solve_survival(nu, b, grid), a, t) - exact))
        for coarse, fine in zip(errors[:-1], errors[1:]):
            self.assertTrue(3.0 <= coarse / fine <= 5.0, errors)

    def test_zero_level_needs_validation(self):
        grid = self.small_grid(0.0, 1.0, 1.0, n=512)
        self.assertRaises(GridError, solve_survival, 0.7, 0.0, grid)
        sol = solve_survival(0.7, 0.0, grid, validation=True)
        self.assertEqual(sol.b, VALIDATION_B)
        self.assertAlmostEqual(tail_at(sol, 1.0, 1.0), closed_form.tau0_tail(0.7, 1.0, 1.0), delta=5e-3)

    def test_invalid_index(self):
        self.assertRaises(GridError, solve_survival, 0.0, 1.0, self.small_grid(1.0, 2.0, 1.0))

    def test_explicit_steps_blow_up(self):
        grid = SurvivalGrid(b=1.0, x_max=5.0, n_x=64, t_max=10.0, n_t=16, theta=0.0,
                            spacing='uniform', time_spacing='uniform', rannacher_steps=0)
        self.assertRaises(InstabilityError, solve_survival, 0.5, 1.0, grid)

    def test_cache(self):
        cache = SimpleSolutionCache()
        grid = self.small_grid(1.0, 2.0, 1.0, n=32, theta=1.0)
        first = solve_survival(0.5, 1.0, grid, cache=cache)
        self.assertIn(solution_key(0.5, grid), cache)
        self.assertIs(solve_survival(0.5, 1.0, grid, cache=cache), first)

    def test_solution_key(self):
        grid = self.small_grid(1.0, 2.0, 1.0, n=32)
        self.assertEqual(solution_key(0.5, grid), solution_key(0.5, grid.with_b(1.0)))
        self.assertNotEqual(solution_key(0.5, grid), solution_key(0.6, grid))
        self.assertNotEqual(solution_key(0.5, grid), solution_key(0.5, grid.refined()))

class ReadOutTest(BesselTestBase):
    def setUp(self):
        BesselTestBase.setUp(self)
        self.sol = solve_survival(0.5, 1.0, self.small_grid(1.0, 2.0, 1.0, n=16, theta=1.0))

    def test_nodes(self):
        sol = self.sol
        self.assertEqual(tail_at(sol, sol.x[5], sol.times[7]), min(1.0, max(0.0, sol.u[7, 5])))

    def test_out_of_grid(self):
        self.assertRaises(GridError, tail_at, self.sol, 0.5, 0.5)
        self.assertRaises(GridError, tail_at, self.sol, 2.0, 2.0)

    def test_export_csv(self):
        path = self.temp_path('solution.csv')
        export_csv(self.sol, path)
        with open(path) as fd:
            rows = list(csv.reader(fd))
        self.assertEqual(rows[0], ['t', 'x', 'u'])
        self.assertEqual(len(rows), 1 + 17 * 17)
        self.assertEqual(float(rows[-1][1]), self.sol.x[-1])
        self.assertEqual(float(rows[-1][2]), self.sol.u[-1, -1])

if __name__ == '__main__':
    unittest.main()

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

import io
import json
import logging
import os
from dataclasses import asdict

import numpy as np
from sqlalchemy import Column, Float, LargeBinary, MetaData, String, Table, Text, create_engine, select

from BesselHitting.pde_oracle import SurvivalGrid, SurvivalSolution

__all__ = ['SimpleSolutionCache', 'SqliteSolutionCache', 'open_cache', 'CACHE_DIR_ENV']

CACHE_DIR_ENV = 'BESSEL_HITTING_CACHE_DIR'
CACHE_DB_NAME = 'solutions.db'

metadata = MetaData()

survival_solution = Table(
    'survival_solution', metadata,
    Column('key', String(40), primary_key=True),
    Column('nu', Float, nullable=False),
    Column('b', Float, nullable=False),
    Column('grid', Text, nullable=False),
    Column('payload', LargeBinary, nullable=False),
)

class SimpleSolutionCache(object):
    """Keeps solved survival grids in memory for the life of the process."""

    def __init__(self):
        self.solutions = {}

    def get(self, key):
        return self.solutions.get(key)

    def put(self, key, solution):
        self.solutions[key] = solution

    def __contains__(self, key):
        return key in self.solutions

    def shutdown(self):
        self.solutions.clear()

def _encode(solution):
    buf = io.BytesIO()
    np.savez_compressed(buf, x=solution.x, times=solution.times, u=solution.u)
    return buf.getvalue()

def _decode(nu, grid_json, payload):
    arrays = np.load(io.BytesIO(payload))
    grid = SurvivalGrid(**json.loads(grid_json))
    return SurvivalSolution(grid, nu, arrays['x'], arrays['times'], arrays['u'])

class SqliteSolutionCache(SimpleSolutionCache):
    """Stores solutions in a SQLite database so they survive between runs."""

    def __init__(self, db_path):
        SimpleSolutionCache.__init__(self)

        self.db_path = os.path.abspath(db_path)
        dirname = os.path.dirname(self.db_path)
        if not os.path.isdir(dirname):
            os.makedirs(dirname)

        self.engine = create_engine('sqlite:///' + self.db_path)
        metadata.create_all(self.engine)

    def get(self, key):
        solution = SimpleSolutionCache.get(self, key)
        if solution is not None:
            return solution

        query = select(survival_solution.c.nu, survival_solution.c.grid, survival_solution.c.payload) \
            .where(survival_solution.c.key == key)
        with self.engine.connect() as conn:
            row = conn.execute(query).fetchone()

        if row is not None:
            solution = self.solutions[key] = _decode(row[0], row[1], row[2])
            return solution

    def put(self, key, solution):
        SimpleSolutionCache.put(self, key, solution)

        grid_json = json.dumps(asdict(solution.grid), sort_keys=True)
        with self.engine.begin() as conn:
            conn.execute(survival_solution.delete().where(survival_solution.c.key == key))
            conn.execute(survival_solution.insert().values(
                key=key, nu=solution.nu, b=solution.grid.b, grid=grid_json, payload=_encode(solution)))
        logging.info('SolutionCache[%s]: stored %s', self.db_path, key)

    def __contains__(self, key):
        return self.get(key) is not None

    def shutdown(self):
        SimpleSolutionCache.shutdown(self)
        self.engine.dispose()

def open_cache(cache_dir=None):
    """A SqliteSolutionCache under cache_dir (or $BESSEL_HITTING_CACHE_DIR), else an in-memory cache."""
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_DIR_ENV)
    if not cache_dir:
        return SimpleSolutionCache()
    return SqliteSolutionCache(os.path.join(cache_dir, CACHE_DB_NAME))

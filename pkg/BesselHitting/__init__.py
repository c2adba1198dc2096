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

__author__ = "The BesselHitting developers"
__copyright__ = "Copyright (C) 2026 The BesselHitting developers"
__license__ = "GNU Affero General Public License v3 or later (AGPLv3+)"
__version__ = "0.1.0"

__all__ = ['numerics', 'closed_form', 'simulate', 'pde_oracle', 'analysis', 'cache', 'threading', 'utils']

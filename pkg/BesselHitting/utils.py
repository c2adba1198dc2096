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

import hashlib
import json
import logging
import logging.config

__all__ = ['setup_logging', 'format_float', 'parameter_hash']

def setup_logging(config_file=None):
    """Setup logging based on a config_file."""

    if config_file is not None:
        # load the config file
        logging.config.fileConfig(config_file, disable_existing_loggers=False)
    else:
        logging.basicConfig(format='%(asctime)s %(levelname)s %(message)s')
        logging.getLogger().setLevel(logging.INFO)

def format_float(value):
    """17 significant digits, '.' decimal point, independent of locale."""
    if value is None:
        return ''
    return '%.17g' % value

def parameter_hash(params):
    """sha1 over the canonical JSON form of a parameter mapping."""
    canonical = json.dumps(params, sort_keys=True, separators=(',', ':'))
    return hashlib.sha1(canonical.encode('utf-8')).hexdigest()

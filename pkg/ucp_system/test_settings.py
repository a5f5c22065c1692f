"""
Settings for running the test suite under pytest, where 'test' is not in
sys.argv: turn on the same TESTING configuration as `manage.py test`.
"""
import os

os.environ['UCP_TESTING'] = '1'

from .settings import *  # noqa: E402,F401,F403

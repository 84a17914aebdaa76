import os
import sys

# make tests/oracles.py importable from any invocation directory
sys.path.insert(0, os.path.dirname(__file__))

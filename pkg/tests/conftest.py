import os
import sys

# make the shared run-corpus helpers importable from any test module
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

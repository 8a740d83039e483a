import sys
import time
from pathlib import Path

# Wall-clock marker for the whole-battery budget check (see
# test_zz_suite_budget.py, which must stay last in collection order).
SUITE_START = time.perf_counter()

sys.path.insert(0, str(Path(__file__).resolve().parent))

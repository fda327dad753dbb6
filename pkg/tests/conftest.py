import os
import sys
from pathlib import Path

# single-threaded BLAS: on cgroup-limited boxes OpenBLAS spawns one thread
# per host CPU and spin-waits, which is several times slower than serial
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

# make the shared gradcheck helper importable from any test module
sys.path.insert(0, str(Path(__file__).parent))

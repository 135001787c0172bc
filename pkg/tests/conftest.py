# Pin BLAS threading before numpy is imported anywhere in the test process:
# keeps results machine-independent and stops benchmark workers from
# oversubscribing each other.
import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

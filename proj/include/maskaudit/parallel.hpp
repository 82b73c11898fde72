#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

// Execution policy for the data-parallel kernels (gradient-sample batches,
// attack restarts, brute-force shells, experiment rows). Every kernel has a
// serial path and an OpenMP path that partition work identically: each work
// item derives its own random substream and writes to its own output slot,
// so the two paths produce bit-identical results. The serial path is the
// reference implementation used by the determinism tests; the benchmark tool
// compares the two.

namespace maskaudit {

enum class Execution { serial, parallel };

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

} // namespace maskaudit

#include "conlab/kernels.hpp"

#include <omp.h>

namespace conlab::kernels {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) { omp_set_num_threads(n > 0 ? n : 1); }

}  // namespace conlab::kernels

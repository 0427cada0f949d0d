#include "ocan/platform.hpp"

#include <cstdlib>  // defines __GLIBC__

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ocan {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_TRIM_THRESHOLD, 2000000000);
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);  // glibc maximum on 64-bit
  // Grow the heap in large steps; small sbrk steps page-fault on every tape rebuild.
  mallopt(M_TOP_PAD, 256 * 1024 * 1024);
#endif
}

}  // namespace ocan

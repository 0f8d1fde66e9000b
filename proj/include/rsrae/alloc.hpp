#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rsrae {

// Training allocates and frees many same-sized tensors per step. glibc's default
// mmap/trim thresholds return them to the kernel each time, so keep them in the heap.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif
}

}  // namespace rsrae

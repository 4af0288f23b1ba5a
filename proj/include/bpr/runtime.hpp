#ifndef BPR_RUNTIME_HPP
#define BPR_RUNTIME_HPP

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace bpr {

/// Keeps freed heap memory mapped between training steps. Each step allocates
/// and releases the same activation buffers; without this glibc returns them
/// to the kernel every step and page faults dominate.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_TOP_PAD, 128 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
#endif
}

}  // namespace bpr

#endif  // BPR_RUNTIME_HPP

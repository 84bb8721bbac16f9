#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mmcpf {

/**
 * Stops glibc from returning heap memory to the kernel after every solve.
 * The Krylov basis is freed and reallocated once per GMRES cycle, and the
 * default trim threshold turns that into a page-fault storm. No-op elsewhere.
 */
inline void keep_heap_resident() {
#if defined(__GLIBC__)
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
#endif
}

}  // namespace mmcpf

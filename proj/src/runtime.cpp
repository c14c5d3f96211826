// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/runtime.hpp"

#include <cstdlib>  // defines __GLIBC__ where applicable

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fraudtext {

void retain_heap_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);  // never trim the heap top
#endif
}

}  // namespace fraudtext

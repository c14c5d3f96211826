// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace fraudtext {

/**
 * Keeps freed heap memory inside the process. Training allocates and frees
 * tens of megabytes per batch; handing those pages back to the kernel makes
 * every batch pay for fresh page faults. Call once at startup. No-op where
 * the C library offers no such control.
 */
void retain_heap_memory();

}  // namespace fraudtext

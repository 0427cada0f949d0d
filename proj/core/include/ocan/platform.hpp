#pragma once

namespace ocan {

// Stops glibc from returning freed training buffers to the OS after every
// minibatch; the page faults that follow otherwise dominate runtime. No-op
// on other C libraries. Call once at program start.
void tune_allocator();

}  // namespace ocan

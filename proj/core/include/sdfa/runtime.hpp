#pragma once

namespace sdfa {

// Tunes glibc malloc to serve multi-megabyte tensor buffers from the heap
// instead of fresh mmap regions. Without this, every forward pass pays page
// faults for each intermediate tensor, which costs more than the arithmetic.
// Call once at process start (the CLI and the benchmark/acceptance binaries
// do).
void tune_allocator();

}  // namespace sdfa

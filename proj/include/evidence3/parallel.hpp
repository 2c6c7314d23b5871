#pragma once

#include <cstddef>
#include <functional>

namespace ev3 {

// Worker count for data-parallel loops: the EVIDENCE3_THREADS environment
// variable when set to a positive integer, otherwise (unset, empty, "0",
// or unparseable) the hardware concurrency. Read on every call so tests
// can flip it between invocations.
int worker_count();

// Runs fn(i) for every i in [0, n). Iterations must be independent and
// write only their own output slot; under that contract the result is
// identical for any worker count, so parallel output equals serial output.
// The first exception thrown by any iteration is rethrown to the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ev3

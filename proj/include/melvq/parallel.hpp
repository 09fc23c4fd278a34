// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>

namespace melvq {

/// Number of worker threads to use. Reads MELVQ_THREADS on every call;
/// defaults to the hardware concurrency, never less than 1.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) over contiguous chunks on up to
/// worker_count() threads. body must only write state owned by index i;
/// any reduction is left to the caller so results do not depend on the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace melvq

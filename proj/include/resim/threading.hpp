#pragma once

#include <functional>

namespace resim {

// Global worker count for parallel_for. 0 = hardware concurrency.
void set_num_threads(int n);
int num_threads();

// Runs fn(i) for i in [0, n). Work is split statically; callers that reduce
// must accumulate per-index partials and combine them in index order so the
// result does not depend on the worker count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace resim

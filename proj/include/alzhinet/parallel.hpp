#pragma once

#include <cstddef>
#include <functional>

namespace alzhinet {

/// Worker cap: hardware concurrency, bounded by the ALZHINET_THREADS
/// environment variable when set. Always at least 1.
int worker_count();

/// Runs fn(i) for i in [0, n), fanning out across workers. fn must only touch
/// state that is disjoint per index; outputs are then bit-identical for any
/// worker count. Falls back to a plain loop for small n or one worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace alzhinet

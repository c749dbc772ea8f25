#include "phasegen/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace phasegen {

int max_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  const char* env = std::getenv("PHASEGEN_THREADS");
  if (env != nullptr) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return std::min<long>(v, hw);
  }
  return hw;
}

void parallel_for(size_t count, const std::function<void(size_t)>& fn, int threads) {
  if (count == 0) return;
  int workers = threads > 0 ? threads : max_threads();
  workers = static_cast<int>(std::min<size_t>(workers, count));
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const size_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const size_t lo = static_cast<size_t>(w) * chunk;
    const size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace phasegen

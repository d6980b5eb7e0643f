#ifndef DARE_PARALLEL_HPP
#define DARE_PARALLEL_HPP

#include <algorithm>
#include <thread>
#include <vector>

namespace dare {

/// Runs fn(i) for i in [0, n) over contiguous chunks on up to hardware_concurrency threads.
/// fn must only write state owned by index i.
template <typename Fn>
void parallel_for(int n, Fn&& fn)
{
  const int workers = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers)
        fn(i);
    });
}

}  // namespace dare

#endif  // DARE_PARALLEL_HPP

#include "weaklab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace weaklab {

void RunningStats::merge(const RunningStats& o) {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
  const double n = na + nb;
  const double delta = o.mean - mean;
  mean += delta * (nb / n);
  m2 += o.m2 + delta * delta * (na * nb / n);
  count += o.count;
}

double RunningStats::std_error() const {
  return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

int worker_count() {
  if (const char* env = std::getenv("WEAKLAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min<long>(v, 1024));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<RunningStats> reduce_paths(std::uint64_t n_paths, int channels, const KernelFactory& factory,
                                       const ReduceOptions& opt) {
  const std::uint64_t bs = std::max<std::uint64_t>(1, opt.block_size);
  const std::uint64_t n_blocks = (n_paths + bs - 1) / bs;
  const auto nc = static_cast<std::size_t>(channels);
  if (n_blocks == 0) return std::vector<RunningStats>(nc);
  std::vector<std::vector<RunningStats>> blocks(n_blocks, std::vector<RunningStats>(nc));
  std::vector<std::exception_ptr> errors(n_blocks);
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> first_fail{n_blocks};
  const auto record_failure = [&](std::uint64_t b) {
    std::uint64_t cur = first_fail.load();
    while (b < cur && !first_fail.compare_exchange_weak(cur, b)) {
    }
  };

  const auto work = [&] {
    PathKernel kernel;
    try {
      kernel = factory();
    } catch (...) {
      // Blocks are claimed in order, so charge the failure to the next one.
      const std::uint64_t b = std::min(next.fetch_add(1), n_blocks - 1);
      if (!errors[b]) errors[b] = std::current_exception();
      record_failure(b);
      return;
    }
    std::vector<double> out(nc);
    while (true) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      if (b > first_fail.load()) continue;
      auto& stats = blocks[b];
      try {
        for (std::uint64_t i = b * bs; i < std::min(n_paths, (b + 1) * bs); ++i) {
          kernel(i, out);
          for (std::size_t c = 0; c < nc; ++c) stats[c].add(out[c]);
        }
      } catch (...) {
        errors[b] = std::current_exception();
        record_failure(b);
      }
    }
  };

  const int workers = static_cast<int>(
      std::min<std::uint64_t>(std::max(1, opt.workers > 0 ? opt.workers : worker_count()), std::max<std::uint64_t>(1, n_blocks)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<RunningStats> total(nc);
  for (const auto& block : blocks)
    for (std::size_t c = 0; c < nc; ++c) total[c].merge(block[c]);
  return total;
}

}  // namespace weaklab

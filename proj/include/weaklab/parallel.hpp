#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace weaklab {

/// Count, mean and sum of squared deviations (Welford); merged with Chan's rule.
struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  void merge(const RunningStats& o);
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const;
};

/// Sample mean with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  int n_steps = 0;

  double ci_halfwidth() const { return 1.96 * std_error; }
  static Estimate from(const RunningStats& s, int n_steps) { return {s.mean, s.std_error(), s.count, n_steps}; }
};

/// Worker count: WEAKLAB_WORKERS when set to a positive integer, otherwise the
/// hardware concurrency.
int worker_count();

/// Per-path kernel: writes one value per channel for path `index`.
using PathKernel = std::function<void(std::uint64_t index, std::span<double> out)>;
/// Builds a kernel with its own scratch space; called once per worker.
using KernelFactory = std::function<PathKernel()>;

struct ReduceOptions {
  std::uint64_t block_size = 4096;
  int workers = 0;  // 0: worker_count()
};

/// Runs paths [0, n_paths) in fixed blocks and merges block statistics in block
/// order, so the result does not depend on the number of workers. If a kernel
/// throws, the exception from the lowest-numbered failing block is rethrown.
std::vector<RunningStats> reduce_paths(std::uint64_t n_paths, int channels, const KernelFactory& factory,
                                       const ReduceOptions& opt = {});

}  // namespace weaklab

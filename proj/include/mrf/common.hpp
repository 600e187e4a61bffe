#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mrf {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using NodeId = std::uint32_t;

inline constexpr const char* kVersion = "0.1.0";

enum class ErrorCode {
  invalid_argument,
  contract_violation,
  duplicate_point,
  size_overflow,
  isolated_node,
  invalid_source,
  deconvolution_undefined,
  walker_stuck,
  series_divergence,
  dimension_mismatch,
  resolution,
  parse,
  asymmetric_input,
  no_convergence,
  non_unit_input,
  dataset_empty,
  numeric,
  training_divergence,
  density,
  alignment_undefined,
  zero_truth,
  r2_undefined,
  unreachable_node,
  mask,
  budget,
  config,
  io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::contract_violation: return "contract-violation";
    case ErrorCode::duplicate_point: return "duplicate-point";
    case ErrorCode::size_overflow: return "size-overflow";
    case ErrorCode::isolated_node: return "isolated-node";
    case ErrorCode::invalid_source: return "invalid-source";
    case ErrorCode::deconvolution_undefined: return "deconvolution-undefined";
    case ErrorCode::walker_stuck: return "walker-stuck";
    case ErrorCode::series_divergence: return "series-divergence";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::parse: return "parse";
    case ErrorCode::asymmetric_input: return "asymmetric-input";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::non_unit_input: return "non-unit-input";
    case ErrorCode::dataset_empty: return "dataset-empty";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::training_divergence: return "training-divergence";
    case ErrorCode::density: return "density";
    case ErrorCode::alignment_undefined: return "alignment-undefined";
    case ErrorCode::zero_truth: return "zero-truth";
    case ErrorCode::r2_undefined: return "r2-undefined";
    case ErrorCode::unreachable_node: return "unreachable-node";
    case ErrorCode::mask: return "mask";
    case ErrorCode::budget: return "budget";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested != 0) return requested;
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs body(i, worker) for i in [0, count) on up to `threads` workers in contiguous blocks.
// body may only write state owned by index i plus per-worker scratch.
inline std::size_t worker_count(std::size_t count, std::size_t threads) {
  return std::min(resolve_threads(threads), std::max<std::size_t>(count, 1));
}

inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  threads = worker_count(count, threads);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t block = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * block;
    const std::size_t end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end, t] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i, t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mrf

#pragma once

#include <cstddef>

namespace siamsa {

/// Per-thread invocation counters for the attention and proposal blocks.
/// Used to prove which code paths a tracker configuration exercises.
struct CallCounts {
  std::size_t psan_forward = 0;
  std::size_t self_attention = 0;
  std::size_t cross_attention = 0;
  std::size_t sa_apn_forward = 0;
  std::size_t fuse_apn = 0;
  std::size_t agn_forward = 0;

  std::size_t psa_total() const { return psan_forward + self_attention + cross_attention; }
  std::size_t sa_apn_total() const { return sa_apn_forward + fuse_apn + agn_forward; }
};

inline thread_local CallCounts call_counts;

inline void reset_call_counts() { call_counts = CallCounts{}; }

}  // namespace siamsa

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <future>
#include <map>
#include <memory>
#include <mutex>

#include "uspde/almost_banded.hpp"

namespace uspde {

// Cache key: (problem id, n, step size bits, scheme id, approach/tag, shift bits).
// Step sizes and complex shifts are compared exactly through their bit patterns.
using FactorKey = std::array<std::uint64_t, 6>;

inline std::uint64_t double_bits(double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

// Memoizes QR factorizations of stepping systems. Concurrent lookups are
// allowed; at most one thread runs the factorization for a given key, other
// threads block on the shared future. Entries are immutable once published.
template <typename Scalar>
class FactorCache {
public:
  using Factorization = AlmostBandedQR<Scalar>;
  using Ptr = std::shared_ptr<const Factorization>;

  static FactorCache& instance() {
    static FactorCache cache;
    return cache;
  }

  template <typename Make>
  Ptr get_or_factor(const FactorKey& key, Make&& make) {
    if (!enabled_.load()) {
      ++factorizations_;
      return std::make_shared<const Factorization>(make());
    }
    std::shared_future<Ptr> fut;
    std::promise<Ptr> prom;
    bool creator = false;
    {
      std::lock_guard<std::mutex> g(mu_);
      auto it = map_.find(key);
      if (it == map_.end()) {
        fut = prom.get_future().share();
        map_.emplace(key, fut);
        creator = true;
      } else {
        fut = it->second;
        ++hits_;
      }
    }
    if (creator) {
      try {
        Ptr p = std::make_shared<const Factorization>(make());
        ++factorizations_;
        prom.set_value(p);
      } catch (...) {
        prom.set_exception(std::current_exception());
        std::lock_guard<std::mutex> g(mu_);
        map_.erase(key);
        throw;
      }
    }
    return fut.get();
  }

  void clear() {
    std::lock_guard<std::mutex> g(mu_);
    map_.clear();
  }

  void reset_counters() {
    factorizations_ = 0;
    hits_ = 0;
  }

  std::size_t factorizations() const { return factorizations_.load(); }
  std::size_t hits() const { return hits_.load(); }
  void set_enabled(bool on) { enabled_ = on; }
  bool enabled() const { return enabled_.load(); }

  std::size_t size() {
    std::lock_guard<std::mutex> g(mu_);
    return map_.size();
  }

private:
  std::mutex mu_;
  std::map<FactorKey, std::shared_future<Ptr>> map_;
  std::atomic<std::size_t> factorizations_{0};
  std::atomic<std::size_t> hits_{0};
  std::atomic<bool> enabled_{true};
};

// Fresh ids for problems and other cache-key participants.
inline std::uint64_t next_cache_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

}  // namespace uspde

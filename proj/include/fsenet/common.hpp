#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fsenet {

// Error categories. The CLI maps these to exit codes: data-shaped problems
// (missing files, bad formats) exit 2, everything else exits 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Structure / precondition violations (shape mismatches, indivisible dims).
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// ---------------------------------------------------------------------------
// Threading. Worker count comes from FSENET_THREADS, else hardware.
// Every parallel kernel writes disjoint outputs with a serial inner
// reduction, so results do not depend on the worker count.

inline int thread_count() {
  static int n = [] {
    if (const char* env = std::getenv("FSENET_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
  }();
  return n;
}

// Runs body(begin, end) over a partition of [0, n).
template <typename Body>
void parallel_for(int64_t n, const Body& body) {
  int workers = thread_count();
  if (n <= 0) return;
  if (workers <= 1 || n < 2) {
    body(int64_t{0}, n);
    return;
  }
  if (workers > n) workers = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  int64_t chunk = (n + workers - 1) / workers;
  for (int t = 1; t < workers; ++t) {
    int64_t b = t * chunk;
    int64_t e = std::min<int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  body(int64_t{0}, std::min<int64_t>(n, chunk));
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Deterministic RNG. All transforms are hand-rolled so two builds of the
// same binary (and any standard library) produce identical streams.

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller, one value per pair of draws.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  int64_t below(int64_t n) { return static_cast<int64_t>(gen_() % static_cast<uint64_t>(n)); }

  bool coin(double p) { return uniform() < p; }

  std::string state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (!is) throw FormatError("invalid rng state string");
  }

 private:
  std::mt19937_64 gen_;
};

// FNV-1a, used for provenance hashes in reports.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace fsenet

#pragma once

#include <cstdint>
#include <string_view>

namespace climex {

// SplitMix64 (Steele, Lea & Flood): a splittable 64-bit generator. Each
// instance is a (state, gamma) pair; split() derives a statistically
// independent child stream. stream(seed, id) is a pure function of its
// arguments, so replicate/dataset streams are reproducible in any execution
// order.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed);
  SplitMix64(uint64_t state, uint64_t gamma, int /*raw_tag*/) : state_(state), gamma_(gamma) {}

  uint64_t next_u64();
  SplitMix64 split();

  double uniform();  // strictly inside (0,1), 53-bit resolution
  double normal();   // standard normal via inverse CDF of one uniform

 private:
  uint64_t state_;
  uint64_t gamma_;
};

// Child stream derived purely from (seed, stream_id).
SplitMix64 stream(uint64_t seed, uint64_t stream_id);

// Standard normal quantile function; |error| near machine precision.
double normal_icdf(double p);

// Standard normal CDF.
double normal_cdf(double x);

// FNV-1a 64-bit hash; used for keyed streams and input provenance hashes.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace climex

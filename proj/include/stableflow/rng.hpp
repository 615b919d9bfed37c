#pragma once

#include <cstdint>
#include <initializer_list>

#include "common.hpp"

// Counter-based random streams (Philox4x32-10). Every logical sampling site
// owns a stream derived from (master seed, tag words); draws are reproducible
// for any worker count because streams never share state.

namespace stableflow::rng {

namespace detail {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t ctr[4], std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t r0 = hi1 ^ ctr[1] ^ k0;
    const std::uint32_t r2 = hi0 ^ ctr[3] ^ k1;
    ctr[0] = r0;
    ctr[1] = lo1;
    ctr[2] = r2;
    ctr[3] = lo0;
}

inline void philox4x32_10(const std::uint32_t in[4], std::uint32_t k0, std::uint32_t k1,
                          std::uint32_t out[4]) {
    std::uint32_t ctr[4] = {in[0], in[1], in[2], in[3]};
    for (int round = 0; round < 10; ++round) {
        philox_round(ctr, k0, k1);
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    out[0] = ctr[0];
    out[1] = ctr[1];
    out[2] = ctr[2];
    out[3] = ctr[3];
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Order-sensitive combination of tag words into a stream id.
inline std::uint64_t derive_stream(std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = 0x8C2F1D5275B4E1A7ull;
    for (std::uint64_t t : tags) h = detail::splitmix64(h ^ t);
    return h;
}

class philox_engine {
  public:
    philox_engine(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on the open interval (0,1): safe under log/pow transforms.
    double uniform01() {
        const std::uint64_t x = next_u64() >> 11;
        return (static_cast<double>(x) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double exponential() { return -std::log(uniform01()); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform01();
        const double v = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    void refill() {
        const std::uint32_t ctr[4] = {static_cast<std::uint32_t>(block_),
                                      static_cast<std::uint32_t>(block_ >> 32), stream_lo_,
                                      stream_hi_};
        detail::philox4x32_10(ctr, key0_, key1_, buf_);
        ++block_;
        pos_ = 0;
    }

    std::uint32_t key0_, key1_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline philox_engine make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    return philox_engine(seed, derive_stream(tags));
}

}  // namespace stableflow::rng

#pragma once

// Counter-based random number generation. A draw is a pure function of
// (seed, domain, index), so the k-th value of any stream can be produced
// without generating the first k-1, and parallel consumers stay
// bit-reproducible regardless of scheduling.

#include <array>
#include <cstdint>
#include <cmath>
#include <limits>

namespace mvest::rng {

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b,
                      std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p =
        static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

}  // namespace detail

/// One 10-round Philox4x64 block (Salmon et al., SC'11). Bit-compatible
/// with numpy.random.Philox: key = (k0, k1), counter words (c0..c3)
/// little-endian. Returns the four 64-bit output words.
inline std::array<std::uint64_t, 4> philox4x64(std::uint64_t k0, std::uint64_t k1,
                                               std::uint64_t c0, std::uint64_t c1,
                                               std::uint64_t c2 = 0,
                                               std::uint64_t c3 = 0) {
    constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
    constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
    constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
    constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mulhilo64(kMul0, c0, hi0, lo0);
        detail::mulhilo64(kMul1, c2, hi1, lo1);
        const std::uint64_t n0 = hi1 ^ c1 ^ k0;
        const std::uint64_t n1 = lo1;
        const std::uint64_t n2 = hi0 ^ c3 ^ k1;
        const std::uint64_t n3 = lo0;
        c0 = n0;
        c1 = n1;
        c2 = n2;
        c3 = n3;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return {c0, c1, c2, c3};
}

/// Map 64 random bits to a double strictly inside (0,1): top 52 bits plus
/// a half-step offset. (k + 0.5) * 2^-52 is exactly representable for all
/// k < 2^52, so neither endpoint is reachable.
inline double unit_double(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Inverse of the standard normal CDF, Wichura's algorithm AS241 (PPND16),
/// accurate to about 1e-16 relative over (0,1). Outside (0,1) returns NaN.
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -x : x;
}

/// Index-addressable stream of standard normals, keyed by (seed, domain).
/// Draw k consumes exactly one 64-bit word: Philox block k/4, lane k%4,
/// mapped through unit_double and the inverse normal CDF. Distinct
/// (seed, domain) pairs give statistically independent streams.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed, std::uint64_t domain = 0)
        : seed_(seed), domain_(domain) {}

    double operator()(std::uint64_t k) const {
        const auto block = philox4x64(seed_, domain_, k >> 2, 0);
        return inverse_normal_cdf(unit_double(block[k & 3]));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t domain() const { return domain_; }

private:
    std::uint64_t seed_;
    std::uint64_t domain_;
};

}  // namespace mvest::rng

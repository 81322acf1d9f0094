// rng.hpp — Counter-based random streams (Philox4x32-10) and Gaussian draws.
//
// Every trajectory owns an independent stream keyed by (master_seed, stream
// index), so any subset of trajectories can be regenerated in isolation and
// results do not depend on thread scheduling.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace qmelt::rng {

// Philox4x32-10 block cipher (Salmon et al., SC'11 reference constants).
// key   = 64-bit master seed split into two 32-bit words
// ctr   = (block0, block1, stream_lo, stream_hi)
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    std::array<std::uint32_t, 4> ctr{0, 0, 0, 0};
    std::array<std::uint32_t, 2> key{0, 0};

    Philox4x32(std::uint64_t seed, std::uint64_t stream) {
        key = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        ctr = {0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    }

    static void round(std::array<std::uint32_t, 4>& x, std::uint32_t k0, std::uint32_t k1) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * x[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * x[2];
        x = {static_cast<std::uint32_t>(p1 >> 32) ^ x[1] ^ k0,
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ x[3] ^ k1,
             static_cast<std::uint32_t>(p0)};
    }

    // Encrypt the current counter, then advance it.
    std::array<std::uint32_t, 4> next_block() {
        std::array<std::uint32_t, 4> x = ctr;
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int r = 0; r < 10; ++r) {
            round(x, k0, k1);
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        if (++ctr[0] == 0) ++ctr[1];  // 64-bit block counter
        return x;
    }
};

// Uniform double in (0,1]: 53 random bits, never exactly 0 so log() is safe.
inline double u01(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Buffered stream of standard normal deviates over a Philox keystream.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream) : eng_(seed, stream) {}

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Marsaglia polar method; rejection keeps each stream self-contained.
        double u, v, s;
        do {
            const auto blk = eng_.next_block();
            const std::uint64_t a = (static_cast<std::uint64_t>(blk[0]) << 32) | blk[1];
            const std::uint64_t b = (static_cast<std::uint64_t>(blk[2]) << 32) | blk[3];
            u = 2.0 * u01(a) - 1.0;
            v = 2.0 * u01(b) - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Complex Gaussian with zero mean, unit total variance (1/2 per quadrature).
    std::complex<double> complex_normal() {
        const double re = normal();
        const double im = normal();
        return {M_SQRT1_2 * re, M_SQRT1_2 * im};
    }

    double uniform() {
        const auto blk = eng_.next_block();
        const std::uint64_t a = (static_cast<std::uint64_t>(blk[0]) << 32) | blk[1];
        return u01(a);
    }

private:
    Philox4x32 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace qmelt::rng

#pragma once
// Non-semantic hash representations: stable 64-bit string hashing and
// hash-seeded random normal vectors. All generators here are hand-rolled
// (splitmix64 + Box-Muller) so results are identical across platforms and
// standard-library implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace tgrl {

// FNV-1a over UTF-8 bytes. Replaces interpreter-builtin hashes, which are
// process-randomized; stability across runs is required.
inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

constexpr std::uint64_t str_hash(std::string_view s) {
    std::uint64_t h = kFnvOffsetBasis;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

// splitmix64: tiny, public, well-studied 64-bit generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]; safe as a log() argument
    double next_real_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller over the splitmix64 stream
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_real_open();
        const double u2 = next_real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // uniform in [lo, hi)
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_real(); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

struct HashConfig {
    int dim = 128;
    std::string generator_id = "splitmix64-boxmuller";
};

struct HashVector {
    std::vector<double> values;
    std::uint64_t source_hash = 0;
};

// H(s): fixed random normal vector seeded by str_hash(s). Never retrained,
// never cached across config changes; same (string, dim) always yields the
// same vector.
inline HashVector hash_vec(std::string_view s, const HashConfig& cfg) {
    HashVector out;
    out.source_hash = str_hash(s);
    out.values.resize(static_cast<std::size_t>(cfg.dim));
    Rng rng(out.source_hash);
    for (auto& v : out.values) v = rng.next_normal();
    return out;
}

// [H(o), H(i), H(l)] concatenated; length 3*dim.
inline std::vector<double> obs_hash_rep(std::string_view o, std::string_view i,
                                        std::string_view l, const HashConfig& cfg) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(3 * cfg.dim));
    for (std::string_view part : {o, i, l}) {
        HashVector hv = hash_vec(part, cfg);
        out.insert(out.end(), hv.values.begin(), hv.values.end());
    }
    return out;
}

}  // namespace tgrl

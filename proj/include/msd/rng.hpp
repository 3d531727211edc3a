#ifndef MSD_RNG_HPP
#define MSD_RNG_HPP

#include <cstdint>

namespace msd {

// PCG32 (O'Neill, pcg-random.org, "oneseq" variant). Chosen over the
// standard-library engines because its output stream is fully specified
// by the published algorithm, so seeds reproduce across platforms.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(0), inc_((stream << 1u) | 1u) {
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted =
            static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // Uniform in [0,1).
    double uniform() {
        return next_u32() * (1.0 / 4294967296.0);
    }

    // Uniform in [lo,hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n).
    std::uint32_t below(std::uint32_t n) {
        return static_cast<std::uint32_t>(uniform() * n);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

} // namespace msd

#endif

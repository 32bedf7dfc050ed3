#pragma once

#include <array>
#include <cstdint>

namespace tnice {

// Counter-based generator (Philox4x32-10). A (seed, stream, domain) triple
// selects an independent substream, so shots can be generated in any order
// or in parallel and still reproduce bit-identically.
class Rng {
public:
    // Domain tags keep draws for unrelated purposes decorrelated even when
    // the same seed and stream id are reused.
    enum Domain : std::uint32_t {
        kSample = 1,
        kInit = 2,
        kPerturb = 3,
        kTest = 99,
    };

    Rng(std::uint64_t seed, std::uint64_t stream, std::uint32_t domain);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform on [0, 1), 53-bit resolution.
    double uniform();

    // Standard normal via Box-Muller; one transform feeds two draws.
    double normal();

    // One Philox block for the given raw counter/key, exposed for
    // known-answer tests.
    static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                              const std::array<std::uint32_t, 2>& key);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> base_;
    std::uint32_t block_index_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

} // namespace tnice

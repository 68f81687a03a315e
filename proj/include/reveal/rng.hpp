#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace reveal {

using Rng = std::mt19937_64;

/// Independent stream `stream` of a run seeded with `seed`.
///
/// Parallel paths draw sample i from stream_rng(seed, i), so results do not
/// depend on how work is split across threads.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x5245564cu};
    return Rng(seq);
}

std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

} // namespace reveal

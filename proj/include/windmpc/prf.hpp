#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace windmpc {

// SipHash-2-4: the keyed PRF behind zero-sharing and seed derivation.
// Small, fast on 8-byte counter blocks, and easy to pin test vectors for.
uint64_t siphash24(uint64_t k0, uint64_t k1, const uint8_t* data, size_t len);

struct PrfKey {
    uint64_t k0 = 0;
    uint64_t k1 = 0;
};

// PRF(key, ctr) on the 8-byte little-endian encoding of ctr.
uint64_t prf_eval(PrfKey key, uint64_t ctr);

// splitmix64 step: the canonical seed-expansion map.
uint64_t splitmix64(uint64_t& state);

// Deterministic seed derivation: independent streams for each named purpose
// from one master seed.
uint64_t derive_seed(uint64_t master, std::string_view tag);

PrfKey derive_key(uint64_t master, std::string_view tag);

}  // namespace windmpc

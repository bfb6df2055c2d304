#include "windmpc/prf.hpp"

#include <cstring>

namespace windmpc {

namespace {

inline uint64_t rotl(uint64_t x, int b) { return (x << b) | (x >> (64 - b)); }

inline uint64_t load64_le(const uint8_t* p) {
    uint64_t v;
    std::memcpy(&v, p, 8);
    return v;  // assumes little-endian host; checked in tests
}

struct SipState {
    uint64_t v0, v1, v2, v3;

    explicit SipState(uint64_t k0, uint64_t k1)
        : v0(0x736f6d6570736575ULL ^ k0),
          v1(0x646f72616e646f6dULL ^ k1),
          v2(0x6c7967656e657261ULL ^ k0),
          v3(0x7465646279746573ULL ^ k1) {}

    void round() {
        v0 += v1;
        v1 = rotl(v1, 13);
        v1 ^= v0;
        v0 = rotl(v0, 32);
        v2 += v3;
        v3 = rotl(v3, 16);
        v3 ^= v2;
        v0 += v3;
        v3 = rotl(v3, 21);
        v3 ^= v0;
        v2 += v1;
        v1 = rotl(v1, 17);
        v1 ^= v2;
        v2 = rotl(v2, 32);
    }

    void absorb(uint64_t m) {
        v3 ^= m;
        round();
        round();
        v0 ^= m;
    }

    uint64_t finalize() {
        v2 ^= 0xff;
        round();
        round();
        round();
        round();
        return v0 ^ v1 ^ v2 ^ v3;
    }
};

}  // namespace

uint64_t siphash24(uint64_t k0, uint64_t k1, const uint8_t* data, size_t len) {
    SipState s(k0, k1);
    const uint8_t* end = data + (len & ~size_t{7});
    for (; data != end; data += 8) s.absorb(load64_le(data));
    uint64_t b = static_cast<uint64_t>(len) << 56;
    switch (len & 7) {
        case 7: b |= static_cast<uint64_t>(data[6]) << 48; [[fallthrough]];
        case 6: b |= static_cast<uint64_t>(data[5]) << 40; [[fallthrough]];
        case 5: b |= static_cast<uint64_t>(data[4]) << 32; [[fallthrough]];
        case 4: b |= static_cast<uint64_t>(data[3]) << 24; [[fallthrough]];
        case 3: b |= static_cast<uint64_t>(data[2]) << 16; [[fallthrough]];
        case 2: b |= static_cast<uint64_t>(data[1]) << 8; [[fallthrough]];
        case 1: b |= static_cast<uint64_t>(data[0]); break;
        case 0: break;
    }
    s.absorb(b);
    return s.finalize();
}

uint64_t prf_eval(PrfKey key, uint64_t ctr) {
    uint8_t buf[8];
    std::memcpy(buf, &ctr, 8);  // little-endian host
    return siphash24(key.k0, key.k1, buf, 8);
}

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t master, std::string_view tag) {
    return siphash24(master, 0x77696e646d706373ULL,  // domain salt
                     reinterpret_cast<const uint8_t*>(tag.data()), tag.size());
}

PrfKey derive_key(uint64_t master, std::string_view tag) {
    uint64_t k0 = derive_seed(master, tag);
    uint64_t state = k0 ^ master;
    uint64_t k1 = splitmix64(state);
    return PrfKey{k0, k1};
}

}  // namespace windmpc

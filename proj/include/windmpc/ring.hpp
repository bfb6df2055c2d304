#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "windmpc/errors.hpp"

namespace windmpc {

// A residue modulo 2^64. All arithmetic wraps; uint64_t gives that natively.
struct RingElement {
    uint64_t word = 0;

    constexpr RingElement() = default;
    constexpr explicit RingElement(uint64_t w) : word(w) {}

    friend constexpr bool operator==(RingElement a, RingElement b) {
        return a.word == b.word;
    }
};

constexpr RingElement ring_add(RingElement a, RingElement b) {
    return RingElement{a.word + b.word};
}
constexpr RingElement ring_sub(RingElement a, RingElement b) {
    return RingElement{a.word - b.word};
}
constexpr RingElement ring_mul(RingElement a, RingElement b) {
    return RingElement{a.word * b.word};
}
constexpr RingElement ring_neg(RingElement a) {
    return RingElement{0ull - a.word};
}

// Dense ring matrix: the element-wise substrate for batched protocols.
using RingMatrix =
    Eigen::Array<uint64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fixed-point embedding of reals into the ring: x -> round(x * 2^f) as a
// two's-complement word. Rounding is half-away-from-zero so plaintext oracles
// reproduce encodings deterministically.
class FixedCodec {
public:
    explicit FixedCodec(int frac_bits = 20);

    int frac_bits() const { return frac_bits_; }

    // Largest magnitude admitted: |x| < 2^(63 - f).
    double range_bound() const { return bound_; }

    RingElement encode(double x) const;
    double decode(RingElement w) const;

    // Round a real onto the representable dyadic grid (= decode(encode(x))),
    // used by plaintext oracles that must match ring arithmetic bit-exactly.
    double quantize(double x) const { return decode(encode(x)); }

    RingMatrix encode(const Eigen::MatrixXd& m) const;
    Eigen::MatrixXd decode(const RingMatrix& m) const;

private:
    int frac_bits_;
    double bound_;
};

}  // namespace windmpc

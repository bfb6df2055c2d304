#include "windmpc/ring.hpp"

#include <cmath>

namespace windmpc {

FixedCodec::FixedCodec(int frac_bits) : frac_bits_(frac_bits) {
    if (frac_bits < 1 || frac_bits > 62)
        throw ConfigError("frac_bits must be in [1, 62]");
    bound_ = std::ldexp(1.0, 63 - frac_bits);
}

RingElement FixedCodec::encode(double x) const {
    // Reject NaN and anything whose scaled magnitude cannot fit in a signed
    // 64-bit word (pre-check: llround on an overflowing value is undefined).
    if (!(std::abs(x) < bound_))
        throw RangeError("fixed-point encode out of range");
    long long scaled = std::llround(std::ldexp(x, frac_bits_));
    return RingElement{static_cast<uint64_t>(scaled)};
}

double FixedCodec::decode(RingElement w) const {
    return std::ldexp(static_cast<double>(static_cast<int64_t>(w.word)),
                      -frac_bits_);
}

RingMatrix FixedCodec::encode(const Eigen::MatrixXd& m) const {
    RingMatrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out(i, j) = encode(m(i, j)).word;
    return out;
}

Eigen::MatrixXd FixedCodec::decode(const RingMatrix& m) const {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out(i, j) = decode(RingElement{m(i, j)});
    return out;
}

}  // namespace windmpc

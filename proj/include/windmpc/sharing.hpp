#pragma once

#include <array>
#include <random>
#include <utility>
#include <vector>

#include "windmpc/prf.hpp"
#include "windmpc/ring.hpp"

namespace windmpc {

// One server's view of a replicated-shared matrix. With the secret split as
// x = x_0 + x_1 + x_2 (mod 2^64), server j holds the component pair
// (x_j, x_{j+1 mod 3}) per element: `own` carries x_j, `next` carries x_{j+1}.
class ShareTensor {
public:
    ShareTensor() = default;
    ShareTensor(Eigen::Index rows, Eigen::Index cols)
        : own(RingMatrix::Zero(rows, cols)), next(RingMatrix::Zero(rows, cols)) {}

    RingMatrix own;
    RingMatrix next;

    Eigen::Index rows() const { return own.rows(); }
    Eigen::Index cols() const { return own.cols(); }
};

// Scalar share: a 1x1 tensor, kept as an alias so protocol code reads well.
ShareTensor scalar_share_view(RingElement a, RingElement b);

// Dealer-side sharing: x_0, x_1 uniform, x_2 = x - x_0 - x_1; server j gets
// (x_j, x_{j+1}).
std::array<ShareTensor, 3> share(const RingMatrix& x, std::mt19937_64& rng);
std::array<ShareTensor, 3> share(RingElement x, std::mt19937_64& rng);

// Reconstruct from any >= 2 distinct servers' views. Overlapping replicated
// words are cross-checked; disagreement raises InconsistencyError.
RingMatrix reveal(const std::vector<std::pair<int, const ShareTensor*>>& views);
RingMatrix reveal(const std::array<ShareTensor, 3>& views);
RingElement reveal_scalar(const std::array<ShareTensor, 3>& views);

// Correlated zero-randomness. Seed layout: server j knows s_j and s_{j-1};
// alpha_j = PRF(s_j, ctr) - PRF(s_{j-1}, ctr) sums to zero over the three
// servers without communication. beta_j is the XOR analogue for boolean
// sharings.
struct ZeroStreamKeys {
    PrfKey own;   // s_j
    PrfKey prev;  // s_{j-1}
};

ZeroStreamKeys server_zero_keys(uint64_t master_seed, int server_id);

class ZeroSharer {
public:
    explicit ZeroSharer(ZeroStreamKeys keys) : keys_(keys) {}

    uint64_t alpha(uint64_t ctr) const {
        return prf_eval(keys_.own, ctr) - prf_eval(keys_.prev, ctr);
    }
    uint64_t beta(uint64_t ctr) const {
        return prf_eval(keys_.own, ctr) ^ prf_eval(keys_.prev, ctr);
    }

    // Batched draws over counters base_ctr, base_ctr+1, ... (row-major).
    RingMatrix alpha_block(uint64_t base_ctr, Eigen::Index rows,
                           Eigen::Index cols) const;
    RingMatrix beta_block(uint64_t base_ctr, Eigen::Index rows,
                          Eigen::Index cols) const;

    // Replicated uniform randomness: server j and j+1 both derive the same
    // word from s_j. Used to reshare locally without a dealer.
    uint64_t own_stream(uint64_t ctr) const { return prf_eval(keys_.own, ctr); }
    uint64_t prev_stream(uint64_t ctr) const { return prf_eval(keys_.prev, ctr); }

private:
    ZeroStreamKeys keys_;
};

}  // namespace windmpc

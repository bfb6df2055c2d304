#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "windmpc/net.hpp"
#include "windmpc/sharing.hpp"

namespace windmpc {

// Word kinds tagged in share-frame payload headers.
enum class WordKind : uint8_t {
    arith_single = 0,  // one u64 per element (resharing messages)
    arith_pair = 1,    // (own, next) u64 pairs (replicated views)
    bool_single = 2,
    bool_pair = 3,
};

// Share frame payload: header {u32 tensor-id, u32 rows, u32 cols,
// u8 word-kind}, then rows*cols u64 words (pairs interleave own,next).
std::vector<uint8_t> encode_share_payload(uint32_t tensor_id, WordKind kind,
                                          const RingMatrix& own,
                                          const RingMatrix* next = nullptr);

struct SharePayload {
    uint32_t tensor_id = 0;
    WordKind kind = WordKind::arith_single;
    ShareTensor tensor;  // next is empty for single-word payloads
};

SharePayload decode_share_payload(const std::vector<uint8_t>& payload);

// ---- cross-party share movement ----------------------------------------------

// Dealer side: split x and send each server its replicated pair.
void deal_to_servers(Endpoint& ep, const PartyTopology& topo,
                     uint64_t session_id, uint32_t round_no, uint32_t tensor_id,
                     const RingMatrix& x, std::mt19937_64& rng);

// Server side of deal_to_servers.
ShareTensor recv_dealt_share(Endpoint& ep, int dealer, uint64_t session_id,
                             uint32_t tensor_id);

// Server side: ship this server's pair to a designated recipient.
void send_share_to(Endpoint& ep, int to, uint64_t session_id, uint32_t round_no,
                   uint32_t tensor_id, const ShareTensor& t,
                   WordKind kind = WordKind::arith_pair);

// Recipient side: collect all three servers' pairs and reconstruct (with
// replication consistency checks).
RingMatrix collect_reveal(Endpoint& ep, const PartyTopology& topo,
                          uint64_t session_id, uint32_t tensor_id);

// ---- the three-server secure operation suite ----------------------------------

// One compute server's execution context for a protocol session. All three
// servers must call the same methods in the same order (lockstep); every
// communication round tags frames with {session_id, round_no}.
class SecureContext {
public:
    SecureContext(Endpoint& ep, const PartyTopology& topo, int server_index,
                  uint64_t master_seed, uint64_t session_id, int frac_bits = 20);

    int server_index() const { return idx_; }
    uint64_t session_id() const { return session_; }
    const FixedCodec& codec() const { return codec_; }
    uint32_t rounds_used() const { return round_; }

    // -- local linear algebra (0 rounds) --
    ShareTensor sec_add(const ShareTensor& x, const ShareTensor& y) const;
    ShareTensor sec_sub(const ShareTensor& x, const ShareTensor& y) const;
    ShareTensor sec_neg(const ShareTensor& x) const;
    ShareTensor add_public(const ShareTensor& x, const RingMatrix& c) const;
    ShareTensor add_public(const ShareTensor& x, RingElement c) const;
    // Scale by a public ring word (integer scale: no rescaling needed).
    ShareTensor mul_public_word(const ShareTensor& x, uint64_t w) const;
    // A share of a public constant: component 0 carries it, no randomness.
    ShareTensor share_public(const RingMatrix& c) const;
    ShareTensor share_public_scalar(RingElement c, Eigen::Index rows,
                                    Eigen::Index cols) const;

    // -- multiplicative ops --
    // Element-wise product in the ring (scale 2^2f); 1 resharing round.
    ShareTensor sec_mul_untruncated(const ShareTensor& x, const ShareTensor& y);
    // Element-wise fixed-point product: untruncated mul + truncate; 2 rounds.
    ShareTensor sec_mul(const ShareTensor& x, const ShareTensor& y);
    // Matrix product (x: m x k, y: k x n). Same round structure as sec_mul.
    ShareTensor sec_matmul_untruncated(const ShareTensor& x,
                                       const ShareTensor& y);
    ShareTensor sec_matmul(const ShareTensor& x, const ShareTensor& y);
    // Probabilistic fixed-point rescale: reveals to v/2^bits with error at
    // most one output ulp, except with wrap probability ~ |v|/2^63; 1 round.
    ShareTensor truncate(const ShareTensor& x, int bits);

    // -- comparisons (exact bit extraction) --
    // 1 iff the two's-complement value is negative; 0/1 unscaled.
    ShareTensor sec_msb(const ShareTensor& x);
    ShareTensor sec_lt(const ShareTensor& x, const ShareTensor& y);
    // 1 iff the ring word equals c exactly; 0/1 unscaled.
    ShareTensor sec_eq_const(const ShareTensor& x, uint64_t c);

    // -- division --
    // Newton-Raphson reciprocal from public range [lo, hi] (RangeError if
    // lo <= 0): x_{n+1} = 2 x_n - a x_n^2 from x_0 = 2 / (lo + hi).
    ShareTensor sec_recip(const ShareTensor& y, double lo, double hi,
                          int iters = 15);
    ShareTensor sec_div(const ShareTensor& x, const ShareTensor& y, double lo,
                        double hi, int iters = 15);

    // Open to all three servers (1 round).
    RingMatrix open(const ShareTensor& x);

    // Ship this context's share pair to a non-server party.
    void reveal_to(int party, const ShareTensor& x, uint32_t tensor_id);
    // Receive a replicated pair dealt by `dealer`.
    ShareTensor input_from(int dealer, uint32_t tensor_id);

private:
    // XOR-domain internals for bit extraction. Boolean tensors reuse
    // ShareTensor with XOR semantics.
    ShareTensor shared_and(const ShareTensor& x, const ShareTensor& y,
                           bool single_bit);
    ShareTensor xor_add(const ShareTensor& x, const ShareTensor& y) const;
    ShareTensor xor_public(const ShareTensor& x, uint64_t mask) const;
    // Converts an XOR-shared 0/1 tensor to an arithmetic 0/1 tensor (2 rounds).
    ShareTensor bit2a(const ShareTensor& m);
    // Full 64 sum bits of the value behind an arithmetic sharing, as one
    // XOR-shared packed word per element.
    ShareTensor sum_bits(const ShareTensor& x, bool msb_only);

    RingMatrix reshare(const RingMatrix& z_own, WordKind kind);
    uint64_t alloc_ctr(uint64_t n);

    int prev_server() const { return topo_.servers[(idx_ + 2) % 3]; }
    int next_server() const { return topo_.servers[(idx_ + 1) % 3]; }

    Endpoint& ep_;
    PartyTopology topo_;
    int idx_;
    uint64_t session_;
    FixedCodec codec_;
    ZeroSharer zero_;
    uint32_t round_ = 0;
    uint32_t tensor_seq_ = 0;
    uint64_t zero_ctr_;
};

// Test/benchmark harness: run one callable per compute server on its own
// thread over an in-process mesh; returns the three results.
template <class F>
auto run_servers(LocalMesh& mesh, uint64_t master_seed, uint64_t session_id,
                 int frac_bits, F&& fn)
    -> std::array<std::invoke_result_t<F&, SecureContext&>, 3> {
    using R = std::invoke_result_t<F&, SecureContext&>;
    const PartyTopology& topo = mesh.topology();
    std::array<std::optional<R>, 3> out;
    std::array<std::exception_ptr, 3> errs{};
    std::vector<std::thread> threads;
    threads.reserve(3);
    for (int i = 0; i < 3; ++i) {
        threads.emplace_back([&, i] {
            try {
                SecureContext ctx(mesh.endpoint(topo.servers[i]), topo, i,
                                  master_seed, session_id, frac_bits);
                out[i] = fn(ctx);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return {std::move(*out[0]), std::move(*out[1]), std::move(*out[2])};
}

}  // namespace windmpc

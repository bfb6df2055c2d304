#include "windmpc/secure_ops.hpp"

#include <cmath>

namespace windmpc {

namespace {

void check_same_shape(const ShareTensor& x, const ShareTensor& y,
                      const char* op) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw ShapeError(std::string(op) + ": operand shapes differ");
}

// Bitwise helpers on ring matrices (Eigen integer arrays do arithmetic;
// bit ops go through binaryExpr/unaryExpr).
RingMatrix band(const RingMatrix& a, const RingMatrix& b) {
    return a.binaryExpr(b, [](uint64_t x, uint64_t y) { return x & y; });
}
RingMatrix bxor(const RingMatrix& a, const RingMatrix& b) {
    return a.binaryExpr(b, [](uint64_t x, uint64_t y) { return x ^ y; });
}
RingMatrix bshl(const RingMatrix& a, int s) {
    return a.unaryExpr([s](uint64_t x) { return x << s; });
}
RingMatrix bshr(const RingMatrix& a, int s) {
    return a.unaryExpr([s](uint64_t x) { return x >> s; });
}
RingMatrix bit_at(const RingMatrix& a, int i) {
    return a.unaryExpr([i](uint64_t x) -> uint64_t { return (x >> i) & 1u; });
}
RingMatrix band_mask(const RingMatrix& a, uint64_t m) {
    return a.unaryExpr([m](uint64_t x) { return x & m; });
}
RingMatrix bxor_mask(const RingMatrix& a, uint64_t m) {
    return a.unaryExpr([m](uint64_t x) { return x ^ m; });
}

ShareTensor hcat3(const ShareTensor& a, const ShareTensor& b,
                  const ShareTensor& c) {
    ShareTensor o(a.rows(), a.cols() * 3);
    o.own << a.own, b.own, c.own;
    o.next << a.next, b.next, c.next;
    return o;
}

ShareTensor col_block(const ShareTensor& t, Eigen::Index start,
                      Eigen::Index width) {
    ShareTensor o;
    o.own = t.own.block(0, start, t.rows(), width);
    o.next = t.next.block(0, start, t.rows(), width);
    return o;
}

}  // namespace

// ---- share payloads -----------------------------------------------------------

std::vector<uint8_t> encode_share_payload(uint32_t tensor_id, WordKind kind,
                                          const RingMatrix& own,
                                          const RingMatrix* next) {
    const bool pair =
        kind == WordKind::arith_pair || kind == WordKind::bool_pair;
    if (pair != (next != nullptr))
        throw ShapeError("share payload word-kind/operand mismatch");
    ByteWriter w;
    w.put_u32(tensor_id);
    w.put_u32(static_cast<uint32_t>(own.rows()));
    w.put_u32(static_cast<uint32_t>(own.cols()));
    w.put_u8(static_cast<uint8_t>(kind));
    if (pair) {
        for (Eigen::Index i = 0; i < own.rows(); ++i)
            for (Eigen::Index j = 0; j < own.cols(); ++j) {
                w.put_u64(own(i, j));
                w.put_u64((*next)(i, j));
            }
    } else {
        w.put_bytes(reinterpret_cast<const uint8_t*>(own.data()),
                    sizeof(uint64_t) * own.size());
    }
    return std::move(w.bytes);
}

SharePayload decode_share_payload(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    SharePayload p;
    p.tensor_id = r.get_u32();
    uint32_t rows = r.get_u32();
    uint32_t cols = r.get_u32();
    p.kind = static_cast<WordKind>(r.get_u8());
    const bool pair =
        p.kind == WordKind::arith_pair || p.kind == WordKind::bool_pair;
    p.tensor = ShareTensor(rows, cols);
    if (pair) {
        for (uint32_t i = 0; i < rows; ++i)
            for (uint32_t j = 0; j < cols; ++j) {
                p.tensor.own(i, j) = r.get_u64();
                p.tensor.next(i, j) = r.get_u64();
            }
    } else {
        for (uint32_t i = 0; i < rows; ++i)
            for (uint32_t j = 0; j < cols; ++j) p.tensor.own(i, j) = r.get_u64();
        p.tensor.next.resize(0, 0);
    }
    if (!r.done()) throw FormatError("trailing bytes in share payload");
    return p;
}

// ---- cross-party share movement -------------------------------------------------

void deal_to_servers(Endpoint& ep, const PartyTopology& topo,
                     uint64_t session_id, uint32_t round_no, uint32_t tensor_id,
                     const RingMatrix& x, std::mt19937_64& rng) {
    auto views = share(x, rng);
    for (int s = 0; s < 3; ++s) {
        Frame f;
        f.session_id = session_id;
        f.round_no = round_no;
        f.kind = static_cast<uint8_t>(FrameKind::share);
        f.payload = encode_share_payload(tensor_id, WordKind::arith_pair,
                                         views[s].own, &views[s].next);
        ep.send(topo.servers[s], std::move(f));
    }
}

ShareTensor recv_dealt_share(Endpoint& ep, int dealer, uint64_t session_id,
                             uint32_t tensor_id) {
    RecvMatch m;
    m.session_id = session_id;
    m.kind = static_cast<uint8_t>(FrameKind::share);
    Frame f = ep.recv(dealer, m);
    SharePayload p = decode_share_payload(f.payload);
    if (p.tensor_id != tensor_id)
        throw ProtocolError("unexpected tensor id from dealer");
    if (p.kind != WordKind::arith_pair && p.kind != WordKind::bool_pair)
        throw ProtocolError("dealt share must carry a replicated pair");
    return p.tensor;
}

void send_share_to(Endpoint& ep, int to, uint64_t session_id, uint32_t round_no,
                   uint32_t tensor_id, const ShareTensor& t, WordKind kind) {
    Frame f;
    f.session_id = session_id;
    f.round_no = round_no;
    f.kind = static_cast<uint8_t>(FrameKind::share);
    f.payload = encode_share_payload(tensor_id, kind, t.own, &t.next);
    ep.send(to, std::move(f));
}

RingMatrix collect_reveal(Endpoint& ep, const PartyTopology& topo,
                          uint64_t session_id, uint32_t tensor_id) {
    std::array<ShareTensor, 3> views;
    for (int s = 0; s < 3; ++s) {
        RecvMatch m;
        m.session_id = session_id;
        m.kind = static_cast<uint8_t>(FrameKind::share);
        Frame f = ep.recv(topo.servers[s], m);
        SharePayload p = decode_share_payload(f.payload);
        if (p.tensor_id != tensor_id)
            throw ProtocolError("unexpected tensor id in reveal");
        views[s] = std::move(p.tensor);
    }
    return reveal(views);
}

// ---- SecureContext --------------------------------------------------------------

SecureContext::SecureContext(Endpoint& ep, const PartyTopology& topo,
                             int server_index, uint64_t master_seed,
                             uint64_t session_id, int frac_bits)
    : ep_(ep),
      topo_(topo),
      idx_(server_index),
      session_(session_id),
      codec_(frac_bits),
      zero_(server_zero_keys(master_seed, server_index)),
      zero_ctr_(session_id << 32) {
    topo_.validate();
    if (server_index < 0 || server_index > 2)
        throw ConfigError("server index must be 0, 1 or 2");
}

uint64_t SecureContext::alloc_ctr(uint64_t n) {
    uint64_t base = zero_ctr_;
    zero_ctr_ += n;
    return base;
}

RingMatrix SecureContext::reshare(const RingMatrix& z_own, WordKind kind) {
    ++round_;
    ++tensor_seq_;
    Frame f;
    f.session_id = session_;
    f.round_no = round_;
    f.kind = static_cast<uint8_t>(FrameKind::share);
    f.payload = encode_share_payload(tensor_seq_, kind, z_own);
    ep_.send(prev_server(), std::move(f));

    RecvMatch m;
    m.session_id = session_;
    m.round_no = round_;
    m.kind = static_cast<uint8_t>(FrameKind::share);
    Frame g = ep_.recv(next_server(), m);
    SharePayload p = decode_share_payload(g.payload);
    if (p.tensor_id != tensor_seq_)
        throw ProtocolError("resharing tensor id out of lockstep");
    if (p.tensor.rows() != z_own.rows() || p.tensor.cols() != z_own.cols())
        throw ShapeError("resharing shape mismatch");
    return p.tensor.own;
}

// -- local linear ops --

ShareTensor SecureContext::sec_add(const ShareTensor& x,
                                   const ShareTensor& y) const {
    check_same_shape(x, y, "sec_add");
    ShareTensor o;
    o.own = x.own + y.own;
    o.next = x.next + y.next;
    return o;
}

ShareTensor SecureContext::sec_sub(const ShareTensor& x,
                                   const ShareTensor& y) const {
    check_same_shape(x, y, "sec_sub");
    ShareTensor o;
    o.own = x.own - y.own;
    o.next = x.next - y.next;
    return o;
}

ShareTensor SecureContext::sec_neg(const ShareTensor& x) const {
    ShareTensor o;
    o.own = -x.own;
    o.next = -x.next;
    return o;
}

ShareTensor SecureContext::add_public(const ShareTensor& x,
                                      const RingMatrix& c) const {
    if (x.rows() != c.rows() || x.cols() != c.cols())
        throw ShapeError("add_public: shapes differ");
    ShareTensor o = x;
    if (idx_ == 0) o.own = x.own + c;
    if (idx_ == 2) o.next = x.next + c;
    return o;
}

ShareTensor SecureContext::add_public(const ShareTensor& x,
                                      RingElement c) const {
    ShareTensor o = x;
    if (idx_ == 0) o.own = x.own + c.word;
    if (idx_ == 2) o.next = x.next + c.word;
    return o;
}

ShareTensor SecureContext::mul_public_word(const ShareTensor& x,
                                           uint64_t w) const {
    ShareTensor o;
    o.own = x.own * w;
    o.next = x.next * w;
    return o;
}

ShareTensor SecureContext::share_public(const RingMatrix& c) const {
    ShareTensor o(c.rows(), c.cols());
    if (idx_ == 0) o.own = c;
    if (idx_ == 2) o.next = c;
    return o;
}

ShareTensor SecureContext::share_public_scalar(RingElement c, Eigen::Index rows,
                                               Eigen::Index cols) const {
    RingMatrix m = RingMatrix::Constant(rows, cols, c.word);
    return share_public(m);
}

// -- multiplication --

ShareTensor SecureContext::sec_mul_untruncated(const ShareTensor& x,
                                               const ShareTensor& y) {
    check_same_shape(x, y, "sec_mul");
    RingMatrix alpha = zero_.alpha_block(
        alloc_ctr(static_cast<uint64_t>(x.own.size())), x.rows(), x.cols());
    RingMatrix z = x.own * y.own + x.own * y.next + x.next * y.own + alpha;
    ShareTensor o;
    o.next = reshare(z, WordKind::arith_single);
    o.own = std::move(z);
    return o;
}

ShareTensor SecureContext::sec_mul(const ShareTensor& x, const ShareTensor& y) {
    return truncate(sec_mul_untruncated(x, y), codec_.frac_bits());
}

ShareTensor SecureContext::sec_matmul_untruncated(const ShareTensor& x,
                                                  const ShareTensor& y) {
    if (x.cols() != y.rows())
        throw ShapeError("sec_matmul: inner dimensions differ");
    RingMatrix alpha = zero_.alpha_block(
        alloc_ctr(static_cast<uint64_t>(x.rows() * y.cols())), x.rows(),
        y.cols());
    RingMatrix z = (x.own.matrix() * y.own.matrix() +
                    x.own.matrix() * y.next.matrix() +
                    x.next.matrix() * y.own.matrix())
                       .array() +
                   alpha;
    ShareTensor o;
    o.next = reshare(z, WordKind::arith_single);
    o.own = std::move(z);
    return o;
}

ShareTensor SecureContext::sec_matmul(const ShareTensor& x,
                                      const ShareTensor& y) {
    return truncate(sec_matmul_untruncated(x, y), codec_.frac_bits());
}

ShareTensor SecureContext::truncate(const ShareTensor& x, int bits) {
    if (bits < 1 || bits > 62) throw ConfigError("truncate bits out of range");
    const Eigen::Index rows = x.rows(), cols = x.cols();
    const uint64_t n = static_cast<uint64_t>(x.own.size());
    const uint64_t base = alloc_ctr(n);
    ++round_;
    ++tensor_seq_;

    // The replicated sharing decomposes as x = u + w with u = x_0 + x_1
    // (known to server 0 alone) and w = x_2 (known to servers 1 and 2).
    // Two-term probabilistic truncation: floor-shift u, ceil-shift w, then
    // re-randomize into replicated form with shared PRF streams. r1 rides
    // seed s_0 (servers 0,1), r2 rides seed s_1 (servers 1,2); component
    // z_0 = (u'-r1)+(w'-r2) is exchanged between servers 0 and 2.
    auto fill = [&](auto&& f) {
        RingMatrix m(rows, cols);
        uint64_t ctr = base;
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f(ctr++);
        return m;
    };

    auto send_part = [&](int to, const RingMatrix& part) {
        Frame f;
        f.session_id = session_;
        f.round_no = round_;
        f.kind = static_cast<uint8_t>(FrameKind::share);
        f.payload =
            encode_share_payload(tensor_seq_, WordKind::arith_single, part);
        ep_.send(to, std::move(f));
    };
    auto recv_part = [&](int from) {
        RecvMatch m;
        m.session_id = session_;
        m.round_no = round_;
        m.kind = static_cast<uint8_t>(FrameKind::share);
        Frame g = ep_.recv(from, m);
        SharePayload p = decode_share_payload(g.payload);
        if (p.tensor_id != tensor_seq_)
            throw ProtocolError("truncation tensor id out of lockstep");
        return p.tensor.own;
    };

    ShareTensor o;
    if (idx_ == 0) {
        RingMatrix r1 = fill([&](uint64_t c) { return zero_.own_stream(c); });
        RingMatrix u = x.own + x.next;
        RingMatrix up = u.unaryExpr([bits](uint64_t v) {
            return static_cast<uint64_t>(static_cast<int64_t>(v) >> bits);
        });
        RingMatrix m0 = up - r1;
        send_part(topo_.servers[2], m0);
        RingMatrix m2 = recv_part(topo_.servers[2]);
        o.own = m0 + m2;
        o.next = std::move(r1);
    } else if (idx_ == 1) {
        RingMatrix r1 = fill([&](uint64_t c) { return zero_.prev_stream(c); });
        RingMatrix r2 = fill([&](uint64_t c) { return zero_.own_stream(c); });
        o.own = std::move(r1);
        o.next = std::move(r2);
    } else {
        RingMatrix r2 = fill([&](uint64_t c) { return zero_.prev_stream(c); });
        RingMatrix w = x.own;
        RingMatrix wp = w.unaryExpr([bits](uint64_t v) -> uint64_t {
            uint64_t neg = ~v + 1;
            int64_t sh = static_cast<int64_t>(neg) >> bits;
            return ~static_cast<uint64_t>(sh) + 1;
        });
        RingMatrix m2 = wp - r2;
        send_part(topo_.servers[0], m2);
        RingMatrix m0 = recv_part(topo_.servers[0]);
        o.own = std::move(r2);
        o.next = m0 + m2;
    }
    return o;
}

// -- boolean sub-layer --

ShareTensor SecureContext::xor_add(const ShareTensor& x,
                                   const ShareTensor& y) const {
    check_same_shape(x, y, "xor_add");
    ShareTensor o;
    o.own = bxor(x.own, y.own);
    o.next = bxor(x.next, y.next);
    return o;
}

ShareTensor SecureContext::xor_public(const ShareTensor& x,
                                      uint64_t mask) const {
    ShareTensor o = x;
    if (idx_ == 0) o.own = bxor_mask(x.own, mask);
    if (idx_ == 2) o.next = bxor_mask(x.next, mask);
    return o;
}

ShareTensor SecureContext::shared_and(const ShareTensor& x,
                                      const ShareTensor& y, bool single_bit) {
    check_same_shape(x, y, "shared_and");
    RingMatrix beta = zero_.beta_block(
        alloc_ctr(static_cast<uint64_t>(x.own.size())), x.rows(), x.cols());
    if (single_bit) beta = band_mask(beta, 1);
    RingMatrix z = bxor(bxor(band(x.own, y.own), band(x.own, y.next)),
                        bxor(band(x.next, y.own), beta));
    ShareTensor o;
    o.next = reshare(z, WordKind::bool_single);
    o.own = std::move(z);
    return o;
}

ShareTensor SecureContext::bit2a(const ShareTensor& m) {
    // Structural arithmetic share of XOR component t: the two servers that
    // hold it place the 0/1 word, everyone else holds zero.
    auto structural = [&](int t) {
        ShareTensor o(m.rows(), m.cols());
        if (idx_ == t) o.own = m.own;
        if ((idx_ + 1) % 3 == t) o.next = m.next;
        return o;
    };
    ShareTensor a0 = structural(0), a1 = structural(1), a2 = structural(2);
    // a xor b = a + b - 2ab on 0/1 words; two untruncated products keep it
    // exact (no fixed-point scale involved).
    ShareTensor p = sec_mul_untruncated(a0, a1);
    ShareTensor u = sec_sub(sec_add(a0, a1), mul_public_word(p, 2));
    ShareTensor q = sec_mul_untruncated(u, a2);
    return sec_sub(sec_add(u, a2), mul_public_word(q, 2));
}

ShareTensor SecureContext::sum_bits(const ShareTensor& x, bool msb_only) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    // XOR-sharings of the three additive summands come for free: summand t
    // is placed as XOR component t by the two servers that hold it.
    auto summand = [&](int t) {
        ShareTensor o(rows, cols);
        if (idx_ == t) o.own = x.own;
        if ((idx_ + 1) % 3 == t) o.next = x.next;
        return o;
    };
    ShareTensor a = summand(0), b = summand(1), c = summand(2);

    // Carry-save layer: a+b+c = s + 2t with s = a^b^c, t = maj(a,b,c);
    // the three majority ANDs ride one batched round.
    ShareTensor s = xor_add(xor_add(a, b), c);
    ShareTensor anded = shared_and(hcat3(a, a, b), hcat3(b, c, c), false);
    ShareTensor t = xor_add(xor_add(col_block(anded, 0, cols),
                                    col_block(anded, cols, cols)),
                            col_block(anded, 2 * cols, cols));
    ShareTensor t2;
    t2.own = bshl(t.own, 1);
    t2.next = bshl(t.next, 1);

    // Ripple-carry add of s and 2t: generate bits in one batched AND, then
    // 62 sequential single-bit carry rounds.
    ShareTensor p = xor_add(s, t2);
    ShareTensor g = shared_and(s, t2, false);

    auto bit_of = [](const ShareTensor& w, int i) {
        ShareTensor o;
        o.own = bit_at(w.own, i);
        o.next = bit_at(w.next, i);
        return o;
    };

    ShareTensor carry = bit_of(g, 0);  // carry into bit 1
    ShareTensor packed(rows, cols);
    if (!msb_only) {
        // sum_0 = p_0 (carry into bit 0 is zero)
        ShareTensor s0 = bit_of(p, 0);
        packed.own = s0.own;
        packed.next = s0.next;
    }
    for (int i = 1; i <= 63; ++i) {
        if (!msb_only) {
            ShareTensor si = xor_add(bit_of(p, i), carry);
            packed.own = bxor(packed.own, bshl(si.own, i));
            packed.next = bxor(packed.next, bshl(si.next, i));
        } else if (i == 63) {
            ShareTensor si = xor_add(bit_of(p, i), carry);
            packed.own = si.own;
            packed.next = si.next;
        }
        if (i == 63) break;
        // carry_{i+1} = g_i ^ (p_i & carry_i)
        carry = xor_add(bit_of(g, i), shared_and(bit_of(p, i), carry, true));
    }
    return packed;
}

ShareTensor SecureContext::sec_msb(const ShareTensor& x) {
    return bit2a(sum_bits(x, true));
}

ShareTensor SecureContext::sec_lt(const ShareTensor& x, const ShareTensor& y) {
    return sec_msb(sec_sub(x, y));
}

ShareTensor SecureContext::sec_eq_const(const ShareTensor& x, uint64_t c) {
    ShareTensor d = add_public(x, RingElement{0ull - c});
    ShareTensor w = sum_bits(d, false);
    // Equality iff every sum bit is zero: complement, then log-depth AND fold.
    w = xor_public(w, ~0ull);
    for (int s = 32; s >= 1; s /= 2) {
        ShareTensor shifted;
        shifted.own = bshr(w.own, s);
        shifted.next = bshr(w.next, s);
        w = shared_and(w, shifted, false);
    }
    ShareTensor bit;
    bit.own = band_mask(w.own, 1);
    bit.next = band_mask(w.next, 1);
    return bit2a(bit);
}

ShareTensor SecureContext::sec_recip(const ShareTensor& y, double lo, double hi,
                                     int iters) {
    if (!(lo > 0.0)) throw RangeError("sec_recip requires lo > 0");
    if (!(hi > lo)) throw RangeError("sec_recip requires hi > lo");
    ShareTensor x = share_public_scalar(codec_.encode(2.0 / (lo + hi)),
                                        y.rows(), y.cols());
    ShareTensor two =
        share_public_scalar(codec_.encode(2.0), y.rows(), y.cols());
    for (int n = 0; n < iters; ++n) {
        ShareTensor ax = sec_mul(y, x);
        x = sec_mul(x, sec_sub(two, ax));
    }
    return x;
}

ShareTensor SecureContext::sec_div(const ShareTensor& x, const ShareTensor& y,
                                   double lo, double hi, int iters) {
    return sec_mul(x, sec_recip(y, lo, hi, iters));
}

RingMatrix SecureContext::open(const ShareTensor& x) {
    ++round_;
    ++tensor_seq_;
    Frame f;
    f.session_id = session_;
    f.round_no = round_;
    f.kind = static_cast<uint8_t>(FrameKind::share);
    f.payload =
        encode_share_payload(tensor_seq_, WordKind::arith_single, x.own);
    ep_.send(next_server(), std::move(f));
    RecvMatch m;
    m.session_id = session_;
    m.round_no = round_;
    m.kind = static_cast<uint8_t>(FrameKind::share);
    Frame g = ep_.recv(prev_server(), m);
    SharePayload p = decode_share_payload(g.payload);
    if (p.tensor_id != tensor_seq_)
        throw ProtocolError("open tensor id out of lockstep");
    return x.own + x.next + p.tensor.own;
}

void SecureContext::reveal_to(int party, const ShareTensor& x,
                              uint32_t tensor_id) {
    send_share_to(ep_, party, session_, round_, tensor_id, x,
                  WordKind::arith_pair);
}

ShareTensor SecureContext::input_from(int dealer, uint32_t tensor_id) {
    return recv_dealt_share(ep_, dealer, session_, tensor_id);
}

}  // namespace windmpc

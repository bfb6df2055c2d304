#include "windmpc/sharing.hpp"

#include <optional>

#include "windmpc/errors.hpp"

namespace windmpc {

ShareTensor scalar_share_view(RingElement a, RingElement b) {
    ShareTensor t(1, 1);
    t.own(0, 0) = a.word;
    t.next(0, 0) = b.word;
    return t;
}

std::array<ShareTensor, 3> share(const RingMatrix& x, std::mt19937_64& rng) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    std::array<RingMatrix, 3> comp;
    comp[0].resize(rows, cols);
    comp[1].resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            comp[0](i, j) = rng();
            comp[1](i, j) = rng();
        }
    comp[2] = x - comp[0] - comp[1];

    std::array<ShareTensor, 3> out;
    for (int s = 0; s < 3; ++s) {
        out[s].own = comp[s];
        out[s].next = comp[(s + 1) % 3];
    }
    return out;
}

std::array<ShareTensor, 3> share(RingElement x, std::mt19937_64& rng) {
    RingMatrix m(1, 1);
    m(0, 0) = x.word;
    return share(m, rng);
}

RingMatrix reveal(const std::vector<std::pair<int, const ShareTensor*>>& views) {
    if (views.size() < 2)
        throw InconsistencyError("reveal needs at least two servers");
    const Eigen::Index rows = views.front().second->rows();
    const Eigen::Index cols = views.front().second->cols();

    // Component c is claimed by server c (own word) and server c+2 (next
    // word); collect every claim and cross-check overlaps.
    std::array<std::optional<RingMatrix>, 3> comp;
    auto claim = [&](int c, const RingMatrix& m) {
        if (m.rows() != rows || m.cols() != cols)
            throw ShapeError("mismatched share tensor shapes in reveal");
        if (!comp[c]) {
            comp[c] = m;
        } else if (((*comp[c]) != m).any()) {
            throw InconsistencyError("replicated words disagree");
        }
    };
    std::array<bool, 3> seen{false, false, false};
    for (const auto& [sid, view] : views) {
        if (sid < 0 || sid > 2)
            throw InconsistencyError("bad server id in reveal");
        if (seen[sid]) throw InconsistencyError("duplicate server in reveal");
        seen[sid] = true;
        claim(sid, view->own);
        claim((sid + 1) % 3, view->next);
    }
    for (int c = 0; c < 3; ++c)
        if (!comp[c]) throw InconsistencyError("missing share component");
    return *comp[0] + *comp[1] + *comp[2];
}

RingMatrix reveal(const std::array<ShareTensor, 3>& views) {
    return reveal({{0, &views[0]}, {1, &views[1]}, {2, &views[2]}});
}

RingElement reveal_scalar(const std::array<ShareTensor, 3>& views) {
    return RingElement{reveal(views)(0, 0)};
}

ZeroStreamKeys server_zero_keys(uint64_t master_seed, int server_id) {
    auto seed_key = [&](int j) {
        const char* tags[3] = {"zero-seed-0", "zero-seed-1", "zero-seed-2"};
        return derive_key(master_seed, tags[j]);
    };
    ZeroStreamKeys k;
    k.own = seed_key(server_id);
    k.prev = seed_key((server_id + 2) % 3);
    return k;
}

RingMatrix ZeroSharer::alpha_block(uint64_t base_ctr, Eigen::Index rows,
                                   Eigen::Index cols) const {
    RingMatrix m(rows, cols);
    uint64_t ctr = base_ctr;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = alpha(ctr++);
    return m;
}

RingMatrix ZeroSharer::beta_block(uint64_t base_ctr, Eigen::Index rows,
                                  Eigen::Index cols) const {
    RingMatrix m(rows, cols);
    uint64_t ctr = base_ctr;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = beta(ctr++);
    return m;
}

}  // namespace windmpc

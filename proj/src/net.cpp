#include "windmpc/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <functional>
#include <set>

namespace windmpc {

namespace {
constexpr uint32_t kMaxPayload = 1u << 30;

void append_raw(std::vector<uint8_t>& out, const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}
}  // namespace

// ---- topology ---------------------------------------------------------------

std::vector<int> PartyTopology::all_parties() const {
    std::set<int> ids(passives.begin(), passives.end());
    ids.insert(active);
    ids.insert(servers.begin(), servers.end());
    return {ids.begin(), ids.end()};
}

bool PartyTopology::is_server(int id) const { return server_index(id) >= 0; }

int PartyTopology::server_index(int id) const {
    for (int i = 0; i < 3; ++i)
        if (servers[i] == id) return i;
    return -1;
}

bool PartyTopology::is_provider(int id) const {
    if (id == active) return true;
    return std::find(passives.begin(), passives.end(), id) != passives.end();
}

void PartyTopology::validate() const {
    if (servers[0] == servers[1] || servers[1] == servers[2] ||
        servers[0] == servers[2])
        throw ConfigError("compute servers must be pairwise distinct");
    std::set<int> farms(passives.begin(), passives.end());
    if (farms.size() != passives.size())
        throw ConfigError("duplicate passive party id");
    if (farms.count(active))
        throw ConfigError("active party repeated among passives");
    if (m() < 1) throw ConfigError("at least one participant required");
}

// ---- frames -----------------------------------------------------------------

std::vector<uint8_t> encode_frame(const Frame& f) {
    if (f.payload.size() > kMaxPayload) throw FormatError("payload too large");
    std::vector<uint8_t> out;
    out.reserve(kFrameHeaderBytes + f.payload.size());
    uint32_t len = static_cast<uint32_t>(f.payload.size());
    append_raw(out, &len, 4);
    append_raw(out, &f.session_id, 8);
    append_raw(out, &f.round_no, 4);
    out.push_back(f.kind);
    append_raw(out, f.payload.data(), f.payload.size());
    return out;
}

Frame decode_frame(const std::vector<uint8_t>& wire) {
    if (wire.size() < kFrameHeaderBytes)
        throw FormatError("frame shorter than header");
    uint32_t len;
    std::memcpy(&len, wire.data(), 4);
    if (len > kMaxPayload) throw FormatError("frame length prefix too large");
    if (wire.size() != kFrameHeaderBytes + len)
        throw FormatError("frame length prefix disagrees with buffer size");
    Frame f;
    std::memcpy(&f.session_id, wire.data() + 4, 8);
    std::memcpy(&f.round_no, wire.data() + 12, 4);
    f.kind = wire[16];
    f.payload.assign(wire.begin() + kFrameHeaderBytes, wire.end());
    return f;
}

// ---- payload serialization ----------------------------------------------------

void ByteWriter::put_u32(uint32_t v) { append_raw(bytes, &v, 4); }
void ByteWriter::put_u64(uint64_t v) { append_raw(bytes, &v, 8); }
void ByteWriter::put_f64(double v) { append_raw(bytes, &v, 8); }

void ByteWriter::put_matrix(const RingMatrix& m) {
    put_u32(static_cast<uint32_t>(m.rows()));
    put_u32(static_cast<uint32_t>(m.cols()));
    append_raw(bytes, m.data(), sizeof(uint64_t) * m.size());
}

void ByteWriter::put_dmatrix(const Eigen::MatrixXd& m) {
    put_u32(static_cast<uint32_t>(m.rows()));
    put_u32(static_cast<uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(m(i, j));
}

void ByteWriter::put_bytes(const uint8_t* p, size_t n) { append_raw(bytes, p, n); }

void ByteReader::need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("payload truncated");
}

uint8_t ByteReader::get_u8() {
    need(1);
    return bytes_[pos_++];
}
uint32_t ByteReader::get_u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
}
uint64_t ByteReader::get_u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
}
double ByteReader::get_f64() {
    need(8);
    double v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
}

RingMatrix ByteReader::get_matrix() {
    uint32_t rows = get_u32(), cols = get_u32();
    size_t n = size_t{rows} * cols;
    need(8 * n);
    RingMatrix m(rows, cols);
    std::memcpy(m.data(), bytes_.data() + pos_, 8 * n);
    pos_ += 8 * n;
    return m;
}

Eigen::MatrixXd ByteReader::get_dmatrix() {
    uint32_t rows = get_u32(), cols = get_u32();
    Eigen::MatrixXd m(rows, cols);
    for (uint32_t i = 0; i < rows; ++i)
        for (uint32_t j = 0; j < cols; ++j) m(i, j) = get_f64();
    return m;
}

// ---- audit ------------------------------------------------------------------

void AuditSink::register_sensitive(std::string name, std::vector<uint8_t> blob,
                                   std::vector<int> forbidden_dest) {
    std::lock_guard lock(mu_);
    sensitive_.push_back({std::move(name), std::move(blob),
                          std::move(forbidden_dest)});
}

void AuditSink::observe(int from, int to, const Frame& f) {
    std::lock_guard lock(mu_);
    ++total_;
    ++frames_to_[{to, f.kind}];
    for (const auto& s : sensitive_) {
        if (std::find(s.forbidden_dest.begin(), s.forbidden_dest.end(), to) ==
            s.forbidden_dest.end())
            continue;
        if (s.blob.empty() || s.blob.size() > f.payload.size()) continue;
        // Horspool keeps the scan near O(payload / blob) per pattern, which
        // matters on megabyte share frames.
        auto it = std::search(
            f.payload.data(), f.payload.data() + f.payload.size(),
            std::boyer_moore_horspool_searcher(
                s.blob.data(), s.blob.data() + s.blob.size()));
        if (it != f.payload.data() + f.payload.size())
            violations_.push_back({s.name, from, to, f.session_id});
    }
}

std::vector<AuditSink::Violation> AuditSink::violations() const {
    std::lock_guard lock(mu_);
    return violations_;
}

uint64_t AuditSink::frames_to(int to, uint8_t kind) const {
    std::lock_guard lock(mu_);
    auto it = frames_to_.find({to, kind});
    return it == frames_to_.end() ? 0 : it->second;
}

uint64_t AuditSink::total_frames() const {
    std::lock_guard lock(mu_);
    return total_;
}

// ---- mesh metrics -------------------------------------------------------------

uint64_t MeshMetrics::total_bytes() const {
    uint64_t t = 0;
    for (const auto& [k, v] : links) t += v.bytes;
    return t;
}

uint64_t MeshMetrics::total_frames() const {
    uint64_t t = 0;
    for (const auto& [k, v] : links) t += v.frames;
    return t;
}

// ---- local mesh ---------------------------------------------------------------

class LocalEndpoint : public Endpoint {
public:
    LocalEndpoint(LocalMesh* mesh, int id) : mesh_(mesh), id_(id) {}

    int id() const override { return id_; }

    void send(int to, Frame f) override { mesh_->deliver(id_, to, std::move(f)); }

    Frame recv(int from, const RecvMatch& match,
               std::chrono::milliseconds timeout) override {
        std::unique_lock lock(mesh_->mu_);
        auto key = std::make_pair(from, id_);
        auto it = mesh_->inboxes_.find(key);
        if (it == mesh_->inboxes_.end())
            throw TransportError("no channel from party " + std::to_string(from) +
                                 " to party " + std::to_string(id_));
        auto& inbox = it->second;
        auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            for (auto qi = inbox.q.begin(); qi != inbox.q.end(); ++qi) {
                if (match.accepts(*qi)) {
                    Frame f = std::move(*qi);
                    inbox.q.erase(qi);
                    return f;
                }
            }
            if (inbox.closed)
                throw TransportError("channel closed: party " +
                                     std::to_string(from) + " -> " +
                                     std::to_string(id_));
            if (mesh_->cv_.wait_until(lock, deadline) ==
                std::cv_status::timeout)
                throw TransportError(
                    "recv timeout waiting on party " + std::to_string(from) +
                    " at party " + std::to_string(id_));
        }
    }

private:
    LocalMesh* mesh_;
    int id_;
};

LocalMesh::LocalMesh(PartyTopology topo, AuditSink* audit)
    : topo_(std::move(topo)), audit_(audit) {
    topo_.validate();
    auto ids = topo_.all_parties();
    for (int a : ids)
        for (int b : ids)
            if (a != b) inboxes_[{a, b}] = Inbox{};
    for (int a : ids) endpoints_[a] = std::make_unique<LocalEndpoint>(this, a);
}

LocalMesh::~LocalMesh() = default;

Endpoint& LocalMesh::endpoint(int party_id) {
    auto it = endpoints_.find(party_id);
    if (it == endpoints_.end())
        throw TransportError("unknown party id " + std::to_string(party_id));
    return *it->second;
}

size_t LocalMesh::link_count() const {
    return inboxes_.size() / 2;  // ordered pairs -> undirected links
}

void LocalMesh::deliver(int from, int to, Frame f) {
    if (audit_) audit_->observe(from, to, f);
    std::lock_guard lock(mu_);
    auto it = inboxes_.find({from, to});
    if (it == inboxes_.end())
        throw TransportError("no channel from party " + std::to_string(from) +
                             " to party " + std::to_string(to));
    auto& st = metrics_.links[{from, to}];
    st.frames += 1;
    st.bytes += kFrameHeaderBytes + f.payload.size();
    auto& rounds = metrics_.session_rounds[f.session_id];
    rounds = std::max(rounds, f.round_no);
    it->second.q.push_back(std::move(f));
    cv_.notify_all();
}

MeshMetrics LocalMesh::snapshot() const {
    std::lock_guard lock(mu_);
    return metrics_;
}

void LocalMesh::phase_begin(const std::string& name) {
    std::lock_guard lock(mu_);
    phase_start_[name] = std::chrono::steady_clock::now();
}

void LocalMesh::phase_end(const std::string& name) {
    std::lock_guard lock(mu_);
    auto it = phase_start_.find(name);
    if (it == phase_start_.end()) return;
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - it->second;
    metrics_.phase_seconds[name] += dt.count();
    phase_start_.erase(it);
}

// ---- tcp --------------------------------------------------------------------

namespace {

void write_full(int fd, const uint8_t* p, size_t n, int peer) {
    while (n > 0) {
        ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw TransportError("tcp send to party " + std::to_string(peer) +
                                 ": " + std::strerror(errno));
        }
        p += w;
        n -= static_cast<size_t>(w);
    }
}

// Returns false on clean EOF at a frame boundary.
bool read_full(int fd, uint8_t* p, size_t n) {
    size_t got = 0;
    while (got < n) {
        ssize_t r = ::recv(fd, p + got, n - got, 0);
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        if (r == 0) return false;
        got += static_cast<size_t>(r);
    }
    return true;
}

int make_listener(const TcpAddress& addr) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(addr.port);
    if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
        ::close(fd);
        throw TransportError("bad listen address " + addr.host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
        ::listen(fd, 64) != 0) {
        int err = errno;
        ::close(fd);
        throw TransportError("bind/listen " + addr.host + ":" +
                             std::to_string(addr.port) + ": " +
                             std::strerror(err));
    }
    return fd;
}

int dial(const TcpAddress& addr, std::chrono::milliseconds timeout, int peer) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0)
            throw TransportError("socket: " + std::string(std::strerror(errno)));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(addr.port);
        if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
            ::close(fd);
            throw TransportError("bad peer address " + addr.host);
        }
        if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            return fd;
        }
        ::close(fd);
        if (std::chrono::steady_clock::now() >= deadline)
            throw TransportError("connect to party " + std::to_string(peer) +
                                 " at " + addr.host + ":" +
                                 std::to_string(addr.port) + " timed out");
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

}  // namespace

TcpEndpoint::TcpEndpoint(const PartyTopology& topo, int my_id,
                         const std::map<int, TcpAddress>& addrs,
                         AuditSink* audit,
                         std::chrono::milliseconds connect_timeout)
    : topo_(topo), my_id_(my_id), audit_(audit) {
    topo_.validate();
    auto parties = topo_.all_parties();
    if (std::find(parties.begin(), parties.end(), my_id) == parties.end())
        throw TransportError("party " + std::to_string(my_id) +
                             " not in topology");
    auto my_addr = addrs.find(my_id);
    if (my_addr == addrs.end())
        throw TransportError("no listen address for party " +
                             std::to_string(my_id));
    int listener = make_listener(my_addr->second);

    std::vector<int> lower, higher;
    for (int p : parties) {
        if (p < my_id) lower.push_back(p);
        if (p > my_id) higher.push_back(p);
    }

    try {
        // Dial every lower-id peer, announcing our id.
        for (int p : lower) {
            auto it = addrs.find(p);
            if (it == addrs.end())
                throw TransportError("no address for party " + std::to_string(p));
            int fd = dial(it->second, connect_timeout, p);
            uint32_t hello = static_cast<uint32_t>(my_id_);
            write_full(fd, reinterpret_cast<uint8_t*>(&hello), 4, p);
            peers_[p].fd = fd;
        }
        // Accept one connection per higher-id peer; the hello names it.
        for (size_t i = 0; i < higher.size(); ++i) {
            int fd = ::accept(listener, nullptr, nullptr);
            if (fd < 0)
                throw TransportError("accept: " +
                                     std::string(std::strerror(errno)));
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            uint32_t hello;
            if (!read_full(fd, reinterpret_cast<uint8_t*>(&hello), 4)) {
                ::close(fd);
                throw TransportError("peer hello not received");
            }
            int pid = static_cast<int>(hello);
            if (!peers_.count(pid) && std::find(higher.begin(), higher.end(),
                                                pid) != higher.end()) {
                peers_[pid].fd = fd;
            } else {
                ::close(fd);
                throw TransportError("unexpected hello from party " +
                                     std::to_string(pid));
            }
        }
    } catch (...) {
        ::close(listener);
        for (auto& [pid, peer] : peers_)
            if (peer.fd >= 0) ::close(peer.fd);
        throw;
    }
    ::close(listener);

    for (auto& [pid, peer] : peers_) {
        inbox_[pid];
        peer_closed_[pid] = false;
        peer.reader = std::thread([this, pid] { reader_loop(pid); });
    }
}

TcpEndpoint::~TcpEndpoint() {
    {
        std::lock_guard lock(mu_);
        shutting_down_ = true;
    }
    for (auto& [pid, peer] : peers_)
        if (peer.fd >= 0) ::shutdown(peer.fd, SHUT_RDWR);
    for (auto& [pid, peer] : peers_)
        if (peer.reader.joinable()) peer.reader.join();
    for (auto& [pid, peer] : peers_)
        if (peer.fd >= 0) ::close(peer.fd);
}

void TcpEndpoint::reader_loop(int peer_id) {
    int fd = peers_[peer_id].fd;
    for (;;) {
        uint8_t header[kFrameHeaderBytes];
        if (!read_full(fd, header, 4)) break;
        uint32_t len;
        std::memcpy(&len, header, 4);
        if (len > kMaxPayload) break;
        if (!read_full(fd, header + 4, kFrameHeaderBytes - 4)) break;
        Frame f;
        std::memcpy(&f.session_id, header + 4, 8);
        std::memcpy(&f.round_no, header + 12, 4);
        f.kind = header[16];
        f.payload.resize(len);
        if (len > 0 && !read_full(fd, f.payload.data(), len)) break;
        {
            std::lock_guard lock(mu_);
            inbox_[peer_id].push_back(std::move(f));
        }
        cv_.notify_all();
    }
    {
        std::lock_guard lock(mu_);
        peer_closed_[peer_id] = true;
    }
    cv_.notify_all();
}

void TcpEndpoint::send(int to, Frame f) {
    auto it = peers_.find(to);
    if (it == peers_.end())
        throw TransportError("no channel to party " + std::to_string(to));
    if (audit_) audit_->observe(my_id_, to, f);
    auto wire = encode_frame(f);
    {
        std::lock_guard lock(it->second.send_mu);
        write_full(it->second.fd, wire.data(), wire.size(), to);
    }
    std::lock_guard lock(mu_);
    auto& st = metrics_.links[{my_id_, to}];
    st.frames += 1;
    st.bytes += wire.size();
    auto& rounds = metrics_.session_rounds[f.session_id];
    rounds = std::max(rounds, f.round_no);
}

Frame TcpEndpoint::recv(int from, const RecvMatch& match,
                        std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    auto it = inbox_.find(from);
    if (it == inbox_.end())
        throw TransportError("no channel from party " + std::to_string(from));
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        auto& q = it->second;
        for (auto qi = q.begin(); qi != q.end(); ++qi) {
            if (match.accepts(*qi)) {
                Frame f = std::move(*qi);
                q.erase(qi);
                return f;
            }
        }
        if (peer_closed_[from])
            throw TransportError("channel closed: party " + std::to_string(from) +
                                 " -> " + std::to_string(my_id_));
        if (cv_.wait_until(lock, deadline) == std::cv_status::timeout)
            throw TransportError("recv timeout waiting on party " +
                                 std::to_string(from) + " at party " +
                                 std::to_string(my_id_));
    }
}

MeshMetrics TcpEndpoint::snapshot() const {
    std::lock_guard lock(mu_);
    return metrics_;
}

std::vector<uint16_t> free_loopback_ports(size_t len) {
    std::vector<uint16_t> ports;
    std::vector<int> fds;
    for (size_t i = 0; i < len; ++i) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw TransportError("socket: " +
                                         std::string(std::strerror(errno)));
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        sa.sin_port = 0;
        if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
            ::close(fd);
            throw TransportError("bind: " + std::string(std::strerror(errno)));
        }
        socklen_t slen = sizeof(sa);
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &slen);
        ports.push_back(ntohs(sa.sin_port));
        fds.push_back(fd);
    }
    for (int fd : fds) ::close(fd);
    return ports;
}

}  // namespace windmpc

#pragma once

#include <array>
#include <bit>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "windmpc/errors.hpp"
#include "windmpc/ring.hpp"

namespace windmpc {

static_assert(std::endian::native == std::endian::little,
              "wire format assumes a little-endian host");

// ---- topology ---------------------------------------------------------------

// Roles in a run: one active party (owns labels, orchestrates), any number of
// passive parties (feature providers), and exactly three compute servers.
// Server ids may coincide with farm party ids (servers drawn from farms) or
// be standalone.
struct PartyTopology {
    int active = 1;
    std::vector<int> passives;
    std::array<int, 3> servers{};

    // Participant wind farms.
    int m() const { return 1 + static_cast<int>(passives.size()); }

    // Distinct party ids, sorted.
    std::vector<int> all_parties() const;

    bool is_server(int id) const;
    // 0, 1 or 2 for a server id; -1 otherwise.
    int server_index(int id) const;
    bool is_provider(int id) const;

    // Throws ConfigError on duplicate servers / overlapping farm ids.
    void validate() const;
};

// ---- frames -----------------------------------------------------------------

// Protocol-level frame kinds (artifact-defined; the wire only fixes u8).
enum class FrameKind : uint8_t {
    command = 1,   // orchestration directives
    share = 2,     // ring-matrix share payload
    scalar = 3,    // small plaintext scalars/ids
    bits = 4,      // sample-split direction bits
    meta = 5,      // schema/metadata exchange
    result = 6,    // final outputs
};

struct Frame {
    uint64_t session_id = 0;
    uint32_t round_no = 0;
    uint8_t kind = 0;
    std::vector<uint8_t> payload;
};

// Wire layout: [u32 payload length][u64 session_id][u32 round_no][u8 kind]
// [payload], all little-endian.
constexpr size_t kFrameHeaderBytes = 4 + 8 + 4 + 1;

std::vector<uint8_t> encode_frame(const Frame& f);
// Decodes one frame from a complete wire buffer; throws FormatError if the
// buffer is truncated or the length prefix disagrees.
Frame decode_frame(const std::vector<uint8_t>& wire);

// ---- payload serialization ---------------------------------------------------

class ByteWriter {
public:
    std::vector<uint8_t> bytes;

    void put_u8(uint8_t v) { bytes.push_back(v); }
    void put_u32(uint32_t v);
    void put_u64(uint64_t v);
    void put_i64(int64_t v) { put_u64(static_cast<uint64_t>(v)); }
    void put_f64(double v);
    void put_matrix(const RingMatrix& m);
    void put_dmatrix(const Eigen::MatrixXd& m);
    void put_bytes(const uint8_t* p, size_t n);
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<uint8_t>& b) : bytes_(b) {}

    uint8_t get_u8();
    uint32_t get_u32();
    uint64_t get_u64();
    int64_t get_i64() { return static_cast<int64_t>(get_u64()); }
    double get_f64();
    RingMatrix get_matrix();
    Eigen::MatrixXd get_dmatrix();
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(size_t n) const;
    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

// ---- audit ------------------------------------------------------------------

// Transport-level information-flow audit. Sensitive byte patterns (serialized
// plaintext columns, labels, gradients) are registered with the set of party
// ids that must never receive them; every sent payload is scanned and
// violations counted. Counters by (destination, kind) support structural
// zero checks.
class AuditSink {
public:
    void register_sensitive(std::string name, std::vector<uint8_t> blob,
                            std::vector<int> forbidden_dest);

    void observe(int from, int to, const Frame& f);

    struct Violation {
        std::string name;
        int from;
        int to;
        uint64_t session_id;
    };

    std::vector<Violation> violations() const;
    uint64_t frames_to(int to, uint8_t kind) const;
    uint64_t total_frames() const;

private:
    struct Sensitive {
        std::string name;
        std::vector<uint8_t> blob;
        std::vector<int> forbidden_dest;
    };
    mutable std::mutex mu_;
    std::vector<Sensitive> sensitive_;
    std::vector<Violation> violations_;
    std::map<std::pair<int, uint8_t>, uint64_t> frames_to_;
    uint64_t total_ = 0;
};

// ---- mesh metrics -------------------------------------------------------------

struct LinkStats {
    uint64_t frames = 0;
    uint64_t bytes = 0;  // wire bytes including header
};

struct MeshMetrics {
    std::map<std::pair<int, int>, LinkStats> links;  // (from,to) -> stats
    std::map<uint64_t, uint32_t> session_rounds;     // max round_no per session
    std::map<std::string, double> phase_seconds;

    uint64_t total_bytes() const;
    uint64_t total_frames() const;
};

// ---- endpoints ---------------------------------------------------------------

struct RecvMatch {
    std::optional<uint64_t> session_id;
    std::optional<uint32_t> round_no;
    std::optional<uint8_t> kind;

    bool accepts(const Frame& f) const {
        return (!session_id || f.session_id == *session_id) &&
               (!round_no || f.round_no == *round_no) &&
               (!kind || f.kind == *kind);
    }
};

constexpr std::chrono::milliseconds kDefaultRecvTimeout{30000};

// A party's handle on the mesh: FIFO exactly-once links to every peer.
class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual int id() const = 0;
    virtual void send(int to, Frame f) = 0;
    // Blocks until a frame from `from` matching `match` arrives (FIFO within
    // matches); throws TransportError on timeout or closed channel.
    virtual Frame recv(int from, const RecvMatch& match = {},
                       std::chrono::milliseconds timeout = kDefaultRecvTimeout) = 0;
};

// In-process mesh: one inbox per ordered (from,to) pair, guarded by a mutex
// and condition variable. Deterministic given deterministic senders.
class LocalMesh {
public:
    explicit LocalMesh(PartyTopology topo, AuditSink* audit = nullptr);
    ~LocalMesh();

    Endpoint& endpoint(int party_id);

    // Number of undirected links in the connected mesh (full mesh over the
    // distinct parties).
    size_t link_count() const;

    MeshMetrics snapshot() const;
    void phase_begin(const std::string& name);
    void phase_end(const std::string& name);

    const PartyTopology& topology() const { return topo_; }

private:
    friend class LocalEndpoint;
    struct Inbox {
        std::deque<Frame> q;
        bool closed = false;
    };

    void deliver(int from, int to, Frame f);

    PartyTopology topo_;
    AuditSink* audit_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::pair<int, int>, Inbox> inboxes_;  // (from,to)
    std::map<int, std::unique_ptr<Endpoint>> endpoints_;
    MeshMetrics metrics_;
    std::map<std::string, std::chrono::steady_clock::time_point> phase_start_;
};

// ---- TCP --------------------------------------------------------------------

struct TcpAddress {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
};

// TCP endpoint for one party: listens on its own address, dials every peer
// with a lower id, accepts from every peer with a higher id. A reader thread
// per peer feeds the same predicate-matched inbox structure as LocalMesh.
// Construction is collective: all parties' endpoints must come up within the
// timeout or connect throws TransportError naming the peer.
class TcpEndpoint : public Endpoint {
public:
    TcpEndpoint(const PartyTopology& topo, int my_id,
                const std::map<int, TcpAddress>& addrs,
                AuditSink* audit = nullptr,
                std::chrono::milliseconds connect_timeout =
                    std::chrono::milliseconds(10000));
    ~TcpEndpoint() override;

    int id() const override { return my_id_; }
    void send(int to, Frame f) override;
    Frame recv(int from, const RecvMatch& match = {},
               std::chrono::milliseconds timeout = kDefaultRecvTimeout) override;

    MeshMetrics snapshot() const;

private:
    struct Peer {
        int fd = -1;
        std::thread reader;
        std::mutex send_mu;
    };

    void reader_loop(int peer_id);

    PartyTopology topo_;
    int my_id_;
    AuditSink* audit_;
    std::map<int, Peer> peers_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<int, std::deque<Frame>> inbox_;   // by peer id
    std::map<int, bool> peer_closed_;
    MeshMetrics metrics_;
    bool shutting_down_ = false;
};

// Picks len currently-free loopback ports (best effort; race-free enough for
// tests since each is bound immediately by the endpoint).
std::vector<uint16_t> free_loopback_ports(size_t len);

}  // namespace windmpc

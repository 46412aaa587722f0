#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "querywatch/audio.hpp"
#include "querywatch/errors.hpp"
#include "querywatch/fingerprint.hpp"
#include "querywatch/similarity.hpp"

namespace qw {

enum class ActionPolicy { log, warn, block };
enum class Action { none, warned, blocked };

inline const char* to_string(Action a) {
    switch (a) {
        case Action::warned: return "warned";
        case Action::blocked: return "blocked";
        default: return "none";
    }
}

inline const char* to_string(ActionPolicy p) {
    switch (p) {
        case ActionPolicy::warn: return "warn";
        case ActionPolicy::block: return "block";
        default: return "log";
    }
}

struct DetectorConfig {
    int memory_depth = 75;  // k
    double delta = 0.5;     // flag when aggregate similarity exceeds this
    std::optional<double> defense_noise_snr_db;
    ActionPolicy policy = ActionPolicy::log;
    double block_duration_seconds = 60.0;
    FingerprintConfig fingerprint;

    void validate() const {
        if (memory_depth < 1) throw Error("detector config: memory_depth must be >= 1");
        if (delta < 0.0 || delta > 1.0) throw Error("detector config: delta must be in [0, 1]");
        if (block_duration_seconds < 0.0)
            throw Error("detector config: block duration must be >= 0");
        fingerprint.validate();
    }
};

struct Verdict {
    std::string client_id;
    std::uint64_t sequence_no = 0;
    std::optional<SimilarityBreakdown> breakdown;  // absent for a first query
    bool flagged = false;
    Action action = Action::none;
    std::int64_t timestamp_ms = 0;

    std::optional<double> score() const {
        if (!breakdown) return std::nullopt;
        return breakdown->aggregate;
    }
};

// Per-client streaming state machine: depth-k fingerprint memory, weighted
// similarity scoring, threshold action, optional per-query defense noise.
// Queries of one client are serialized; distinct clients run concurrently.
class Detector {
  public:
    using Clock = std::function<std::int64_t()>;  // milliseconds

    static std::int64_t system_now_ms() {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    explicit Detector(DetectorConfig cfg, Clock clock = &Detector::system_now_ms)
        : cfg_(std::move(cfg)), delta_(cfg_.delta), clock_(std::move(clock)) {
        cfg_.validate();
    }

    const DetectorConfig& config() const { return cfg_; }
    double delta() const { return delta_.load(); }

    // Applies to subsequent queries only.
    void set_delta(double d) {
        if (d < 0.0 || d > 1.0) throw Error("delta must be in [0, 1]");
        delta_.store(d);
    }

    Verdict observe(const std::string& client_id, const AudioClip& clip) {
        // The shared map lock is held for the whole observation so reset and
        // restore (which take it exclusively) cannot invalidate the state.
        std::shared_lock<std::shared_mutex> map_guard(map_mutex_);
        auto it = clients_.find(client_id);
        while (it == clients_.end()) {
            map_guard.unlock();
            {
                std::unique_lock<std::shared_mutex> insert_guard(map_mutex_);
                auto& slot = clients_[client_id];
                if (!slot) slot = std::make_unique<ClientState>();
            }
            map_guard.lock();
            it = clients_.find(client_id);
        }
        ClientState& st = *it->second;
        std::lock_guard<std::mutex> guard(st.m);

        const std::int64_t now = clock_();
        if (st.blocked_until_ms > now) {
            const double retry = static_cast<double>(st.blocked_until_ms - now) / 1000.0;
            throw ClientBlocked("client " + client_id + " is blocked", retry);
        }

        Fingerprint fp;
        if (cfg_.defense_noise_snr_db && clip.rms() > 0.0) {
            const std::uint64_t seed =
                detail::mix64(detail::fnv1a(client_id) ^ (st.noise_counter * 0x9e3779b97f4a7c15ull));
            ++st.noise_counter;
            fp = extract(add_noise_snr(clip, *cfg_.defense_noise_snr_db, seed), cfg_.fingerprint);
        } else {
            fp = extract(clip, cfg_.fingerprint);
        }

        Verdict v;
        v.client_id = client_id;
        v.sequence_no = st.next_seq++;
        v.timestamp_ms = now;
        if (!st.memory.empty()) {
            std::vector<Fingerprint> mem(st.memory.begin(), st.memory.end());
            v.breakdown = memory_similarity(fp, mem);
            v.flagged = v.breakdown->aggregate > delta_.load();
        }

        // flagged queries stay in memory: an attacker must not be able to
        // flush its own history by tripping the detector
        st.memory.push_back(std::move(fp));
        while (st.memory.size() > static_cast<std::size_t>(cfg_.memory_depth))
            st.memory.pop_front();

        if (v.flagged) {
            switch (cfg_.policy) {
                case ActionPolicy::warn:
                    v.action = Action::warned;
                    break;
                case ActionPolicy::block:
                    v.action = Action::blocked;
                    st.blocked_until_ms =
                        now + static_cast<std::int64_t>(cfg_.block_duration_seconds * 1000.0);
                    break;
                case ActionPolicy::log:
                    break;
            }
        }
        return v;
    }

    // Clears memory and block status; unknown clients are a no-op.
    void reset(const std::string& client_id) {
        std::unique_lock<std::shared_mutex> guard(map_mutex_);
        clients_.erase(client_id);
    }

    struct ClientInfo {
        std::uint64_t queries_seen = 0;
        std::size_t memory_size = 0;
        bool blocked = false;
        double retry_after_seconds = 0.0;
    };

    std::optional<ClientInfo> client_info(const std::string& client_id) const {
        std::shared_lock<std::shared_mutex> map_guard(map_mutex_);
        auto it = clients_.find(client_id);
        if (it == clients_.end()) return std::nullopt;
        std::lock_guard<std::mutex> guard(it->second->m);
        ClientInfo info;
        info.queries_seen = it->second->next_seq - 1;
        info.memory_size = it->second->memory.size();
        const std::int64_t now = clock_();
        info.blocked = it->second->blocked_until_ms > now;
        if (info.blocked)
            info.retry_after_seconds =
                static_cast<double>(it->second->blocked_until_ms - now) / 1000.0;
        return info;
    }

    // Snapshot format: "QWST", version byte, u32 client count, then one
    // length-prefixed record per client (sorted by id for stable bytes).
    std::vector<std::uint8_t> snapshot() const {
        std::unique_lock<std::shared_mutex> guard(map_mutex_);
        std::map<std::string, const ClientState*> ordered;
        for (const auto& [id, st] : clients_) ordered.emplace(id, st.get());

        std::vector<std::uint8_t> out;
        out.insert(out.end(), {'Q', 'W', 'S', 'T'});
        out.push_back(kSnapshotVersion);
        detail::put_u32le(out, static_cast<std::uint32_t>(ordered.size()));
        for (const auto& [id, st] : ordered) {
            std::vector<std::uint8_t> rec;
            detail::put_u32le(rec, static_cast<std::uint32_t>(id.size()));
            rec.insert(rec.end(), id.begin(), id.end());
            put_u64le(rec, st->next_seq);
            put_u64le(rec, st->noise_counter);
            put_u64le(rec, static_cast<std::uint64_t>(st->blocked_until_ms));
            detail::put_u32le(rec, static_cast<std::uint32_t>(st->memory.size()));
            for (const auto& fp : st->memory) {
                auto blob = fingerprint_to_bytes(fp);
                rec.insert(rec.end(), blob.begin(), blob.end());
            }
            detail::put_u32le(out, static_cast<std::uint32_t>(rec.size()));
            out.insert(out.end(), rec.begin(), rec.end());
        }
        return out;
    }

    void restore(const std::vector<std::uint8_t>& bytes) {
        if (bytes.size() < 9 || std::memcmp(bytes.data(), "QWST", 4) != 0)
            throw CorruptSnapshot("bad snapshot magic");
        if (bytes[4] != kSnapshotVersion)
            throw VersionMismatch("snapshot version " + std::to_string(bytes[4]) +
                                  " not supported");
        const std::uint32_t count = detail::read_u32le(bytes.data() + 5);
        std::size_t pos = 9;

        std::unordered_map<std::string, std::unique_ptr<ClientState>> fresh;
        for (std::uint32_t c = 0; c < count; ++c) {
            if (pos + 4 > bytes.size()) throw CorruptSnapshot("truncated client record");
            const std::uint32_t rec_len = detail::read_u32le(bytes.data() + pos);
            pos += 4;
            if (pos + rec_len > bytes.size()) throw CorruptSnapshot("truncated client record");
            const std::uint8_t* rec = bytes.data() + pos;
            std::size_t off = 0;
            auto need = [&](std::size_t n) {
                if (off + n > rec_len) throw CorruptSnapshot("truncated client fields");
            };
            need(4);
            const std::uint32_t id_len = detail::read_u32le(rec + off);
            off += 4;
            need(id_len);
            std::string id(reinterpret_cast<const char*>(rec + off), id_len);
            off += id_len;
            auto st = std::make_unique<ClientState>();
            need(8 * 3 + 4);
            st->next_seq = read_u64le(rec + off);
            off += 8;
            st->noise_counter = read_u64le(rec + off);
            off += 8;
            st->blocked_until_ms = static_cast<std::int64_t>(read_u64le(rec + off));
            off += 8;
            const std::uint32_t mem_count = detail::read_u32le(rec + off);
            off += 4;
            for (std::uint32_t i = 0; i < mem_count; ++i) {
                std::size_t used = 0;
                Fingerprint fp;
                try {
                    fp = fingerprint_from_bytes(rec + off, rec_len - off, &used);
                } catch (const CorruptFingerprint& e) {
                    throw CorruptSnapshot(e.what());
                }
                off += used;
                st->memory.push_back(std::move(fp));
            }
            fresh.emplace(std::move(id), std::move(st));
            pos += rec_len;
        }

        std::unique_lock<std::shared_mutex> guard(map_mutex_);
        clients_ = std::move(fresh);
    }

  private:
    static constexpr std::uint8_t kSnapshotVersion = 1;

    struct ClientState {
        std::deque<Fingerprint> memory;
        std::uint64_t next_seq = 1;
        std::uint64_t noise_counter = 0;
        std::int64_t blocked_until_ms = 0;
        mutable std::mutex m;
    };

    static void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }

    static std::uint64_t read_u64le(const std::uint8_t* p) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }

    DetectorConfig cfg_;
    std::atomic<double> delta_;
    Clock clock_;
    mutable std::shared_mutex map_mutex_;
    std::unordered_map<std::string, std::unique_ptr<ClientState>> clients_;
};

}  // namespace qw

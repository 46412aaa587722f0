#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "querywatch/audio.hpp"
#include "querywatch/detector.hpp"
#include "querywatch/errors.hpp"

namespace qw {

namespace detail {

inline const char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::vector<std::uint8_t>& in) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= in.size()) {
        const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back(kB64Chars[v & 63]);
        i += 3;
    }
    if (i + 1 == in.size()) {
        const std::uint32_t v = in[i] << 16;
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == in.size()) {
        const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8);
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& in) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<std::uint8_t> out;
    out.reserve(in.size() / 4 * 3);
    std::uint32_t buf = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = val(c);
        if (v < 0) throw Error("invalid base64 input");
        buf = (buf << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace detail

enum class ClientIdSource { header, api_key };

struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    DetectorConfig detector;
    std::optional<std::string> upstream;  // "host:port" of an ASR backend
    std::size_t max_request_bytes = 2 * 1024 * 1024;
    ClientIdSource client_id_source = ClientIdSource::header;

    void validate() const {
        // must at least fit one 10 s PCM16 clip plus the WAV header
        constexpr std::size_t kMinBody = 10u * 16000u * 2u + 44u;
        if (max_request_bytes < kMinBody)
            throw Error("gateway config: max_request_bytes below one 10 s clip");
        detector.validate();
    }
};

// HTTP face of the detector: one verdict per uploaded query, admin control
// over threshold and state.
class Gateway {
  public:
    explicit Gateway(GatewayConfig cfg, Detector::Clock clock = &Detector::system_now_ms)
        : cfg_(std::move(cfg)), detector_(cfg_.detector, std::move(clock)) {
        cfg_.validate();
        server_.set_payload_max_length(cfg_.max_request_bytes);
        setup_routes();
    }

    Detector& detector() { return detector_; }
    httplib::Server& server() { return server_; }

    // Blocks until stop(); returns false if binding failed.
    bool run() { return server_.listen(cfg_.host, cfg_.port); }

    int bind_any_port() {
        const int port = server_.bind_to_any_port(cfg_.host);
        return port;
    }

    bool listen_bound() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }

  private:
    static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    std::optional<std::string> client_id(const httplib::Request& req) const {
        const char* header =
            cfg_.client_id_source == ClientIdSource::api_key ? "X-Api-Key" : "X-Client-Id";
        if (!req.has_header(header)) return std::nullopt;
        auto v = req.get_header_value(header);
        if (v.empty()) return std::nullopt;
        return v;
    }

    void setup_routes() {
        server_.Post("/v1/query", [this](const httplib::Request& req, httplib::Response& res) {
            handle_query(req, res);
        });

        server_.Get(R"(/v1/clients/([^/]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        const std::string id = req.matches[1];
                        auto info = detector_.client_info(id);
                        if (!info) {
                            send_json(res, 404, {{"error", "unknown_client"}});
                            return;
                        }
                        send_json(res, 200,
                                  {{"client_id", id},
                                   {"queries_seen", info->queries_seen},
                                   {"memory_size", info->memory_size},
                                   {"blocked", info->blocked},
                                   {"retry_after_seconds", info->retry_after_seconds}});
                    });

        server_.Post(R"(/v1/clients/([^/]+)/reset)",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         detector_.reset(req.matches[1]);
                         send_json(res, 200, {{"reset", true}});
                     });

        server_.Get("/v1/admin/threshold",
                    [this](const httplib::Request&, httplib::Response& res) {
                        send_json(res, 200, {{"delta", detector_.delta()}});
                    });

        server_.Put("/v1/admin/threshold",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        try {
                            auto j = nlohmann::json::parse(req.body);
                            const double d = j.at("delta").get<double>();
                            detector_.set_delta(d);
                            send_json(res, 200, {{"delta", detector_.delta()}});
                        } catch (const std::exception& e) {
                            send_json(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
                        }
                    });

        server_.Post("/v1/admin/snapshot",
                     [this](const httplib::Request&, httplib::Response& res) {
                         send_json(res, 200,
                                   {{"snapshot_b64", detail::base64_encode(detector_.snapshot())}});
                     });

        server_.Post("/v1/admin/restore",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         std::unique_lock<std::mutex> lock(restore_mutex_, std::try_to_lock);
                         if (!lock.owns_lock()) {
                             send_json(res, 409, {{"error", "restore_in_progress"}});
                             return;
                         }
                         try {
                             auto j = nlohmann::json::parse(req.body);
                             auto bytes =
                                 detail::base64_decode(j.at("snapshot_b64").get<std::string>());
                             detector_.restore(bytes);
                             send_json(res, 200, {{"restored", true}});
                         } catch (const std::exception& e) {
                             send_json(res, 400, {{"error", "bad_snapshot"}, {"detail", e.what()}});
                         }
                     });
    }

    void handle_query(const httplib::Request& req, httplib::Response& res) {
        if (req.body.size() > cfg_.max_request_bytes) {
            send_json(res, 413, {{"error", "payload_too_large"}});
            return;
        }
        auto id = client_id(req);
        if (!id) {
            send_json(res, 400, {{"error", "missing_client_id"}});
            return;
        }

        std::vector<std::uint8_t> wav_bytes;
        const auto content_type = req.get_header_value("Content-Type");
        if (content_type.rfind("application/json", 0) == 0) {
            try {
                auto j = nlohmann::json::parse(req.body);
                wav_bytes = detail::base64_decode(j.at("wav_b64").get<std::string>());
            } catch (const std::exception& e) {
                send_json(res, 400, {{"error", "malformed_audio"}, {"detail", e.what()}});
                return;
            }
        } else {
            wav_bytes.assign(req.body.begin(), req.body.end());
        }

        AudioClip clip;
        try {
            clip = decode_wav(wav_bytes, *id);
        } catch (const Error& e) {
            send_json(res, 400, {{"error", "malformed_audio"}, {"detail", e.what()}});
            return;
        }

        Verdict verdict;
        try {
            verdict = detector_.observe(*id, clip);
        } catch (const ClientBlocked& e) {
            res.set_header("Retry-After",
                           std::to_string(static_cast<long>(std::ceil(e.retry_after_seconds))));
            send_json(res, 403,
                      {{"error", "blocked"}, {"retry_after_seconds", e.retry_after_seconds}});
            return;
        } catch (const Error& e) {
            send_json(res, 400, {{"error", "bad_query"}, {"detail", e.what()}});
            return;
        }

        nlohmann::json body{{"client_id", verdict.client_id},
                            {"sequence_no", verdict.sequence_no},
                            {"flagged", verdict.flagged},
                            {"action", to_string(verdict.action)}};
        body["score"] = verdict.score() ? nlohmann::json(*verdict.score()) : nlohmann::json(nullptr);

        if (cfg_.upstream && !verdict.flagged) {
            httplib::Client upstream(*cfg_.upstream);
            upstream.set_connection_timeout(2, 0);
            auto up = upstream.Post("/v1/query", req.body, "audio/wav");
            if (!up) {
                send_json(res, 502, {{"error", "upstream_failure"}});
                return;
            }
            body["upstream"] = {{"status", up->status}, {"body", up->body}};
        }
        send_json(res, 200, body);
    }

    GatewayConfig cfg_;
    Detector detector_;
    httplib::Server server_;
    std::mutex restore_mutex_;
};

}  // namespace qw

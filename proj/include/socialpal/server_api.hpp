// Copyright 2026 The Social PaL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "socialpal/capability_service.hpp"
#include "socialpal/capability_store.hpp"
#include "socialpal/osn_connector.hpp"

namespace socialpal::api {

// Routes:
//   POST /v1/capability        body {"capability": "<hex>"}          -> {"status": "ok"}
//   GET  /v1/capabilities?dmax=N                                      -> distribution body
//   GET  /v1/health                                                   -> {"status": "ok"}
// Authentication: "Authorization: Bearer <token>".
// Distribution body:
//   {"dmax": N, "r_u": [{"id": "<osn id>", "cap": "<hex>"}, ...],
//    "r_h": [[degree, "<hex digest>"], ...]}
// Errors: {"error": "<code>", "detail": "<text>"} with status 400, 401, 403 or 502.

class TransportError : public Error {
 public:
  using Error::Error;
};

struct ApiResponse {
  int status = 200;
  std::string body;
};

inline nlohmann::json distribution_to_json(const DistributionResult& d, unsigned d_max) {
  nlohmann::json j{{"dmax", d_max}};
  auto& ru = j["r_u"] = nlohmann::json::array();
  for (const auto& [id, cap] : d.r_u) ru.push_back({{"id", id}, {"cap", cap.hex()}});
  auto& rh = j["r_h"] = nlohmann::json::array();
  for (const auto& h : d.r_h) rh.push_back({h.degree, to_hex(h.value)});
  return j;
}

inline DistributionResult distribution_from_json(const nlohmann::json& j) {
  DistributionResult d;
  for (const auto& e : j.at("r_u"))
    d.r_u.emplace_back(e.at("id").get<std::string>(), Capability(from_hex(e.at("cap").get<std::string>())));
  for (const auto& e : j.at("r_h"))
    d.r_h.push_back({e.at(0).get<unsigned>(), from_hex(e.at(1).get<std::string>())});
  return d;
}

inline ApiResponse error_response(int status, const std::string& code, const std::string& detail) {
  return {status, nlohmann::json{{"error", code}, {"detail", detail}}.dump()};
}

/// Request handlers, independent of the HTTP transport.
class CapabilityApi {
 public:
  CapabilityApi(std::shared_ptr<CapabilityStore> store, std::shared_ptr<const OsnConnector> connector,
                std::optional<std::filesystem::path> snapshot = std::nullopt)
      : store_(std::move(store)), connector_(std::move(connector)), snapshot_(std::move(snapshot)) {}

  ApiResponse upload(const std::string& authorization, const std::string& body) {
    auto uid = authenticate(authorization);
    if (!uid) return error_response(401, "unauthorized", "missing, unknown or expired token");
    Bytes cap;
    try {
      cap = from_hex(nlohmann::json::parse(body).at("capability").get<std::string>());
    } catch (const std::exception& e) {
      return error_response(400, "malformed_request", e.what());
    }
    try {
      store_->upload_capability(*uid, Capability(std::move(cap)), *connector_);
    } catch (const StoreError& e) {
      if (e.code() == StoreError::Code::kBadCapability) return error_response(400, "bad_capability", e.what());
      return error_response(502, "connector_failure", e.what());
    }
    persist();
    return {200, R"({"status":"ok"})"};
  }

  ApiResponse download(const std::string& authorization, std::optional<std::string> dmax_param) {
    auto uid = authenticate(authorization);
    if (!uid) return error_response(401, "unauthorized", "missing, unknown or expired token");
    unsigned requested = store_->config().d_max;
    if (dmax_param) {
      try {
        requested = static_cast<unsigned>(std::stoul(*dmax_param));
      } catch (const std::exception&) {
        return error_response(400, "malformed_request", "dmax must be a non-negative integer");
      }
    }
    const unsigned d_max = std::min(requested, store_->config().d_max);
    try {
      return {200, distribution_to_json(store_->distribute(*uid, d_max), d_max).dump()};
    } catch (const StoreError& e) {
      return error_response(403, "not_enrolled", e.what());
    }
  }

  ApiResponse health() const { return {200, R"({"status":"ok"})"}; }

  void persist() {
    if (!snapshot_) return;
    std::lock_guard lock(snapshot_mu_);
    store_->save_snapshot(*snapshot_);
  }

  const std::shared_ptr<CapabilityStore>& store() const { return store_; }

 private:
  std::optional<OsnId> authenticate(const std::string& authorization) const {
    static constexpr std::string_view kPrefix = "Bearer ";
    if (!authorization.starts_with(kPrefix)) return std::nullopt;
    return connector_->authenticate(authorization.substr(kPrefix.size()));
  }

  std::shared_ptr<CapabilityStore> store_;
  std::shared_ptr<const OsnConnector> connector_;
  std::optional<std::filesystem::path> snapshot_;
  std::mutex snapshot_mu_;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::size_t threads = 8;
  /// PEM paths; both set selects TLS.
  std::string tls_cert;
  std::string tls_key;
  /// Required to serve without TLS.
  bool insecure_plaintext = false;
};

/// HTTP front end for CapabilityApi. start() binds and serves on a background thread.
class CapabilityServer {
 public:
  CapabilityServer(std::shared_ptr<CapabilityApi> api, ServerConfig config) : api_(std::move(api)), config_(config) {
    const bool tls = !config_.tls_cert.empty() && !config_.tls_key.empty();
    if (tls) {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
      server_ = std::make_unique<httplib::SSLServer>(config_.tls_cert.c_str(), config_.tls_key.c_str());
#else
      throw TransportError("built without TLS support");
#endif
    } else {
      if (!config_.insecure_plaintext) throw TransportError("refusing plaintext HTTP without insecure_plaintext");
      server_ = std::make_unique<httplib::Server>();
    }
    if (!server_->is_valid()) throw TransportError("server setup failed (check TLS certificate and key)");
    const auto threads = std::max<std::size_t>(1, config_.threads);
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    install_routes();
  }

  ~CapabilityServer() { stop(); }

  CapabilityServer(const CapabilityServer&) = delete;
  CapabilityServer& operator=(const CapabilityServer&) = delete;

  /// Binds and starts serving; returns the bound port.
  int start() {
    port_ = config_.port == 0 ? server_->bind_to_any_port(config_.host) : config_.port;
    if (config_.port != 0 && !server_->bind_to_port(config_.host, config_.port)) port_ = -1;
    if (port_ < 0) throw TransportError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called from elsewhere.
  void run() {
    port_ = config_.port;
    if (!server_->bind_to_port(config_.host, config_.port))
      throw TransportError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    server_->listen_after_bind();
  }

  void stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  bool tls() const { return !config_.tls_cert.empty() && !config_.tls_key.empty(); }

 private:
  static void reply(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  }

  void install_routes() {
    server_->Post("/v1/capability", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, api_->upload(req.get_header_value("Authorization"), req.body));
    });
    server_->Get("/v1/capabilities", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> dmax;
      if (req.has_param("dmax")) dmax = req.get_param_value("dmax");
      reply(res, api_->download(req.get_header_value("Authorization"), dmax));
    });
    server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) { reply(res, api_->health()); });
  }

  std::shared_ptr<CapabilityApi> api_;
  ServerConfig config_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

struct ClientOptions {
  std::string ca_cert_path;
  std::chrono::seconds timeout{10};
};

inline std::unique_ptr<httplib::Client> make_http_client(const std::string& base_url, const ClientOptions& opts) {
  auto cli = std::make_unique<httplib::Client>(base_url);
  if (!cli->is_valid()) throw TransportError("invalid server address " + base_url);
  cli->set_connection_timeout(opts.timeout);
  cli->set_read_timeout(opts.timeout);
  cli->set_write_timeout(opts.timeout);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
  if (!opts.ca_cert_path.empty()) cli->set_ca_cert_path(opts.ca_cert_path);
#endif
  return cli;
}

/// CapabilityService over HTTP(S), authenticated with a bearer token.
class HttpCapabilityService : public CapabilityService {
 public:
  HttpCapabilityService(std::string base_url, std::string token, ClientOptions opts = {})
      : base_url_(std::move(base_url)), token_(std::move(token)), opts_(std::move(opts)) {}

  void upload(const Capability& cap) override {
    auto cli = make_http_client(base_url_, opts_);
    auto res = cli->Post("/v1/capability", headers(), nlohmann::json{{"capability", cap.hex()}}.dump(),
                         "application/json");
    check(res, "upload");
  }

  DistributionResult download(unsigned d_max) override {
    auto cli = make_http_client(base_url_, opts_);
    auto res = cli->Get("/v1/capabilities?dmax=" + std::to_string(d_max), headers());
    check(res, "download");
    try {
      return distribution_from_json(nlohmann::json::parse(res->body));
    } catch (const std::exception& e) {
      throw TransportError(std::string("malformed distribution body: ") + e.what());
    }
  }

 private:
  httplib::Headers headers() const { return {{"Authorization", "Bearer " + token_}}; }

  static void check(const httplib::Result& res, const char* what) {
    if (!res) throw TransportError(std::string(what) + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw TransportError(std::string(what) + ": HTTP " + std::to_string(res->status) + " " + res->body);
  }

  std::string base_url_;
  std::string token_;
  ClientOptions opts_;
};

// ---------------------------------------------------------------------------
// Load probe: open-loop request generator against GET /v1/capabilities.

struct LoadProbeConfig {
  std::string base_url;
  std::string token;
  unsigned dmax = 1;
  std::vector<double> rates;  // requests per second, probed in order
  std::chrono::milliseconds duration{1000};
  std::size_t workers = 64;
  std::size_t baseline_samples = 5;
  double knee_factor = 5.0;
  ClientOptions client;
};

struct RateReport {
  double offered_rps = 0;
  std::size_t sent = 0;
  std::size_t received = 0;
  std::size_t failed = 0;
  double achieved_rps = 0;
  double median_ms = 0;
  double p90_ms = 0;
  double max_ms = 0;
  std::vector<std::size_t> per_second;  // completions bucketed by second since the burst start
};

struct LoadReport {
  double baseline_ms = 0;
  std::vector<RateReport> rates;
  /// First offered rate whose median latency exceeds knee_factor x baseline.
  std::optional<double> saturation_rps;

  nlohmann::json to_json() const {
    nlohmann::json j{{"baseline_ms", baseline_ms}};
    j["saturation_rps"] = saturation_rps ? nlohmann::json(*saturation_rps) : nlohmann::json(nullptr);
    auto& arr = j["rates"] = nlohmann::json::array();
    for (const auto& r : rates)
      arr.push_back({{"offered_rps", r.offered_rps},
                     {"sent", r.sent},
                     {"received", r.received},
                     {"failed", r.failed},
                     {"achieved_rps", r.achieved_rps},
                     {"median_ms", r.median_ms},
                     {"p90_ms", r.p90_ms},
                     {"max_ms", r.max_ms},
                     {"per_second", r.per_second}});
    return j;
  }
};

namespace detail {
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1) + 0.5);
  return v[std::min(idx, v.size() - 1)];
}

inline bool fetch_once(const std::string& base_url, const LoadProbeConfig& cfg) {
  try {
    auto cli = make_http_client(base_url, cfg.client);
    auto res = cli->Get("/v1/capabilities?dmax=" + std::to_string(cfg.dmax),
                        httplib::Headers{{"Authorization", "Bearer " + cfg.token}});
    return res && res->status == 200;
  } catch (const std::exception&) {
    return false;
  }
}
}  // namespace detail

/// Sends bursts at each configured rate and measures latency from each
/// request's scheduled send time to its completion.
inline LoadReport load_probe(const LoadProbeConfig& cfg) {
  using SteadyClock = std::chrono::steady_clock;
  using Ms = std::chrono::duration<double, std::milli>;
  LoadReport report;

  std::vector<double> base;
  for (std::size_t i = 0; i < cfg.baseline_samples; ++i) {
    const auto t0 = SteadyClock::now();
    if (detail::fetch_once(cfg.base_url, cfg)) base.push_back(Ms(SteadyClock::now() - t0).count());
  }
  report.baseline_ms = detail::percentile(base, 0.5);

  for (double rate : cfg.rates) {
    RateReport rr;
    rr.offered_rps = rate;
    const auto total = static_cast<std::size_t>(rate * std::chrono::duration<double>(cfg.duration).count() + 0.5);
    rr.sent = total;
    const auto start = SteadyClock::now() + std::chrono::milliseconds(20);

    std::mutex mu;
    std::condition_variable cv;
    std::deque<SteadyClock::time_point> queue;
    bool closed = false;
    std::vector<double> latencies;
    std::vector<double> completions;  // seconds since start
    std::size_t ok = 0, bad = 0;

    auto worker = [&] {
      for (;;) {
        SteadyClock::time_point scheduled;
        {
          std::unique_lock lock(mu);
          cv.wait(lock, [&] { return closed || !queue.empty(); });
          if (queue.empty()) return;
          scheduled = queue.front();
          queue.pop_front();
        }
        const bool success = detail::fetch_once(cfg.base_url, cfg);
        const auto done = SteadyClock::now();
        std::lock_guard lock(mu);
        if (success) {
          ++ok;
          latencies.push_back(Ms(done - scheduled).count());
          completions.push_back(std::chrono::duration<double>(done - start).count());
        } else {
          ++bad;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < std::max<std::size_t>(1, cfg.workers); ++i) pool.emplace_back(worker);

    for (std::size_t k = 0; k < total; ++k) {
      const auto at = start + std::chrono::duration_cast<SteadyClock::duration>(
                                  std::chrono::duration<double>(static_cast<double>(k) / rate));
      std::this_thread::sleep_until(at);
      {
        std::lock_guard lock(mu);
        queue.push_back(at);
      }
      cv.notify_one();
    }
    {
      std::lock_guard lock(mu);
      closed = true;
    }
    cv.notify_all();
    for (auto& t : pool) t.join();

    rr.received = ok;
    rr.failed = bad;
    rr.median_ms = detail::percentile(latencies, 0.5);
    rr.p90_ms = detail::percentile(latencies, 0.9);
    rr.max_ms = latencies.empty() ? 0 : *std::max_element(latencies.begin(), latencies.end());
    double span = std::chrono::duration<double>(cfg.duration).count();
    if (!completions.empty()) span = std::max(span, *std::max_element(completions.begin(), completions.end()));
    rr.achieved_rps = span > 0 ? static_cast<double>(ok) / span : 0;
    for (double c : completions) {
      const auto bucket = static_cast<std::size_t>(std::max(0.0, c));
      if (rr.per_second.size() <= bucket) rr.per_second.resize(bucket + 1, 0);
      ++rr.per_second[bucket];
    }
    if (!report.saturation_rps && rr.median_ms > cfg.knee_factor * report.baseline_ms) report.saturation_rps = rate;
    report.rates.push_back(std::move(rr));
  }
  return report;
}

}  // namespace socialpal::api

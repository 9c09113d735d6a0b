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

// socialpal: operator entry points.
//
//   socialpal serve     --graph G [--snapshot S] (--tls-cert C --tls-key K | --insecure-plaintext)
//   socialpal enroll    --members M (--addr URL | --graph G --snapshot S) [--out caps.json]
//   socialpal discover  --a A --b B (--graph G [--members M] | --addr URL)
//   socialpal simulate  (--graph G | --generator NAME --nodes N) [--out coverage.csv]
//   socialpal loadprobe --addr URL --token T --rates 5,10,20 [--out report.json]
//
// Exit codes: 0 ok, 1 runtime failure, 2 missing input file, 3 server
// unreachable, 4 malformed configuration.

#include <signal.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "socialpal.hpp"

namespace {

using namespace socialpal;

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitMissingFile = 2, kExitUnreachable = 3, kExitBadConfig = 4 };

struct CliExit : std::runtime_error {
  CliExit(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

struct CliConfig {
  std::string graph;
  std::string members;
  std::string snapshot;
  std::string addr;
  std::string out;
  std::string ca_cert;
  std::string tls_cert;
  std::string tls_key;
  std::string port_file;
  std::string token;
  std::string a, b;
  std::string generator = "forest-fire";
  std::size_t nodes = 500;
  double gen_param = 0.35;
  unsigned dmax = 1;
  double ttl_hours = 48;
  double fp_target = 0.001;
  std::uint64_t seed = 1;
  bool insecure_plaintext = false;
  bool no_ersatz = false;
  std::size_t threads = 8;
  std::vector<double> fractions{0.2, 0.4, 0.6, 0.8};
  std::vector<int> lengths{2, 3, 4};
  std::size_t pairs = 1000;
  std::size_t reps = 10;
  std::size_t min_pairs = 1;
  std::string ersatz_modes = "both";
  std::vector<double> rates{5, 10, 20, 40, 80};
  std::size_t duration_ms = 2000;
  std::size_t workers = 64;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) return;
  if (!std::filesystem::is_regular_file(path)) throw CliExit(kExitMissingFile, std::string(what) + " not found: " + path);
}

Graph read_graph(const std::string& path) {
  require_file(path, "graph file");
  try {
    return load_edge_list_file(path);
  } catch (const GraphError& e) {
    throw CliExit(kExitBadConfig, e.what());
  }
}

std::vector<OsnId> read_members(const std::string& path) {
  require_file(path, "membership file");
  return load_membership_file(path);
}

StoreConfig store_config(const CliConfig& c) {
  if (!(c.ttl_hours > 0)) throw CliExit(kExitBadConfig, "--ttl-hours must be positive");
  StoreConfig s;
  s.d_max = c.dmax;
  s.ttl = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::ratio<3600>>(c.ttl_hours));
  s.ersatz_enabled = !c.no_ersatz;
  return s;
}

psi::PsiConfig psi_config(const CliConfig& c) {
  if (!(c.fp_target > 0 && c.fp_target < 1)) throw CliExit(kExitBadConfig, "--fp-target must lie in (0, 1)");
  psi::PsiConfig p;
  p.fp_target = c.fp_target;
  return p;
}

std::string base_url(const CliConfig& c) {
  if (c.addr.empty()) throw CliExit(kExitBadConfig, "--addr is required");
  if (c.addr.starts_with("http://") || c.addr.starts_with("https://")) return c.addr;
  return (c.ca_cert.empty() ? "http://" : "https://") + c.addr;
}

api::ClientOptions client_options(const CliConfig& c) {
  require_file(c.ca_cert, "CA certificate");
  api::ClientOptions o;
  o.ca_cert_path = c.ca_cert;
  return o;
}

void check_reachable(const std::string& url, const api::ClientOptions& opts) {
  httplib::Result res;
  try {
    res = api::make_http_client(url, opts)->Get("/v1/health");
  } catch (const api::TransportError& e) {
    throw CliExit(kExitBadConfig, e.what());
  }
  if (!res || res->status != 200)
    throw CliExit(kExitUnreachable, "server unreachable at " + url + (res ? "" : ": " + httplib::to_string(res.error())));
}

std::pair<std::string, int> split_host_port(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw CliExit(kExitBadConfig, "--addr must be host:port");
  try {
    std::size_t used = 0;
    const int port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("port");
    return {addr.substr(0, colon), port};
  } catch (const std::exception&) {
    throw CliExit(kExitBadConfig, "bad port in --addr " + addr);
  }
}

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw CliExit(kExitFailure, "cannot write " + path);
  return file;
}

void print_result(const std::optional<DistResult>& r) {
  if (!r) {
    std::cout << "Dist=failed\n";
    return;
  }
  std::cout << "Dist=" << (r->dist ? std::to_string(*r->dist) : std::string("none")) << '\n';
  std::cout << "common_friends=";
  bool first = true;
  for (const auto& id : r->common_friend_ids) {
    std::cout << (first ? "" : ",") << id;
    first = false;
  }
  std::cout << "\nmatches=" << r->match_count << '\n';
}

int cmd_serve(const CliConfig& c) {
  auto graph = read_graph(c.graph);
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto store = std::make_shared<CapabilityStore>(store_config(c));
  std::optional<std::filesystem::path> snap;
  if (!c.snapshot.empty()) {
    snap = c.snapshot;
    if (std::filesystem::exists(*snap)) {
      try {
        store->load_snapshot(*snap);
      } catch (const StoreError& e) {
        throw CliExit(kExitBadConfig, e.what());
      }
    }
  }
  auto connector = std::make_shared<MockOsnConnector>(std::move(graph));
  auto handlers = std::make_shared<api::CapabilityApi>(store, connector, snap);

  api::ServerConfig sc;
  std::tie(sc.host, sc.port) = split_host_port(c.addr.empty() ? "127.0.0.1:8443" : c.addr);
  sc.threads = c.threads;
  sc.tls_cert = c.tls_cert;
  sc.tls_key = c.tls_key;
  sc.insecure_plaintext = c.insecure_plaintext;
  if (sc.tls_cert.empty() != sc.tls_key.empty()) throw CliExit(kExitBadConfig, "--tls-cert and --tls-key go together");
  require_file(sc.tls_cert, "TLS certificate");
  require_file(sc.tls_key, "TLS key");
  std::unique_ptr<api::CapabilityServer> server;
  try {
    server = std::make_unique<api::CapabilityServer>(handlers, sc);
  } catch (const api::TransportError& e) {
    throw CliExit(kExitBadConfig, e.what());
  }
  const int port = server->start();
  if (!c.port_file.empty()) std::ofstream(c.port_file) << port << '\n';
  std::cerr << "serving on " << (server->tls() ? "https://" : "http://") << sc.host << ':' << port << '\n';

  std::atomic<bool> stopping{false};
  std::thread expiry([&] {
    while (!stopping) {
      for (int i = 0; i < 600 && !stopping; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      if (!stopping && store->expire_and_refresh() > 0) handlers->persist();
    }
  });
  int sig = 0;
  sigwait(&signals, &sig);
  stopping = true;
  server->stop();
  expiry.join();
  handlers->persist();
  std::cerr << "stopped\n";
  return kExitOk;
}

int cmd_enroll(const CliConfig& c) {
  const auto members = read_members(c.members);
  nlohmann::json caps = nlohmann::json::object();
  if (!c.addr.empty()) {
    const auto url = base_url(c);
    const auto opts = client_options(c);
    if (!members.empty()) check_reachable(url, opts);
    for (const auto& uid : members) {
      auto cap = Capability::random();
      api::HttpCapabilityService(url, "mock:" + uid, opts).upload(cap);
      caps[uid] = cap.hex();
    }
  } else {
    if (c.snapshot.empty()) throw CliExit(kExitBadConfig, "enroll needs --addr or --graph with --snapshot");
    if (members.empty()) return kExitOk;
    auto connector = MockOsnConnector(read_graph(c.graph));
    CapabilityStore store(store_config(c));
    if (std::filesystem::exists(c.snapshot)) store.load_snapshot(c.snapshot);
    for (const auto& uid : members) {
      auto cap = Capability::random();
      store.upload_capability(uid, cap, connector);
      caps[uid] = cap.hex();
    }
    store.save_snapshot(c.snapshot);
  }
  if (!c.out.empty()) {
    std::ofstream f;
    output(c.out, f) << caps.dump(2) << '\n';
  }
  std::cerr << "enrolled " << members.size() << " user(s)\n";
  return kExitOk;
}

int cmd_discover(const CliConfig& c) {
  if (c.a.empty() || c.b.empty() || c.a == c.b) throw CliExit(kExitBadConfig, "--a and --b must name two distinct users");
  ClientConfig cc;
  cc.d_max = c.dmax;
  cc.psi = psi_config(c);
  std::shared_ptr<CapabilityService> svc_a, svc_b;
  if (!c.addr.empty()) {
    const auto url = base_url(c);
    const auto opts = client_options(c);
    check_reachable(url, opts);
    svc_a = std::make_shared<api::HttpCapabilityService>(url, "mock:" + c.a, opts);
    svc_b = std::make_shared<api::HttpCapabilityService>(url, "mock:" + c.b, opts);
  } else {
    auto graph = read_graph(c.graph);
    auto members = c.members.empty() ? std::vector<OsnId>{} : read_members(c.members);
    for (const auto& id : {c.a, c.b})
      if (!graph.find(id)) throw CliExit(kExitBadConfig, "user " + id + " is not in the graph");
    auto connector = std::make_shared<MockOsnConnector>(std::move(graph));
    auto store = std::make_shared<CapabilityStore>(store_config(c));
    for (const auto& uid : members)
      if (uid != c.a && uid != c.b) store->upload_capability(uid, Capability::random(), *connector);
    svc_a = std::make_shared<LocalCapabilityService>(store, connector, c.a);
    svc_b = std::make_shared<LocalCapabilityService>(store, connector, c.b);
  }
  SocialPalClient a(c.a, svc_a, cc);
  SocialPalClient b(c.b, svc_b, cc);
  a.renewCapability();
  b.renewCapability();
  a.updateCapabilities();
  b.updateCapabilities();

  auto [listener, port] = listen_loopback(0);
  std::optional<DistResult> rb;
  std::string b_error;
  std::thread responder([&] {
    try {
      SocketTransport t(accept_one(listener));
      rb = run_discovery(b, "initiator", t, false);
    } catch (const std::exception& e) {
      b_error = e.what();
    }
  });
  std::optional<DistResult> ra;
  std::string a_error;
  try {
    SocketTransport t(connect_loopback(port));
    ra = run_discovery(a, "responder", t, true);
  } catch (const std::exception& e) {
    a_error = e.what();
  }
  responder.join();
  if (!ra) throw CliExit(kExitFailure, "discovery failed: " + a_error);
  print_result(ra);
  if (!rb || rb->dist != ra->dist) std::cerr << "warning: peer result differs " << b_error << '\n';
  return kExitOk;
}

int cmd_simulate(const CliConfig& c) {
  sim::Rng rng(c.seed);
  Graph g;
  if (!c.graph.empty()) {
    g = read_graph(c.graph);
  } else if (c.generator == "forest-fire") {
    g = sim::forest_fire(c.nodes, c.gen_param, rng);
  } else if (c.generator == "pref-attach") {
    g = sim::preferential_attachment(c.nodes, static_cast<std::size_t>(c.gen_param), rng);
  } else if (c.generator == "erdos-renyi") {
    g = sim::erdos_renyi(c.nodes, c.gen_param, rng);
  } else {
    throw CliExit(kExitBadConfig, "unknown generator " + c.generator);
  }
  sim::SimConfig sc;
  sc.fractions = c.fractions;
  sc.lengths = c.lengths;
  sc.pairs_per_cell = c.pairs;
  sc.repetitions = c.reps;
  sc.d_max = c.dmax;
  sc.seed = c.seed;
  sc.min_pairs = c.min_pairs;
  sc.threads = c.threads;
  if (c.ersatz_modes == "on") {
    sc.ersatz_modes = {true};
  } else if (c.ersatz_modes == "off") {
    sc.ersatz_modes = {false};
  } else if (c.ersatz_modes != "both") {
    throw CliExit(kExitBadConfig, "--ersatz must be on, off or both");
  }
  sim::CoverageReport report;
  try {
    report = sim::run_coverage(g, sc);
  } catch (const Error& e) {
    throw CliExit(kExitBadConfig, e.what());
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::ofstream f;
  report.write_csv(output(c.out, f));
  return kExitOk;
}

int cmd_loadprobe(const CliConfig& c) {
  if (c.rates.empty()) throw CliExit(kExitBadConfig, "--rates must not be empty");
  for (double r : c.rates)
    if (!(r > 0)) throw CliExit(kExitBadConfig, "rates must be positive");
  api::LoadProbeConfig lc;
  lc.base_url = base_url(c);
  lc.client = client_options(c);
  check_reachable(lc.base_url, lc.client);
  lc.token = c.token;
  lc.dmax = c.dmax;
  lc.rates = c.rates;
  lc.duration = std::chrono::milliseconds(c.duration_ms);
  lc.workers = c.workers;
  auto report = api::load_probe(lc);
  std::ofstream f;
  output(c.out, f) << report.to_json().dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CliConfig c;
  CLI::App app{"Social PaL: private social path discovery"};
  app.require_subcommand(1);

  auto add_store_flags = [&c](CLI::App* s) {
    s->add_option("--dmax", c.dmax, "maximum capability degree")->capture_default_str();
    s->add_option("--ttl-hours", c.ttl_hours, "capability lifetime in hours")->capture_default_str();
    s->add_flag("--no-ersatz", c.no_ersatz, "do not create ersatz nodes");
  };

  auto* serve = app.add_subcommand("serve", "run the capability server");
  serve->add_option("--graph", c.graph, "OSN edge list backing the mock connector")->required();
  serve->add_option("--addr", c.addr, "host:port to bind (port 0 picks one)")->capture_default_str();
  serve->add_option("--snapshot", c.snapshot, "store snapshot path");
  serve->add_option("--tls-cert", c.tls_cert, "PEM certificate");
  serve->add_option("--tls-key", c.tls_key, "PEM private key");
  serve->add_flag("--insecure-plaintext", c.insecure_plaintext, "serve plain HTTP (testing only)");
  serve->add_option("--threads", c.threads, "worker threads")->capture_default_str();
  serve->add_option("--port-file", c.port_file, "write the bound port here");
  add_store_flags(serve);

  auto* enroll = app.add_subcommand("enroll", "upload fresh capabilities for listed users");
  enroll->add_option("--members", c.members, "membership file, one id per line")->required();
  enroll->add_option("--addr", c.addr, "server URL or host:port");
  enroll->add_option("--graph", c.graph, "edge list (offline mode)");
  enroll->add_option("--snapshot", c.snapshot, "store snapshot to update (offline mode)");
  enroll->add_option("--ca-cert", c.ca_cert, "trusted CA certificate for https");
  enroll->add_option("--out", c.out, "write issued capabilities as JSON");
  add_store_flags(enroll);

  auto* discover = app.add_subcommand("discover", "run a two-client discovery over a local socket");
  discover->add_option("--a", c.a, "initiating user")->required();
  discover->add_option("--b", c.b, "responding user")->required();
  discover->add_option("--graph", c.graph, "edge list for an in-process server");
  discover->add_option("--members", c.members, "other enrolled users (in-process server)");
  discover->add_option("--addr", c.addr, "use a running server instead");
  discover->add_option("--ca-cert", c.ca_cert, "trusted CA certificate for https");
  discover->add_option("--fp-target", c.fp_target, "Bloom filter false positive target")->capture_default_str();
  discover->add_option("--seed", c.seed, "unused; accepted for uniformity");
  add_store_flags(discover);

  auto* simulate = app.add_subcommand("simulate", "coverage simulation");
  simulate->add_option("--graph", c.graph, "edge list (otherwise a generated graph)");
  simulate->add_option("--generator", c.generator, "forest-fire | pref-attach | erdos-renyi")->capture_default_str();
  simulate->add_option("--nodes", c.nodes, "generated graph size")->capture_default_str();
  simulate->add_option("--gen-param", c.gen_param, "forward-burn p, edges per node, or edge probability")
      ->capture_default_str();
  simulate->add_option("--fractions", c.fractions, "member fractions")->delimiter(',')->capture_default_str();
  simulate->add_option("--lengths", c.lengths, "path lengths")->delimiter(',')->capture_default_str();
  simulate->add_option("--pairs", c.pairs, "pairs per cell")->capture_default_str();
  simulate->add_option("--reps", c.reps, "repetitions")->capture_default_str();
  simulate->add_option("--min-pairs", c.min_pairs, "skip cells with fewer qualifying pairs")->capture_default_str();
  simulate->add_option("--dmax", c.dmax, "maximum capability degree")->capture_default_str();
  simulate->add_option("--ersatz", c.ersatz_modes, "on | off | both")->capture_default_str();
  simulate->add_option("--seed", c.seed, "master seed")->capture_default_str();
  simulate->add_option("--threads", c.threads, "worker threads")->capture_default_str();
  simulate->add_option("--out", c.out, "CSV output (default stdout)");

  auto* probe = app.add_subcommand("loadprobe", "measure download latency and throughput");
  probe->add_option("--addr", c.addr, "server URL or host:port")->required();
  probe->add_option("--token", c.token, "bearer token of an enrolled user")->required();
  probe->add_option("--ca-cert", c.ca_cert, "trusted CA certificate for https");
  probe->add_option("--dmax", c.dmax, "requested degree")->capture_default_str();
  probe->add_option("--rates", c.rates, "offered request rates")->delimiter(',')->capture_default_str();
  probe->add_option("--duration-ms", c.duration_ms, "burst length per rate")->capture_default_str();
  probe->add_option("--workers", c.workers, "concurrent requesters")->capture_default_str();
  probe->add_option("--out", c.out, "JSON report (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }

  try {
    if (*serve) return cmd_serve(c);
    if (*enroll) return cmd_enroll(c);
    if (*discover) return cmd_discover(c);
    if (*simulate) return cmd_simulate(c);
    if (*probe) return cmd_loadprobe(c);
  } catch (const CliExit& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const api::TransportError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnreachable;
  } catch (const StoreError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == StoreError::Code::kSnapshot ? kExitBadConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

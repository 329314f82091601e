// rsc: train, evaluate, simulate and plot rateless semantic codecs.
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsc/config.hpp"
#include "rsc/error.hpp"
#include "rsc/pipeline.hpp"
#include "rsc/selftest.hpp"
#include "rsc/session.hpp"
#include "rsc/training.hpp"

namespace fs = std::filesystem;
using namespace rsc;

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, bool seed_required) {
  app->add_option("--config", c.config, "key = value configuration file");
  app->add_option("--set", c.sets, "override, key=value (repeatable)");
  auto* seed = app->add_option("--seed", c.seed, "64-bit seed");
  if (seed_required) seed->required();
}

// defaults < file < RSC_* environment < --set < --seed
KvConfig layered(const Common& c) {
  KvConfig kv = c.config.empty() ? KvConfig{} : KvConfig::load_file(c.config);
  kv.apply_env();
  for (const auto& s : c.sets) kv.set_assignment(s);
  if (c.seed) kv.set("train.seed", std::to_string(*c.seed));
  return kv;
}

void manifest(const std::vector<fs::path>& files) {
  std::cout << "manifest:\n";
  for (const auto& f : files) std::cout << "  " << f.string() << '\n';
}

int cmd_train(const Common& c, const std::string& out, const std::string& log,
              const std::string& resume, bool verbose) {
  const KvConfig kv = layered(c);
  const Dataset data = load_dataset(kv, Split::kTrain);
  const TrainConfig cfg = TrainConfig::from_kv(kv, data.dim());
  const fs::path ckpt = out.empty() ? fs::path("runs") / (to_string(cfg.scheme) + "-seed" +
                                                          std::to_string(cfg.seed) + ".ckpt")
                                    : fs::path(out);
  FitOptions opts;
  opts.checkpoint = ckpt;
  opts.log = log.empty() ? fs::path(ckpt).replace_extension(".jsonl") : fs::path(log);
  if (!resume.empty()) opts.resume = resume;
  opts.verbose = verbose;
  if (resume.empty()) fs::remove(opts.log);
  TrainState state(cfg);
  const TrainReport report = fit(cfg, data, state, opts);
  for (const auto& e : report.epochs) {
    std::cout << "epoch " << e.epoch << " loss " << e.total << " distortion " << e.distortion
              << " perception " << e.perception << '\n';
  }
  manifest({opts.checkpoint, opts.log});
  return 0;
}

int cmd_eval(const Common& c, const std::vector<std::string>& models, const std::string& out,
             bool proxy) {
  const KvConfig kv = layered(c);
  const Dataset data = load_dataset(kv, Split::kTest);
  std::vector<LoadedModel> loaded;
  loaded.reserve(models.size());
  for (const auto& m : models) loaded.push_back(load_model(m));
  std::vector<const LoadedModel*> ptrs;
  for (const auto& m : loaded) ptrs.push_back(&m);
  SweepConfig sc = SweepConfig::from_kv(kv, *c.seed);
  sc.eval.proxy = proxy;
  std::optional<GaussianSourceSpec> oracle;
  if (data.kind == SourceKind::kGaussian) {
    oracle = gaussian_spec(kv);
    sc.eval.oracle = &*oracle;
  }
  const auto points = sweep(sc, ptrs, data);
  write_text(out, to_csv(points, proxy));
  if (proxy) std::cerr << "warning: --proxy-eval replaces quantization with additive noise\n";
  if (oracle) {
    for (const auto& p : points) {
      std::cout << to_string(p.scheme) << " k=" << p.rate_k << " w2=" << *p.w2 << '\n';
    }
  }
  manifest({out});
  return 0;
}

SessionPolicy parse_policy(const std::string& text, std::size_t K, std::size_t chunk) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw ConfigError("empty --policy");
  if (parts[0] == "exhaust") return SessionPolicy::exhaust(K, chunk);
  if (parts[0] == "fixed" && parts.size() == 2) {
    return SessionPolicy::fixed(std::stoul(parts[1]), K, chunk);
  }
  if (parts[0] == "target" && (parts.size() == 2 || parts.size() == 3)) {
    const AckProxy proxy =
        parts.size() == 3 && parts[2] == "oracle" ? AckProxy::kOracleMse : AckProxy::kCritic;
    return SessionPolicy::target(std::stod(parts[1]), proxy, K, chunk);
  }
  throw ConfigError("--policy must be exhaust | fixed:<k> | target:<tau>[:critic|oracle]");
}

int cmd_simulate(const Common& c, const std::string& model, const std::string& policy,
                 std::size_t chunk, std::size_t sessions, const std::string& out) {
  const KvConfig kv = layered(c);
  const LoadedModel m = load_model(model);
  const Dataset data = load_dataset(kv, Split::kTest);
  const ChannelConfig channel = parse_channel(kv.get("channel.snr_db"));
  const SessionPolicy pol = parse_policy(policy, m.config.codec.latent_dim, chunk);
  const SessionModels models{&m.state.codec, &m.state.critic, m.config.scheme == Scheme::kRsc};
  const std::uint64_t seed = c.seed.value_or(0);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  std::ofstream os(out);
  if (!os) throw IoError("cannot write " + out);
  double mean_k = 0;
  std::size_t unsatisfied = 0;
  const std::size_t n = std::min(sessions, data.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor w = data.gather({i});
    const SessionTrace t =
        run_session(w, models, m.config.quantizer(), channel, pol, CommonRandomness{seed, i});
    write_trace_jsonl(t, os);
    mean_k += static_cast<double>(t.k_ack) / static_cast<double>(n);
    unsatisfied += t.unsatisfied;
  }
  std::cout << n << " sessions, mean k_ack " << mean_k << ", unsatisfied " << unsatisfied << '\n';
  manifest({out});
  return 0;
}

int cmd_plot(const std::string& csv, const std::string& dir) {
  manifest(write_plots(parse_csv(read_text(csv)), dir));
  return 0;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& r : run_selftest()) {
    std::cout << format_result(r) << std::endl;
    ok = ok && r.passed;
  }
  return ok ? 0 : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rateless semantic codec toolkit"};
  app.require_subcommand(1);

  Common train_c, eval_c, sim_c;
  std::string train_out, train_log, resume;
  bool verbose = false;
  auto* train = app.add_subcommand("train", "train a codec and write a checkpoint");
  add_common(train, train_c, true);
  train->add_option("--out", train_out, "checkpoint path");
  train->add_option("--log", train_log, "JSON-lines training log");
  train->add_option("--resume", resume, "continue from a checkpoint");
  train->add_flag("-v,--verbose", verbose);

  std::vector<std::string> eval_models;
  std::string eval_out = "results/rdp.csv";
  bool proxy = false;
  auto* eval = app.add_subcommand("eval", "rate-distortion-perception sweep to CSV");
  add_common(eval, eval_c, true);
  eval->add_option("--model", eval_models, "checkpoint (repeatable)")->required();
  eval->add_option("--out", eval_out, "CSV path");
  eval->add_flag("--proxy-eval", proxy, "debug: additive-noise proxy instead of quantization");

  std::string sim_model, sim_policy = "exhaust", sim_out = "results/traces.jsonl";
  std::size_t chunk = 1, sessions = 100;
  auto* sim = app.add_subcommand("simulate", "rateless sessions with receiver ACK");
  add_common(sim, sim_c, false);
  sim->add_option("--model", sim_model, "checkpoint")->required();
  sim->add_option("--policy", sim_policy, "exhaust | fixed:<k> | target:<tau>[:critic|oracle]");
  sim->add_option("--chunk", chunk, "symbols per round")->check(CLI::PositiveNumber);
  sim->add_option("--sessions", sessions, "number of sessions");
  sim->add_option("--out", sim_out, "JSON-lines trace path");

  std::string plot_csv, plot_dir = "results/plots";
  auto* plot = app.add_subcommand("plot", "SVG cross-sections from an eval CSV");
  plot->add_option("--csv", plot_csv, "eval CSV")->required();
  plot->add_option("--out", plot_dir, "output directory");

  auto* selftest = app.add_subcommand("selftest", "statistical and gradient checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*train) return cmd_train(train_c, train_out, train_log, resume, verbose);
    if (*eval) return cmd_eval(eval_c, eval_models, eval_out, proxy);
    if (*sim) return cmd_simulate(sim_c, sim_model, sim_policy, chunk, sessions, sim_out);
    if (*plot) return cmd_plot(plot_csv, plot_dir);
    if (*selftest) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

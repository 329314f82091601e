#include "rsc/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rsc/error.hpp"

namespace rsc {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

const std::map<std::string, std::string>& KvConfig::known_keys() {
  static const std::map<std::string, std::string> keys = {
      {"data.path", ""},
      {"data.kind", "mnist"},
      {"data.limit", "0"},
      {"data.dim", "8"},
      {"data.spectrum", "4,2,1,0.5,0.25,0.125,0.0625,0.03125"},
      {"data.samples", "20000"},
      {"data.source_seed", "7"},
      {"model.scheme", "RSC"},
      {"model.K", "12"},
      {"model.Lq", "16"},
      {"model.encoder_hidden", "512,256,128,64"},
      {"model.decoder_hidden", "128,256,512"},
      {"model.output", "auto"},
      {"model.decoder_batch_norm", "true"},
      {"rate.beta", "0.67"},
      {"channel.snr_db", "10"},
      {"channel.power", "empirical"},
      {"train.lambda", "1.0"},
      {"train.distortion_only", "false"},
      {"train.epochs", "2"},
      {"train.batch", "64"},
      {"train.seed", ""},
      {"train.optimizer", "adam"},
      {"train.lr", "0.001"},
      {"train.adam_betas", "0.9,0.999"},
      {"train.checkpoint_every", "0"},
      {"critic.clip", "0.01"},
      {"critic.n_critic", "5"},
      {"critic.warmup", "100"},
      {"critic.optimizer", "rmsprop"},
      {"critic.lr", "0.0005"},
      {"critic.adam_betas", "0.9,0.999"},
      {"critic.hidden", "256,64"},
      {"critic.per_rate", "false"},
      {"critic.gp", "false"},
      {"critic.gp_weight", "10"},
      {"sc.rho", "0.1"},
      {"sc.weight", "1.0"},
      {"eval.rates", "2,6,12"},
      {"eval.snrs", "0,5,noiseless"},
      {"eval.samples", "1000"},
      {"eval.critic_steps", "300"},
      {"eval.critic_batch", "128"},
      {"eval.critic_gp", "true"},
      {"eval.critic_lr", "0.0005"},
  };
  return keys;
}

std::string KvConfig::env_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char c : key) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(c)));
  return out;
}

KvConfig KvConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

KvConfig KvConfig::parse(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  std::istringstream is(text);
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void KvConfig::apply_env() {
  for (const auto& [key, _] : known_keys()) {
    if (const char* v = std::getenv(env_name(key).c_str())) set(key, v);
  }
}

void KvConfig::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void KvConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string KvConfig::get(const std::string& key) const {
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  auto it = known_keys().find(key);
  if (it == known_keys().end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

std::int64_t KvConfig::get_int(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

std::uint64_t KvConfig::get_u64(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const unsigned long long i = std::stoull(v, &used, 0);
      if (used == v.size()) return i;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
}

bool KvConfig::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> KvConfig::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split(get(key), ',')) {
    try {
      std::size_t used = 0;
      const long long i = std::stoll(item, &used);
      if (used != item.size() || i <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(i));
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected positive integers, got '" + item + "'");
    }
  }
  return out;
}

std::map<std::string, std::string> KvConfig::effective() const {
  std::map<std::string, std::string> out = known_keys();
  for (const auto& [k, v] : values_) out[k] = v;
  return out;
}

}  // namespace rsc

#include "plshield/agents/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "nlohmann/json.hpp"
#include "plshield/common.hpp"

namespace plshield::agents {

PolicyParams PolicyParams::tabular(int n_states, int n_actions) {
  PolicyParams p;
  p.arch = PolicyArch::Tabular;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.w.assign(static_cast<size_t>(n_states) * n_actions, 0.0);
  return p;
}

PolicyParams PolicyParams::mlp(int n_states, int n_actions, int hidden, Rng& rng) {
  PolicyParams p;
  p.arch = PolicyArch::Mlp;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.hidden = hidden;
  const size_t n1 = static_cast<size_t>(hidden) * n_states + hidden;
  const size_t n2 = static_cast<size_t>(n_actions) * hidden + n_actions;
  p.w.resize(n1 + n2);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(n_states));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (size_t i = 0; i < n1; ++i) p.w[i] = s1 * rng.normal();
  for (size_t i = n1; i < p.w.size(); ++i) p.w[i] = s2 * rng.normal();
  return p;
}

namespace {

void softmax(std::vector<double>& logits) {
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  for (double& z : logits) z /= sum;
}

}  // namespace

shield::PolicyDistribution policy_forward(const PolicyParams& p, int state, ForwardCache* cache) {
  if (state < 0 || state >= p.n_states) throw ShapeError("state index out of range");
  std::vector<double> logits(p.n_actions);
  std::vector<double> hidden_act;
  if (p.arch == PolicyArch::Tabular) {
    const size_t off = static_cast<size_t>(state) * p.n_actions;
    for (int a = 0; a < p.n_actions; ++a) logits[a] = p.w[off + a];
  } else {
    // One-hot input: the first layer reduces to a column lookup.
    hidden_act.resize(p.hidden);
    const size_t w1 = 0;
    const size_t b1 = static_cast<size_t>(p.hidden) * p.n_states;
    const size_t w2 = b1 + p.hidden;
    const size_t b2 = w2 + static_cast<size_t>(p.n_actions) * p.hidden;
    for (int j = 0; j < p.hidden; ++j)
      hidden_act[j] = std::tanh(p.w[w1 + static_cast<size_t>(j) * p.n_states + state] + p.w[b1 + j]);
    for (int a = 0; a < p.n_actions; ++a) {
      double z = p.w[b2 + a];
      for (int j = 0; j < p.hidden; ++j)
        z += p.w[w2 + static_cast<size_t>(a) * p.hidden + j] * hidden_act[j];
      logits[a] = z;
    }
  }
  for (double z : logits)
    if (!std::isfinite(z)) throw Error("non-finite policy parameters");
  softmax(logits);
  if (cache) {
    cache->state = state;
    cache->probs = logits;
    cache->hidden_act = std::move(hidden_act);
  }
  return {std::move(logits)};
}

void policy_backward(const PolicyParams& p, const ForwardCache& cache,
                     std::span<const double> dlogits, std::vector<double>& grad) {
  if (grad.size() != p.w.size()) grad.assign(p.w.size(), 0.0);
  if (p.arch == PolicyArch::Tabular) {
    const size_t off = static_cast<size_t>(cache.state) * p.n_actions;
    for (int a = 0; a < p.n_actions; ++a) grad[off + a] += dlogits[a];
    return;
  }
  const size_t b1 = static_cast<size_t>(p.hidden) * p.n_states;
  const size_t w2 = b1 + p.hidden;
  const size_t b2 = w2 + static_cast<size_t>(p.n_actions) * p.hidden;
  std::vector<double> dhidden(p.hidden, 0.0);
  for (int a = 0; a < p.n_actions; ++a) {
    grad[b2 + a] += dlogits[a];
    for (int j = 0; j < p.hidden; ++j) {
      grad[w2 + static_cast<size_t>(a) * p.hidden + j] += dlogits[a] * cache.hidden_act[j];
      dhidden[j] += dlogits[a] * p.w[w2 + static_cast<size_t>(a) * p.hidden + j];
    }
  }
  for (int j = 0; j < p.hidden; ++j) {
    const double dz = dhidden[j] * (1.0 - cache.hidden_act[j] * cache.hidden_act[j]);
    grad[static_cast<size_t>(j) * p.n_states + cache.state] += dz;
    grad[b1 + j] += dz;
  }
}

void save_checkpoint(const std::string& path, const PolicyParams& p, const std::string& algorithm,
                     uint64_t step) {
  nlohmann::json header;
  header["arch"] = p.arch == PolicyArch::Tabular ? "tabular" : "mlp";
  header["n_states"] = p.n_states;
  header["n_actions"] = p.n_actions;
  header["hidden"] = p.hidden;
  header["count"] = p.w.size();
  header["algorithm"] = algorithm;
  header["step"] = step;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << header.dump() << "\n";
  static_assert(std::endian::native == std::endian::little, "checkpoints are little-endian");
  out.write(reinterpret_cast<const char*>(p.w.data()),
            static_cast<std::streamsize>(p.w.size() * sizeof(double)));
}

PolicyParams load_checkpoint(const std::string& path, std::string* algorithm, uint64_t* step) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  PolicyParams p;
  p.arch = header.at("arch") == "tabular" ? PolicyArch::Tabular : PolicyArch::Mlp;
  p.n_states = header.at("n_states");
  p.n_actions = header.at("n_actions");
  p.hidden = header.at("hidden");
  p.w.resize(header.at("count").get<size_t>());
  in.read(reinterpret_cast<char*>(p.w.data()),
          static_cast<std::streamsize>(p.w.size() * sizeof(double)));
  if (!in) throw ConfigError("truncated checkpoint '" + path + "'");
  if (algorithm) *algorithm = header.at("algorithm");
  if (step) *step = header.at("step");
  return p;
}

}  // namespace plshield::agents

#include "imb/groupform.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <random>

#include "imb/io.hpp"
#include "imb/seed.hpp"

namespace imb {

double compute_alpha(std::span<const double> observations) {
  if (observations.empty()) throw ValidationError("alpha needs at least one observation");
  double sum = 0.0;
  for (double v : observations) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("observations must be finite and >= 0");
    sum += v;
  }
  if (!(sum > 0.0)) throw ValidationError("alpha is undefined for all-zero observations");
  return static_cast<double>(observations.size()) / sum;
}

SwitchpointModel::SwitchpointModel(std::vector<double> observations) : obs_(std::move(observations)) {
  alpha_ = compute_alpha(obs_);
  prefix_.assign(obs_.size() + 1, 0.0);
  for (std::size_t c = 0; c < obs_.size(); ++c) {
    prefix_[c + 1] = prefix_[c] + obs_[c];
    log_gamma_sum_ += std::lgamma(obs_[c] + 1.0);
  }
}

double SwitchpointModel::log_posterior(int tau, double l1, double l2) const {
  if (!(l1 > 0.0) || !(l2 > 0.0)) return -std::numeric_limits<double>::infinity();
  const int n = size();
  if (tau < 1 || tau > n) throw ValidationError("switchpoint " + std::to_string(tau) + " outside [1, " + std::to_string(n) + "]");
  const double k1 = prefix_[tau], k2 = prefix_[n] - prefix_[tau];
  const double prior = 2.0 * std::log(alpha_) - alpha_ * (l1 + l2);
  const double like = k1 * std::log(l1) - tau * l1 + k2 * std::log(l2) - (n - tau) * l2 - log_gamma_sum_;
  return prior + like;
}

double log_posterior(int tau, double l1, double l2, const SwitchpointModel& model) {
  return model.log_posterior(tau, l1, l2);
}

namespace {

double log_target(const SwitchpointModel& m, const SwitchpointState& s) {
  return m.log_posterior(s.tau, s.lambda1, s.lambda2) + std::log(s.lambda1) + std::log(s.lambda2);
}

}  // namespace

double acceptance_probability(const SwitchpointModel& model, const SwitchpointState& from, const SwitchpointState& to) {
  if (!(to.lambda1 > 0.0) || !(to.lambda2 > 0.0)) return 0.0;
  const double d = log_target(model, to) - log_target(model, from);
  return d >= 0.0 ? 1.0 : std::exp(d);
}

int PosteriorSamples::tau_mode() const {
  if (tau.empty()) throw ValidationError("no posterior samples");
  const int hi = *std::max_element(tau.begin(), tau.end());
  std::vector<std::size_t> count(hi + 1, 0);
  for (int t : tau) ++count[t];
  return static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
}

PosteriorSamples run_mcmc(const SwitchpointModel& model, const McmcParams& params, std::uint64_t seed) {
  const int n = model.size();
  if (n < 2) throw ValidationError("switchpoint inference needs at least two observations");
  if (params.iterations < 1) throw ValidationError("MCMC needs at least one iteration");
  if (!(params.burn_in_frac >= 0.0 && params.burn_in_frac < 1.0)) throw ValidationError("burn-in fraction must be in [0, 1)");
  if (!(params.log_step > 0.0)) throw ValidationError("MCMC step must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int reach = std::max(1, n / 20);
  std::uniform_int_distribution<int> step(1, 2 * reach);

  SwitchpointState cur{std::max(1, n / 2), 1.0 / model.alpha(), 1.0 / model.alpha()};
  double cur_lt = log_target(model, cur);
  auto try_move = [&](const SwitchpointState& prop) {
    const double lt = log_target(model, prop);
    const double d = lt - cur_lt;
    if (d >= 0.0 || unit(rng) < std::exp(d)) {
      cur = prop;
      cur_lt = lt;
    }
  };

  const int burn = static_cast<int>(std::floor(params.burn_in_frac * params.iterations));
  PosteriorSamples out;
  out.tau.reserve(params.iterations - burn);
  out.lambda1.reserve(params.iterations - burn);
  out.lambda2.reserve(params.iterations - burn);
  for (int it = 0; it < params.iterations; ++it) {
    auto prop = cur;
    prop.lambda1 = cur.lambda1 * std::exp(params.log_step * normal(rng));
    try_move(prop);
    prop = cur;
    prop.lambda2 = cur.lambda2 * std::exp(params.log_step * normal(rng));
    try_move(prop);
    prop = cur;
    int d = step(rng);
    d = d <= reach ? -d : d - reach;
    int t = cur.tau + d;
    // Mirror at the half-integer boundaries keeps the proposal symmetric.
    if (t < 1) t = 1 - t;
    if (t > n) t = 2 * n + 1 - t;
    prop.tau = t;
    try_move(prop);
    if (it >= burn) {
      out.tau.push_back(cur.tau);
      out.lambda1.push_back(cur.lambda1);
      out.lambda2.push_back(cur.lambda2);
    }
  }
  return out;
}

double expected_dac(const PosteriorSamples& samples, int c) {
  if (samples.size() == 0) throw ValidationError("no posterior samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) sum += samples.tau[i] > c ? samples.lambda1[i] : samples.lambda2[i];
  return sum / static_cast<double>(samples.size());
}

double delta_dac(const PosteriorSamples& samples, int start, int end, double beta) {
  const double s = expected_dac(samples, start);
  if (!(s > 0.0)) throw ValidationError("expected DAC at the range start is zero");
  return beta * expected_dac(samples, end) / s;
}

void GroupingParams::validate() const {
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  if (!(threshold > 0.0)) throw ValidationError("split threshold must be positive");
  if (min_group_size < 2) throw ValidationError("min_group_size must be >= 2");
}

namespace {

struct Recursion {
  const DacVector& dac;
  const GroupingParams& params;
  std::vector<SplitRecord>* records;
  std::vector<Group> groups;

  void emit(int start, int end, double per_customer) {
    Group g;
    g.start = start;
    g.end = end;
    for (int c = start; c <= end; ++c) g.customer_ids.push_back(dac.entries()[c - 1].first);
    g.expected_dac = per_customer;
    g.capacity_bound = g.size() * per_customer;
    groups.push_back(std::move(g));
  }

  void run(int start, int end, std::uint64_t seed) {
    const int n = end - start + 1;
    std::vector<double> obs;
    for (int c = start; c <= end; ++c) obs.push_back(dac.entries()[c - 1].second);
    double sum = 0.0;
    for (double v : obs) sum += v;
    if (n < params.min_group_size || n < 2 || !(sum > 0.0)) {
      emit(start, end, sum / n);
      return;
    }
    SwitchpointModel model(obs);
    auto samples = run_mcmc(model, params.mcmc, seed);
    const int tau = samples.tau_mode();
    const double delta = delta_dac(samples, 1, n, params.beta);
    const bool split = delta > params.threshold && tau >= params.min_group_size && n - tau >= params.min_group_size;
    if (!split) {
      double edac = 0.0;
      for (int c = 1; c <= n; ++c) edac += expected_dac(samples, c);
      emit(start, end, edac / n);
    }
    if (records) records->push_back({start, end, start + tau - 1, delta, split, std::move(samples)});
    if (split) {
      const int ac = start + tau - 1;
      run(start, ac, derive_seed(seed, {static_cast<std::uint64_t>(start), static_cast<std::uint64_t>(ac)}));
      run(ac + 1, end, derive_seed(seed, {static_cast<std::uint64_t>(ac + 1), static_cast<std::uint64_t>(end)}));
    }
  }
};

}  // namespace

std::vector<Group> form_groups(const DacVector& dac, const GroupingParams& params, std::uint64_t seed,
                               std::vector<SplitRecord>* records) {
  params.validate();
  if (dac.size() == 0) throw ValidationError("no customers to group");
  for (const auto& [id, v] : dac.entries())
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("DAC of " + id + " must be finite and >= 0");
  Recursion r{dac, params, records, {}};
  const int n = static_cast<int>(dac.size());
  r.run(1, n, derive_seed(seed, {1, static_cast<std::uint64_t>(n)}));
  return std::move(r.groups);
}

void write_groups_json(const std::filesystem::path& path, const std::vector<Group>& groups) {
  auto arr = nlohmann::json::array();
  for (const auto& g : groups)
    arr.push_back({{"start", g.start},
                   {"end", g.end},
                   {"customer_ids", g.customer_ids},
                   {"expected_dac_kwh", g.expected_dac},
                   {"capacity_bound_kwh", g.capacity_bound}});
  write_file_atomic(path, arr.dump(2) + "\n");
}

void write_posterior_csv(const std::filesystem::path& path, const PosteriorSamples& samples) {
  std::string out = "draw,tau,lambda1,lambda2\n";
  for (std::size_t i = 0; i < samples.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(samples.tau[i]) + "," + format_double(samples.lambda1[i]) + "," +
           format_double(samples.lambda2[i]) + "\n";
  write_file_atomic(path, out);
}

}  // namespace imb

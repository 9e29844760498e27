#pragma once

// Balancing-group formation: a Poisson switchpoint model on the sorted
// demand aggregation criteria, sampled by Metropolis-within-Gibbs, and the
// divide-and-conquer recursion that splits at the most likely switchpoint.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "imb/core.hpp"

namespace imb {

// alpha = count / sum; throws if the sum is not positive.
double compute_alpha(std::span<const double> observations);

class SwitchpointModel {
 public:
  explicit SwitchpointModel(std::vector<double> observations);

  int size() const { return static_cast<int>(obs_.size()); }
  double alpha() const { return alpha_; }
  const std::vector<double>& observations() const { return obs_; }

  // Observations 1..tau follow rate l1, the rest l2. -inf for non-positive rates.
  double log_posterior(int tau, double l1, double l2) const;

 private:
  std::vector<double> obs_;
  std::vector<double> prefix_;  // prefix_[c] = sum of the first c observations
  double log_gamma_sum_ = 0.0;
  double alpha_ = 0.0;
};

double log_posterior(int tau, double l1, double l2, const SwitchpointModel& model);

struct SwitchpointState {
  int tau = 1;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
};

// Metropolis acceptance probability of a move between states. Rates are
// proposed on the log scale, so the target includes the log-rate Jacobian.
double acceptance_probability(const SwitchpointModel& model, const SwitchpointState& from, const SwitchpointState& to);

struct McmcParams {
  int iterations = 80'000;
  double burn_in_frac = 0.25;
  double log_step = 0.1;
};

struct PosteriorSamples {
  std::vector<int> tau;
  std::vector<double> lambda1;
  std::vector<double> lambda2;

  std::size_t size() const { return tau.size(); }
  // Most frequent tau; ties go to the smaller index.
  int tau_mode() const;
};

PosteriorSamples run_mcmc(const SwitchpointModel& model, const McmcParams& params, std::uint64_t seed);

// Posterior expected rate at customer c (1-based within the sampled range).
double expected_dac(const PosteriorSamples& samples, int c);
// beta * EDAC_end / EDAC_start.
double delta_dac(const PosteriorSamples& samples, int start, int end, double beta);

struct GroupingParams {
  double beta = 1.0;
  double threshold = 2.0;
  int min_group_size = 4;
  McmcParams mcmc;
  void validate() const;
};

struct Group {
  int start = 0;  // 1-based, inclusive
  int end = 0;
  std::vector<std::string> customer_ids;
  double expected_dac = 0.0;    // per customer
  double capacity_bound = 0.0;  // size * expected_dac
  int size() const { return end - start + 1; }
};

// One sampled range of the recursion.
struct SplitRecord {
  int start = 0;
  int end = 0;
  int articulated = 0;  // absolute index of the switchpoint mode
  double delta = 0.0;
  bool split = false;
  PosteriorSamples samples;
};

std::vector<Group> form_groups(const DacVector& dac, const GroupingParams& params, std::uint64_t seed,
                               std::vector<SplitRecord>* records = nullptr);

void write_groups_json(const std::filesystem::path& path, const std::vector<Group>& groups);
// `draw,tau,lambda1,lambda2`
void write_posterior_csv(const std::filesystem::path& path, const PosteriorSamples& samples);

}  // namespace imb

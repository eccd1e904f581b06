#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pipehmm/gmm.hpp"
#include "pipehmm/signal_features.hpp"

namespace pipehmm {

enum class Topology { ergodic, left_to_right };

std::string to_string(Topology t);
Topology topology_from_string(const std::string& s);

// First-order HMM with one Gaussian mixture per state.
struct HmmModel {
    Eigen::VectorXd pi;
    Eigen::MatrixXd A;
    std::vector<MixtureDensity> emissions;
    Topology topology = Topology::ergodic;
    std::vector<std::string> state_names;

    std::size_t state_count() const { return static_cast<std::size_t>(pi.size()); }
};

// Checks pi, A, topology zeros, and state names; ignores emissions so it can
// run on preset skeletons.
void validate_structure(const HmmModel& model);
// Full check including per-state mixtures and a shared feature dimension.
void validate(const HmmModel& model);

// Presets: leak2_lr, location3_ergodic, depth3_lr. Emissions are left empty
// for the caller to fit.
HmmModel make_preset(const std::string& name);

std::vector<Eigen::VectorXd> to_points(const ObservationSequence& obs);

// T x N matrix of per-observation, per-state emission log densities.
Eigen::MatrixXd emission_log_matrix(const HmmModel& model, const ObservationSequence& obs);

double sequence_log_likelihood(const HmmModel& model, const ObservationSequence& obs);

struct PosteriorStats {
    Eigen::MatrixXd gamma;              // T x N, rows sum to 1
    std::vector<Eigen::MatrixXd> xi;    // T-1 slices, N x N, each sums to 1
    double log_likelihood = 0.0;
};

PosteriorStats forward_backward(const HmmModel& model, const ObservationSequence& obs);

struct ViterbiResult {
    std::vector<std::size_t> path;
    double log_prob = 0.0;
};

ViterbiResult viterbi(const HmmModel& model, const ObservationSequence& obs);

// Same recurrence fed with a precomputed log-emission matrix; lets tests
// shift all emissions by a constant and check the decoded path is unchanged.
ViterbiResult viterbi_from_log_emissions(const Eigen::VectorXd& pi, const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& log_emissions);

std::vector<std::size_t> posterior_decode(const HmmModel& model, const ObservationSequence& obs);

struct TrainConfig {
    double tolerance = 1e-6;
    std::size_t max_iterations = 100;
};

struct TrainReport {
    std::size_t iterations = 0;          // re-estimation passes performed
    std::vector<double> trace;           // total log-likelihood before each pass
    bool converged = false;
    std::vector<std::string> events;
};

std::pair<HmmModel, TrainReport> baum_welch(const HmmModel& model,
                                            const std::vector<ObservationSequence>& training,
                                            const TrainConfig& config);

}  // namespace pipehmm

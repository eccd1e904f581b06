#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipehmm/hmm.hpp"
#include "pipehmm/signal_features.hpp"

namespace pipehmm {

struct SampledSequence {
    ObservationSequence obs;               // label_hint filled with the path
    std::vector<std::size_t> path;
};

// Draws a state path from pi and A, then one observation per state from that
// state's mixture. Deterministic given the seed.
SampledSequence sample_from_model(const HmmModel& model, std::size_t t_len, std::uint64_t seed);

struct ScenarioSpec {
    HmmModel true_model;
    std::size_t sequences = 1;
    std::size_t length = 1;
    std::uint64_t seed = 0;
};

std::vector<SampledSequence> sample_scenario(const ScenarioSpec& spec);

struct BruteForceResult {
    double log_likelihood = 0.0;
    Eigen::MatrixXd gamma;                 // T x N
    std::vector<std::size_t> best_path;
    double best_log_prob = 0.0;
};

// Reference results by explicit enumeration of every admissible state path
// in log space. Requires N^T <= 1e7. Path ties are broken exactly the way
// the backtracking decoder breaks them: smallest state index at the final
// step, then at each earlier step going backwards.
BruteForceResult brute_force_evaluate(const HmmModel& model, const ObservationSequence& obs);

// Decaying sinusoid burst parameters for one signal source.
struct SignalRecipe {
    double carrier_hz = 0.0;
    double amplitude = 0.0;     // volts; 0 renders an all-zero waveform
    double decay_per_s = 0.0;
    double noise_sd = 0.0;      // additive white Gaussian noise, volts
};

struct SignalState {
    std::string label;
    SignalRecipe recipe;
    std::size_t groups = 1;     // repeated experiment count for this state
};

struct SignalScenario {
    std::string name;
    SignalRecipe baseline;      // healthy reference recording
    std::vector<SignalState> states;
    double sample_rate_hz = 0.0;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
};

void validate(const SignalScenario& scn);

// Scenario file: top-level key=value lines (name, seed, sample_rate_hz,
// duration_s), a [baseline] section, and one [state] section per damage
// state in order.
SignalScenario read_scenario_file(const std::filesystem::path& path);

// a * exp(-decay * t) * sin(2 pi f t), t = i / sample_rate. Noiseless.
Waveform render_burst(const SignalRecipe& recipe, double sample_rate_hz, double duration_s);

struct GeneratedSet {
    Waveform baseline;
    std::vector<Waveform> waveforms;   // grouped by state, scenario order
    std::vector<std::string> labels;   // one per waveform
};

// Renders the baseline, then `groups` noisy records per state, consuming one
// shared noise stream so the whole set is a pure function of the scenario.
GeneratedSet generate_waveforms(const SignalScenario& scn);

}  // namespace pipehmm

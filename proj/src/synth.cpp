#include "pipehmm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pipehmm/config.hpp"
#include "pipehmm/errors.hpp"
#include "pipehmm/rng.hpp"

namespace pipehmm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

std::size_t draw_categorical(const Eigen::VectorXd& p, Rng& rng) {
    const double u = rng.next_double();
    double run = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        run += p(i);
        if (u < run) return static_cast<std::size_t>(i);
    }
    return static_cast<std::size_t>(p.size() - 1);
}

Eigen::VectorXd draw_from_mixture(const MixtureDensity& mix, Rng& rng) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(mix.component_count()));
    for (std::size_t k = 0; k < mix.component_count(); ++k) {
        w(static_cast<Eigen::Index>(k)) = mix.weights[k];
    }
    const std::size_t k = draw_categorical(w, rng);
    const Eigen::MatrixXd l = mix.covariances[k].llt().matrixL();
    Eigen::VectorXd z(mix.means[k].size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.next_normal();
    return mix.means[k] + l * z;
}

// True iff a reads smaller than b when both are compared from the last
// element backwards. This is the order the backtracking decoder induces.
bool reversed_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

}  // namespace

SampledSequence sample_from_model(const HmmModel& model, std::size_t t_len, std::uint64_t seed) {
    validate(model);
    require(t_len >= 1, "sequence length must be >= 1");
    require(model.emissions[0].dimension() == 2, "sampling requires 2-D emissions");

    Rng rng(seed);
    SampledSequence out;
    out.path.reserve(t_len);
    out.obs.observations.reserve(t_len);
    out.obs.label_hint.reserve(t_len);

    std::size_t state = draw_categorical(model.pi, rng);
    for (std::size_t t = 0; t < t_len; ++t) {
        if (t > 0) {
            state = draw_categorical(model.A.row(static_cast<Eigen::Index>(state)).transpose(),
                                     rng);
        }
        const Eigen::VectorXd x = draw_from_mixture(model.emissions[state], rng);
        out.obs.observations.push_back(FeatureVector{x(0), x(1)});
        out.obs.label_hint.push_back(static_cast<int>(state));
        out.path.push_back(state);
    }
    return out;
}

std::vector<SampledSequence> sample_scenario(const ScenarioSpec& spec) {
    validate(spec.true_model);
    require(spec.sequences >= 1, "scenario needs at least one sequence");
    require(spec.length >= 1, "scenario sequence length must be >= 1");

    std::vector<SampledSequence> out;
    out.reserve(spec.sequences);
    for (std::size_t i = 0; i < spec.sequences; ++i) {
        // Decorrelated per-sequence seeds derived from the scenario seed.
        out.push_back(sample_from_model(spec.true_model, spec.length,
                                        spec.seed + 0x9e3779b97f4a7c15ULL * (i + 1)));
    }
    return out;
}

BruteForceResult brute_force_evaluate(const HmmModel& model, const ObservationSequence& obs) {
    validate(model);
    const auto n = model.state_count();
    const auto t_len = obs.length();

    double instance = 1.0;
    for (std::size_t t = 0; t < t_len; ++t) {
        instance *= static_cast<double>(n);
        require(instance <= 1e7, "instance too large: N^T exceeds 1e7 paths");
    }

    const Eigen::MatrixXd log_b = emission_log_matrix(model, obs);
    Eigen::VectorXd log_pi(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd log_a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        log_pi(static_cast<Eigen::Index>(i)) = safe_log(model.pi(static_cast<Eigen::Index>(i)));
        for (std::size_t j = 0; j < n; ++j) {
            log_a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                safe_log(model.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
    }

    // Accumulates log joint probability in the same association order as the
    // decoder's recurrence so that exact float ties coincide.
    auto path_log_prob = [&](const std::vector<std::size_t>& path) {
        double lp = log_pi(static_cast<Eigen::Index>(path[0])) +
                    log_b(0, static_cast<Eigen::Index>(path[0]));
        for (std::size_t t = 1; t < t_len; ++t) {
            lp = lp + log_a(static_cast<Eigen::Index>(path[t - 1]),
                            static_cast<Eigen::Index>(path[t]));
            lp = lp + log_b(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(path[t]));
        }
        return lp;
    };

    auto next_path = [&](std::vector<std::size_t>& path) {
        for (std::size_t t = t_len; t-- > 0;) {
            if (++path[t] < n) return true;
            path[t] = 0;
        }
        return false;
    };

    // Pass 1: best path (with the decoder's tie-break) and the maximum of
    // all path log probabilities for a stable log-sum-exp.
    BruteForceResult result;
    result.best_log_prob = kNegInf;
    double max_lp = kNegInf;
    std::vector<std::size_t> path(t_len, 0);
    do {
        const double lp = path_log_prob(path);
        max_lp = std::max(max_lp, lp);
        if (lp > result.best_log_prob ||
            (lp == result.best_log_prob && !result.best_path.empty() &&
             reversed_less(path, result.best_path))) {
            result.best_log_prob = lp;
            result.best_path = path;
        }
    } while (next_path(path));

    if (!std::isfinite(result.best_log_prob)) {
        throw NumericError("no admissible state path for this sequence");
    }

    // Pass 2: total likelihood and per-step state posteriors.
    result.gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t_len),
                                         static_cast<Eigen::Index>(n));
    double total = 0.0;
    std::fill(path.begin(), path.end(), 0);
    do {
        const double lp = path_log_prob(path);
        if (lp == kNegInf) continue;
        const double w = std::exp(lp - max_lp);
        total += w;
        for (std::size_t t = 0; t < t_len; ++t) {
            result.gamma(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(path[t])) += w;
        }
    } while (next_path(path));

    result.log_likelihood = max_lp + std::log(total);
    result.gamma /= total;
    return result;
}

void validate(const SignalScenario& scn) {
    require(!scn.name.empty(), "scenario name is empty");
    require(scn.sample_rate_hz > 0.0, "sample_rate_hz must be positive");
    require(scn.duration_s > 0.0, "duration_s must be positive");
    require(!scn.states.empty(), "scenario has no states");

    auto check_recipe = [](const SignalRecipe& r, const std::string& who) {
        if (!(r.carrier_hz > 0.0)) throw std::invalid_argument(who + ": carrier_hz must be positive");
        if (r.amplitude < 0.0) throw std::invalid_argument(who + ": amplitude must be >= 0");
        if (r.decay_per_s < 0.0) throw std::invalid_argument(who + ": decay_per_s must be >= 0");
        if (r.noise_sd < 0.0) throw std::invalid_argument(who + ": noise_sd must be >= 0");
    };
    check_recipe(scn.baseline, "baseline");
    for (const auto& st : scn.states) {
        require(!st.label.empty(), "state label is empty");
        require(st.groups >= 1, "state '" + st.label + "': groups must be >= 1");
        check_recipe(st.recipe, "state '" + st.label + "'");
        require(st.recipe.carrier_hz <= scn.sample_rate_hz / 2.0,
                "state '" + st.label + "': carrier exceeds the Nyquist frequency");
    }
    require(scn.baseline.carrier_hz <= scn.sample_rate_hz / 2.0,
            "baseline carrier exceeds the Nyquist frequency");
    for (std::size_t i = 0; i < scn.states.size(); ++i) {
        for (std::size_t j = i + 1; j < scn.states.size(); ++j) {
            require(scn.states[i].label != scn.states[j].label,
                    "duplicate state label '" + scn.states[i].label + "'");
        }
    }
}

SignalScenario read_scenario_file(const std::filesystem::path& path) {
    const ConfigDoc doc = ConfigDoc::parse_file(path);
    const ConfigSection& top = doc.sections().front();

    SignalScenario scn;
    scn.name = top.get_string("name");
    scn.seed = top.get_u64("seed");
    scn.sample_rate_hz = top.get_double("sample_rate_hz");
    scn.duration_s = top.get_double("duration_s");

    auto read_recipe = [](const ConfigSection& s) {
        SignalRecipe r;
        r.carrier_hz = s.get_double("carrier_hz");
        r.amplitude = s.get_double("amplitude");
        r.decay_per_s = s.get_double("decay_per_s");
        r.noise_sd = s.get_double_or("noise_sd", 0.0);
        return r;
    };

    scn.baseline = read_recipe(doc.require("baseline"));
    for (const auto& section : doc.sections()) {
        if (section.name() != "state") continue;
        SignalState st;
        st.label = section.get_string("label");
        st.recipe = read_recipe(section);
        st.groups = section.get_u64("groups");
        scn.states.push_back(st);
    }
    validate(scn);
    return scn;
}

Waveform render_burst(const SignalRecipe& recipe, double sample_rate_hz, double duration_s) {
    require(sample_rate_hz > 0.0, "sample rate must be positive");
    require(duration_s > 0.0, "duration must be positive");
    const auto n = static_cast<std::size_t>(std::llround(sample_rate_hz * duration_s));
    require(n >= 2, "duration too short for this sample rate");

    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        w.samples[i] = recipe.amplitude * std::exp(-recipe.decay_per_s * t) *
                       std::sin(kTwoPi * recipe.carrier_hz * t);
    }
    return w;
}

GeneratedSet generate_waveforms(const SignalScenario& scn) {
    validate(scn);
    Rng rng(scn.seed);

    auto render_noisy = [&](const SignalRecipe& recipe) {
        Waveform w = render_burst(recipe, scn.sample_rate_hz, scn.duration_s);
        if (recipe.noise_sd > 0.0) {
            for (double& v : w.samples) v += recipe.noise_sd * rng.next_normal();
        }
        return w;
    };

    GeneratedSet set;
    set.baseline = render_noisy(scn.baseline);
    for (const auto& st : scn.states) {
        for (std::size_t g = 0; g < st.groups; ++g) {
            set.waveforms.push_back(render_noisy(st.recipe));
            set.labels.push_back(st.label);
        }
    }
    return set;
}

}  // namespace pipehmm

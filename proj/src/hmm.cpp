#include "pipehmm/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pipehmm/errors.hpp"

namespace pipehmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

bool is_structural_zero(Topology t, Eigen::Index i, Eigen::Index j) {
    if (t == Topology::ergodic) return false;
    return j < i || j > i + 1;
}

double log_sum_exp(const double* v, Eigen::Index n) {
    double m = kNegInf;
    for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, v[i]);
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += std::exp(v[i] - m);
    return m + std::log(acc);
}

double log_sum_exp(const Eigen::RowVectorXd& v) { return log_sum_exp(v.data(), v.size()); }

Eigen::MatrixXd elementwise_log(const Eigen::MatrixXd& A) {
    Eigen::MatrixXd out(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) out(i, j) = safe_log(A(i, j));
    }
    return out;
}

// Inference stays entirely in log space. A structural zero in pi or A can
// restrict t=0 (or any step) to a state whose emission density is thousands
// of nats below the row maximum, so any scheme that exponentiates against a
// shared shift underflows; log-sum-exp per cell does not.
Eigen::MatrixXd log_forward(const Eigen::VectorXd& pi, const Eigen::MatrixXd& log_a,
                            const Eigen::MatrixXd& log_b) {
    const Eigen::Index t_len = log_b.rows();
    const Eigen::Index n = log_b.cols();
    Eigen::MatrixXd log_alpha(t_len, n);
    for (Eigen::Index j = 0; j < n; ++j) log_alpha(0, j) = safe_log(pi(j)) + log_b(0, j);
    Eigen::RowVectorXd prev(n);
    for (Eigen::Index t = 1; t < t_len; ++t) {
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) prev(i) = log_alpha(t - 1, i) + log_a(i, j);
            log_alpha(t, j) = log_sum_exp(prev) + log_b(t, j);
        }
    }
    // An all-impossible row poisons every later row, so the first one found
    // is the step where the sequence left the model's support.
    for (Eigen::Index t = 0; t < t_len; ++t) {
        if (log_alpha.row(t).maxCoeff() == kNegInf) {
            throw NumericError("observation " + std::to_string(t) +
                               ": no admissible state path supports the sequence");
        }
    }
    return log_alpha;
}

Eigen::MatrixXd log_backward(const Eigen::MatrixXd& log_a, const Eigen::MatrixXd& log_b) {
    const Eigen::Index t_len = log_b.rows();
    const Eigen::Index n = log_b.cols();
    Eigen::MatrixXd log_beta(t_len, n);
    log_beta.row(t_len - 1).setZero();
    Eigen::RowVectorXd next(n);
    for (Eigen::Index t = t_len - 2; t >= 0; --t) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                next(j) = log_a(i, j) + log_b(t + 1, j) + log_beta(t + 1, j);
            }
            log_beta(t, i) = log_sum_exp(next);
        }
    }
    return log_beta;
}

void check_sequence(const HmmModel& model, const ObservationSequence& obs) {
    validate(obs);
    const auto dim = model.emissions.empty() ? 0 : model.emissions[0].dimension();
    require(dim == 2 || dim == 0, "model emissions must be over the 2-D feature space");
    require(!model.emissions.empty(), "model has no fitted emissions");
}

}  // namespace

std::string to_string(Topology t) {
    return t == Topology::ergodic ? "ergodic" : "left_to_right";
}

Topology topology_from_string(const std::string& s) {
    if (s == "ergodic") return Topology::ergodic;
    if (s == "left_to_right") return Topology::left_to_right;
    throw std::invalid_argument("unknown topology: '" + s + "'");
}

void validate_structure(const HmmModel& model) {
    const Eigen::Index n = model.pi.size();
    require(n >= 1, "model must have at least one state");
    require(model.A.rows() == n && model.A.cols() == n, "transition matrix shape mismatch");
    require(model.state_names.size() == static_cast<std::size_t>(n),
            "state name count does not match state count");

    require(model.pi.minCoeff() >= 0.0, "pi has a negative entry");
    require(std::abs(model.pi.sum() - 1.0) <= 1e-9, "pi does not sum to 1");
    for (Eigen::Index i = 0; i < n; ++i) {
        require(model.A.row(i).minCoeff() >= 0.0, "transition matrix has a negative entry");
        require(std::abs(model.A.row(i).sum() - 1.0) <= 1e-9,
                "transition row " + std::to_string(i) + " does not sum to 1");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (is_structural_zero(model.topology, i, j)) {
                require(model.A(i, j) == 0.0,
                        "left-to-right topology requires A(" + std::to_string(i) + "," +
                            std::to_string(j) + ") = 0");
            }
        }
    }
}

void validate(const HmmModel& model) {
    validate_structure(model);
    require(model.emissions.size() == model.state_count(),
            "emission count does not match state count");
    const auto dim = model.emissions[0].dimension();
    for (std::size_t i = 0; i < model.emissions.size(); ++i) {
        validate(model.emissions[i]);
        require(model.emissions[i].dimension() == dim,
                "emission mixtures differ in dimension");
    }
}

HmmModel make_preset(const std::string& name) {
    HmmModel m;
    if (name == "leak2_lr") {
        m.pi = Eigen::Vector2d(1.0, 0.0);
        m.A = Eigen::MatrixXd{{0.5, 0.5}, {0.0, 1.0}};
        m.topology = Topology::left_to_right;
        m.state_names = {"s0", "s1"};
    } else if (name == "location3_ergodic") {
        m.pi = Eigen::Vector3d(1.0, 0.0, 0.0);
        m.A = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
        m.topology = Topology::ergodic;
        m.state_names = {"s0", "s1", "s2"};
    } else if (name == "depth3_lr") {
        m.pi = Eigen::Vector3d(1.0, 0.0, 0.0);
        m.A = Eigen::MatrixXd{{0.9, 0.1, 0.0}, {0.0, 0.9, 0.1}, {0.0, 0.0, 1.0}};
        m.topology = Topology::left_to_right;
        m.state_names = {"s0", "s1", "s2"};
    } else {
        throw std::invalid_argument("unknown preset: '" + name +
                                    "' (expected leak2_lr, location3_ergodic, or depth3_lr)");
    }
    validate_structure(m);
    return m;
}

std::vector<Eigen::VectorXd> to_points(const ObservationSequence& obs) {
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(obs.observations.size());
    for (const auto& f : obs.observations) {
        pts.push_back(Eigen::Vector2d(f.di1, f.di2));
    }
    return pts;
}

Eigen::MatrixXd emission_log_matrix(const HmmModel& model, const ObservationSequence& obs) {
    check_sequence(model, obs);
    const auto t_len = static_cast<Eigen::Index>(obs.length());
    const auto n = static_cast<Eigen::Index>(model.state_count());
    Eigen::MatrixXd log_b(t_len, n);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        const Eigen::Vector2d x(obs.observations[static_cast<std::size_t>(t)].di1,
                                obs.observations[static_cast<std::size_t>(t)].di2);
        for (Eigen::Index j = 0; j < n; ++j) {
            log_b(t, j) = log_density(model.emissions[static_cast<std::size_t>(j)], x);
        }
    }
    return log_b;
}

double sequence_log_likelihood(const HmmModel& model, const ObservationSequence& obs) {
    validate(model);
    const Eigen::MatrixXd log_b = emission_log_matrix(model, obs);
    const Eigen::MatrixXd log_alpha = log_forward(model.pi, elementwise_log(model.A), log_b);
    return log_sum_exp(log_alpha.row(log_alpha.rows() - 1));
}

PosteriorStats forward_backward(const HmmModel& model, const ObservationSequence& obs) {
    validate(model);
    const Eigen::MatrixXd log_b = emission_log_matrix(model, obs);
    const Eigen::Index t_len = log_b.rows();
    const Eigen::Index n = log_b.cols();

    const Eigen::MatrixXd log_a = elementwise_log(model.A);
    const Eigen::MatrixXd log_alpha = log_forward(model.pi, log_a, log_b);
    const Eigen::MatrixXd log_beta = log_backward(log_a, log_b);

    PosteriorStats stats;
    stats.log_likelihood = log_sum_exp(log_alpha.row(t_len - 1));
    stats.gamma.resize(t_len, n);
    Eigen::RowVectorXd joint(n);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        joint = log_alpha.row(t) + log_beta.row(t);
        const double total = log_sum_exp(joint);
        if (total == kNegInf) throw NumericError("posterior normalization failed");
        for (Eigen::Index i = 0; i < n; ++i) stats.gamma(t, i) = std::exp(joint(i) - total);
    }

    stats.xi.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(t_len - 1, 0)));
    Eigen::MatrixXd w(n, n);
    for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                w(i, j) = log_alpha(t, i) + log_a(i, j) + log_b(t + 1, j) + log_beta(t + 1, j);
            }
        }
        const double total = log_sum_exp(w.data(), w.size());
        if (total == kNegInf) throw NumericError("transition posterior normalization failed");
        Eigen::MatrixXd slice(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) slice(i, j) = std::exp(w(i, j) - total);
        }
        stats.xi.push_back(slice);
    }
    return stats;
}

ViterbiResult viterbi_from_log_emissions(const Eigen::VectorXd& pi, const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& log_emissions) {
    const Eigen::Index t_len = log_emissions.rows();
    const Eigen::Index n = log_emissions.cols();
    require(t_len >= 1, "empty emission matrix");
    require(pi.size() == n && A.rows() == n && A.cols() == n,
            "pi/A/emission dimensions disagree");

    Eigen::MatrixXd log_a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) log_a(i, j) = safe_log(A(i, j));
    }

    Eigen::MatrixXd delta(t_len, n);
    Eigen::MatrixXi psi(t_len, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        delta(0, j) = safe_log(pi(j)) + log_emissions(0, j);
        psi(0, j) = 0;
    }
    for (Eigen::Index t = 1; t < t_len; ++t) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double best = kNegInf;
            Eigen::Index arg = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double cand = delta(t - 1, i) + log_a(i, j);
                if (cand > best) {
                    best = cand;
                    arg = i;
                }
            }
            delta(t, j) = best + log_emissions(t, j);
            psi(t, j) = static_cast<int>(arg);
        }
    }

    double best = kNegInf;
    Eigen::Index last = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (delta(t_len - 1, j) > best) {
            best = delta(t_len - 1, j);
            last = j;
        }
    }
    if (!std::isfinite(best)) {
        throw NumericError("no admissible state path for this sequence");
    }

    ViterbiResult result;
    result.log_prob = best;
    result.path.resize(static_cast<std::size_t>(t_len));
    result.path[static_cast<std::size_t>(t_len - 1)] = static_cast<std::size_t>(last);
    for (Eigen::Index t = t_len - 1; t > 0; --t) {
        last = psi(t, last);
        result.path[static_cast<std::size_t>(t - 1)] = static_cast<std::size_t>(last);
    }
    return result;
}

ViterbiResult viterbi(const HmmModel& model, const ObservationSequence& obs) {
    validate(model);
    return viterbi_from_log_emissions(model.pi, model.A, emission_log_matrix(model, obs));
}

std::vector<std::size_t> posterior_decode(const HmmModel& model, const ObservationSequence& obs) {
    const PosteriorStats stats = forward_backward(model, obs);
    std::vector<std::size_t> path(static_cast<std::size_t>(stats.gamma.rows()));
    for (Eigen::Index t = 0; t < stats.gamma.rows(); ++t) {
        Eigen::Index arg = 0;
        double best = stats.gamma(t, 0);
        for (Eigen::Index j = 1; j < stats.gamma.cols(); ++j) {
            if (stats.gamma(t, j) > best) {
                best = stats.gamma(t, j);
                arg = j;
            }
        }
        path[static_cast<std::size_t>(t)] = static_cast<std::size_t>(arg);
    }
    return path;
}

std::pair<HmmModel, TrainReport> baum_welch(const HmmModel& model,
                                            const std::vector<ObservationSequence>& training,
                                            const TrainConfig& config) {
    validate(model);
    require(!training.empty(), "no training sequences");
    require(config.tolerance > 0.0, "tolerance must be positive");
    require(config.max_iterations >= 1, "max_iterations must be >= 1");
    for (const auto& seq : training) validate(seq);

    const auto n = static_cast<Eigen::Index>(model.state_count());
    const auto dim = static_cast<Eigen::Index>(model.emissions[0].dimension());

    // Pool every training point once for the covariance floor and a shift
    // point that keeps the accumulated second moments well conditioned.
    std::vector<Eigen::VectorXd> pooled;
    for (const auto& seq : training) {
        auto pts = to_points(seq);
        pooled.insert(pooled.end(), pts.begin(), pts.end());
    }
    const double floor = covariance_floor(pooled);
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(dim);
    for (const auto& x : pooled) ref += x;
    ref /= static_cast<double>(pooled.size());

    HmmModel cur = model;
    TrainReport rep;
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        Eigen::VectorXd pi_acc = Eigen::VectorXd::Zero(n);
        Eigen::MatrixXd a_num = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd a_den = Eigen::VectorXd::Zero(n);
        double transition_mass = 0.0;

        // Per state and mixture component: occupancy, first moment, and
        // second moment about ref.
        const std::size_t n_states = cur.state_count();
        std::vector<std::vector<double>> occ(n_states);
        std::vector<std::vector<Eigen::VectorXd>> s1(n_states);
        std::vector<std::vector<Eigen::MatrixXd>> s2(n_states);
        for (std::size_t j = 0; j < n_states; ++j) {
            const std::size_t kc = cur.emissions[j].component_count();
            occ[j].assign(kc, 0.0);
            s1[j].assign(kc, Eigen::VectorXd::Zero(dim));
            s2[j].assign(kc, Eigen::MatrixXd::Zero(dim, dim));
        }

        double total_ll = 0.0;
        for (const auto& seq : training) {
            const PosteriorStats stats = forward_backward(cur, seq);
            total_ll += stats.log_likelihood;
            const Eigen::Index t_len = stats.gamma.rows();

            pi_acc += stats.gamma.row(0).transpose();
            for (const auto& slice : stats.xi) {
                a_num += slice;
                transition_mass += slice.sum();
            }
            for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
                a_den += stats.gamma.row(t).transpose();
            }

            const auto pts = to_points(seq);
            for (Eigen::Index t = 0; t < t_len; ++t) {
                const Eigen::VectorXd d = pts[static_cast<std::size_t>(t)] - ref;
                for (std::size_t j = 0; j < n_states; ++j) {
                    const double g = stats.gamma(t, static_cast<Eigen::Index>(j));
                    if (g <= 0.0) continue;
                    const Eigen::VectorXd r =
                        responsibilities(cur.emissions[j], pts[static_cast<std::size_t>(t)]);
                    for (std::size_t k = 0; k < cur.emissions[j].component_count(); ++k) {
                        const double chi = g * r(static_cast<Eigen::Index>(k));
                        occ[j][k] += chi;
                        s1[j][k] += chi * d;
                        s2[j][k] += chi * (d * d.transpose());
                    }
                }
            }
        }

        rep.trace.push_back(total_ll);
        if (iter >= 1) {
            const double denom = std::max(std::abs(prev_ll), 1e-300);
            if (std::abs(total_ll - prev_ll) / denom < config.tolerance) {
                rep.converged = true;
                break;
            }
        }
        prev_ll = total_ll;

        // M step. pi is the mean of first-step posteriors across sequences.
        cur.pi = pi_acc / static_cast<double>(training.size());
        cur.pi /= cur.pi.sum();

        if (transition_mass > 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (a_den(i) < 1e-10) {
                    rep.events.push_back("iteration " + std::to_string(iter) + ": state " +
                                         std::to_string(i) +
                                         " has no transition occupancy; row kept");
                    continue;
                }
                Eigen::VectorXd row = a_num.row(i).transpose() / a_den(i);
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (cur.A(i, j) == 0.0) row(j) = 0.0;
                }
                const double rs = row.sum();
                if (!(rs > 0.0)) {
                    rep.events.push_back("iteration " + std::to_string(iter) + ": state " +
                                         std::to_string(i) +
                                         " transition row degenerate; row kept");
                    continue;
                }
                cur.A.row(i) = row.transpose() / rs;
            }
        }

        for (std::size_t j = 0; j < n_states; ++j) {
            double state_occ = 0.0;
            for (double v : occ[j]) state_occ += v;
            if (state_occ < 1e-10) {
                rep.events.push_back("iteration " + std::to_string(iter) + ": state " +
                                     std::to_string(j) +
                                     " starved; emissions frozen");
                continue;
            }
            MixtureDensity& mix = cur.emissions[j];
            for (std::size_t k = 0; k < mix.component_count(); ++k) {
                if (occ[j][k] < 1e-10) {
                    rep.events.push_back("iteration " + std::to_string(iter) + ": state " +
                                         std::to_string(j) + " component " + std::to_string(k) +
                                         " starved; component frozen");
                    continue;
                }
                const Eigen::VectorXd mean_d = s1[j][k] / occ[j][k];
                Eigen::MatrixXd cov = s2[j][k] / occ[j][k] - mean_d * mean_d.transpose();
                apply_covariance_floor(cov, floor);
                mix.weights[k] = occ[j][k] / state_occ;
                mix.means[k] = ref + mean_d;
                mix.covariances[k] = cov;
            }
            double wsum = 0.0;
            for (double w : mix.weights) wsum += w;
            for (double& w : mix.weights) w /= wsum;
        }
        ++rep.iterations;
    }

    validate(cur);
    return {cur, rep};
}

}  // namespace pipehmm

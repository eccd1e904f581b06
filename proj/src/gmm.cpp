#include "pipehmm/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pipehmm/errors.hpp"
#include "pipehmm/rng.hpp"

namespace pipehmm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Per-component log weight + log gaussian density, reused by the fit loop.
std::vector<double> component_log_terms(const MixtureDensity& m, const Eigen::VectorXd& x) {
    std::vector<double> terms(m.component_count());
    for (std::size_t k = 0; k < m.component_count(); ++k) {
        terms[k] = (m.weights[k] > 0.0 ? std::log(m.weights[k])
                                       : -std::numeric_limits<double>::infinity()) +
                   gaussian_log_density(x, m.means[k], m.covariances[k]);
    }
    return terms;
}

void check_data(const std::vector<Eigen::VectorXd>& data) {
    require(!data.empty(), "no data points");
    const auto dim = data[0].size();
    require(dim > 0, "data points must have dimension >= 1");
    for (const auto& x : data) {
        require(x.size() == dim, "data points differ in dimension");
        require(x.allFinite(), "non-finite data point");
    }
}

// k-means++ seeding: first centre uniform, each further centre with
// probability proportional to squared distance from the nearest chosen one.
std::vector<std::size_t> kmeanspp_centers(const std::vector<Eigen::VectorXd>& data,
                                          std::size_t k, Rng& rng) {
    std::vector<std::size_t> centers;
    centers.push_back(rng.next_index(data.size()));
    std::vector<double> d2(data.size());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c : centers) {
                best = std::min(best, (data[i] - data[c]).squaredNorm());
            }
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.next_double() * total;
            double run = 0.0;
            pick = data.size() - 1;
            for (std::size_t i = 0; i < data.size(); ++i) {
                run += d2[i];
                if (r < run) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.next_index(data.size());
        }
        centers.push_back(pick);
    }
    return centers;
}

Eigen::MatrixXd global_covariance(const std::vector<Eigen::VectorXd>& data, double floor) {
    const auto dim = data[0].size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& x : data) mean += x;
    mean /= static_cast<double>(data.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& x : data) {
        const Eigen::VectorXd d = x - mean;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(data.size());
    apply_covariance_floor(cov, floor);
    return cov;
}

MixtureDensity initial_mixture(const std::vector<Eigen::VectorXd>& data,
                               const GmmFitConfig& config, double floor, Rng& rng) {
    MixtureDensity m;
    const std::size_t k = config.components;
    std::vector<std::size_t> centers;
    if (config.init == GmmInit::kmeanspp) {
        centers = kmeanspp_centers(data, k, rng);
    } else {
        centers.reserve(k);
        for (std::size_t j = 0; j < k; ++j) centers.push_back(rng.next_index(data.size()));
    }
    const Eigen::MatrixXd cov = global_covariance(data, floor);
    m.weights.assign(k, 1.0 / static_cast<double>(k));
    for (std::size_t j = 0; j < k; ++j) {
        m.means.push_back(data[centers[j]]);
        m.covariances.push_back(cov);
    }
    return m;
}

}  // namespace

void validate(const MixtureDensity& m) {
    require(m.component_count() >= 1, "mixture has no components");
    require(m.means.size() == m.component_count() && m.covariances.size() == m.component_count(),
            "mixture weight/mean/covariance counts disagree");
    const auto dim = m.means[0].size();
    require(dim >= 1, "mixture dimension must be >= 1");
    double sum = 0.0;
    for (std::size_t k = 0; k < m.component_count(); ++k) {
        require(m.weights[k] >= 0.0 && std::isfinite(m.weights[k]), "mixture weight out of range");
        sum += m.weights[k];
        require(m.means[k].size() == dim, "mixture means differ in dimension");
        require(m.means[k].allFinite(), "non-finite mixture mean");
        require(m.covariances[k].rows() == dim && m.covariances[k].cols() == dim,
                "covariance shape does not match dimension");
        require(m.covariances[k].allFinite(), "non-finite covariance entry");
        require(m.covariances[k].isApprox(m.covariances[k].transpose(), 1e-12),
                "covariance is not symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(m.covariances[k]);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument("covariance of component " + std::to_string(k) +
                                        " is not positive definite");
        }
    }
    require(std::abs(sum - 1.0) <= 1e-9, "mixture weights do not sum to 1");
}

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw NumericError("covariance is not positive definite");
    }
    double log_det = 0.0;
    const auto& l = llt.matrixL();
    for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
    const Eigen::VectorXd z = llt.matrixL().solve(x - mean);
    return -0.5 * (static_cast<double>(cov.rows()) * kLogTwoPi + log_det + z.squaredNorm());
}

double log_density(const MixtureDensity& m, const Eigen::VectorXd& x) {
    require(x.size() == static_cast<Eigen::Index>(m.dimension()), "point dimension mismatch");
    return log_sum_exp(component_log_terms(m, x));
}

double density(const MixtureDensity& m, const Eigen::VectorXd& x) {
    return std::exp(log_density(m, x));
}

Eigen::VectorXd responsibilities(const MixtureDensity& m, const Eigen::VectorXd& x) {
    require(x.size() == static_cast<Eigen::Index>(m.dimension()), "point dimension mismatch");
    const auto terms = component_log_terms(m, x);
    const double total = log_sum_exp(terms);
    Eigen::VectorXd r(static_cast<Eigen::Index>(terms.size()));
    if (!std::isfinite(total)) {
        // Every component assigns zero density; fall back to the weights.
        for (std::size_t k = 0; k < terms.size(); ++k) r(static_cast<Eigen::Index>(k)) = m.weights[k];
        return r;
    }
    for (std::size_t k = 0; k < terms.size(); ++k) {
        r(static_cast<Eigen::Index>(k)) = std::exp(terms[k] - total);
    }
    return r;
}

double covariance_floor(const std::vector<Eigen::VectorXd>& data) {
    check_data(data);
    const auto dim = data[0].size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& x : data) mean += x;
    mean /= static_cast<double>(data.size());
    double var_sum = 0.0;
    for (const auto& x : data) var_sum += (x - mean).squaredNorm();
    const double mean_var = var_sum / (static_cast<double>(data.size()) * static_cast<double>(dim));
    const double floor = 1e-6 * mean_var;
    // Degenerate data (all points identical) still needs a usable floor.
    return floor > 0.0 ? floor : 1e-12;
}

bool apply_covariance_floor(Eigen::MatrixXd& cov, double floor) {
    cov = 0.5 * (cov + cov.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw NumericError("eigenvalue computation failed while flooring a covariance");
    }
    const double lambda_min = es.eigenvalues().minCoeff();
    if (lambda_min >= floor) return false;
    const double bump = floor + std::max(0.0, -lambda_min);
    cov += bump * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    return true;
}

MixtureDensity fit_gmm(const std::vector<Eigen::VectorXd>& data, const GmmFitConfig& config,
                       GmmFitReport* report) {
    check_data(data);
    require(config.components >= 1, "component count must be >= 1");
    require(config.components <= data.size(),
            "component count exceeds the number of data points");
    require(config.tolerance > 0.0, "tolerance must be positive");
    require(config.max_iterations >= 1, "max_iterations must be >= 1");

    GmmFitReport local;
    GmmFitReport& rep = report ? *report : local;
    rep = GmmFitReport{};

    const std::size_t n = data.size();
    const std::size_t kc = config.components;
    const double floor = covariance_floor(data);
    Rng rng(config.seed);
    MixtureDensity m = initial_mixture(data, config, floor, rng);

    Eigen::MatrixXd resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kc));
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        // E step: responsibilities and the log-likelihood of the current fit.
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto terms = component_log_terms(m, data[i]);
            const double total = log_sum_exp(terms);
            if (!std::isfinite(total)) {
                throw NumericError("log-likelihood became non-finite during fitting");
            }
            ll += total;
            for (std::size_t k = 0; k < kc; ++k) {
                resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                    std::exp(terms[k] - total);
            }
        }
        rep.trace.push_back(ll);

        if (iter >= 1) {
            const double denom = std::max(std::abs(prev_ll), 1e-300);
            if (std::abs(ll - prev_ll) / denom < config.tolerance) {
                rep.converged = true;
                break;
            }
        }
        prev_ll = ll;

        // M step: weighted means first, then covariances about the new means.
        for (std::size_t k = 0; k < kc; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            const double nk = resp.col(kk).sum();
            if (nk < 1e-10) {
                rep.events.push_back("component " + std::to_string(k) +
                                     " starved at iteration " + std::to_string(iter) +
                                     "; parameters frozen");
                continue;
            }
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(m.means[k].size());
            for (std::size_t i = 0; i < n; ++i) {
                mu += resp(static_cast<Eigen::Index>(i), kk) * data[i];
            }
            mu /= nk;
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mu.size(), mu.size());
            for (std::size_t i = 0; i < n; ++i) {
                const Eigen::VectorXd d = data[i] - mu;
                cov += resp(static_cast<Eigen::Index>(i), kk) * (d * d.transpose());
            }
            cov /= nk;
            if (apply_covariance_floor(cov, floor)) ++rep.covariance_floor_hits;
            m.weights[k] = nk / static_cast<double>(n);
            m.means[k] = mu;
            m.covariances[k] = cov;
        }
        double wsum = 0.0;
        for (double w : m.weights) wsum += w;
        for (double& w : m.weights) w /= wsum;
        ++rep.iterations;
    }

    validate(m);
    return m;
}

}  // namespace pipehmm

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pipehmm {

// Full-covariance Gaussian mixture over column vectors of fixed dimension.
struct MixtureDensity {
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covariances;

    std::size_t component_count() const { return weights.size(); }
    std::size_t dimension() const { return means.empty() ? 0 : static_cast<std::size_t>(means[0].size()); }
};

void validate(const MixtureDensity& m);

double log_density(const MixtureDensity& m, const Eigen::VectorXd& x);
double density(const MixtureDensity& m, const Eigen::VectorXd& x);

// Posterior component probabilities p(k | x); rows sum to 1.
Eigen::VectorXd responsibilities(const MixtureDensity& m, const Eigen::VectorXd& x);

// log N(x; mean, cov) via Cholesky. Throws NumericError if cov is not
// positive definite.
double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov);

enum class GmmInit { kmeanspp, random_points };

struct GmmFitConfig {
    std::size_t components = 3;
    double tolerance = 1e-6;
    std::size_t max_iterations = 200;
    std::uint64_t seed = 0;
    GmmInit init = GmmInit::kmeanspp;
};

struct GmmFitReport {
    std::size_t iterations = 0;          // M-steps performed
    std::vector<double> trace;           // log-likelihood before each M-step
    bool converged = false;
    std::size_t covariance_floor_hits = 0;
    std::vector<std::string> events;
};

// Minimum admissible covariance eigenvalue for this data set:
// 1e-6 times the mean per-dimension variance.
double covariance_floor(const std::vector<Eigen::VectorXd>& data);

// Adds (floor + max(0, -lambda_min)) * I whenever the smallest eigenvalue of
// cov drops below floor. Returns true if the matrix was adjusted.
bool apply_covariance_floor(Eigen::MatrixXd& cov, double floor);

MixtureDensity fit_gmm(const std::vector<Eigen::VectorXd>& data, const GmmFitConfig& config,
                       GmmFitReport* report = nullptr);

}  // namespace pipehmm

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pipehmm/errors.hpp"
#include "pipehmm/hmm.hpp"
#include "pipehmm/rng.hpp"
#include "pipehmm/synth.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

using namespace pipehmm;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

MixtureDensity single_gaussian(const Eigen::VectorXd& mean, double sd) {
    MixtureDensity m;
    m.weights = {1.0};
    m.means = {mean};
    m.covariances = {sd * sd *
                     Eigen::MatrixXd::Identity(mean.size(), mean.size())};
    return m;
}

// Small random ergodic model plus a sampled observation sequence, sized so
// the exhaustive evaluator stays cheap.
HmmModel random_model(Rng& rng, std::size_t n_states, std::size_t n_components) {
    HmmModel model;
    model.topology = Topology::ergodic;
    model.pi.resize(static_cast<Eigen::Index>(n_states));
    model.A.resize(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_states));
    for (std::size_t i = 0; i < n_states; ++i) {
        model.pi(static_cast<Eigen::Index>(i)) = 0.2 + rng.next_double();
        for (std::size_t j = 0; j < n_states; ++j) {
            model.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                0.1 + rng.next_double();
        }
        model.state_names.push_back("s" + std::to_string(i));
    }
    model.pi /= model.pi.sum();
    for (Eigen::Index i = 0; i < model.A.rows(); ++i) {
        model.A.row(i) /= model.A.row(i).sum();
    }
    for (std::size_t i = 0; i < n_states; ++i) {
        MixtureDensity m;
        for (std::size_t k = 0; k < n_components; ++k) {
            m.weights.push_back(0.3 + rng.next_double());
            m.means.push_back(vec2(4.0 * rng.next_normal(), 4.0 * rng.next_normal()));
            Eigen::MatrixXd l(2, 2);
            l << 0.6 + rng.next_double(), 0.0, 0.5 * rng.next_normal(),
                0.6 + rng.next_double();
            m.covariances.push_back(l * l.transpose());
        }
        double sum = 0.0;
        for (double w : m.weights) sum += w;
        for (double& w : m.weights) w /= sum;
        model.emissions.push_back(m);
    }
    validate(model);
    return model;
}

}  // namespace

TEST_CASE("presets carry the documented structure") {
    const HmmModel leak = make_preset("leak2_lr");
    CHECK(leak.topology == Topology::left_to_right);
    CHECK(leak.pi(0) == 1.0);
    CHECK(leak.pi(1) == 0.0);
    CHECK(leak.A(0, 0) == 0.5);
    CHECK(leak.A(0, 1) == 0.5);
    CHECK(leak.A(1, 0) == 0.0);
    CHECK(leak.A(1, 1) == 1.0);
    CHECK(leak.state_names.size() == 2);

    const HmmModel loc = make_preset("location3_ergodic");
    CHECK(loc.topology == Topology::ergodic);
    CHECK(loc.pi(0) == 1.0);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(loc.A(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }

    const HmmModel depth = make_preset("depth3_lr");
    CHECK(depth.topology == Topology::left_to_right);
    CHECK(depth.A(0, 0) == 0.9);
    CHECK(depth.A(0, 1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(depth.A(0, 2) == 0.0);
    CHECK(depth.A(1, 0) == 0.0);
    CHECK(depth.A(2, 2) == 1.0);

    CHECK_THROWS_AS(make_preset("nonsense"), std::invalid_argument);
}

TEST_CASE("structure validation catches malformed models") {
    HmmModel m = make_preset("depth3_lr");
    CHECK_NOTHROW(validate_structure(m));

    HmmModel bad_pi = m;
    bad_pi.pi(0) = 0.7;
    CHECK_THROWS_AS(validate_structure(bad_pi), std::invalid_argument);

    HmmModel bad_row = m;
    bad_row.A(0, 0) = 0.95;
    CHECK_THROWS_AS(validate_structure(bad_row), std::invalid_argument);

    HmmModel back_edge = m;
    back_edge.A(1, 0) = 0.1;
    back_edge.A(1, 1) = 0.8;
    CHECK_THROWS_AS(validate_structure(back_edge), std::invalid_argument);

    HmmModel negative = m;
    negative.A(0, 0) = 1.1;
    negative.A(0, 1) = -0.1;
    CHECK_THROWS_AS(validate_structure(negative), std::invalid_argument);
}

TEST_CASE("a one-state chain reduces to the plain mixture likelihood") {
    HmmModel model;
    model.topology = Topology::ergodic;
    model.pi = Eigen::VectorXd::Ones(1);
    model.A = Eigen::MatrixXd::Ones(1, 1);
    model.emissions = {single_gaussian(vec2(0.5, -0.5), 1.3)};
    model.state_names = {"only"};
    validate(model);

    Rng rng(55);
    ObservationSequence obs;
    for (int t = 0; t < 20; ++t) {
        obs.observations.push_back(FeatureVector{rng.next_normal(), rng.next_normal()});
    }

    double direct = 0.0;
    for (const auto& p : to_points(obs)) direct += log_density(model.emissions[0], p);

    CHECK(std::abs(sequence_log_likelihood(model, obs) - direct) <= 1e-12 * std::abs(direct));

    const PosteriorStats stats = forward_backward(model, obs);
    CHECK(std::abs(stats.log_likelihood - direct) <= 1e-12 * std::abs(direct));
    for (Eigen::Index t = 0; t < stats.gamma.rows(); ++t) CHECK(stats.gamma(t, 0) == 1.0);

    const ViterbiResult vit = viterbi(model, obs);
    CHECK(std::abs(vit.log_prob - direct) <= 1e-12 * std::abs(direct));
    for (std::size_t s : vit.path) CHECK(s == 0);
    for (std::size_t s : posterior_decode(model, obs)) CHECK(s == 0);
}

TEST_CASE("identity transitions pin the chain to its first state") {
    HmmModel model;
    model.topology = Topology::ergodic;
    model.pi = vec2(1.0, 0.0);
    model.A = Eigen::MatrixXd::Identity(2, 2);
    model.emissions = {single_gaussian(vec2(0.0, 0.0), 1.0),
                       single_gaussian(vec2(3.0, 3.0), 1.0)};
    model.state_names = {"a", "b"};

    Rng rng(8);
    ObservationSequence obs;
    for (int t = 0; t < 12; ++t) {
        obs.observations.push_back(FeatureVector{rng.next_normal(), rng.next_normal()});
    }

    const PosteriorStats stats = forward_backward(model, obs);
    for (Eigen::Index t = 0; t < stats.gamma.rows(); ++t) {
        CHECK(stats.gamma(t, 0) == 1.0);
        CHECK(stats.gamma(t, 1) == 0.0);
    }
    for (std::size_t s : viterbi(model, obs).path) CHECK(s == 0);

    model.pi = vec2(0.0, 1.0);
    for (std::size_t s : viterbi(model, obs).path) CHECK(s == 1);
}

TEST_CASE("forward-backward matches exhaustive evaluation") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.next_index(3);          // 2..4 states
        const std::size_t t_len = 2 + rng.next_index(7);      // 2..8 steps
        const std::size_t k = 1 + rng.next_index(2);
        const HmmModel model = random_model(rng, n, k);
        const ObservationSequence obs =
            sample_from_model(model, t_len, 900 + static_cast<std::uint64_t>(trial)).obs;

        const BruteForceResult bf = brute_force_evaluate(model, obs);
        const PosteriorStats stats = forward_backward(model, obs);

        CHECK(std::abs(stats.log_likelihood - bf.log_likelihood) <= 1e-9);
        CHECK((stats.gamma - bf.gamma).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("viterbi agrees with exhaustive search and never beats the total") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + rng.next_index(3);
        const std::size_t t_len = 2 + rng.next_index(6);
        const HmmModel model = random_model(rng, n, 1);
        const ObservationSequence obs =
            sample_from_model(model, t_len, 300 + static_cast<std::uint64_t>(trial)).obs;

        const BruteForceResult bf = brute_force_evaluate(model, obs);
        const ViterbiResult vit = viterbi(model, obs);

        CHECK(std::abs(vit.log_prob - bf.best_log_prob) <= 1e-9);
        CHECK(vit.path == bf.best_path);
        CHECK(vit.log_prob <= sequence_log_likelihood(model, obs) + 1e-9);
    }
}

TEST_CASE("shifting emissions per step leaves the viterbi path alone") {
    Rng rng(99);
    const std::size_t n = 3, t_len = 10;
    const HmmModel model = random_model(rng, n, 1);
    const ObservationSequence obs = sample_from_model(model, t_len, 5).obs;

    const Eigen::MatrixXd log_b = emission_log_matrix(model, obs);
    const ViterbiResult base = viterbi_from_log_emissions(model.pi, model.A, log_b);

    Eigen::MatrixXd shifted = log_b;
    double total_shift = 0.0;
    for (Eigen::Index t = 0; t < shifted.rows(); ++t) {
        const double c = 10.0 * rng.next_normal();
        shifted.row(t).array() += c;
        total_shift += c;
    }
    const ViterbiResult moved = viterbi_from_log_emissions(model.pi, model.A, shifted);

    CHECK(moved.path == base.path);
    CHECK(std::abs(moved.log_prob - (base.log_prob + total_shift)) <=
          1e-9 * std::max(1.0, std::abs(base.log_prob)));
}

TEST_CASE("posteriors are proper distributions") {
    Rng rng(123);
    const HmmModel model = random_model(rng, 3, 2);
    const ObservationSequence obs = sample_from_model(model, 40, 17).obs;
    const PosteriorStats stats = forward_backward(model, obs);

    for (Eigen::Index t = 0; t < stats.gamma.rows(); ++t) {
        CHECK(std::abs(stats.gamma.row(t).sum() - 1.0) <= 1e-9);
        CHECK(stats.gamma.row(t).minCoeff() >= 0.0);
    }
    REQUIRE(stats.xi.size() == obs.length() - 1);
    for (std::size_t t = 0; t < stats.xi.size(); ++t) {
        CHECK(std::abs(stats.xi[t].sum() - 1.0) <= 1e-9);
        for (Eigen::Index i = 0; i < 3; ++i) {
            CHECK(std::abs(stats.xi[t].row(i).sum() -
                           stats.gamma(static_cast<Eigen::Index>(t), i)) <= 1e-9);
        }
    }
}

TEST_CASE("left-to-right viterbi paths never move backward") {
    HmmModel model = make_preset("depth3_lr");
    model.emissions = {single_gaussian(vec2(0.0, 0.0), 1.0),
                       single_gaussian(vec2(2.0, 2.0), 1.0),
                       single_gaussian(vec2(4.0, 0.0), 1.0)};
    validate(model);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ObservationSequence obs = sample_from_model(model, 30, seed).obs;
        const auto path = viterbi(model, obs).path;
        for (std::size_t t = 1; t < path.size(); ++t) {
            CHECK(path[t] >= path[t - 1]);
            CHECK(path[t] <= path[t - 1] + 1);
        }
    }
}

TEST_CASE("training raises likelihood and keeps structural zeros") {
    HmmModel truth = make_preset("depth3_lr");
    truth.emissions = {single_gaussian(vec2(0.0, 0.0), 1.0),
                       single_gaussian(vec2(5.0, 5.0), 1.0),
                       single_gaussian(vec2(10.0, 0.0), 1.0)};

    std::vector<ObservationSequence> seqs;
    for (std::uint64_t s = 0; s < 20; ++s) seqs.push_back(sample_from_model(truth, 30, s).obs);

    HmmModel init = make_preset("depth3_lr");
    init.emissions = {single_gaussian(vec2(0.5, -0.5), 2.0),
                      single_gaussian(vec2(4.0, 6.0), 2.0),
                      single_gaussian(vec2(11.0, 1.0), 2.0)};

    TrainConfig cfg;
    cfg.max_iterations = 40;
    const auto [trained, report] = baum_welch(init, seqs, cfg);

    REQUIRE(report.trace.size() >= 2);
    for (std::size_t i = 0; i + 1 < report.trace.size(); ++i) {
        CHECK(report.trace[i + 1] >=
              report.trace[i] - 1e-8 * std::max(1.0, std::abs(report.trace[i])));
    }

    CHECK(trained.A(0, 2) == 0.0);
    CHECK(trained.A(1, 0) == 0.0);
    CHECK(trained.A(2, 0) == 0.0);
    CHECK(trained.A(2, 1) == 0.0);
    CHECK(trained.pi(1) == 0.0);
    CHECK(trained.pi(2) == 0.0);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(std::abs(trained.A.row(i).sum() - 1.0) <= 1e-9);
    }
    CHECK_NOTHROW(validate(trained));
}

TEST_CASE("a repeated single observation converges immediately") {
    HmmModel model;
    model.topology = Topology::ergodic;
    model.pi = Eigen::VectorXd::Ones(1);
    model.A = Eigen::MatrixXd::Ones(1, 1);
    model.emissions = {single_gaussian(vec2(0.0, 0.0), 1.0)};
    model.state_names = {"only"};

    ObservationSequence obs;
    for (int t = 0; t < 10; ++t) obs.observations.push_back(FeatureVector{0.7, -0.2});

    const auto [trained, report] = baum_welch(model, {obs}, TrainConfig{});
    CHECK(report.converged);
    CHECK(report.iterations <= 2);
    CHECK(std::abs(trained.emissions[0].means[0](0) - 0.7) <= 1e-9);
    CHECK(std::abs(trained.emissions[0].means[0](1) + 0.2) <= 1e-9);
}

TEST_CASE("length-one sequences leave the transition matrix alone") {
    Rng rng(61);
    const HmmModel model = random_model(rng, 2, 1);

    ObservationSequence a, b;
    a.observations.push_back(FeatureVector{0.1, 0.2});
    b.observations.push_back(FeatureVector{-0.4, 0.9});

    TrainConfig cfg;
    cfg.max_iterations = 3;
    const auto [trained, report] = baum_welch(model, {a, b}, cfg);
    CHECK((trained.A - model.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(trained.pi.sum() - 1.0) <= 1e-12);
}

TEST_CASE("training rejects bad input and trains from sampled data") {
    Rng rng(62);
    const HmmModel model = random_model(rng, 2, 1);
    CHECK_THROWS_AS(baum_welch(model, {}, TrainConfig{}), std::invalid_argument);

    TrainConfig bad;
    bad.tolerance = 0.0;
    ObservationSequence obs = sample_from_model(model, 5, 3).obs;
    CHECK_THROWS_AS(baum_welch(model, {obs}, bad), std::invalid_argument);
}

TEST_CASE("impossible observations raise a numeric error") {
    HmmModel model;
    model.topology = Topology::ergodic;
    model.pi = Eigen::VectorXd::Ones(1);
    model.A = Eigen::MatrixXd::Ones(1, 1);
    model.emissions = {single_gaussian(vec2(0.0, 0.0), 1.0)};
    model.state_names = {"only"};

    ObservationSequence obs;
    obs.observations.push_back(FeatureVector{1e155, 0.0});
    CHECK_THROWS_AS(forward_backward(model, obs), NumericError);
    CHECK_THROWS_AS(viterbi(model, obs), NumericError);
}

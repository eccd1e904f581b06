#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pipehmm/errors.hpp"
#include "pipehmm/hmm.hpp"
#include "pipehmm/model_io.hpp"
#include "pipehmm/rng.hpp"

#include <filesystem>
#include <sstream>
#include <string>

#include <Eigen/Dense>

namespace fs = std::filesystem;
using namespace pipehmm;

namespace {

MixtureDensity random_mixture(std::uint64_t seed, std::size_t k) {
    Rng rng(seed);
    MixtureDensity m;
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        m.weights.push_back(0.2 + rng.next_double());
        sum += m.weights.back();
        Eigen::VectorXd mu(2);
        mu << 5.0 * rng.next_normal(), 5.0 * rng.next_normal();
        m.means.push_back(mu);
        Eigen::MatrixXd l(2, 2);
        l << 0.7 + rng.next_double(), 0.0, 0.4 * rng.next_normal(), 0.7 + rng.next_double();
        m.covariances.push_back(l * l.transpose());
    }
    for (double& w : m.weights) w /= sum;
    return m;
}

HmmModel fitted_depth_model() {
    HmmModel model = make_preset("depth3_lr");
    for (std::uint64_t i = 0; i < 3; ++i) model.emissions.push_back(random_mixture(40 + i, 2));
    validate(model);
    return model;
}

}  // namespace

TEST_CASE("mixtures round-trip bit for bit") {
    const MixtureDensity m = random_mixture(7, 3);
    std::stringstream buf;
    save_mixture(buf, m);
    const MixtureDensity back = load_mixture(buf);

    REQUIRE(back.component_count() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(back.weights[k] == m.weights[k]);
        CHECK((back.means[k] - m.means[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.covariances[k] - m.covariances[k]).cwiseAbs().maxCoeff() == 0.0);
    }

    // Serializing the reloaded mixture reproduces the text exactly.
    std::stringstream again;
    save_mixture(again, back);
    std::stringstream first;
    save_mixture(first, m);
    CHECK(again.str() == first.str());
}

TEST_CASE("models round-trip with topology, names, and exact zeros") {
    const HmmModel model = fitted_depth_model();
    const fs::path file = fs::temp_directory_path() / "pipehmm_model_io.txt";
    save_model(file, model);
    const HmmModel back = load_model(file);

    CHECK(back.topology == Topology::left_to_right);
    CHECK(back.state_names == model.state_names);
    CHECK((back.pi - model.pi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.A - model.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.A(1, 0) == 0.0);
    CHECK(back.A(2, 0) == 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(back.emissions[i].weights[k] == model.emissions[i].weights[k]);
            CHECK((back.emissions[i].means[k] - model.emissions[i].means[k])
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
            CHECK((back.emissions[i].covariances[k] - model.emissions[i].covariances[k])
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }
    }
    fs::remove(file);
}

TEST_CASE("damaged model files are rejected") {
    const HmmModel model = fitted_depth_model();
    std::stringstream buf;
    save_model(buf, model);
    const std::string text = buf.str();

    {
        std::stringstream truncated(text.substr(0, text.size() / 2));
        CHECK_THROWS_AS(load_model(truncated), IoError);
    }
    {
        std::stringstream wrong_magic("pipehmm-nonsense v1\n" + text);
        CHECK_THROWS_AS(load_model(wrong_magic), IoError);
    }
    {
        std::string garbled = text;
        const auto pos = garbled.find("pi ");
        REQUIRE(pos != std::string::npos);
        garbled.replace(pos, 4, "pi x");
        std::stringstream bad(garbled);
        CHECK_THROWS_AS(load_model(bad), IoError);
    }
    {
        // Structural violations surface as IoError too: force a back edge.
        std::string edited = text;
        const auto pos = edited.find("A 1 ");
        REQUIRE(pos != std::string::npos);
        const auto line_end = edited.find('\n', pos);
        edited.replace(pos, line_end - pos, "A 1 0.5 0.25 0.25");
        std::stringstream bad(edited);
        CHECK_THROWS_AS(load_model(bad), IoError);
    }
    CHECK_THROWS_AS(load_model(fs::path("/nonexistent/pipehmm_model.txt")), IoError);
}

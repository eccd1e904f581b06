#include "pipehmm/model_io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pipehmm/errors.hpp"
#include "pipehmm/signal_features.hpp"

namespace pipehmm {

namespace {

[[noreturn]] void bad(const std::string& why) {
    throw IoError("model file: " + why);
}

std::string next_token(std::istream& in, const std::string& what) {
    std::string tok;
    if (!(in >> tok)) bad("unexpected end of input, expected " + what);
    return tok;
}

void expect(std::istream& in, const std::string& literal) {
    const std::string tok = next_token(in, "'" + literal + "'");
    if (tok != literal) bad("expected '" + literal + "', got '" + tok + "'");
}

double next_double(std::istream& in, const std::string& what) {
    const std::string tok = next_token(in, what);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
        bad("bad number for " + what + ": '" + tok + "'");
    }
    return v;
}

std::size_t next_count(std::istream& in, const std::string& what) {
    const std::string tok = next_token(in, what);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') bad("bad count for " + what + ": '" + tok + "'");
    return static_cast<std::size_t>(v);
}

std::size_t next_index(std::istream& in, const std::string& what, std::size_t bound) {
    const std::size_t v = next_count(in, what);
    if (v >= bound) bad(what + " index " + std::to_string(v) + " out of range");
    return v;
}

}  // namespace

void save_mixture(std::ostream& out, const MixtureDensity& mix) {
    validate(mix);
    const std::size_t k_count = mix.component_count();
    const std::size_t dim = mix.dimension();
    out << "pipehmm-mixture v1\n";
    out << "components " << k_count << '\n';
    out << "dim " << dim << '\n';
    for (std::size_t k = 0; k < k_count; ++k) {
        out << "weight " << k << ' ' << format_double(mix.weights[k]) << '\n';
        out << "mean " << k;
        for (std::size_t d = 0; d < dim; ++d) {
            out << ' ' << format_double(mix.means[k](static_cast<Eigen::Index>(d)));
        }
        out << '\n';
        out << "cov " << k;
        for (std::size_t r = 0; r < dim; ++r) {
            for (std::size_t c = 0; c < dim; ++c) {
                out << ' '
                    << format_double(mix.covariances[k](static_cast<Eigen::Index>(r),
                                                        static_cast<Eigen::Index>(c)));
            }
        }
        out << '\n';
    }
    out << "end-mixture\n";
}

MixtureDensity load_mixture(std::istream& in) {
    expect(in, "pipehmm-mixture");
    expect(in, "v1");
    expect(in, "components");
    const std::size_t k_count = next_count(in, "components");
    if (k_count < 1) bad("mixture needs at least one component");
    expect(in, "dim");
    const std::size_t dim = next_count(in, "dim");
    if (dim < 1) bad("mixture dimension must be >= 1");

    MixtureDensity mix;
    mix.weights.assign(k_count, 0.0);
    mix.means.assign(k_count, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)));
    mix.covariances.assign(k_count,
                           Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                 static_cast<Eigen::Index>(dim)));
    for (std::size_t k = 0; k < k_count; ++k) {
        expect(in, "weight");
        std::size_t idx = next_index(in, "weight", k_count);
        mix.weights[idx] = next_double(in, "weight value");
        expect(in, "mean");
        idx = next_index(in, "mean", k_count);
        for (std::size_t d = 0; d < dim; ++d) {
            mix.means[idx](static_cast<Eigen::Index>(d)) = next_double(in, "mean value");
        }
        expect(in, "cov");
        idx = next_index(in, "cov", k_count);
        for (std::size_t r = 0; r < dim; ++r) {
            for (std::size_t c = 0; c < dim; ++c) {
                mix.covariances[idx](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    next_double(in, "covariance value");
            }
        }
    }
    expect(in, "end-mixture");
    try {
        validate(mix);
    } catch (const std::invalid_argument& e) {
        bad(e.what());
    }
    return mix;
}

void save_model(std::ostream& out, const HmmModel& model) {
    validate(model);
    const std::size_t n = model.state_count();
    out << "pipehmm-model v1\n";
    out << "topology " << to_string(model.topology) << '\n';
    out << "states " << n << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << "name " << i << ' ' << model.state_names[i] << '\n';
    }
    out << "pi";
    for (std::size_t i = 0; i < n; ++i) {
        out << ' ' << format_double(model.pi(static_cast<Eigen::Index>(i)));
    }
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << "A " << i;
        for (std::size_t j = 0; j < n; ++j) {
            out << ' '
                << format_double(model.A(static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < n; ++i) {
        out << "emission " << i << '\n';
        save_mixture(out, model.emissions[i]);
    }
    out << "end-model\n";
}

HmmModel load_model(std::istream& in) {
    expect(in, "pipehmm-model");
    expect(in, "v1");
    expect(in, "topology");
    HmmModel model;
    try {
        model.topology = topology_from_string(next_token(in, "topology kind"));
    } catch (const std::invalid_argument& e) {
        bad(e.what());
    }
    expect(in, "states");
    const std::size_t n = next_count(in, "states");
    if (n < 1) bad("model needs at least one state");

    model.state_names.assign(n, "");
    for (std::size_t i = 0; i < n; ++i) {
        expect(in, "name");
        const std::size_t idx = next_index(in, "name", n);
        model.state_names[idx] = next_token(in, "state name");
    }
    expect(in, "pi");
    model.pi.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        model.pi(static_cast<Eigen::Index>(i)) = next_double(in, "pi value");
    }
    model.A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        expect(in, "A");
        const std::size_t idx = next_index(in, "A row", n);
        for (std::size_t j = 0; j < n; ++j) {
            model.A(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(j)) =
                next_double(in, "transition value");
        }
    }
    model.emissions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        expect(in, "emission");
        const std::size_t idx = next_index(in, "emission", n);
        model.emissions[idx] = load_mixture(in);
    }
    expect(in, "end-model");
    try {
        validate(model);
    } catch (const std::invalid_argument& e) {
        bad(e.what());
    }
    return model;
}

void save_model(const std::filesystem::path& file, const HmmModel& model) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write model file: " + file.string());
    save_model(out, model);
    if (!out) throw IoError("write failure on " + file.string());
}

HmmModel load_model(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open model file: " + file.string());
    return load_model(in);
}

}  // namespace pipehmm

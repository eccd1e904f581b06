#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pipehmm/config.hpp"
#include "pipehmm/datastore.hpp"
#include "pipehmm/errors.hpp"
#include "pipehmm/gmm.hpp"
#include "pipehmm/hmm.hpp"
#include "pipehmm/model_io.hpp"
#include "pipehmm/rng.hpp"
#include "pipehmm/signal_features.hpp"
#include "pipehmm/synth.hpp"

namespace fs = std::filesystem;
using namespace pipehmm;

namespace {

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string record_file_name(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "wave_%04zu.csv", index);
    return buf;
}

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string scenario_file;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& args) {
    SignalScenario scn = read_scenario_file(args.scenario_file);
    if (args.seed) scn.seed = *args.seed;

    const fs::path out(args.out_dir);
    if (!fs::exists(out.parent_path().empty() ? fs::path(".") : out.parent_path())) {
        throw IoError("output parent does not exist: " + out.parent_path().string());
    }
    const GeneratedSet set = generate_waveforms(scn);

    make_dir(out);
    make_dir(out / "waveforms");
    write_waveform_csv(out / "baseline.csv", set.baseline);

    Manifest manifest;
    manifest.metadata.emplace_back("seed", std::to_string(scn.seed));
    manifest.metadata.emplace_back("generator", Rng::kIdentity);
    manifest.metadata.emplace_back("source", "scenario " + scn.name);
    std::string joined;
    for (const auto& st : scn.states) {
        if (!joined.empty()) joined += ',';
        joined += st.label;
    }
    manifest.metadata.emplace_back("labels", joined);
    for (std::size_t i = 0; i < set.waveforms.size(); ++i) {
        const std::string name = record_file_name(i);
        write_waveform_csv(out / "waveforms" / name, set.waveforms[i]);
        manifest.entries.emplace_back(name, set.labels[i]);
    }
    write_manifest(out / "waveforms" / "manifest.txt", manifest);

    std::cout << "simulate: wrote " << set.waveforms.size() << " records ("
              << set.baseline.samples.size() << " samples each) to " << args.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------- features

struct FeatureArgs {
    std::string waveform_dir;
    std::string baseline_file;
    std::string out_dir;
    std::optional<std::string> config_file;
    std::optional<std::size_t> window_length;
    std::optional<std::size_t> window_stride;
    std::optional<double> f_start;
    std::optional<double> f_stop;
};

template <typename T, typename Get>
T resolve(const std::optional<T>& flag, const ConfigSection* section, const std::string& key,
          Get getter, const std::string& what) {
    if (flag) return *flag;
    if (section && section->has(key)) return getter(*section, key);
    throw std::invalid_argument(what + " not given (flag or config key '" + key + "')");
}

int run_features(const FeatureArgs& args) {
    const ConfigSection* section = nullptr;
    ConfigDoc doc;
    if (args.config_file) {
        doc = ConfigDoc::parse_file(*args.config_file);
        section = doc.find("features");
    }
    auto get_count = [](const ConfigSection& s, const std::string& k) {
        return static_cast<std::size_t>(s.get_u64(k));
    };
    auto get_real = [](const ConfigSection& s, const std::string& k) { return s.get_double(k); };

    const auto length = resolve(args.window_length, section, "window_length", get_count,
                                "window length");
    const auto stride = resolve(args.window_stride, section, "window_stride", get_count,
                                "window stride");
    FrequencyWindow window;
    window.f_start_hz = resolve(args.f_start, section, "f_start_hz", get_real, "window start");
    window.f_stop_hz = resolve(args.f_stop, section, "f_stop_hz", get_real, "window stop");

    const Waveform baseline = read_waveform_csv(args.baseline_file);
    const auto records = load_waveform_dir(args.waveform_dir, "csv");
    if (records.empty()) throw std::invalid_argument("no waveform records in " + args.waveform_dir);

    // Label order comes from the manifest metadata when present so state
    // indexing matches the scenario declaration, not filename order.
    const Manifest manifest = read_manifest(fs::path(args.waveform_dir) / "manifest.txt");
    LabeledDataset data;
    for (const auto& [k, v] : manifest.metadata) {
        if (k == "seed") data.metadata.seed = std::stoull(v);
        if (k == "generator") data.metadata.generator = v;
        if (k == "source") data.metadata.source = v;
        if (k == "labels" && !v.empty()) {
            std::size_t start = 0;
            while (true) {
                const auto comma = v.find(',', start);
                data.label_names.push_back(v.substr(start, comma - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
        }
    }

    const std::size_t count = window_count(baseline.samples.size(), length, stride);
    std::size_t record_index = 0;
    for (const auto& [wave, label] : records) {
        ObservationSequence seq;
        try {
            seq = extract_windowed_sequence(baseline, wave, length, stride, window);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("record " + std::to_string(record_index) + ": " +
                                        e.what());
        }
        auto it = std::find(data.label_names.begin(), data.label_names.end(), label);
        if (it == data.label_names.end()) {
            data.label_names.push_back(label);
            it = data.label_names.end() - 1;
        }
        seq.label_hint.assign(seq.observations.size(),
                              static_cast<int>(it - data.label_names.begin()));
        data.sequences.push_back(std::move(seq));
        data.sequence_names.push_back(record_file_name(record_index));
        ++record_index;
    }
    save_dataset(args.out_dir, data);

    std::cout << "features: " << records.size() << " records, " << count
              << " windows per record, written to " << args.out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string data_dir;
    std::string out_dir;
    std::optional<std::string> config_file;
    std::optional<std::string> preset;
    std::optional<std::size_t> components;
    std::optional<std::uint64_t> seed;
    std::optional<double> train_fraction;
    bool stratified_on = false;
    bool stratified_off = false;
    std::optional<std::string> init;
    std::optional<double> gmm_tolerance;
    std::optional<std::size_t> gmm_max_iterations;
    std::optional<double> bw_tolerance;
    std::optional<std::size_t> bw_max_iterations;
};

struct TrainOutcome {
    HmmModel model;
    TrainReport bw_report;
    std::vector<GmmFitReport> gmm_reports;
    LabeledDataset train;
    LabeledDataset test;
    bool all_converged = true;
};

TrainOutcome train_model(const LabeledDataset& data, const std::string& preset_name,
                         const GmmFitConfig& gmm_config, const TrainConfig& bw_config,
                         const SplitSpec& split_spec) {
    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        if (data.sequences[i].label_hint.empty()) {
            throw std::invalid_argument("sequence '" + data.sequence_names[i] +
                                        "' has no labels; training is supervised");
        }
    }

    TrainOutcome out;
    out.model = make_preset(preset_name);
    if (out.model.state_count() != data.label_names.size()) {
        throw std::invalid_argument(
            "preset " + preset_name + " has " + std::to_string(out.model.state_count()) +
            " states but the dataset has " + std::to_string(data.label_names.size()) +
            " labels");
    }
    out.model.state_names = data.label_names;

    auto halves = split(data, split_spec);
    out.train = std::move(halves.first);
    out.test = std::move(halves.second);

    // Per-state mixtures from the labeled training observations.
    const std::size_t n = out.model.state_count();
    std::vector<std::vector<Eigen::VectorXd>> per_state(n);
    for (const auto& seq : out.train.sequences) {
        for (std::size_t t = 0; t < seq.observations.size(); ++t) {
            per_state[static_cast<std::size_t>(seq.label_hint[t])].push_back(
                Eigen::Vector2d(seq.observations[t].di1, seq.observations[t].di2));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (per_state[i].size() < gmm_config.components) {
            throw std::invalid_argument(
                "state '" + out.model.state_names[i] + "' has only " +
                std::to_string(per_state[i].size()) + " training observations for " +
                std::to_string(gmm_config.components) + " mixture components");
        }
        GmmFitConfig cfg = gmm_config;
        cfg.seed = gmm_config.seed + i;   // distinct stream per state
        GmmFitReport rep;
        out.model.emissions.push_back(fit_gmm(per_state[i], cfg, &rep));
        out.all_converged = out.all_converged && rep.converged;
        out.gmm_reports.push_back(std::move(rep));
    }

    auto trained = baum_welch(out.model, out.train.sequences, bw_config);
    out.model = std::move(trained.first);
    out.bw_report = std::move(trained.second);
    out.all_converged = out.all_converged && out.bw_report.converged;
    return out;
}

void write_train_report(const fs::path& file, const TrainOutcome& outcome) {
    auto out = open_out(file);
    out << "bw_converged=" << (outcome.bw_report.converged ? "true" : "false") << '\n';
    out << "bw_iterations=" << outcome.bw_report.iterations << '\n';
    out << "train_sequences=" << outcome.train.sequences.size() << '\n';
    out << "test_sequences=" << outcome.test.sequences.size() << '\n';
    for (std::size_t i = 0; i < outcome.gmm_reports.size(); ++i) {
        const auto& rep = outcome.gmm_reports[i];
        out << "gmm_" << i << "_converged=" << (rep.converged ? "true" : "false") << '\n';
        out << "gmm_" << i << "_iterations=" << rep.iterations << '\n';
        out << "gmm_" << i << "_floor_hits=" << rep.covariance_floor_hits << '\n';
    }
    for (std::size_t i = 0; i < outcome.bw_report.trace.size(); ++i) {
        out << "ll " << i << ' ' << format_double(outcome.bw_report.trace[i]) << '\n';
    }
    for (const auto& e : outcome.bw_report.events) out << "event " << e << '\n';
    for (std::size_t i = 0; i < outcome.gmm_reports.size(); ++i) {
        for (const auto& e : outcome.gmm_reports[i].events) {
            out << "gmm_event state " << i << ": " << e << '\n';
        }
    }
}

int run_train(const TrainArgs& args) {
    const ConfigSection* section = nullptr;
    ConfigDoc doc;
    if (args.config_file) {
        doc = ConfigDoc::parse_file(*args.config_file);
        section = doc.find("train");
    }
    auto str_or = [&](const std::optional<std::string>& flag, const std::string& key,
                      const std::string& fallback) {
        if (flag) return *flag;
        return section ? section->get_string_or(key, fallback) : fallback;
    };
    auto count_or = [&](const std::optional<std::size_t>& flag, const std::string& key,
                        std::size_t fallback) {
        if (flag) return *flag;
        return section ? static_cast<std::size_t>(section->get_u64_or(key, fallback)) : fallback;
    };
    auto real_or = [&](const std::optional<double>& flag, const std::string& key,
                       double fallback) {
        if (flag) return *flag;
        return section ? section->get_double_or(key, fallback) : fallback;
    };

    std::string preset_name;
    if (args.preset) {
        preset_name = *args.preset;
    } else if (section && section->has("preset")) {
        preset_name = section->get_string("preset");
    } else {
        throw std::invalid_argument("preset not given (flag --preset or config key 'preset')");
    }

    GmmFitConfig gmm_config;
    gmm_config.components = count_or(args.components, "components", 3);
    gmm_config.seed = count_or(args.seed ? std::optional<std::size_t>(*args.seed) : std::nullopt,
                               "seed", 0);
    gmm_config.tolerance = real_or(args.gmm_tolerance, "gmm_tolerance", 1e-6);
    gmm_config.max_iterations = count_or(args.gmm_max_iterations, "gmm_max_iterations", 200);
    const std::string init = str_or(args.init, "init", "kmeanspp");
    if (init == "kmeanspp") {
        gmm_config.init = GmmInit::kmeanspp;
    } else if (init == "random_points") {
        gmm_config.init = GmmInit::random_points;
    } else {
        throw std::invalid_argument("unknown init '" + init +
                                    "' (expected kmeanspp or random_points)");
    }

    TrainConfig bw_config;
    bw_config.tolerance = real_or(args.bw_tolerance, "bw_tolerance", 1e-6);
    bw_config.max_iterations = count_or(args.bw_max_iterations, "bw_max_iterations", 100);

    SplitSpec split_spec;
    split_spec.train_fraction = real_or(args.train_fraction, "train_fraction", 0.5);
    split_spec.seed = gmm_config.seed;
    if (args.stratified_on) {
        split_spec.stratified = true;
    } else if (args.stratified_off) {
        split_spec.stratified = false;
    } else {
        split_spec.stratified = section ? section->get_bool_or("stratified", true) : true;
    }

    const LabeledDataset data = load_dataset(args.data_dir);
    const TrainOutcome outcome =
        train_model(data, preset_name, gmm_config, bw_config, split_spec);

    make_dir(args.out_dir);
    const fs::path out(args.out_dir);
    save_model(out / "model.txt", outcome.model);
    write_train_report(out / "train_report.txt", outcome);
    save_dataset(out / "train", outcome.train);
    save_dataset(out / "test", outcome.test);

    std::cout << "train: " << outcome.train.sequences.size() << " training / "
              << outcome.test.sequences.size() << " test sequences, "
              << outcome.bw_report.iterations << " re-estimation passes, model in "
              << args.out_dir << "\n";
    if (!outcome.all_converged) {
        std::cerr << "train: warning: fit did not converge within the iteration budget\n";
        return 4;
    }
    return 0;
}

// ------------------------------------------------------------------ decode

struct DecodeArgs {
    std::string model_file;
    std::string data_dir;
    std::string out_dir;
};

int run_decode(const DecodeArgs& args) {
    const HmmModel model = load_model(args.model_file);
    const LabeledDataset data = load_dataset(args.data_dir);
    make_dir(args.out_dir);
    const fs::path out(args.out_dir);

    {
        auto states = open_out(out / "states.txt");
        for (const auto& name : model.state_names) states << name << '\n';
    }

    auto summary = open_out(out / "summary.csv");
    summary << "sequence,length,log_likelihood,viterbi_log_prob\n";
    for (std::size_t s = 0; s < data.sequences.size(); ++s) {
        const auto& seq = data.sequences[s];
        const PosteriorStats stats = forward_backward(model, seq);
        const ViterbiResult vit = viterbi(model, seq);
        const auto posterior = posterior_decode(model, seq);

        auto file = open_out(out / data.sequence_names[s]);
        file << "t,viterbi_state,posterior_state";
        for (std::size_t j = 0; j < model.state_count(); ++j) file << ",log_post_" << j;
        file << '\n';
        for (std::size_t t = 0; t < seq.observations.size(); ++t) {
            file << t << ',' << vit.path[t] << ',' << posterior[t];
            for (Eigen::Index j = 0; j < stats.gamma.cols(); ++j) {
                file << ',' << format_double(std::log(stats.gamma(static_cast<Eigen::Index>(t), j)));
            }
            file << '\n';
        }
        summary << data.sequence_names[s] << ',' << seq.observations.size() << ','
                << format_double(stats.log_likelihood) << ',' << format_double(vit.log_prob)
                << '\n';
    }
    std::cout << "decode: " << data.sequences.size() << " sequences decoded to " << args.out_dir
              << "\n";
    return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string decoded_dir;
    std::string data_dir;
    std::string out_dir;
};

std::vector<std::string> read_lines(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

int run_eval(const EvalArgs& args) {
    const LabeledDataset data = load_dataset(args.data_dir);
    const fs::path dec(args.decoded_dir);
    const std::vector<std::string> state_names = read_lines(dec / "states.txt");
    const std::size_t n = state_names.size();

    // Dataset labels must be exactly the model's states.
    std::vector<std::size_t> label_to_state(data.label_names.size());
    for (std::size_t l = 0; l < data.label_names.size(); ++l) {
        const auto it = std::find(state_names.begin(), state_names.end(), data.label_names[l]);
        if (it == state_names.end()) {
            throw std::invalid_argument("dataset label '" + data.label_names[l] +
                                        "' is not a model state");
        }
        label_to_state[l] = static_cast<std::size_t>(it - state_names.begin());
    }

    std::vector<std::vector<std::size_t>> confusion(n, std::vector<std::size_t>(n, 0));
    std::size_t correct_obs = 0, total_obs = 0, correct_seq = 0;

    make_dir(args.out_dir);
    auto plot_states = open_out(fs::path(args.out_dir) / "plot_states.csv");
    auto plot_nll = open_out(fs::path(args.out_dir) / "plot_nll.csv");
    auto seq_nll = open_out(fs::path(args.out_dir) / "sequence_nll.csv");
    plot_states << "sequence,t,actual_state,predicted_state\n";
    plot_nll << "sequence,t,negative_log_posterior\n";
    seq_nll << "sequence,negative_log_likelihood\n";

    // Per-sequence decoded paths.
    std::map<std::string, double> summary_ll;
    for (const auto& line : read_lines(dec / "summary.csv")) {
        if (line.rfind("sequence,", 0) == 0) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos) {
            throw IoError((dec / "summary.csv").string() + ": malformed line '" + line + "'");
        }
        summary_ll[line.substr(0, c1)] = std::strtod(line.substr(c2 + 1, c3 - c2 - 1).c_str(),
                                                     nullptr);
    }

    for (std::size_t s = 0; s < data.sequences.size(); ++s) {
        const auto& seq = data.sequences[s];
        const auto& name = data.sequence_names[s];
        if (seq.label_hint.empty()) {
            throw std::invalid_argument("sequence '" + name + "' has no ground-truth labels");
        }
        const auto lines = read_lines(dec / name);
        if (lines.size() != seq.observations.size() + 1) {
            throw std::invalid_argument("decoded file for '" + name + "' has " +
                                        std::to_string(lines.size() ? lines.size() - 1 : 0) +
                                        " rows but the sequence has " +
                                        std::to_string(seq.observations.size()));
        }
        std::map<std::size_t, std::size_t> seq_true_counts, seq_pred_counts;
        for (std::size_t t = 0; t < seq.observations.size(); ++t) {
            const std::string& row = lines[t + 1];
            const auto c1 = row.find(',');
            const auto c2 = row.find(',', c1 + 1);
            const auto c3 = row.find(',', c2 + 1);
            if (c2 == std::string::npos) {
                throw IoError((dec / name).string() + ": malformed row '" + row + "'");
            }
            const std::string field3 =
                row.substr(c2 + 1, (c3 == std::string::npos ? row.size() : c3) - c2 - 1);
            std::size_t predicted = 0;
            const auto [ptr, ec] =
                std::from_chars(field3.data(), field3.data() + field3.size(), predicted);
            if (ec != std::errc{} || ptr != field3.data() + field3.size()) {
                throw IoError((dec / name).string() + ": malformed row '" + row + "'");
            }
            if (predicted >= n) {
                throw std::invalid_argument("decoded state " + std::to_string(predicted) +
                                            " out of range");
            }
            const std::size_t actual =
                label_to_state[static_cast<std::size_t>(seq.label_hint[t])];
            confusion[actual][predicted] += 1;
            correct_obs += actual == predicted;
            ++total_obs;
            ++seq_true_counts[actual];
            ++seq_pred_counts[predicted];
            plot_states << name << ',' << t << ',' << actual << ',' << predicted << '\n';

            // negative log posterior of the predicted state at this step
            std::size_t field = 0, start = 0;
            double log_post = 0.0;
            for (std::size_t pos = 0; pos <= row.size(); ++pos) {
                if (pos == row.size() || row[pos] == ',') {
                    if (field == 3 + predicted) {
                        log_post = std::strtod(row.substr(start, pos - start).c_str(), nullptr);
                    }
                    ++field;
                    start = pos + 1;
                }
            }
            plot_nll << name << ',' << t << ',' << format_double(-log_post) << '\n';
        }

        auto majority = [](const std::map<std::size_t, std::size_t>& counts) {
            std::size_t best = 0, best_count = 0;
            for (const auto& [k, v] : counts) {
                if (v > best_count) {
                    best = k;
                    best_count = v;
                }
            }
            return best;
        };
        correct_seq += majority(seq_true_counts) == majority(seq_pred_counts);

        const auto it = summary_ll.find(name);
        if (it == summary_ll.end()) {
            throw IoError("summary.csv has no entry for '" + name + "'");
        }
        seq_nll << name << ',' << format_double(-it->second) << '\n';
    }

    if (total_obs == 0) throw std::invalid_argument("no labeled observations to evaluate");
    const double obs_acc = static_cast<double>(correct_obs) / static_cast<double>(total_obs);
    const double seq_acc =
        static_cast<double>(correct_seq) / static_cast<double>(data.sequences.size());

    auto report = open_out(fs::path(args.out_dir) / "report.txt");
    report << "sequences=" << data.sequences.size() << '\n';
    report << "observations=" << total_obs << '\n';
    report << "per_observation_accuracy=" << format_double(obs_acc) << '\n';
    report << "per_sequence_accuracy=" << format_double(seq_acc) << '\n';
    report << "confusion rows: actual state, columns: predicted state\n";
    for (std::size_t i = 0; i < n; ++i) {
        report << "confusion " << state_names[i];
        for (std::size_t j = 0; j < n; ++j) report << ' ' << confusion[i][j];
        report << '\n';
    }

    auto confusion_csv = open_out(fs::path(args.out_dir) / "confusion.csv");
    confusion_csv << "actual";
    for (const auto& s : state_names) confusion_csv << ',' << s;
    confusion_csv << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        confusion_csv << state_names[i];
        for (std::size_t j = 0; j < n; ++j) confusion_csv << ',' << confusion[i][j];
        confusion_csv << '\n';
    }

    std::cout << "eval: per-observation accuracy " << format_double(obs_acc)
              << ", per-sequence accuracy " << format_double(seq_acc) << ", report in "
              << args.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
    std::string config_file;
    std::string out_dir;
    std::optional<std::string> scenario_file;
    std::optional<std::uint64_t> seed;
};

int run_pipeline(const PipelineArgs& args) {
    const ConfigDoc doc = ConfigDoc::parse_file(args.config_file);

    std::string scenario;
    if (args.scenario_file) {
        scenario = *args.scenario_file;
    } else {
        const ConfigSection* sim = doc.find("simulate");
        if (!sim || !sim->has("scenario")) {
            throw std::invalid_argument(
                "pipeline needs a scenario (--scenario or [simulate] scenario=...)");
        }
        scenario = sim->get_string("scenario");
    }

    const fs::path out(args.out_dir);
    int rc = run_simulate({scenario, args.out_dir, args.seed});
    if (rc != 0) return rc;

    FeatureArgs fa;
    fa.waveform_dir = (out / "waveforms").string();
    fa.baseline_file = (out / "baseline.csv").string();
    fa.out_dir = (out / "features").string();
    fa.config_file = args.config_file;
    rc = run_features(fa);
    if (rc != 0) return rc;

    TrainArgs ta;
    ta.data_dir = (out / "features").string();
    ta.out_dir = args.out_dir;
    ta.config_file = args.config_file;
    const int train_rc = run_train(ta);
    if (train_rc != 0 && train_rc != 4) return train_rc;

    DecodeArgs da;
    da.model_file = (out / "model.txt").string();
    da.data_dir = (out / "test").string();
    da.out_dir = (out / "decoded").string();
    rc = run_decode(da);
    if (rc != 0) return rc;

    EvalArgs ea;
    ea.decoded_dir = (out / "decoded").string();
    ea.data_dir = (out / "test").string();
    ea.out_dir = (out / "eval").string();
    rc = run_eval(ea);
    if (rc != 0) return rc;

    return train_rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-mixture HMM classifier for pipeline damage states"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate synthetic waveform records");
    c_sim->add_option("--scenario", sim.scenario_file, "scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    c_sim->add_option("--out", sim.out_dir, "output directory")->required();
    c_sim->add_option("--seed", sim.seed, "override the scenario seed");

    FeatureArgs feat;
    auto* c_feat = app.add_subcommand("features", "Extract damage-index observation sequences");
    c_feat->add_option("--waveforms", feat.waveform_dir, "waveform directory")->required();
    c_feat->add_option("--baseline", feat.baseline_file, "baseline waveform CSV")
        ->required()
        ->check(CLI::ExistingFile);
    c_feat->add_option("--out", feat.out_dir, "output dataset directory")->required();
    c_feat->add_option("--config", feat.config_file, "config file with a [features] section")
        ->check(CLI::ExistingFile);
    c_feat->add_option("--window-length", feat.window_length, "analysis window length, samples");
    c_feat->add_option("--window-stride", feat.window_stride, "analysis window stride, samples");
    c_feat->add_option("--f-start", feat.f_start, "spectral window start, Hz");
    c_feat->add_option("--f-stop", feat.f_stop, "spectral window stop, Hz");

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Fit emissions and run Baum-Welch");
    c_train->add_option("--data", train.data_dir, "feature dataset directory")->required();
    c_train->add_option("--out", train.out_dir, "output directory")->required();
    c_train->add_option("--config", train.config_file, "config file with a [train] section")
        ->check(CLI::ExistingFile);
    c_train->add_option("--preset", train.preset,
                        "model preset: leak2_lr, location3_ergodic, depth3_lr");
    c_train->add_option("--components", train.components, "mixture components per state");
    c_train->add_option("--seed", train.seed, "seed for split and mixture initialization");
    c_train->add_option("--train-fraction", train.train_fraction, "training fraction in (0,1)");
    c_train->add_flag("--stratified", train.stratified_on,
                      "stratify the split by sequence label (default)");
    c_train->add_flag("--no-stratified", train.stratified_off, "plain shuffled split");
    c_train->add_option("--init", train.init, "mixture seeding: kmeanspp or random_points");
    c_train->add_option("--gmm-tol", train.gmm_tolerance, "mixture EM relative tolerance");
    c_train->add_option("--gmm-max-iter", train.gmm_max_iterations, "mixture EM iteration cap");
    c_train->add_option("--bw-tol", train.bw_tolerance, "Baum-Welch relative tolerance");
    c_train->add_option("--bw-max-iter", train.bw_max_iterations, "Baum-Welch iteration cap");

    DecodeArgs dec;
    auto* c_dec = app.add_subcommand("decode", "Decode state paths for a feature dataset");
    c_dec->add_option("--model", dec.model_file, "model file")
        ->required()
        ->check(CLI::ExistingFile);
    c_dec->add_option("--data", dec.data_dir, "feature dataset directory")->required();
    c_dec->add_option("--out", dec.out_dir, "output directory")->required();

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Score decoded paths against ground truth");
    c_ev->add_option("--decoded", ev.decoded_dir, "decode output directory")->required();
    c_ev->add_option("--data", ev.data_dir, "labeled feature dataset directory")->required();
    c_ev->add_option("--out", ev.out_dir, "output directory")->required();

    PipelineArgs pipe;
    auto* c_pipe = app.add_subcommand(
        "pipeline", "simulate + features + train + decode + eval from one config");
    c_pipe->add_option("--config", pipe.config_file, "pipeline config file")
        ->required()
        ->check(CLI::ExistingFile);
    c_pipe->add_option("--out", pipe.out_dir, "output directory")->required();
    c_pipe->add_option("--scenario", pipe.scenario_file, "scenario file")
        ->check(CLI::ExistingFile);
    c_pipe->add_option("--seed", pipe.seed, "override the scenario seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_sim->parsed()) return run_simulate(sim);
        if (c_feat->parsed()) return run_features(feat);
        if (c_train->parsed()) return run_train(train);
        if (c_dec->parsed()) return run_decode(dec);
        if (c_ev->parsed()) return run_eval(ev);
        if (c_pipe->parsed()) return run_pipeline(pipe);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

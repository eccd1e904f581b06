#include "pipehmm/datastore.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "pipehmm/errors.hpp"
#include "pipehmm/rng.hpp"

namespace pipehmm {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

double parse_double_field(const std::string& text, const std::string& where, int line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw IoError(where + ":" + std::to_string(line_no) + ": not a number: '" + text + "'");
    }
    return v;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string sequence_file_name(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "seq_%04zu.csv", index);
    return buf;
}

// Writes one sequence as CSV; the label column is present iff the sequence
// carries labels.
void write_feature_csv(const std::filesystem::path& file, const ObservationSequence& seq,
                       const std::vector<std::string>& label_names) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write feature file: " + file.string());
    const bool labeled = !seq.label_hint.empty();
    out << (labeled ? "di1,di2,label\n" : "di1,di2\n");
    for (std::size_t t = 0; t < seq.observations.size(); ++t) {
        out << format_double(seq.observations[t].di1) << ','
            << format_double(seq.observations[t].di2);
        if (labeled) {
            out << ',' << label_names.at(static_cast<std::size_t>(seq.label_hint[t]));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failure on " + file.string());
}

// Reads one sequence; label names are resolved against `label_names`,
// appending new names when `allow_new_labels` is set.
ObservationSequence read_feature_csv(const std::filesystem::path& file,
                                     std::vector<std::string>& label_names,
                                     bool allow_new_labels) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open feature file: " + file.string());
    const std::string where = file.string();

    ObservationSequence seq;
    std::string line;
    int line_no = 0;
    bool labeled = false;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line == "di1,di2,label") {
                labeled = true;
            } else if (line != "di1,di2") {
                throw IoError(where + ":1: expected header 'di1,di2' or 'di1,di2,label'");
            }
            continue;
        }
        const auto fields = split_fields(line);
        const std::size_t expected = labeled ? 3 : 2;
        if (fields.size() != expected) {
            throw IoError(where + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(expected) + " fields, got " +
                          std::to_string(fields.size()));
        }
        FeatureVector f;
        f.di1 = parse_double_field(fields[0], where, line_no);
        f.di2 = parse_double_field(fields[1], where, line_no);
        seq.observations.push_back(f);
        if (labeled) {
            const auto it = std::find(label_names.begin(), label_names.end(), fields[2]);
            if (it != label_names.end()) {
                seq.label_hint.push_back(static_cast<int>(it - label_names.begin()));
            } else if (allow_new_labels) {
                label_names.push_back(fields[2]);
                seq.label_hint.push_back(static_cast<int>(label_names.size() - 1));
            } else {
                throw IoError(where + ":" + std::to_string(line_no) + ": unknown label '" +
                              fields[2] + "'");
            }
        }
    }
    if (seq.observations.empty()) {
        throw IoError(where + ": no observations");
    }
    return seq;
}

}  // namespace

void validate(const LabeledDataset& data) {
    require(data.sequence_names.size() == data.sequences.size(),
            "sequence name count does not match sequence count");
    std::set<std::string> names(data.sequence_names.begin(), data.sequence_names.end());
    require(names.size() == data.sequence_names.size(), "duplicate sequence names");
    std::set<std::string> labels(data.label_names.begin(), data.label_names.end());
    require(labels.size() == data.label_names.size(), "duplicate label names");
    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        validate(data.sequences[i]);
        for (int v : data.sequences[i].label_hint) {
            require(v >= 0 && static_cast<std::size_t>(v) < data.label_names.size(),
                    "sequence '" + data.sequence_names[i] + "' has an out-of-range label index");
        }
    }
}

std::size_t label_index(const LabeledDataset& data, const std::string& name) {
    const auto it = std::find(data.label_names.begin(), data.label_names.end(), name);
    require(it != data.label_names.end(), "unknown label '" + name + "'");
    return static_cast<std::size_t>(it - data.label_names.begin());
}

int majority_label(const ObservationSequence& seq) {
    require(!seq.label_hint.empty(), "sequence carries no labels");
    std::map<int, std::size_t> counts;
    for (int v : seq.label_hint) ++counts[v];
    int best = seq.label_hint[0];
    std::size_t best_count = 0;
    for (const auto& [lbl, count] : counts) {   // ascending label order
        if (count > best_count) {
            best = lbl;
            best_count = count;
        }
    }
    return best;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                const SplitSpec& spec) {
    validate(data);
    require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0,
            "train_fraction must lie in (0, 1)");
    const std::size_t n = data.sequences.size();
    require(n >= 2, "need at least 2 sequences to split");

    Rng rng(spec.seed);
    auto shuffle = [&rng](std::vector<std::size_t>& v) {
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            const std::size_t j = i + rng.next_index(v.size() - i);
            std::swap(v[i], v[j]);
        }
    };
    auto train_count = [&spec](std::size_t m) {
        const auto want = static_cast<std::size_t>(
            std::llround(spec.train_fraction * static_cast<double>(m)));
        return std::min(std::max<std::size_t>(want, 1), m - 1);
    };

    std::vector<std::size_t> train_idx;
    if (!spec.stratified) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        shuffle(order);
        train_idx.assign(order.begin(),
                         order.begin() + static_cast<std::ptrdiff_t>(train_count(n)));
    } else {
        std::map<int, std::vector<std::size_t>> groups;   // label order is deterministic
        for (std::size_t i = 0; i < n; ++i) {
            groups[majority_label(data.sequences[i])].push_back(i);
        }
        for (auto& [lbl, members] : groups) {
            if (members.size() < 2) {
                throw std::invalid_argument("stratified split needs at least 2 sequences of '" +
                                            data.label_names.at(static_cast<std::size_t>(lbl)) +
                                            "'");
            }
            shuffle(members);
            train_idx.insert(train_idx.end(), members.begin(),
                             members.begin() +
                                 static_cast<std::ptrdiff_t>(train_count(members.size())));
        }
    }
    std::sort(train_idx.begin(), train_idx.end());

    LabeledDataset train, test;
    train.label_names = test.label_names = data.label_names;
    train.metadata = test.metadata = data.metadata;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool in_train = cursor < train_idx.size() && train_idx[cursor] == i;
        LabeledDataset& side = in_train ? train : test;
        side.sequence_names.push_back(data.sequence_names[i]);
        side.sequences.push_back(data.sequences[i]);
        if (in_train) ++cursor;
    }
    return {train, test};
}

Manifest read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest: " + file.string());
    Manifest m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
        if (line.empty()) continue;

        const auto eq = line.find('=');
        const auto comma = line.find(',');
        if (eq != std::string::npos && (comma == std::string::npos || eq < comma)) {
            m.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        } else if (comma != std::string::npos) {
            m.entries.emplace_back(line.substr(0, comma), line.substr(comma + 1));
        } else {
            throw IoError(file.string() + ":" + std::to_string(line_no) +
                          ": expected key=value or filename,label");
        }
    }
    return m;
}

void write_manifest(const std::filesystem::path& file, const Manifest& manifest) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write manifest: " + file.string());
    for (const auto& [k, v] : manifest.metadata) out << k << '=' << v << '\n';
    if (!manifest.metadata.empty() && !manifest.entries.empty()) out << '\n';
    for (const auto& [f, l] : manifest.entries) out << f << ',' << l << '\n';
    if (!out) throw IoError("write failure on " + file.string());
}

std::vector<std::pair<Waveform, std::string>> load_waveform_dir(
    const std::filesystem::path& dir, const std::string& format) {
    require(format == "csv", "unsupported waveform format '" + format + "'");
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }

    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path().filename().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) return {};

    const Manifest manifest = read_manifest(dir / "manifest.txt");
    std::map<std::string, std::string> labels(manifest.entries.begin(), manifest.entries.end());

    std::vector<std::pair<Waveform, std::string>> out;
    out.reserve(files.size());
    for (const auto& name : files) {
        const auto it = labels.find(name);
        if (it == labels.end()) {
            throw IoError("manifest " + (dir / "manifest.txt").string() +
                          " has no label for '" + name + "'");
        }
        out.emplace_back(read_waveform_csv(dir / name), it->second);
    }
    return out;
}

void save_dataset(const std::filesystem::path& dir, const LabeledDataset& data) {
    validate(data);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

    Manifest manifest;
    manifest.metadata.emplace_back("seed", std::to_string(data.metadata.seed));
    manifest.metadata.emplace_back("generator", data.metadata.generator);
    manifest.metadata.emplace_back("source", data.metadata.source);
    std::string joined;
    for (const auto& name : data.label_names) {
        if (!joined.empty()) joined += ',';
        joined += name;
    }
    manifest.metadata.emplace_back("labels", joined);

    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        const std::string& file = data.sequence_names[i];
        const auto& seq = data.sequences[i];
        const std::string label =
            seq.label_hint.empty() ? ""
                                   : data.label_names.at(
                                         static_cast<std::size_t>(majority_label(seq)));
        manifest.entries.emplace_back(file, label);
        write_feature_csv(dir / file, seq, data.label_names);
    }
    write_manifest(dir / "manifest.txt", manifest);
}

LabeledDataset load_dataset(const std::filesystem::path& dir) {
    const Manifest manifest = read_manifest(dir / "manifest.txt");

    LabeledDataset data;
    bool labels_declared = false;
    for (const auto& [k, v] : manifest.metadata) {
        if (k == "seed") {
            std::uint64_t seed = 0;
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
            if (ec != std::errc{} || ptr != v.data() + v.size()) {
                throw IoError((dir / "manifest.txt").string() + ": bad seed '" + v + "'");
            }
            data.metadata.seed = seed;
        } else if (k == "generator") {
            data.metadata.generator = v;
        } else if (k == "source") {
            data.metadata.source = v;
        } else if (k == "labels") {
            labels_declared = true;
            if (!v.empty()) {
                for (const auto& name : split_fields(v)) data.label_names.push_back(name);
            }
        }
    }

    for (const auto& [file, label] : manifest.entries) {
        data.sequence_names.push_back(file);
        data.sequences.push_back(
            read_feature_csv(dir / file, data.label_names, !labels_declared));
        // A manifest label with no per-row label column applies to the whole
        // sequence.
        auto& seq = data.sequences.back();
        if (seq.label_hint.empty() && !label.empty()) {
            const auto it = std::find(data.label_names.begin(), data.label_names.end(), label);
            int idx;
            if (it != data.label_names.end()) {
                idx = static_cast<int>(it - data.label_names.begin());
            } else if (!labels_declared) {
                data.label_names.push_back(label);
                idx = static_cast<int>(data.label_names.size() - 1);
            } else {
                throw IoError((dir / "manifest.txt").string() + ": unknown label '" + label +
                              "' for '" + file + "'");
            }
            seq.label_hint.assign(seq.observations.size(), idx);
        }
    }
    validate(data);
    return data;
}

}  // namespace pipehmm

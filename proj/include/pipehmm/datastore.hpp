#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pipehmm/signal_features.hpp"

namespace pipehmm {

struct DatasetMetadata {
    std::uint64_t seed = 0;
    std::string generator;   // pseudo-random generator identity
    std::string source;      // free-text provenance description
};

// Observation sequences with per-observation label indices (in label_hint)
// and the index -> name mapping shared by the whole set. Sequences without
// labels are permitted (decode-only data).
struct LabeledDataset {
    std::vector<std::string> sequence_names;
    std::vector<ObservationSequence> sequences;
    std::vector<std::string> label_names;
    DatasetMetadata metadata;
};

void validate(const LabeledDataset& data);

std::size_t label_index(const LabeledDataset& data, const std::string& name);

// Most frequent label in the sequence; ties go to the lowest index. Throws
// when the sequence carries no labels.
int majority_label(const ObservationSequence& seq);

struct SplitSpec {
    double train_fraction = 0.5;   // in (0, 1)
    std::uint64_t seed = 0;
    bool stratified = false;
};

// Disjoint, exhaustive partition, deterministic given the seed. Both halves
// keep the original relative order. Stratified mode shuffles within each
// sequence-level label group so label proportions survive the split.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                const SplitSpec& spec);

// Manifest: `key=value` metadata lines first, then one `filename,label` entry
// per line; `#` starts a comment anywhere.
struct Manifest {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::pair<std::string, std::string>> entries;
};

Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const Manifest& manifest);

// Loads every `.<format>` file in the directory in lexicographic filename
// order with its label from the sidecar manifest.txt. Only "csv" is
// supported. An empty directory yields an empty list.
std::vector<std::pair<Waveform, std::string>> load_waveform_dir(
    const std::filesystem::path& dir, const std::string& format);

// Feature dataset on disk: manifest.txt plus one CSV per sequence with
// header di1,di2[,label] and 17-significant-digit decimals.
void save_dataset(const std::filesystem::path& dir, const LabeledDataset& data);
LabeledDataset load_dataset(const std::filesystem::path& dir);

}  // namespace pipehmm

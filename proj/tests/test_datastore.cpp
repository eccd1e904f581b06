#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pipehmm/datastore.hpp"
#include "pipehmm/errors.hpp"
#include "pipehmm/rng.hpp"
#include "pipehmm/signal_features.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pipehmm;

namespace {

fs::path temp_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ObservationSequence make_seq(std::uint64_t seed, std::size_t len, int label) {
    Rng rng(seed);
    ObservationSequence seq;
    for (std::size_t t = 0; t < len; ++t) {
        seq.observations.push_back(FeatureVector{rng.next_double(), 3.0 * rng.next_double()});
        seq.label_hint.push_back(label);
    }
    return seq;
}

LabeledDataset make_dataset(std::size_t n, const std::vector<int>& labels,
                            const std::vector<std::string>& names) {
    LabeledDataset data;
    data.label_names = names;
    for (std::size_t i = 0; i < n; ++i) {
        data.sequence_names.push_back("seq_" + std::to_string(i) + ".csv");
        data.sequences.push_back(make_seq(100 + i, 6, labels[i % labels.size()]));
    }
    data.metadata.seed = 99;
    data.metadata.generator = "test";
    data.metadata.source = "unit";
    return data;
}

}  // namespace

TEST_CASE("splits hit the documented sizes") {
    const LabeledDataset ten = make_dataset(10, {0, 1}, {"a", "b"});
    SplitSpec spec;
    spec.train_fraction = 0.5;
    spec.seed = 1;
    const auto [train, test] = split(ten, spec);
    CHECK(train.sequences.size() == 5);
    CHECK(test.sequences.size() == 5);

    const LabeledDataset two = make_dataset(2, {0, 1}, {"a", "b"});
    const auto [t2, s2] = split(two, spec);
    CHECK(t2.sequences.size() == 1);
    CHECK(s2.sequences.size() == 1);

    // Rounding is clamped so both sides stay non-empty.
    const LabeledDataset three = make_dataset(3, {0}, {"a"});
    SplitSpec ninety;
    ninety.train_fraction = 0.9;
    ninety.seed = 4;
    const auto [t3, s3] = split(three, ninety);
    CHECK(t3.sequences.size() == 2);
    CHECK(s3.sequences.size() == 1);

    const LabeledDataset one = make_dataset(1, {0}, {"a"});
    CHECK_THROWS_AS(split(one, spec), std::invalid_argument);

    SplitSpec bad;
    bad.train_fraction = 1.0;
    CHECK_THROWS_AS(split(ten, bad), std::invalid_argument);
}

TEST_CASE("splits are deterministic label-preserving partitions") {
    const LabeledDataset data = make_dataset(20, {0, 1, 1, 0}, {"a", "b"});
    SplitSpec spec;
    spec.train_fraction = 0.6;
    spec.seed = 77;

    const auto [train1, test1] = split(data, spec);
    const auto [train2, test2] = split(data, spec);
    CHECK(train1.sequence_names == train2.sequence_names);
    CHECK(test1.sequence_names == test2.sequence_names);

    std::set<std::string> seen;
    for (const auto& n : train1.sequence_names) seen.insert(n);
    for (const auto& n : test1.sequence_names) seen.insert(n);
    CHECK(seen.size() == 20);
    CHECK(train1.sequence_names.size() + test1.sequence_names.size() == 20);
    CHECK(train1.label_names == data.label_names);
    CHECK(test1.metadata.seed == data.metadata.seed);

    // Original dataset order is preserved inside each side.
    auto position = [&data](const std::string& name) {
        return std::find(data.sequence_names.begin(), data.sequence_names.end(), name) -
               data.sequence_names.begin();
    };
    for (std::size_t i = 1; i < train1.sequence_names.size(); ++i) {
        CHECK(position(train1.sequence_names[i - 1]) < position(train1.sequence_names[i]));
    }
}

TEST_CASE("stratified splits balance every label") {
    const LabeledDataset data = make_dataset(12, {0, 1}, {"a", "b"});
    SplitSpec spec;
    spec.train_fraction = 0.5;
    spec.seed = 3;
    spec.stratified = true;

    const auto [train, test] = split(data, spec);
    std::size_t train_a = 0, test_a = 0;
    for (const auto& s : train.sequences) train_a += majority_label(s) == 0 ? 1 : 0;
    for (const auto& s : test.sequences) test_a += majority_label(s) == 0 ? 1 : 0;
    CHECK(train_a == 3);
    CHECK(test_a == 3);
    CHECK(train.sequences.size() == 6);

    // A label with a single sequence cannot be split.
    LabeledDataset lopsided = make_dataset(5, {0}, {"a", "b"});
    lopsided.sequences[4] = make_seq(1, 6, 1);
    CHECK_THROWS_AS(split(lopsided, spec), std::invalid_argument);
}

TEST_CASE("majority labels break ties toward the lowest index") {
    ObservationSequence seq = make_seq(1, 4, 0);
    seq.label_hint = {1, 0, 1, 0};
    CHECK(majority_label(seq) == 0);
    seq.label_hint = {2, 2, 1, 2};
    CHECK(majority_label(seq) == 2);
    seq.label_hint.clear();
    CHECK_THROWS_AS(majority_label(seq), std::invalid_argument);
}

TEST_CASE("datasets round-trip exactly through the csv store") {
    const fs::path dir = temp_dir("pipehmm_ds_roundtrip");
    LabeledDataset data = make_dataset(4, {0, 1}, {"ok", "bad"});
    data.sequences[0].observations[0].di1 = 1.0 / 3.0;
    data.sequences[0].observations[0].di2 = 1e-300;
    data.sequences[1].observations[2].di2 = 123456.78901234567;

    save_dataset(dir, data);
    const LabeledDataset back = load_dataset(dir);

    CHECK(back.sequence_names == data.sequence_names);
    CHECK(back.label_names == data.label_names);
    CHECK(back.metadata.seed == data.metadata.seed);
    CHECK(back.metadata.generator == data.metadata.generator);
    CHECK(back.metadata.source == data.metadata.source);
    REQUIRE(back.sequences.size() == data.sequences.size());
    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        REQUIRE(back.sequences[i].length() == data.sequences[i].length());
        CHECK(back.sequences[i].label_hint == data.sequences[i].label_hint);
        for (std::size_t t = 0; t < data.sequences[i].length(); ++t) {
            CHECK(back.sequences[i].observations[t].di1 ==
                  data.sequences[i].observations[t].di1);
            CHECK(back.sequences[i].observations[t].di2 ==
                  data.sequences[i].observations[t].di2);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("unlabeled datasets round-trip too") {
    const fs::path dir = temp_dir("pipehmm_ds_unlabeled");
    LabeledDataset data = make_dataset(2, {0}, {"a"});
    for (auto& s : data.sequences) s.label_hint.clear();
    data.label_names.clear();

    save_dataset(dir, data);
    const LabeledDataset back = load_dataset(dir);
    CHECK(back.sequences.size() == 2);
    for (const auto& s : back.sequences) CHECK(s.label_hint.empty());
    fs::remove_all(dir);
}

TEST_CASE("feature csv errors name the offending line") {
    const fs::path dir = temp_dir("pipehmm_ds_badcsv");
    LabeledDataset data = make_dataset(1, {0}, {"a"});
    save_dataset(dir, data);

    // Corrupt the third line of the sequence file.
    const fs::path seq_file = dir / data.sequence_names[0];
    REQUIRE(fs::exists(seq_file));
    std::vector<std::string> lines;
    {
        std::ifstream in(seq_file);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    lines[2] = "0.5,banana,a";
    {
        std::ofstream out(seq_file);
        for (const auto& l : lines) out << l << "\n";
    }

    try {
        load_dataset(dir);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("waveform directories load through their manifest") {
    const fs::path dir = temp_dir("pipehmm_ds_waves");
    Waveform w;
    w.sample_rate_hz = 1000.0;
    w.samples = {0.0, 0.5, -0.5, 0.25};
    write_waveform_csv(dir / "wave_0001.csv", w);
    w.samples = {1.0, -1.0};
    write_waveform_csv(dir / "wave_0000.csv", w);

    {
        std::ofstream out(dir / "manifest.txt");
        out << "seed=9\n";
        out << "generator=test\n";
        out << "\n";
        out << "wave_0000.csv,ok\n";
        out << "wave_0001.csv,bad\n";
    }

    const auto loaded = load_waveform_dir(dir, "csv");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].second == "ok");    // wave_0000 sorts first
    CHECK(loaded[0].first.samples.size() == 2);
    CHECK(loaded[1].second == "bad");
    CHECK(loaded[1].first.samples.size() == 4);

    // A csv without a manifest entry is an error.
    w.samples = {0.1};
    write_waveform_csv(dir / "wave_0002.csv", w);
    CHECK_THROWS_AS(load_waveform_dir(dir, "csv"), IoError);

    CHECK_THROWS_AS(load_waveform_dir(dir / "missing", "csv"), IoError);
    CHECK_THROWS_AS(load_waveform_dir(dir, "wav"), std::invalid_argument);

    const fs::path empty = temp_dir("pipehmm_ds_empty");
    CHECK(load_waveform_dir(empty, "csv").empty());
    fs::remove_all(dir);
    fs::remove_all(empty);
}

TEST_CASE("manifests round-trip and ignore comments") {
    const fs::path dir = temp_dir("pipehmm_ds_manifest");
    Manifest m;
    m.metadata = {{"seed", "42"}, {"source", "scenario leak2"}};
    m.entries = {{"wave_0000.csv", "no_leak"}, {"wave_0001.csv", "leak"}};
    write_manifest(dir / "manifest.txt", m);

    const Manifest back = read_manifest(dir / "manifest.txt");
    CHECK(back.metadata == m.metadata);
    CHECK(back.entries == m.entries);

    {
        std::ofstream out(dir / "hand.txt");
        out << "# a comment line\n";
        out << "seed=7   # trailing comment\n";
        out << "\n";
        out << "a.csv,ok\n";
    }
    const Manifest hand = read_manifest(dir / "hand.txt");
    REQUIRE(hand.metadata.size() == 1);
    CHECK(hand.metadata[0].first == "seed");
    CHECK(hand.metadata[0].second == "7");
    REQUIRE(hand.entries.size() == 1);
    CHECK(hand.entries[0].first == "a.csv");

    {
        std::ofstream out(dir / "junk.txt");
        out << "this line has no separator\n";
    }
    CHECK_THROWS_AS(read_manifest(dir / "junk.txt"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("dataset validation catches inconsistencies") {
    LabeledDataset data = make_dataset(3, {0, 1}, {"a", "b"});
    CHECK_NOTHROW(validate(data));

    LabeledDataset dup = data;
    dup.sequence_names[1] = dup.sequence_names[0];
    CHECK_THROWS_AS(validate(dup), std::invalid_argument);

    LabeledDataset range = data;
    range.sequences[0].label_hint[0] = 9;
    CHECK_THROWS_AS(validate(range), std::invalid_argument);

    LabeledDataset shape = data;
    shape.sequence_names.pop_back();
    CHECK_THROWS_AS(validate(shape), std::invalid_argument);

    CHECK(label_index(data, "b") == 1);
    CHECK_THROWS_AS(label_index(data, "zzz"), std::invalid_argument);
}

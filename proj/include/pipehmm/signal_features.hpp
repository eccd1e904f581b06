#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace pipehmm {

// Uniformly sampled sensor trace.
struct Waveform {
    std::vector<double> samples;   // amplitudes, volts
    double sample_rate_hz = 0.0;
};

// Throws std::invalid_argument unless samples are non-empty and finite and
// the sample rate is positive.
void validate(const Waveform& w);

// Closed band [f_start_hz, f_stop_hz] restricting the spectral peak search.
// Must satisfy 0 <= f_start < f_stop <= sample_rate/2 of the waveform it is
// applied to.
struct FrequencyWindow {
    double f_start_hz = 0.0;
    double f_stop_hz = 0.0;
};

// One observation: the time-domain and frequency-domain damage indexes.
struct FeatureVector {
    double di1 = 0.0;  // 1 - |pearson correlation vs. baseline|, in [0, 1]
    double di2 = 0.0;  // peak spectral amplitude in the window, volts
};

// Time-ordered feature vectors. label_hint is either empty or holds one
// ground-truth state index per observation; it is only used for supervised
// initialization and evaluation, never by the decoding algorithms.
struct ObservationSequence {
    std::vector<FeatureVector> observations;
    std::vector<int> label_hint;

    std::size_t length() const { return observations.size(); }
};

void validate(const ObservationSequence& seq);

// Time-domain damage index: 1 - |rho| where rho is the sample Pearson
// correlation between the mean-centered waveforms. Symmetric in its
// arguments, invariant under affine rescaling with nonzero scale. Inputs
// must have equal length >= 2 and nonzero variance.
double damage_index_time(const Waveform& baseline, const Waveform& comparison);

// Frequency-domain damage index: max |X(f)| over the DFT bins of the full
// waveform with bin frequency inside [f_start, f_stop] (inclusive on both
// edges), magnitude scaled by 2/N so an in-bin sinusoid of amplitude a
// reads a. No detrending or taper is applied. Throws when no bin falls
// inside the window.
double damage_index_freq(const Waveform& w, const FrequencyWindow& window);

// One feature vector per recording, order preserved:
//   di1 = damage_index_time(baseline, r), di2 = damage_index_freq(r, window).
// Errors from an individual recording are rethrown with its index.
ObservationSequence extract_sequence(const Waveform& baseline,
                                     const std::vector<Waveform>& recordings,
                                     const FrequencyWindow& window);

// Number of analysis windows of `length` samples advancing by `stride` that
// fit in a record of n_samples: floor((n - length) / stride) + 1.
std::size_t window_count(std::size_t n_samples, std::size_t length, std::size_t stride);

std::vector<Waveform> segment_waveform(const Waveform& w, std::size_t length, std::size_t stride);

// Segments baseline and recording with the same length/stride (they must
// have equal sample counts) and emits one feature vector per aligned window
// pair. This is the per-record step behind the features command.
ObservationSequence extract_windowed_sequence(const Waveform& baseline,
                                              const Waveform& recording,
                                              std::size_t length, std::size_t stride,
                                              const FrequencyWindow& window);

// Waveform files: a `sample_rate_hz=<float>` header line, then one amplitude
// per line. Parse failures name the file and the 1-based line number.
Waveform read_waveform_csv(const std::filesystem::path& file);
void write_waveform_csv(const std::filesystem::path& file, const Waveform& w);

// Formats a double with enough digits (17 significant) to round-trip exactly.
std::string format_double(double value);

}  // namespace pipehmm

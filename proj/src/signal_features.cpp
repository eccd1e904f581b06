#include "pipehmm/signal_features.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pipehmm/errors.hpp"

namespace pipehmm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

// |X(k)| of the length-N DFT, X(k) = sum_t x[t] e^{-2*pi*i*k*t/N}.
// The phasor advances by complex multiplication and is re-anchored to an
// exact cos/sin evaluation every 256 samples to stop rounding drift.
double dft_bin_magnitude(const std::vector<double>& x, std::size_t k) {
    const auto n = x.size();
    const double theta = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    const std::complex<double> step(std::cos(theta), std::sin(theta));
    std::complex<double> phasor(1.0, 0.0);
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        if (t % 256 == 0) {
            const double a = theta * static_cast<double>(t);
            phasor = {std::cos(a), std::sin(a)};
        }
        acc += x[t] * phasor;
        phasor *= step;
    }
    return std::abs(acc);
}

}  // namespace

void validate(const Waveform& w) {
    require(!w.samples.empty(), "waveform has no samples");
    require(w.sample_rate_hz > 0.0, "waveform sample rate must be positive");
    for (double v : w.samples) {
        require(std::isfinite(v), "waveform contains a non-finite sample");
    }
}

// Extraction guarantees di1 in [0, 1] and di2 >= 0; sequences sampled from a
// fitted model carry unbounded Gaussian draws, so only finiteness is checked.
void validate(const ObservationSequence& seq) {
    require(!seq.observations.empty(), "observation sequence is empty");
    require(seq.label_hint.empty() || seq.label_hint.size() == seq.observations.size(),
            "label_hint length does not match observation count");
    for (const auto& f : seq.observations) {
        require(std::isfinite(f.di1) && std::isfinite(f.di2), "non-finite feature value");
    }
}

double damage_index_time(const Waveform& baseline, const Waveform& comparison) {
    validate(baseline);
    validate(comparison);
    require(baseline.samples.size() == comparison.samples.size(),
            "baseline and comparison waveforms differ in length");
    const auto n = baseline.samples.size();
    require(n >= 2, "waveforms must have at least 2 samples");

    double mean_b = 0.0, mean_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_b += baseline.samples[i];
        mean_c += comparison.samples[i];
    }
    mean_b /= static_cast<double>(n);
    mean_c /= static_cast<double>(n);

    double sbb = 0.0, scc = 0.0, sbc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double db = baseline.samples[i] - mean_b;
        const double dc = comparison.samples[i] - mean_c;
        sbb += db * db;
        scc += dc * dc;
        sbc += db * dc;
    }
    require(sbb > 0.0 && scc > 0.0,
            "zero-variance waveform: correlation is undefined");

    const double rho = sbc / std::sqrt(sbb * scc);
    const double abs_rho = std::min(std::abs(rho), 1.0);
    return 1.0 - abs_rho;
}

double damage_index_freq(const Waveform& w, const FrequencyWindow& window) {
    validate(w);
    const auto n = w.samples.size();
    require(n >= 2, "waveform must have at least 2 samples");
    const double fs = w.sample_rate_hz;
    require(window.f_start_hz >= 0.0 && window.f_start_hz < window.f_stop_hz &&
                window.f_stop_hz <= fs / 2.0,
            "frequency window must satisfy 0 <= f_start < f_stop <= sample_rate/2");

    const double scale = 2.0 / static_cast<double>(n);
    double best = -1.0;
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double f_k = static_cast<double>(k) * fs / static_cast<double>(n);
        if (f_k < window.f_start_hz || f_k > window.f_stop_hz) continue;
        best = std::max(best, scale * dft_bin_magnitude(w.samples, k));
    }
    require(best >= 0.0, "no DFT bin falls inside the frequency window");
    return best;
}

ObservationSequence extract_sequence(const Waveform& baseline,
                                     const std::vector<Waveform>& recordings,
                                     const FrequencyWindow& window) {
    require(!recordings.empty(), "no recordings given");
    ObservationSequence seq;
    seq.observations.reserve(recordings.size());
    for (std::size_t i = 0; i < recordings.size(); ++i) {
        try {
            FeatureVector f;
            f.di1 = damage_index_time(baseline, recordings[i]);
            f.di2 = damage_index_freq(recordings[i], window);
            seq.observations.push_back(f);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("recording " + std::to_string(i) + ": " + e.what());
        }
    }
    return seq;
}

std::size_t window_count(std::size_t n_samples, std::size_t length, std::size_t stride) {
    require(length >= 2, "window length must be at least 2 samples");
    require(stride >= 1, "window stride must be at least 1 sample");
    require(length <= n_samples, "window length exceeds record length");
    return (n_samples - length) / stride + 1;
}

std::vector<Waveform> segment_waveform(const Waveform& w, std::size_t length, std::size_t stride) {
    validate(w);
    const std::size_t count = window_count(w.samples.size(), length, stride);
    std::vector<Waveform> segments;
    segments.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto begin = w.samples.begin() + static_cast<std::ptrdiff_t>(i * stride);
        segments.push_back(Waveform{{begin, begin + static_cast<std::ptrdiff_t>(length)},
                                    w.sample_rate_hz});
    }
    return segments;
}

ObservationSequence extract_windowed_sequence(const Waveform& baseline,
                                              const Waveform& recording,
                                              std::size_t length, std::size_t stride,
                                              const FrequencyWindow& window) {
    require(baseline.samples.size() == recording.samples.size(),
            "baseline and recording differ in length");
    const auto base_windows = segment_waveform(baseline, length, stride);
    const auto rec_windows = segment_waveform(recording, length, stride);
    ObservationSequence seq;
    seq.observations.reserve(rec_windows.size());
    for (std::size_t i = 0; i < rec_windows.size(); ++i) {
        try {
            FeatureVector f;
            f.di1 = damage_index_time(base_windows[i], rec_windows[i]);
            f.di2 = damage_index_freq(rec_windows[i], window);
            seq.observations.push_back(f);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("window " + std::to_string(i) + ": " + e.what());
        }
    }
    return seq;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

Waveform read_waveform_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open waveform file: " + file.string());

    const std::string where = file.string();
    std::string line;
    int line_no = 0;

    auto fail = [&](const std::string& why) -> void {
        throw IoError(where + ":" + std::to_string(line_no) + ": " + why);
    };

    Waveform w;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            constexpr const char* kHeader = "sample_rate_hz=";
            if (line.rfind(kHeader, 0) != 0) fail("expected header 'sample_rate_hz=<float>'");
            errno = 0;
            char* end = nullptr;
            w.sample_rate_hz = std::strtod(line.c_str() + std::strlen(kHeader), &end);
            if (*end != '\0' || errno == ERANGE || !(w.sample_rate_hz > 0.0)) {
                fail("invalid sample rate");
            }
            continue;
        }
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc{} || ptr != line.data() + line.size()) {
            fail("not a number: '" + line + "'");
        }
        w.samples.push_back(v);
    }
    if (line_no == 0) {
        line_no = 1;
        fail("empty waveform file");
    }
    validate(w);
    return w;
}

void write_waveform_csv(const std::filesystem::path& file, const Waveform& w) {
    validate(w);
    std::ofstream out(file);
    if (!out) throw IoError("cannot write waveform file: " + file.string());
    out << "sample_rate_hz=" << format_double(w.sample_rate_hz) << '\n';
    for (double v : w.samples) {
        out << format_double(v) << '\n';
    }
    if (!out) throw IoError("write failure on " + file.string());
}

}  // namespace pipehmm

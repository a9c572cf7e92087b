// File formats: the waveform binary container, CSV emission, JSON sidecars
// and run manifests. All writes go through a temp-file + rename step.
#pragma once

#include "afdm/core.hpp"

#include <filesystem>
#include <string>

namespace afdm {

// Binary container: 16-byte magic ("AFDMWAVE" zero-padded), little-endian
// u32 n, u32 oversampling, then n*oversampling interleaved float64 (re, im)
// oversampled samples.
struct WaveformFile {
    std::uint32_t n = 0;
    std::uint32_t oversampling = 1;
    VecC samples;  // length n * oversampling

    // Symbol-rate samples recovered through the decimation identity.
    VecC symbol_rate() const;
};

void write_waveform(const std::filesystem::path& path, const WaveformFile& wf);
WaveformFile read_waveform(const std::filesystem::path& path);

void write_waveform_csv(const std::filesystem::path& path, const VecC& samples);

// Generic CSV writer; `rows` are preformatted lines without newlines.
void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::string>& rows);

// Atomic text write (temp + rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::string format_double(double v);  // round-trip friendly %.12g

// FNV-1a over a canonical string; used for config hashes in manifests.
std::uint64_t fnv1a(const std::string& s);

inline const char* version_string() { return "afdmwave 0.1.0"; }

}  // namespace afdm

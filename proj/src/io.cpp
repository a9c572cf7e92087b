#include "afdm/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace afdm {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[16] = {'A', 'F', 'D', 'M', 'W', 'A', 'V', 'E',
                             0, 0, 0, 0, 0, 0, 0, 0};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void rename_into_place(const fs::path& tmp, const fs::path& path) {
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("io: failed to move " + tmp.string() + " to " + path.string());
    }
}

}  // namespace

VecC WaveformFile::symbol_rate() const {
    if (oversampling < 1 || samples.size() != static_cast<Eigen::Index>(n) * oversampling)
        throw std::runtime_error("waveform: inconsistent sample count");
    VecC s(n);
    const double root = std::sqrt(static_cast<double>(oversampling));
    for (std::uint32_t k = 0; k < n; ++k) s[k] = root * samples[k * oversampling];
    return s;
}

void write_waveform(const fs::path& path, const WaveformFile& wf) {
    if (wf.samples.size() != static_cast<Eigen::Index>(wf.n) * wf.oversampling)
        throw std::invalid_argument("waveform: sample count does not match header");
    std::string blob(kMagic, sizeof(kMagic));
    put_u32(blob, wf.n);
    put_u32(blob, wf.oversampling);
    for (Eigen::Index k = 0; k < wf.samples.size(); ++k) {
        put_f64(blob, wf.samples[k].real());
        put_f64(blob, wf.samples[k].imag());
    }
    write_text_atomic(path, blob);
}

WaveformFile read_waveform(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("waveform: cannot open " + path.string());
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 24 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("waveform: bad magic in " + path.string());
    WaveformFile wf;
    wf.n = get_u32(blob.data() + 16);
    wf.oversampling = get_u32(blob.data() + 20);
    const std::size_t count = static_cast<std::size_t>(wf.n) * wf.oversampling;
    if (blob.size() != 24 + 16 * count)
        throw std::runtime_error("waveform: truncated file " + path.string());
    wf.samples.resize(static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) {
        wf.samples[static_cast<Eigen::Index>(k)] =
            cd{get_f64(blob.data() + 24 + 16 * k), get_f64(blob.data() + 32 + 16 * k)};
    }
    return wf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_waveform_csv(const fs::path& path, const VecC& samples) {
    std::vector<std::string> rows;
    rows.reserve(static_cast<std::size_t>(samples.size()));
    for (Eigen::Index k = 0; k < samples.size(); ++k) {
        rows.push_back(std::to_string(k) + "," + format_double(samples[k].real()) + "," +
                       format_double(samples[k].imag()));
    }
    write_csv(path, "index,re,im", rows);
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
    std::string content = header + "\n";
    for (const auto& r : rows) {
        content += r;
        content += '\n';
    }
    write_text_atomic(path, content);
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("io: cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("io: short write to " + tmp.string());
    }
    rename_into_place(tmp, path);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace afdm

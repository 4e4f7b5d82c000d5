#ifndef CEGATE_SYNTH_HPP
#define CEGATE_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "cegate/check.hpp"
#include "cegate/rng.hpp"

namespace cegate {

// One synthetic domain: the shift parameters that generate its imagery.
struct DomainSpec {
    std::string name;
    double spatial_scale = 1.0;
    double rotation_deg = 0.0;
    std::vector<std::vector<double>> palette;  // per class, length = channels
    double artifact_amplitude = 0.0;
    double artifact_frequency = 0.0;  // cycles per image side
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate(std::size_t num_classes, std::size_t channels) const {
        check(!name.empty(), "domain spec: empty name");
        check(spatial_scale > 0.0, "domain spec '" + name + "': spatial_scale must be > 0");
        check(artifact_amplitude >= 0.0, "domain spec '" + name + "': negative amplitude");
        check(palette.size() == num_classes,
              "domain spec '" + name + "': palette must have one entry per class");
        for (const auto& p : palette)
            check(p.size() == channels,
                  "domain spec '" + name + "': palette entries must have " +
                      std::to_string(channels) + " channels");
        for (std::size_t a = 0; a < palette.size(); ++a)
            for (std::size_t b = a + 1; b < palette.size(); ++b) {
                double d2 = 0.0;
                for (std::size_t c = 0; c < channels; ++c) {
                    double d = palette[a][c] - palette[b][c];
                    d2 += d * d;
                }
                check(std::sqrt(d2) > 0.1, "domain spec '" + name +
                                               "': palette classes " + std::to_string(a) +
                                               " and " + std::to_string(b) +
                                               " are closer than 0.1");
            }
    }
};

struct DatasetConfig {
    std::size_t num_classes = 5;
    std::size_t min_shapes = 2;
    std::size_t max_shapes = 5;
    std::size_t train_count = 64;
    std::size_t test_count = 32;
    std::size_t image_size = 32;
    std::size_t patch_size = 4;
    std::size_t channels = 3;

    std::size_t label_grid() const { return image_size / patch_size; }

    void validate() const {
        check(num_classes >= 2, "dataset config: need at least 2 classes");
        check(min_shapes >= 1 && min_shapes <= max_shapes,
              "dataset config: invalid shape count range");
        check(image_size > 0 && patch_size > 0 && image_size % patch_size == 0,
              "dataset config: image_size must be a positive multiple of patch_size");
        check(channels >= 1, "dataset config: need at least 1 channel");
    }
};

struct Sample {
    std::size_t height = 0, width = 0, channels = 0;
    std::vector<double> image;        // h x w x c, row-major, values in [0, 1]
    std::size_t label_grid_side = 0;  // (h / patch) per side
    std::vector<int> labels;          // patch-majority class indices
    std::string domain;
};

// ---------------------------------------------------------------------------
// Scene primitives. generate_scene composes these; tests use them directly.
// ---------------------------------------------------------------------------

struct Scene {
    std::size_t size = 0, channels = 0;
    std::vector<double> image;     // size x size x channels
    std::vector<int> pixel_label;  // size x size
};

inline Scene blank_scene(const DomainSpec& spec, const DatasetConfig& cfg) {
    Scene s;
    s.size = cfg.image_size;
    s.channels = cfg.channels;
    s.image.resize(s.size * s.size * s.channels);
    s.pixel_label.assign(s.size * s.size, 0);
    for (std::size_t px = 0; px < s.size * s.size; ++px)
        for (std::size_t c = 0; c < s.channels; ++c)
            s.image[px * s.channels + c] = spec.palette[0][c];
    return s;
}

namespace detail {

inline void paint(Scene& s, std::size_t x, std::size_t y, int cls,
                  const std::vector<double>& color) {
    s.pixel_label[y * s.size + x] = cls;
    for (std::size_t c = 0; c < s.channels; ++c)
        s.image[(y * s.size + x) * s.channels + c] = color[c];
}

}  // namespace detail

// Axis-aligned or rotated rectangle ("building").
inline void draw_rectangle(Scene& s, double cx, double cy, double half_w, double half_h,
                           double angle_deg, int cls, const std::vector<double>& color) {
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    for (std::size_t y = 0; y < s.size; ++y)
        for (std::size_t x = 0; x < s.size; ++x) {
            double dx = (x + 0.5) - cx, dy = (y + 0.5) - cy;
            double u = ca * dx + sa * dy;
            double v = -sa * dx + ca * dy;
            if (std::abs(u) <= half_w && std::abs(v) <= half_h)
                detail::paint(s, x, y, cls, color);
        }
}

// Circular blob ("water"/"forest").
inline void draw_blob(Scene& s, double cx, double cy, double radius, int cls,
                      const std::vector<double>& color) {
    for (std::size_t y = 0; y < s.size; ++y)
        for (std::size_t x = 0; x < s.size; ++x) {
            double dx = (x + 0.5) - cx, dy = (y + 0.5) - cy;
            if (dx * dx + dy * dy <= radius * radius) detail::paint(s, x, y, cls, color);
        }
}

// Long thin rotated band across the image ("road").
inline void draw_ribbon(Scene& s, double cx, double cy, double half_thickness,
                        double angle_deg, int cls, const std::vector<double>& color) {
    draw_rectangle(s, cx, cy, 2.0 * s.size, half_thickness, angle_deg, cls, color);
}

// amplitude * sin(2 pi f x / h) added to every channel.
inline void apply_artifact(Scene& s, double amplitude, double frequency) {
    if (amplitude == 0.0) return;
    std::vector<double> wave(s.size);
    for (std::size_t x = 0; x < s.size; ++x)
        wave[x] = amplitude *
                  std::sin(2.0 * std::numbers::pi * frequency * static_cast<double>(x) /
                           static_cast<double>(s.size));
    for (std::size_t y = 0; y < s.size; ++y)
        for (std::size_t x = 0; x < s.size; ++x)
            for (std::size_t c = 0; c < s.channels; ++c)
                s.image[(y * s.size + x) * s.channels + c] += wave[x];
}

inline void apply_noise(Scene& s, double sigma, Rng& rng) {
    if (sigma == 0.0) return;
    for (auto& v : s.image) v += sigma * rng.gaussian();
}

inline void clamp_image(Scene& s) {
    for (auto& v : s.image) v = std::clamp(v, 0.0, 1.0);
}

// Majority class per patch; ties resolve to the smallest class index.
inline std::vector<int> patch_labels(const Scene& s, std::size_t patch,
                                     std::size_t num_classes) {
    const std::size_t grid = s.size / patch;
    std::vector<int> labels(grid * grid, 0);
    std::vector<std::size_t> counts(num_classes);
    for (std::size_t py = 0; py < grid; ++py)
        for (std::size_t px = 0; px < grid; ++px) {
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t dy = 0; dy < patch; ++dy)
                for (std::size_t dx = 0; dx < patch; ++dx)
                    ++counts[s.pixel_label[(py * patch + dy) * s.size + px * patch + dx]];
            std::size_t best = 0;
            for (std::size_t c = 1; c < num_classes; ++c)
                if (counts[c] > counts[best]) best = c;
            labels[py * grid + px] = static_cast<int>(best);
        }
    return labels;
}

// Geometry is drawn from `rng`; artifact/noise use a stream derived from it,
// so two specs differing only in appearance parameters yield identical labels.
inline Sample generate_scene(const DomainSpec& spec, const DatasetConfig& cfg, Rng& rng) {
    spec.validate(cfg.num_classes, cfg.channels);
    cfg.validate();
    Scene s = blank_scene(spec, cfg);
    Rng noise_rng(mix_seed(rng.next_u64(), 0x6e6f697365ull));  // "noise"

    const std::size_t n_shapes = cfg.min_shapes + rng.below(cfg.max_shapes - cfg.min_shapes + 1);
    const double base = static_cast<double>(cfg.image_size);
    for (std::size_t i = 0; i < n_shapes; ++i) {
        int cls = 1 + static_cast<int>(rng.below(cfg.num_classes - 1));
        double cx = rng.uniform(0.0, base);
        double cy = rng.uniform(0.0, base);
        double size = rng.uniform(0.10, 0.22) * base * spec.spatial_scale;
        double angle = spec.rotation_deg + rng.uniform(-10.0, 10.0);
        const auto& color = spec.palette[static_cast<std::size_t>(cls)];
        switch ((cls - 1) % 3) {
            case 0:  // rectangle
                draw_rectangle(s, cx, cy, size, size * rng.uniform(0.5, 1.0), angle, cls,
                               color);
                break;
            case 1:  // blob
                draw_blob(s, cx, cy, size * 0.8, cls, color);
                break;
            case 2:  // ribbon
                draw_ribbon(s, cx, cy, std::max(1.0, 0.25 * size), angle, cls, color);
                break;
        }
    }

    Sample sample;
    sample.height = sample.width = cfg.image_size;
    sample.channels = cfg.channels;
    sample.label_grid_side = cfg.label_grid();
    sample.labels = patch_labels(s, cfg.patch_size, cfg.num_classes);
    sample.domain = spec.name;

    apply_artifact(s, spec.artifact_amplitude, spec.artifact_frequency);
    apply_noise(s, spec.noise_sigma, noise_rng);
    clamp_image(s);
    sample.image = std::move(s.image);
    return sample;
}

// ---------------------------------------------------------------------------
// Benchmark assembly
// ---------------------------------------------------------------------------

struct Benchmark {
    DatasetConfig cfg;
    DomainSpec source;
    std::vector<DomainSpec> targets;
    std::vector<Sample> train;                        // source only
    std::map<std::string, std::vector<Sample>> test;  // per target domain
};

namespace detail {

inline Sample indexed_sample(const DomainSpec& spec, const DatasetConfig& cfg,
                             std::uint64_t split_tag, std::size_t index) {
    Rng rng(mix_seed(spec.seed, split_tag, index));
    return generate_scene(spec, cfg, rng);
}

}  // namespace detail

inline Benchmark make_benchmark(const DomainSpec& source,
                                const std::vector<DomainSpec>& targets,
                                const DatasetConfig& cfg) {
    cfg.validate();
    std::set<std::string> names{source.name};
    for (const auto& t : targets)
        check(names.insert(t.name).second,
              "make_benchmark: duplicate domain name '" + t.name + "'");

    Benchmark b;
    b.cfg = cfg;
    b.source = source;
    b.targets = targets;
    for (std::size_t i = 0; i < cfg.train_count; ++i)
        b.train.push_back(detail::indexed_sample(source, cfg, 1, i));
    for (const auto& t : targets) {
        auto& split = b.test[t.name];
        for (std::size_t i = 0; i < cfg.test_count; ++i)
            split.push_back(detail::indexed_sample(t, cfg, 2, i));
    }
    return b;
}

// Source distribution with every shift removed; used as the stand-in
// pretraining distribution before PEFT runs.
inline DomainSpec clean_spec(const DomainSpec& source) {
    DomainSpec clean = source;
    clean.name = source.name + "-clean";
    clean.spatial_scale = 1.0;
    clean.rotation_deg = 0.0;
    clean.artifact_amplitude = 0.0;
    clean.artifact_frequency = 0.0;
    return clean;
}

// ---------------------------------------------------------------------------
// Manifest (text) and sample (binary) persistence
// ---------------------------------------------------------------------------

struct BenchmarkSpec {
    DatasetConfig cfg;
    DomainSpec source;
    std::vector<DomainSpec> targets;
};

namespace detail {

inline void write_domain_line(std::ostream& os, const std::string& role,
                              const DomainSpec& d) {
    os << "domain " << role << ' ' << d.name;
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        os << buf;
    };
    put(d.spatial_scale);
    put(d.rotation_deg);
    put(d.artifact_amplitude);
    put(d.artifact_frequency);
    put(d.noise_sigma);
    os << ' ' << d.seed << " palette";
    for (const auto& cls : d.palette)
        for (double v : cls) put(v);
    os << '\n';
}

inline DomainSpec parse_domain_line(std::istringstream& iss, const DatasetConfig& cfg) {
    DomainSpec d;
    iss >> d.name >> d.spatial_scale >> d.rotation_deg >> d.artifact_amplitude >>
        d.artifact_frequency >> d.noise_sigma >> d.seed;
    std::string tag;
    iss >> tag;
    check_io(static_cast<bool>(iss) && tag == "palette",
             "manifest: malformed domain line for '" + d.name + "'");
    d.palette.assign(cfg.num_classes, std::vector<double>(cfg.channels));
    for (auto& cls : d.palette)
        for (auto& v : cls) {
            iss >> v;
            check_io(static_cast<bool>(iss),
                     "manifest: truncated palette for '" + d.name + "'");
        }
    return d;
}

}  // namespace detail

inline void write_manifest(std::ostream& os, const BenchmarkSpec& spec) {
    os << "cegate-manifest v1\n";
    const DatasetConfig& c = spec.cfg;
    os << "classes " << c.num_classes << '\n'
       << "image_size " << c.image_size << '\n'
       << "patch_size " << c.patch_size << '\n'
       << "channels " << c.channels << '\n'
       << "min_shapes " << c.min_shapes << '\n'
       << "max_shapes " << c.max_shapes << '\n'
       << "train_count " << c.train_count << '\n'
       << "test_count " << c.test_count << '\n';
    detail::write_domain_line(os, "source", spec.source);
    for (const auto& t : spec.targets) detail::write_domain_line(os, "target", t);
}

inline BenchmarkSpec read_manifest(std::istream& is) {
    std::string line;
    check_io(static_cast<bool>(std::getline(is, line)) && line == "cegate-manifest v1",
             "manifest: missing or unsupported header");
    BenchmarkSpec spec;
    bool have_source = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string key;
        iss >> key;
        if (key == "classes") iss >> spec.cfg.num_classes;
        else if (key == "image_size") iss >> spec.cfg.image_size;
        else if (key == "patch_size") iss >> spec.cfg.patch_size;
        else if (key == "channels") iss >> spec.cfg.channels;
        else if (key == "min_shapes") iss >> spec.cfg.min_shapes;
        else if (key == "max_shapes") iss >> spec.cfg.max_shapes;
        else if (key == "train_count") iss >> spec.cfg.train_count;
        else if (key == "test_count") iss >> spec.cfg.test_count;
        else if (key == "domain") {
            std::string role;
            iss >> role;
            DomainSpec d = detail::parse_domain_line(iss, spec.cfg);
            if (role == "source") {
                check_io(!have_source, "manifest: multiple source domains");
                spec.source = d;
                have_source = true;
            } else if (role == "target") {
                spec.targets.push_back(d);
            } else {
                check_io(false, "manifest: unknown domain role '" + role + "'");
            }
        } else {
            check_io(false, "manifest: unknown key '" + key + "'");
        }
        check_io(static_cast<bool>(iss), "manifest: malformed value for '" + key + "'");
    }
    check_io(have_source, "manifest: no source domain");
    spec.cfg.validate();
    spec.source.validate(spec.cfg.num_classes, spec.cfg.channels);
    for (const auto& t : spec.targets) t.validate(spec.cfg.num_classes, spec.cfg.channels);
    return spec;
}

inline Benchmark make_benchmark(const BenchmarkSpec& spec) {
    return make_benchmark(spec.source, spec.targets, spec.cfg);
}

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    check_io(static_cast<bool>(is), "sample file: truncated integer");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

inline double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

inline void write_sample(std::ostream& os, const Sample& s) {
    os.write("CGSM", 4);
    detail::write_u64(os, 1);  // format version
    detail::write_u64(os, s.height);
    detail::write_u64(os, s.width);
    detail::write_u64(os, s.channels);
    detail::write_u64(os, s.label_grid_side);
    detail::write_u64(os, s.domain.size());
    os.write(s.domain.data(), static_cast<std::streamsize>(s.domain.size()));
    for (double v : s.image) detail::write_f64(os, v);
    for (int v : s.labels) detail::write_u64(os, static_cast<std::uint64_t>(v));
    check_io(static_cast<bool>(os), "sample file: write failed");
}

inline Sample read_sample(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    check_io(static_cast<bool>(is) && std::string(magic, 4) == "CGSM",
             "sample file: bad magic");
    check_io(detail::read_u64(is) == 1, "sample file: unsupported version");
    Sample s;
    s.height = detail::read_u64(is);
    s.width = detail::read_u64(is);
    s.channels = detail::read_u64(is);
    s.label_grid_side = detail::read_u64(is);
    std::size_t name_len = detail::read_u64(is);
    s.domain.resize(name_len);
    is.read(s.domain.data(), static_cast<std::streamsize>(name_len));
    check_io(static_cast<bool>(is), "sample file: truncated domain name");
    s.image.resize(s.height * s.width * s.channels);
    for (auto& v : s.image) v = detail::read_f64(is);
    s.labels.resize(s.label_grid_side * s.label_grid_side);
    for (auto& v : s.labels) v = static_cast<int>(detail::read_u64(is));
    return s;
}

}  // namespace cegate

#endif

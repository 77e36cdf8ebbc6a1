// Datasets: synthetic generation, CSV ingestion, splitting, batching.
//
// Everything is driven by explicit seeds through qtl::Rng, so any dataset,
// split or batch order can be reproduced exactly from its seed. CSV files
// use the header f0,...,f{d-1},label with one sample per row, UTF-8, LF
// line endings and '.' as the decimal separator.

#pragma once

#include "qtl/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtl::data {

struct Dataset {
    std::vector<double> features; // [n_samples][dim] row-major
    std::vector<int> labels;
    int dim = 0;
    int n_classes = 0;
    std::string name;

    int size() const { return static_cast<int>(labels.size()); }

    std::span<const double> sample(int i) const {
        return {features.data() + static_cast<std::size_t>(i) * dim,
                static_cast<std::size_t>(dim)};
    }

    void validate() const {
        if (dim < 1) throw std::invalid_argument("Dataset: dim must be >= 1");
        if (features.size() != static_cast<std::size_t>(size()) * dim)
            throw std::invalid_argument("Dataset: feature matrix does not match label count");
        for (int label : labels)
            if (label < 0 || label >= n_classes)
                throw std::invalid_argument("Dataset: label out of range");
        for (double f : features)
            if (!std::isfinite(f)) throw std::invalid_argument("Dataset: non-finite feature");
    }
};

enum class SyntheticKind { Blobs, TwoMoonsLike, TransferPair };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::Blobs;
    int n_samples = 400;
    int dim = 16;
    int n_classes = 2;
    double class_separation = 2.0; // cluster noise stddev is 1 / class_separation
    std::uint64_t seed = 0;
    // TransferPair only: the target task re-draws from the source distribution,
    // then rotates by rotation_angle in each coordinate plane (2k, 2k+1) and
    // shifts every coordinate by mean_shift.
    double rotation_angle = 0.0;
    double mean_shift = 0.0;
    int target_samples = 0; // 0: same as n_samples

    void validate() const {
        if (n_samples < n_classes)
            throw std::invalid_argument("SyntheticSpec: n_samples must be >= n_classes");
        if (dim < 1) throw std::invalid_argument("SyntheticSpec: dim must be >= 1");
        if (n_classes < 2) throw std::invalid_argument("SyntheticSpec: n_classes must be >= 2");
        if (!(class_separation > 0.0))
            throw std::invalid_argument("SyntheticSpec: class_separation must be positive");
        if (kind == SyntheticKind::TwoMoonsLike) {
            if (n_classes != 2)
                throw std::invalid_argument("SyntheticSpec: two-moons data has exactly 2 classes");
            if (dim < 2) throw std::invalid_argument("SyntheticSpec: two-moons data needs dim >= 2");
        }
        if (kind == SyntheticKind::TransferPair && rotation_angle == 0.0)
            throw std::invalid_argument(
                "SyntheticSpec: transfer pair requires a nonzero rotation_angle");
    }
};

namespace detail {

/// Class means drawn uniformly in [-1, 1]^dim.
inline std::vector<double> draw_means(Rng& rng, int n_classes, int dim) {
    std::vector<double> means(static_cast<std::size_t>(n_classes) * dim);
    for (double& m : means) m = rng.uniform(-1.0, 1.0);
    return means;
}

/// Labels are assigned round-robin, so classes are balanced to within one sample.
inline Dataset blobs_from_means(Rng& rng, std::span<const double> means,
                                const SyntheticSpec& spec, int n_samples) {
    Dataset out;
    out.dim = spec.dim;
    out.n_classes = spec.n_classes;
    out.features.resize(static_cast<std::size_t>(n_samples) * spec.dim);
    out.labels.resize(n_samples);
    const double noise = 1.0 / spec.class_separation;
    for (int i = 0; i < n_samples; ++i) {
        const int label = i % spec.n_classes;
        out.labels[i] = label;
        for (int d = 0; d < spec.dim; ++d)
            out.features[static_cast<std::size_t>(i) * spec.dim + d] =
                means[static_cast<std::size_t>(label) * spec.dim + d] + rng.normal(0.0, noise);
    }
    return out;
}

inline Dataset two_moons(Rng& rng, const SyntheticSpec& spec) {
    Dataset out;
    out.dim = spec.dim;
    out.n_classes = 2;
    out.features.resize(static_cast<std::size_t>(spec.n_samples) * spec.dim);
    out.labels.resize(spec.n_samples);
    const double noise = 1.0 / spec.class_separation;
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < spec.n_samples; ++i) {
        const int label = i % 2;
        out.labels[i] = label;
        const double t = pi * rng.uniform();
        double* row = out.features.data() + static_cast<std::size_t>(i) * spec.dim;
        if (label == 0) {
            row[0] = std::cos(t);
            row[1] = std::sin(t);
        } else {
            row[0] = 1.0 - std::cos(t);
            row[1] = 0.5 - std::sin(t);
        }
        row[0] += rng.normal(0.0, noise);
        row[1] += rng.normal(0.0, noise);
        for (int d = 2; d < spec.dim; ++d) row[d] = rng.normal(0.0, noise);
    }
    return out;
}

/// In-place rotation by `angle` in each coordinate plane (2k, 2k+1), then a
/// constant shift on every coordinate.
inline void rotate_and_shift(Dataset& dataset, double angle, double shift) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (int i = 0; i < dataset.size(); ++i) {
        double* row = dataset.features.data() + static_cast<std::size_t>(i) * dataset.dim;
        for (int d = 0; d + 1 < dataset.dim; d += 2) {
            const double a = row[d];
            const double b = row[d + 1];
            row[d] = c * a - s * b;
            row[d + 1] = s * a + c * b;
        }
        for (int d = 0; d < dataset.dim; ++d) row[d] += shift;
    }
}

} // namespace detail

inline Dataset gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    switch (spec.kind) {
    case SyntheticKind::Blobs: {
        const std::vector<double> means = detail::draw_means(rng, spec.n_classes, spec.dim);
        Dataset out = detail::blobs_from_means(rng, means, spec, spec.n_samples);
        out.name = "blobs";
        return out;
    }
    case SyntheticKind::TwoMoonsLike: {
        Dataset out = detail::two_moons(rng, spec);
        out.name = "two_moons";
        return out;
    }
    case SyntheticKind::TransferPair:
        throw std::invalid_argument(
            "gen_synthetic: transfer pairs are produced by gen_transfer_pair");
    }
    throw std::invalid_argument("gen_synthetic: unknown kind");
}

/// Source and target tasks sharing cluster structure: the target re-draws
/// from the source class distribution and applies the fixed rotation+shift.
inline std::pair<Dataset, Dataset> gen_transfer_pair(const SyntheticSpec& spec) {
    if (spec.kind != SyntheticKind::TransferPair)
        throw std::invalid_argument("gen_transfer_pair: spec.kind must be TransferPair");
    spec.validate();
    Rng rng(spec.seed);
    const std::vector<double> means = detail::draw_means(rng, spec.n_classes, spec.dim);
    Dataset source = detail::blobs_from_means(rng, means, spec, spec.n_samples);
    source.name = "transfer_source";
    const int target_n = spec.target_samples > 0 ? spec.target_samples : spec.n_samples;
    Dataset target = detail::blobs_from_means(rng, means, spec, target_n);
    detail::rotate_and_shift(target, spec.rotation_angle, spec.mean_shift);
    target.name = "transfer_target";
    return {std::move(source), std::move(target)};
}

// ---------------------------------------------------------------------------
// CSV

/// Writes content to path via a temp file + rename, so interrupted runs never
/// leave a partial file behind.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string to_csv(const Dataset& dataset) {
    std::string out;
    for (int d = 0; d < dataset.dim; ++d) {
        out += 'f';
        out += std::to_string(d);
        out += ',';
    }
    out += "label\n";
    char buf[32];
    for (int i = 0; i < dataset.size(); ++i) {
        const std::span<const double> row = dataset.sample(i);
        for (int d = 0; d < dataset.dim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[d]);
            out += buf;
            out += ',';
        }
        out += std::to_string(dataset.labels[i]);
        out += '\n';
    }
    return out;
}

inline void save_csv(const Dataset& dataset, const std::string& path) {
    dataset.validate();
    write_file_atomic(path, to_csv(dataset));
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

[[noreturn]] inline void parse_fail(const std::string& path, int line_no, const std::string& why) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + why);
}

} // namespace detail

inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) detail::parse_fail(path, 1, "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = detail::split_fields(line);
    if (header.size() < 2 || header.back() != "label")
        detail::parse_fail(path, 1, "header must be f0,...,f{d-1},label");
    const int dim = static_cast<int>(header.size()) - 1;
    for (int d = 0; d < dim; ++d)
        if (header[d] != "f" + std::to_string(d))
            detail::parse_fail(path, 1, "unexpected feature column name '" + header[d] + "'");

    Dataset out;
    out.dim = dim;
    out.name = std::filesystem::path(path).stem().string();

    int line_no = 1;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_fields(line);
        if (static_cast<int>(fields.size()) != dim + 1)
            detail::parse_fail(path, line_no,
                               "expected " + std::to_string(dim + 1) + " fields, got " +
                                   std::to_string(fields.size()));
        for (int d = 0; d < dim; ++d) {
            double value = 0.0;
            const std::string& f = fields[d];
            const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
            if (ec != std::errc{} || end != f.data() + f.size())
                detail::parse_fail(path, line_no, "bad feature value '" + f + "'");
            if (!std::isfinite(value))
                detail::parse_fail(path, line_no, "non-finite feature value '" + f + "'");
            out.features.push_back(value);
        }
        int label = 0;
        const std::string& l = fields[dim];
        const auto [end, ec] = std::from_chars(l.data(), l.data() + l.size(), label);
        if (ec != std::errc{} || end != l.data() + l.size() || label < 0)
            detail::parse_fail(path, line_no,
                               "label must be a nonnegative integer, got '" + l + "'");
        out.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    if (out.labels.empty()) detail::parse_fail(path, line_no, "no data rows");
    out.n_classes = max_label + 1;
    return out;
}

// ---------------------------------------------------------------------------
// Splitting and batching

/// Label-stratified split. Per-class train counts are the largest-remainder
/// allocation of floor(n * train_fraction), so the global train size is exact
/// and every class is within one sample of the requested fraction.
inline std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                         std::uint64_t seed) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must be in (0, 1)");
    const int n = dataset.size();
    const int train_size = static_cast<int>(std::floor(n * train_fraction));
    if (train_size < 1 || train_size >= n)
        throw std::invalid_argument("split: degenerate split sizes for " + std::to_string(n) +
                                    " samples");

    std::vector<std::vector<int>> by_class(dataset.n_classes);
    for (int i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);

    Rng rng(seed);
    for (auto& members : by_class) rng.shuffle(members);

    // largest-remainder apportionment of the train quota across classes
    std::vector<int> quota(dataset.n_classes, 0);
    std::vector<std::pair<double, int>> remainders;
    int allocated = 0;
    for (int c = 0; c < dataset.n_classes; ++c) {
        const double exact = by_class[c].size() * train_fraction;
        quota[c] = static_cast<int>(std::floor(exact));
        allocated += quota[c];
        remainders.push_back({exact - quota[c], c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    // deficit is strictly less than n_classes, so each class gains at most one
    for (int k = 0; allocated < train_size; ++k, ++allocated) quota[remainders[k].second]++;

    Dataset train, test;
    train.dim = test.dim = dataset.dim;
    train.n_classes = test.n_classes = dataset.n_classes;
    train.name = dataset.name + "_train";
    test.name = dataset.name + "_test";
    const auto copy_row = [&](Dataset& dst, int i) {
        const std::span<const double> row = dataset.sample(i);
        dst.features.insert(dst.features.end(), row.begin(), row.end());
        dst.labels.push_back(dataset.labels[i]);
    };
    for (int c = 0; c < dataset.n_classes; ++c) {
        for (std::size_t k = 0; k < by_class[c].size(); ++k)
            copy_row(k < static_cast<std::size_t>(quota[c]) ? train : test, by_class[c][k]);
    }
    return {std::move(train), std::move(test)};
}

/// Index batches for one epoch: shuffle with seed xor epoch, then cut into
/// contiguous chunks; the last batch may be short.
inline std::vector<std::vector<int>> batches(int n_samples, int batch_size, std::uint64_t seed,
                                             int epoch) {
    if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
    std::vector<int> order(n_samples);
    for (int i = 0; i < n_samples; ++i) order[i] = i;
    Rng rng(seed ^ static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    std::vector<std::vector<int>> out;
    for (int start = 0; start < n_samples; start += batch_size) {
        const int end = std::min(start + batch_size, n_samples);
        out.emplace_back(order.begin() + start, order.begin() + end);
    }
    return out;
}

inline std::vector<std::vector<int>> batches(const Dataset& dataset, int batch_size,
                                             std::uint64_t seed, int epoch) {
    return batches(dataset.size(), batch_size, seed, epoch);
}

} // namespace qtl::data

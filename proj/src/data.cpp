#include "chatty/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "chatty/errors.hpp"

namespace chatty {

namespace {

// Decorrelates the target stream from the source stream under a shared seed.
constexpr std::uint64_t kTargetStreamSalt = 0x9e3779b97f4a7c15ULL;

void rotate_rows_in_place(Mat& x, Real rotation_deg, Real cx, Real cy) {
    const Real theta = rotation_deg * std::numbers::pi_v<Real> / 180.0;
    const Real c = std::cos(theta);
    const Real s = std::sin(theta);
    for (Index i = 0; i < x.rows(); ++i) {
        const Real px = x(i, 0) - cx;
        const Real py = x(i, 1) - cy;
        x(i, 0) = c * px - s * py + cx;
        x(i, 1) = s * px + c * py + cy;
    }
}

std::string format_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

}  // namespace

DomainPair gen_blobs(Index classes, Index n_per_class, Index dim, Real rotation_deg,
                     const std::vector<Real>& translation, Real noise, std::uint64_t seed) {
    if (classes < 2) throw ParamError("gen_blobs: need at least 2 classes");
    if (dim < 2) throw ParamError("gen_blobs: need at least 2 dimensions");
    if (n_per_class < 2) throw ParamError("gen_blobs: need at least 2 samples per class");
    if (noise < 0.0) throw ParamError("gen_blobs: noise must be non-negative");
    if (!translation.empty() && static_cast<Index>(translation.size()) != dim) {
        throw ParamError("gen_blobs: translation has " + std::to_string(translation.size()) +
                         " entries, expected " + std::to_string(dim));
    }

    const Real radius = 4.0;
    Mat centers = Mat::Zero(classes, dim);
    for (Index k = 0; k < classes; ++k) {
        const Real angle = 2.0 * std::numbers::pi_v<Real> * static_cast<Real>(k) /
                           static_cast<Real>(classes);
        centers(k, 0) = radius * std::cos(angle);
        centers(k, 1) = radius * std::sin(angle);
    }

    Rng rng(seed);
    const Index n = classes * n_per_class;
    auto sample_domain = [&](const Mat& domain_centers, Mat& x, std::vector<int>& y) {
        x.resize(n, dim);
        y.resize(static_cast<std::size_t>(n));
        Index row = 0;
        for (Index k = 0; k < classes; ++k) {
            for (Index i = 0; i < n_per_class; ++i) {
                for (Index j = 0; j < dim; ++j) {
                    x(row, j) = domain_centers(k, j) + noise * rng.normal();
                }
                y[static_cast<std::size_t>(row)] = static_cast<int>(k);
                ++row;
            }
        }
    };

    DomainPair pair;
    pair.num_classes = classes;
    sample_domain(centers, pair.source_x, pair.source_y);

    Mat target_centers = centers;
    rotate_rows_in_place(target_centers, rotation_deg, 0.0, 0.0);
    for (std::size_t j = 0; j < translation.size(); ++j) {
        target_centers.col(static_cast<Index>(j)).array() += translation[j];
    }
    sample_domain(target_centers, pair.target_x, pair.target_y);

    standardize_source_stats(pair);
    return pair;
}

DomainPair gen_moons(Real rotation_deg, Real noise, Index n, std::uint64_t seed) {
    if (n < 4) throw ParamError("gen_moons: need at least 4 samples");
    if (n % 2 != 0) throw ParamError("gen_moons: sample count must be even for balance");
    if (noise < 0.0) throw ParamError("gen_moons: noise must be non-negative");

    Rng rng(seed);
    const Index half = n / 2;
    auto sample_domain = [&](Mat& x, std::vector<int>& y) {
        x.resize(n, 2);
        y.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < half; ++i) {
            const Real t = rng.uniform(0.0, std::numbers::pi_v<Real>);
            x(i, 0) = std::cos(t) + noise * rng.normal();
            x(i, 1) = std::sin(t) + noise * rng.normal();
            y[static_cast<std::size_t>(i)] = 0;
        }
        for (Index i = half; i < n; ++i) {
            const Real t = rng.uniform(0.0, std::numbers::pi_v<Real>);
            x(i, 0) = 1.0 - std::cos(t) + noise * rng.normal();
            x(i, 1) = 0.5 - std::sin(t) + noise * rng.normal();
            y[static_cast<std::size_t>(i)] = 1;
        }
    };

    DomainPair pair;
    pair.num_classes = 2;
    sample_domain(pair.source_x, pair.source_y);
    sample_domain(pair.target_x, pair.target_y);
    const Real cx = pair.target_x.col(0).mean();
    const Real cy = pair.target_x.col(1).mean();
    rotate_rows_in_place(pair.target_x, rotation_deg, cx, cy);

    standardize_source_stats(pair);
    return pair;
}

void standardize_source_stats(DomainPair& pair) {
    const Index d = pair.source_x.cols();
    for (Index j = 0; j < d; ++j) {
        const Real mean = pair.source_x.col(j).mean();
        const Real var = (pair.source_x.col(j).array() - mean).square().mean();
        const Real sd = std::sqrt(var);
        const Real scale = sd > 1e-12 ? 1.0 / sd : 1.0;
        pair.source_x.col(j) = (pair.source_x.col(j).array() - mean) * scale;
        pair.target_x.col(j) = (pair.target_x.col(j).array() - mean) * scale;
    }
}

BatchSampler::BatchSampler(const DomainPair& pair, Index batch_size, std::uint64_t seed)
    : pair_(pair),
      batch_size_(batch_size),
      src_rng_(seed),
      tgt_rng_(seed ^ kTargetStreamSalt) {
    if (batch_size < 1) throw ParamError("BatchSampler: batch size must be positive");
    if (pair.source_x.rows() < 1 || pair.target_x.rows() < 1) {
        throw ParamError("BatchSampler: dataset is empty");
    }
    src_order_.resize(static_cast<std::size_t>(pair.source_x.rows()));
    tgt_order_.resize(static_cast<std::size_t>(pair.target_x.rows()));
    for (std::size_t i = 0; i < src_order_.size(); ++i) src_order_[i] = static_cast<Index>(i);
    for (std::size_t i = 0; i < tgt_order_.size(); ++i) tgt_order_[i] = static_cast<Index>(i);
    src_rng_.shuffle(src_order_);
    tgt_rng_.shuffle(tgt_order_);
}

Index BatchSampler::next_source() {
    if (src_pos_ == src_order_.size()) {
        src_rng_.shuffle(src_order_);
        src_pos_ = 0;
    }
    return src_order_[src_pos_++];
}

Index BatchSampler::next_target() {
    if (tgt_pos_ == tgt_order_.size()) {
        tgt_rng_.shuffle(tgt_order_);
        tgt_pos_ = 0;
    }
    return tgt_order_[tgt_pos_++];
}

BatchPair BatchSampler::next() {
    BatchPair batch;
    const Index d = pair_.dim();
    batch.src_x.resize(batch_size_, d);
    batch.tgt_x.resize(batch_size_, d);
    batch.src_y.resize(static_cast<std::size_t>(batch_size_));
    for (Index b = 0; b < batch_size_; ++b) {
        const Index si = next_source();
        batch.src_x.row(b) = pair_.source_x.row(si);
        batch.src_y[static_cast<std::size_t>(b)] = pair_.source_y[static_cast<std::size_t>(si)];
        batch.tgt_x.row(b) = pair_.target_x.row(next_target());
    }
    return batch;
}

void save_domain_pair_csv(const DomainPair& pair, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParamError("save_domain_pair_csv: cannot write " + path);
    const Index d = pair.dim();
    for (Index j = 0; j < d; ++j) {
        out << 'x' << j << ',';
    }
    out << "y,domain\n";
    auto write_domain = [&](const Mat& x, const std::vector<int>& y, int domain) {
        for (Index i = 0; i < x.rows(); ++i) {
            for (Index j = 0; j < d; ++j) {
                out << format_real(x(i, j)) << ',';
            }
            out << y[static_cast<std::size_t>(i)] << ',' << domain << '\n';
        }
    };
    write_domain(pair.source_x, pair.source_y, 0);
    write_domain(pair.target_x, pair.target_y, 1);
}

DomainPair load_domain_pair_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("load_domain_pair_csv: cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw ParamError("load_domain_pair_csv: " + path + " is empty");
    }
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "y" || header.back() != "domain") {
        throw ParamError("load_domain_pair_csv: " + path +
                         " header must end with y,domain after the x columns");
    }
    const Index d = static_cast<Index>(header.size()) - 2;
    for (Index j = 0; j < d; ++j) {
        if (header[static_cast<std::size_t>(j)] != "x" + std::to_string(j)) {
            throw ParamError("load_domain_pair_csv: " + path + " header column " +
                             std::to_string(j) + " must be x" + std::to_string(j));
        }
    }

    std::vector<std::vector<Real>> rows[2];
    std::vector<int> labels[2];
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (static_cast<Index>(fields.size()) != d + 2) {
            throw ParamError("load_domain_pair_csv: " + path + " line " +
                             std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(d + 2));
        }
        std::vector<Real> values(static_cast<std::size_t>(d));
        try {
            for (Index j = 0; j < d; ++j) {
                values[static_cast<std::size_t>(j)] = std::stod(fields[static_cast<std::size_t>(j)]);
            }
            const int y = std::stoi(fields[static_cast<std::size_t>(d)]);
            const int domain = std::stoi(fields[static_cast<std::size_t>(d) + 1]);
            if (domain != 0 && domain != 1) {
                throw ParamError("load_domain_pair_csv: " + path + " line " +
                                 std::to_string(line_no) + " has domain " +
                                 std::to_string(domain) + ", expected 0 or 1");
            }
            rows[domain].push_back(std::move(values));
            labels[domain].push_back(y);
        } catch (const std::invalid_argument&) {
            throw ParamError("load_domain_pair_csv: " + path + " line " +
                             std::to_string(line_no) + " has a non-numeric field");
        }
    }
    if (rows[0].empty() || rows[1].empty()) {
        throw ParamError("load_domain_pair_csv: " + path + " must contain both domains");
    }

    DomainPair pair;
    auto fill = [d](const std::vector<std::vector<Real>>& src, Mat& x) {
        x.resize(static_cast<Index>(src.size()), d);
        for (std::size_t i = 0; i < src.size(); ++i) {
            for (Index j = 0; j < d; ++j) {
                x(static_cast<Index>(i), j) = src[i][static_cast<std::size_t>(j)];
            }
        }
    };
    fill(rows[0], pair.source_x);
    fill(rows[1], pair.target_x);
    pair.source_y = std::move(labels[0]);
    pair.target_y = std::move(labels[1]);
    int max_label = 0;
    for (int y : pair.source_y) max_label = std::max(max_label, y);
    for (int y : pair.target_y) max_label = std::max(max_label, y);
    pair.num_classes = static_cast<Index>(max_label) + 1;
    return pair;
}

}  // namespace chatty

#include "mixprop/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mixprop/rng.hpp"

namespace mixprop::dataio {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& tok, Index row, const std::string& col) {
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        if (!std::isfinite(v))
            throw MixpropError("non-finite value at row " + std::to_string(row) + ", column " + col);
        return v;
    } catch (const MixpropError&) {
        throw;
    } catch (const std::exception&) {
        throw MixpropError("non-numeric cell '" + tok + "' at row " + std::to_string(row) +
                           ", column " + col);
    }
}

int parse_label(const std::string& tok, Index row) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        if (v < 1) throw MixpropError("labels must be >= 1 (row " + std::to_string(row) + ")");
        return v;
    } catch (const MixpropError&) {
        throw;
    } catch (const std::exception&) {
        throw MixpropError("non-integer label '" + tok + "' at row " + std::to_string(row));
    }
}

}  // namespace

Index Dataset::count_of(int c) const {
    return std::count(labels.begin(), labels.end(), c);
}

Matrix ColumnTransform::apply(const Matrix& x) const {
    if (x.cols() != mean.size())
        throw MixpropError("transform dimension mismatch");
    Matrix out = x;
    out.rowwise() -= mean.transpose();
    out.array().rowwise() /= scale.transpose().array();
    return out;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MixpropError("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw MixpropError("empty file: " + path);

    auto header = split_csv_line(line);
    for (auto& h : header) h = trim(h);
    Index label_col = -1;
    for (Index i = 0; i < static_cast<Index>(header.size()); ++i)
        if (header[i] == "label") label_col = i;
    if (label_col < 0) throw MixpropError("missing label column in " + path);
    if (header.size() < 2) throw MixpropError("no feature columns in " + path);

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    Index row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw MixpropError("row " + std::to_string(row_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
        std::vector<double> feat;
        feat.reserve(header.size() - 1);
        for (Index c = 0; c < static_cast<Index>(cells.size()); ++c) {
            std::string cell = trim(cells[c]);
            if (c == label_col)
                labels.push_back(parse_label(cell, row_no));
            else
                feat.push_back(parse_double(cell, row_no, header[c]));
        }
        rows.push_back(std::move(feat));
    }
    if (rows.empty()) throw MixpropError("no data rows in " + path);

    Dataset d;
    d.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
    for (Index i = 0; i < d.features.rows(); ++i)
        for (Index j = 0; j < d.features.cols(); ++j) d.features(i, j) = rows[i][j];
    d.labels = std::move(labels);
    d.class_count = *std::max_element(d.labels.begin(), d.labels.end());
    return d;
}

Dataset load_sparse(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MixpropError("cannot open file: " + path);

    std::vector<std::vector<std::pair<Index, double>>> rows;
    std::vector<int> labels;
    Index dim = 0;
    std::string line;
    Index row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        ss >> tok;
        labels.push_back(parse_label(tok, row_no));
        std::vector<std::pair<Index, double>> entries;
        while (ss >> tok) {
            auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw MixpropError("malformed token '" + tok + "' at row " + std::to_string(row_no));
            Index idx = 0;
            try {
                idx = std::stoll(tok.substr(0, colon));
            } catch (const std::exception&) {
                throw MixpropError("malformed index in '" + tok + "' at row " + std::to_string(row_no));
            }
            if (idx <= 0)
                throw MixpropError("indices are 1-based, got " + std::to_string(idx) + " at row " +
                                   std::to_string(row_no));
            double v = parse_double(tok.substr(colon + 1), row_no, std::to_string(idx));
            entries.emplace_back(idx - 1, v);
            dim = std::max(dim, idx);
        }
        rows.push_back(std::move(entries));
    }
    if (rows.empty()) throw MixpropError("empty file: " + path);

    Dataset d;
    d.features = Matrix::Zero(static_cast<Index>(rows.size()), dim);
    for (Index i = 0; i < d.features.rows(); ++i)
        for (auto& [j, v] : rows[i]) d.features(i, j) = v;
    d.labels = std::move(labels);
    d.class_count = *std::max_element(d.labels.begin(), d.labels.end());
    return d;
}

namespace {

ColumnTransform fit_transform(const Matrix& x) {
    ColumnTransform t;
    t.mean = x.colwise().mean();
    t.scale.resize(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        double var = (x.col(j).array() - t.mean[j]).square().mean();
        double sd = std::sqrt(var);
        t.scale[j] = sd > 0 ? sd : 1.0;
    }
    return t;
}

}  // namespace

std::pair<Dataset, ColumnTransform> standardize(const Dataset& d) {
    ColumnTransform t = fit_transform(d.features);
    Dataset out = d;
    out.features = t.apply(d.features);
    return {std::move(out), std::move(t)};
}

std::vector<Index> largest_remainder_counts(const Vector& props, Index total) {
    const Index m = props.size();
    std::vector<Index> counts(m);
    std::vector<std::pair<double, Index>> remainders(m);
    Index assigned = 0;
    for (Index i = 0; i < m; ++i) {
        double exact = props[i] * static_cast<double>(total);
        counts[i] = static_cast<Index>(std::floor(exact + 1e-9));
        remainders[i] = {exact - std::floor(exact + 1e-9), i};
        assigned += counts[i];
    }
    // Distribute leftover seats by descending remainder; ties to lower index.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (Index s = 0; s < total - assigned; ++s) counts[remainders[s % m].second]++;
    return counts;
}

CpeTrial make_cpe_trial(const Dataset& d, const Vector& target_props,
                        const std::vector<Index>& train_sizes, Index test_size,
                        bool unobserved_last, std::uint64_t seed) {
    const int m = d.class_count;
    if (target_props.size() != m)
        throw MixpropError("target_props length must equal class count");
    if (std::abs(target_props.sum() - 1.0) > 1e-9 || target_props.minCoeff() < -1e-12)
        throw MixpropError("target_props must lie on the probability simplex");
    if (static_cast<int>(train_sizes.size()) != m)
        throw MixpropError("train_sizes length must equal class count");

    std::vector<Index> test_counts = largest_remainder_counts(target_props, test_size);

    // Per-class index pools, shuffled once; train takes the head, test the next slice.
    std::vector<std::vector<Index>> pools(m);
    for (Index i = 0; i < d.rows(); ++i) pools[d.labels[i] - 1].push_back(i);

    CpeTrial trial;
    trial.class_count = m;
    trial.seed = seed;
    trial.true_proportions = target_props;

    std::vector<Index> test_rows;
    for (int c = 0; c < m; ++c) {
        const bool observed = !(unobserved_last && c == m - 1);
        Index want_train = observed ? train_sizes[c] : 0;
        if (want_train + test_counts[c] > static_cast<Index>(pools[c].size()))
            throw MixpropError("class " + std::to_string(c + 1) + " has " +
                               std::to_string(pools[c].size()) + " instances, needs " +
                               std::to_string(want_train + test_counts[c]));
        auto stream = rng::make_stream(seed, {0x7261696eULL, static_cast<std::uint64_t>(c)});
        std::shuffle(pools[c].begin(), pools[c].end(), stream);
        if (observed) {
            Matrix tr(want_train, d.cols());
            for (Index i = 0; i < want_train; ++i) tr.row(i) = d.features.row(pools[c][i]);
            trial.train_per_class.push_back(std::move(tr));
            trial.observed_classes.push_back(c + 1);
        }
        for (Index i = 0; i < test_counts[c]; ++i) test_rows.push_back(pools[c][want_train + i]);
    }

    auto stream = rng::make_stream(seed, {0x74657374ULL});
    std::shuffle(test_rows.begin(), test_rows.end(), stream);
    trial.test_features.resize(static_cast<Index>(test_rows.size()), d.cols());
    for (Index i = 0; i < trial.test_features.rows(); ++i)
        trial.test_features.row(i) = d.features.row(test_rows[i]);
    return trial;
}

CpeTrial standardize_trial(const CpeTrial& t) {
    Index total = 0, cols = t.test_features.cols();
    for (const auto& tr : t.train_per_class) total += tr.rows();
    if (total == 0) return t;
    Matrix pooled(total, cols);
    Index at = 0;
    for (const auto& tr : t.train_per_class) {
        pooled.middleRows(at, tr.rows()) = tr;
        at += tr.rows();
    }
    ColumnTransform xf = fit_transform(pooled);
    CpeTrial out = t;
    for (auto& tr : out.train_per_class) tr = xf.apply(tr);
    out.test_features = xf.apply(t.test_features);
    return out;
}

}  // namespace mixprop::dataio

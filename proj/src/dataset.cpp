#include "lpanet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lpanet/errors.hpp"
#include "lpanet/rng.hpp"

namespace lpanet {

Dataset::Dataset(std::vector<Column> columns, std::size_t n_rows)
    : columns_(std::move(columns)), n_rows_(n_rows) {
    std::set<std::string> seen;
    for (const Column& c : columns_) {
        if (!seen.insert(c.spec.name).second)
            throw ParseError("duplicate column name '" + c.spec.name + "'");
        if (c.size() != n_rows_)
            throw LengthMismatch("column '" + c.spec.name + "' has " +
                                 std::to_string(c.size()) + " cells, expected " +
                                 std::to_string(n_rows_));
    }
}

const Column& Dataset::column(const std::string& name) const {
    for (const Column& c : columns_)
        if (c.spec.name == name) return c;
    throw HeaderMismatch("no column named '" + name + "'");
}

bool Dataset::has_column(const std::string& name) const {
    for (const Column& c : columns_)
        if (c.spec.name == name) return true;
    return false;
}

std::vector<std::string> Dataset::column_names() const {
    std::vector<std::string> names;
    names.reserve(columns_.size());
    for (const Column& c : columns_) names.push_back(c.spec.name);
    return names;
}

Matrix Dataset::numeric_matrix(const std::vector<std::string>& names) const {
    Matrix X(n_rows_, names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const Column& c = column(names[j]);
        if (c.spec.kind != ColumnKind::Numeric)
            throw ParseError("column '" + names[j] + "' is not numeric");
        for (std::size_t i = 0; i < n_rows_; ++i) X.at(i, j) = c.nums[i];
    }
    return X;
}

namespace {

// Splits delimiter-separated text into rows of fields; double quotes guard
// embedded delimiters and newlines, "" inside quotes is a literal quote.
std::vector<std::vector<std::string>> parse_delimited(const std::string& text, char delim) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
            row_started = true;
        } else if (c == delim) {
            row.push_back(std::move(field));
            field.clear();
            row_started = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < n && text[i + 1] == '\n') ++i;
            if (row_started || !field.empty()) {
                row.push_back(std::move(field));
                field.clear();
                rows.push_back(std::move(row));
                row.clear();
                row_started = false;
            }
        } else {
            field += c;
            row_started = true;
        }
    }
    if (row_started || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<double> parse_finite_double(const std::string& raw) {
    std::size_t b = raw.find_first_not_of(" \t");
    if (b == std::string::npos) return std::nullopt;
    std::size_t e = raw.find_last_not_of(" \t");
    const char* first = raw.data() + b;
    const char* last = raw.data() + e + 1;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_cell_17g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string quote_if_needed(const std::string& s, char delim) {
    if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos &&
        s.find('\n') == std::string::npos && s.find('\r') == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

LoadResult load_table(const std::string& path, const std::optional<std::vector<ColumnSpec>>& schema,
                      char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableFile("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    auto rows = parse_delimited(buf.str(), delimiter);
    if (rows.empty()) throw UnreadableFile("'" + path + "' has no header row");

    const std::vector<std::string>& header = rows.front();
    const std::size_t d = header.size();
    if (schema) {
        if (schema->size() != d)
            throw HeaderMismatch("schema has " + std::to_string(schema->size()) +
                                 " columns, header has " + std::to_string(d));
        for (std::size_t j = 0; j < d; ++j)
            if ((*schema)[j].name != header[j])
                throw HeaderMismatch("schema column '" + (*schema)[j].name +
                                     "' does not match header '" + header[j] + "'");
    }

    // listwise deletion: any empty cell drops the row
    std::vector<const std::vector<std::string>*> kept;
    std::size_t dropped = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != d)
            throw ParseError("row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                             " fields, expected " + std::to_string(d));
        bool missing = false;
        for (const std::string& cell : row)
            if (cell.empty()) missing = true;
        if (missing) {
            ++dropped;
        } else {
            kept.push_back(&row);
        }
    }
    if (kept.empty())
        throw EmptyAfterDeletion("no complete rows left in '" + path + "' (" +
                                 std::to_string(dropped) + " dropped)");

    const std::size_t n = kept.size();
    std::vector<Column> columns(d);
    for (std::size_t j = 0; j < d; ++j) {
        ColumnKind kind;
        std::vector<double> nums(n);
        bool all_numeric = true;
        for (std::size_t i = 0; i < n; ++i) {
            auto v = parse_finite_double((*kept[i])[j]);
            if (!v) {
                all_numeric = false;
                break;
            }
            nums[i] = *v;
        }
        if (schema) {
            kind = (*schema)[j].kind;
            if (kind == ColumnKind::Numeric && !all_numeric)
                throw ParseError("column '" + header[j] +
                                 "' declared Numeric but has non-numeric cells");
        } else {
            kind = all_numeric ? ColumnKind::Numeric : ColumnKind::Categorical;
        }
        columns[j].spec = {header[j], kind};
        if (kind == ColumnKind::Numeric) {
            columns[j].nums = std::move(nums);
        } else {
            columns[j].cats.resize(n);
            for (std::size_t i = 0; i < n; ++i) columns[j].cats[i] = (*kept[i])[j];
        }
    }
    return {Dataset(std::move(columns), n), dropped};
}

void write_table(const Dataset& ds, const std::string& path, char delimiter) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UnreadableFile("cannot write '" + path + "'");
    const auto& cols = ds.columns();
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (j) out << delimiter;
        out << quote_if_needed(cols[j].spec.name, delimiter);
    }
    out << '\n';
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (j) out << delimiter;
            if (cols[j].spec.kind == ColumnKind::Numeric)
                out << format_cell_17g(cols[j].nums[i]);
            else
                out << quote_if_needed(cols[j].cats[i], delimiter);
        }
        out << '\n';
    }
}

EncodeResult encode_categoricals(const Dataset& ds, const std::vector<std::string>& cols) {
    std::set<std::string> wanted(cols.begin(), cols.end());
    for (const std::string& name : cols) {
        const Column& c = ds.column(name);
        if (c.spec.kind != ColumnKind::Categorical)
            throw ParseError("column '" + name + "' is not categorical");
    }

    std::vector<Column> out;
    std::vector<PredictorGroup> groups;
    for (const Column& c : ds.columns()) {
        if (!wanted.count(c.spec.name)) {
            out.push_back(c);
            continue;
        }
        std::set<std::string> level_set(c.cats.begin(), c.cats.end());
        if (level_set.size() < 2)
            throw SingleLevel("column '" + c.spec.name + "' has fewer than 2 levels");
        std::vector<std::string> levels(level_set.begin(), level_set.end());
        // levels[0] (lexicographically first) is the reference
        PredictorGroup group{c.spec.name, {}};
        for (std::size_t l = 1; l < levels.size(); ++l) {
            Column ind;
            ind.spec = {c.spec.name + "=" + levels[l], ColumnKind::Numeric};
            ind.nums.resize(ds.n_rows());
            for (std::size_t i = 0; i < ds.n_rows(); ++i)
                ind.nums[i] = (c.cats[i] == levels[l]) ? 1.0 : 0.0;
            group.columns.push_back(ind.spec.name);
            out.push_back(std::move(ind));
        }
        groups.push_back(std::move(group));
    }
    return {Dataset(std::move(out), ds.n_rows()), std::move(groups)};
}

StandardizeResult standardize(const Dataset& ds, const std::vector<std::string>& cols) {
    std::vector<Column> out = ds.columns();
    std::vector<ColumnScale> scales;
    const double n = static_cast<double>(ds.n_rows());
    if (ds.n_rows() < 2) throw TooFewRows("standardize needs at least 2 rows");
    for (const std::string& name : cols) {
        Column* target = nullptr;
        for (Column& c : out)
            if (c.spec.name == name) target = &c;
        if (!target) throw HeaderMismatch("no column named '" + name + "'");
        if (target->spec.kind != ColumnKind::Numeric)
            throw ParseError("column '" + name + "' is not numeric");
        KahanSum s;
        for (double v : target->nums) s.add(v);
        const double mean = s.value() / n;
        KahanSum sq;
        for (double v : target->nums) sq.add((v - mean) * (v - mean));
        const double var = sq.value() / (n - 1.0);
        if (!(var > 0.0)) throw ZeroVariance("column '" + name + "' is constant");
        const double sd = std::sqrt(var);
        for (double& v : target->nums) v = (v - mean) / sd;
        scales.push_back({name, mean, sd});
    }
    return {Dataset(std::move(out), ds.n_rows()), std::move(scales)};
}

std::vector<GroupSlice> split_by_group(const Dataset& ds, const std::vector<int>& labels) {
    if (labels.size() != ds.n_rows())
        throw LengthMismatch("got " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(ds.n_rows()) + " rows");
    std::map<int, std::vector<std::size_t>> rows_by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) rows_by_label[labels[i]].push_back(i);

    std::vector<GroupSlice> slices;
    for (const auto& [label, rows] : rows_by_label) {
        std::vector<Column> cols;
        cols.reserve(ds.n_cols());
        for (const Column& c : ds.columns()) {
            Column sub;
            sub.spec = c.spec;
            if (c.spec.kind == ColumnKind::Numeric) {
                sub.nums.reserve(rows.size());
                for (std::size_t i : rows) sub.nums.push_back(c.nums[i]);
            } else {
                sub.cats.reserve(rows.size());
                for (std::size_t i : rows) sub.cats.push_back(c.cats[i]);
            }
            cols.push_back(std::move(sub));
        }
        slices.push_back({label, Dataset(std::move(cols), rows.size())});
    }
    return slices;
}

void MixtureSpec::validate() const {
    const std::size_t K = weights.size();
    if (K == 0) throw ConfigError("mixture needs at least one class");
    if (means.size() != K || covariances.size() != K)
        throw ConfigError("mixture weights/means/covariances sizes disagree");
    const std::size_t d = dim();
    if (d == 0) throw ConfigError("mixture dimension must be positive");
    KahanSum total;
    for (double w : weights) {
        if (w < 0.0) throw ConfigError("mixture weights must be non-negative");
        total.add(w);
    }
    if (std::abs(total.value() - 1.0) > 1e-12)
        throw ConfigError("mixture weights sum to " + std::to_string(total.value()));
    for (std::size_t k = 0; k < K; ++k) {
        if (means[k].size() != d) throw ConfigError("mixture mean dimensions disagree");
        if (covariances[k].dim != d) throw ConfigError("mixture covariance dimensions disagree");
        spd_factorize(covariances[k]); // throws NotPositiveDefinite on bad input
    }
}

SampleResult generate_mixture_sample(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    const std::size_t K = spec.k(), d = spec.dim();
    if (n < K) throw TooFewRows("need n >= K");

    std::vector<SpdFactorization> factors;
    factors.reserve(K);
    for (const SymMatrix& cov : spec.covariances) factors.push_back(spd_factorize(cov));

    std::vector<double> cume(K);
    KahanSum running;
    for (std::size_t k = 0; k < K; ++k) {
        running.add(spec.weights[k]);
        cume[k] = running.value();
    }
    cume.back() = 1.0;

    Rng rng(seed);
    Matrix X(n, d);
    std::vector<int> labels(n);
    std::vector<double> z(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        std::size_t k = 0;
        while (k + 1 < K && u >= cume[k]) ++k;
        labels[i] = static_cast<int>(k) + 1;
        for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
        const auto& f = factors[k];
        for (std::size_t r = 0; r < d; ++r) {
            double v = spec.means[k][r];
            for (std::size_t c = 0; c <= r; ++c) v += f.lower_at(r, c) * z[c];
            X.at(i, r) = v;
        }
    }

    std::vector<Column> cols(d);
    for (std::size_t j = 0; j < d; ++j) {
        cols[j].spec = {"x" + std::to_string(j + 1), ColumnKind::Numeric};
        cols[j].nums.resize(n);
        for (std::size_t i = 0; i < n; ++i) cols[j].nums[i] = X.at(i, j);
    }
    return {Dataset(std::move(cols), n), std::move(labels)};
}

} // namespace lpanet

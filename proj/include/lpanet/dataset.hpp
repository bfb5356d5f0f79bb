#ifndef LPANET_DATASET_HPP
#define LPANET_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpanet/numerics.hpp"

namespace lpanet {

enum class ColumnKind { Numeric, Categorical };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
};

/// One column of a Dataset. Exactly one of the two payloads is populated,
/// according to spec.kind.
struct Column {
    ColumnSpec spec;
    std::vector<double> nums;
    std::vector<std::string> cats;

    std::size_t size() const {
        return spec.kind == ColumnKind::Numeric ? nums.size() : cats.size();
    }
};

/// Immutable typed table. All operations below return new datasets.
class Dataset {
  public:
    Dataset() = default;
    Dataset(std::vector<Column> columns, std::size_t n_rows);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(std::size_t idx) const { return columns_[idx]; }
    const Column& column(const std::string& name) const;
    bool has_column(const std::string& name) const;
    std::vector<std::string> column_names() const;

    /// Numeric columns gathered into a row-major matrix, in the order given.
    Matrix numeric_matrix(const std::vector<std::string>& names) const;

  private:
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

struct LoadResult {
    Dataset dataset;
    std::size_t dropped_rows = 0; // rows removed by listwise deletion
};

/// Reads a delimiter-separated text file with a header row. Columns are typed
/// by the schema when given (names must match the header exactly), otherwise
/// inferred: a column whose every cell parses as a finite real is Numeric.
/// Rows containing any empty cell are dropped and counted.
LoadResult load_table(const std::string& path,
                      const std::optional<std::vector<ColumnSpec>>& schema = std::nullopt,
                      char delimiter = ',');

/// Writes a Dataset back to delimiter-separated text; numeric cells carry 17
/// significant digits so a reload reproduces them exactly.
void write_table(const Dataset& ds, const std::string& path, char delimiter = ',');

/// Named block of numeric columns treated as one conceptual predictor.
struct PredictorGroup {
    std::string name;
    std::vector<std::string> columns;
};

struct EncodeResult {
    Dataset dataset;
    std::vector<PredictorGroup> groups;
};

/// Expands each named categorical column with m levels into m-1 {0,1}
/// indicator columns named "<col>=<level>", dropping the lexicographically
/// first level as reference. Column order is preserved otherwise.
EncodeResult encode_categoricals(const Dataset& ds, const std::vector<std::string>& cols);

struct ColumnScale {
    std::string name;
    double mean = 0.0;
    double sd = 1.0;
};

struct StandardizeResult {
    Dataset dataset;
    std::vector<ColumnScale> scales;
};

/// Centers and scales the named numeric columns to mean 0, sd 1 (ddof = 1).
StandardizeResult standardize(const Dataset& ds, const std::vector<std::string>& cols);

struct GroupSlice {
    int label = 0;
    Dataset dataset;
};

/// Partitions rows by label, one slice per distinct label in ascending
/// order; row order is preserved inside each slice.
std::vector<GroupSlice> split_by_group(const Dataset& ds, const std::vector<int>& labels);

/// Generative Gaussian mixture: weights, means and SPD covariances.
struct MixtureSpec {
    std::vector<double> weights;
    std::vector<std::vector<double>> means;
    std::vector<SymMatrix> covariances;

    std::size_t k() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
    void validate() const;
};

struct SampleResult {
    Dataset dataset; // numeric columns x1..xd
    std::vector<int> labels; // 1-based class of each row
};

/// Draws n rows from the mixture; class by inverse-CDF on the weights, then a
/// multivariate normal via the Cholesky factor of the class covariance.
/// Deterministic given the seed.
SampleResult generate_mixture_sample(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

} // namespace lpanet

#endif

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lqo/plan.hpp"

namespace lqo {

struct ColumnDef {
    std::string name;
    int64_t domain = 0;  ///< values live in [0, domain)
};

/// Foreign key: `column` of the owning table references the primary key
/// (column 0) of `ref_table`.
struct FkEdge {
    int32_t column = -1;
    RelationId ref_table = -1;
};

struct TableDef {
    std::string name;
    int64_t row_count = 0;
    std::vector<ColumnDef> columns;  ///< column 0 is always the primary key "id"
    std::vector<FkEdge> fk_edges;
};

/// Equal-width histogram with per-bucket value and distinct counts.
struct ColumnHistogram {
    double lo = 0.0;   ///< smallest value
    double hi = 1.0;   ///< largest value + 1 (exclusive)
    int64_t rows = 0;
    int64_t total_distinct = 0;
    std::vector<int64_t> counts;
    std::vector<int64_t> distinct;
};

/// Request that `derived` be statistically dependent on `source`: the derived
/// column copies a shifted image of the source value with probability alpha,
/// where alpha is tuned until the empirical Cramer's V reaches `strength`.
/// Cross-table pairs must be FK-linked (source on the referenced side).
struct CorrelationPair {
    RelationId source_table = -1;
    int32_t source_column = -1;
    RelationId derived_table = -1;
    int32_t derived_column = -1;
    double strength = 0.0;
};

struct CatalogConfig {
    int fact_tables = 2;
    int dim_tables = 6;
    int64_t fact_rows = 8000;
    int64_t dim_rows = 400;
    int attr_columns = 2;       ///< non-key columns per table
    int64_t attr_domain = 16;   ///< attribute values in [0, attr_domain)
    int histogram_buckets = 32;
    int extra_fk_per_fact = 0;  ///< FK edges beyond the round-robin assignment
    bool indexes = true;        ///< give every table a primary-key index
    std::vector<CorrelationPair> correlations;
};

struct Catalog {
    uint64_t seed = 0;
    CatalogConfig config;
    std::vector<TableDef> tables;
    /// Row-major data: rows[t][r][c] is the value of column c in row r of
    /// table t.
    std::vector<std::vector<std::vector<int64_t>>> rows;
    std::vector<std::vector<ColumnHistogram>> histograms;
    std::vector<bool> index_flags;

    int num_relations() const { return int(tables.size()); }
    const TableDef& table(RelationId t) const;
    int64_t row_count(RelationId t) const { return table(t).row_count; }
    const ColumnHistogram& histogram(RelationId t, int32_t col) const;
    bool indexable(RelationId t) const;
};

/// Cramer's V association statistic between two paired value columns.
/// Returns 0 when either column is constant.
double cramers_v(const std::vector<int64_t>& x, const std::vector<int64_t>& y);

/// Build a synthetic star-ish schema and its data. Fact tables come first
/// (ids 0..fact_tables-1), dimensions after. Every fact holds FKs to a
/// deterministic round-robin set of dimensions plus dimension 0, which keeps
/// the FK graph connected. Correlated column pairs are injected and verified:
/// if a requested strength cannot be reached, throws ConfigError.
Catalog generate_catalog(const CatalogConfig& cfg, uint64_t seed);

/// Recompute `histograms` from `rows` (used by the loader).
void rebuild_histograms(Catalog& catalog);

/// Order-insensitive content fingerprint of schema plus data.
uint64_t catalog_fingerprint(const Catalog& catalog);

void save_catalog(const Catalog& catalog, const std::string& path);
/// Loads and validates (FK integrity, histogram rebuild). Throws
/// IntegrityError on malformed or inconsistent files.
Catalog load_catalog(const std::string& path);

struct WorkloadConfig {
    int num_queries = 50;
    int joins_min = 2;
    int joins_max = 6;
    int preds_min = 1;
    int preds_max = 3;
    /// Probability that a query tries to place an equality pair on a
    /// configured correlated column pair.
    double corr_prob = 0.6;
    /// Given a correlated pair was placed, probability that its two literals
    /// are taken from one actual row (consistent combination) rather than
    /// drawn independently.
    double consistent_prob = 0.8;
};

/// Sample queries over connected subgraphs of the catalog's FK graph.
/// Predicates only target attribute columns. Deterministic in (catalog,
/// cfg, seed).
std::vector<Query> generate_workload(const Catalog& catalog, const WorkloadConfig& cfg,
                                     uint64_t seed);

void save_workload(const std::vector<Query>& queries, uint64_t catalog_hash,
                   const std::string& path);
/// Throws IntegrityError when the stored catalog hash does not match
/// `expected_hash` or a query fails validation.
std::vector<Query> load_workload(const std::string& path, uint64_t expected_hash);

}  // namespace lqo

#include "lqo/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "lqo/json_io.hpp"

namespace lqo {

const TableDef& Catalog::table(RelationId t) const {
    if (t < 0 || size_t(t) >= tables.size())
        throw CatalogError("unknown table id " + std::to_string(t));
    return tables[size_t(t)];
}

const ColumnHistogram& Catalog::histogram(RelationId t, int32_t col) const {
    const TableDef& def = table(t);
    if (col < 0 || size_t(col) >= def.columns.size())
        throw CatalogError("unknown column " + std::to_string(col) + " in table " + def.name);
    return histograms[size_t(t)][size_t(col)];
}

bool Catalog::indexable(RelationId t) const {
    table(t);
    return index_flags[size_t(t)];
}

double cramers_v(const std::vector<int64_t>& x, const std::vector<int64_t>& y) {
    LQO_CHECK(x.size() == y.size(), "cramers_v: column lengths differ");
    LQO_CHECK(!x.empty(), "cramers_v: empty columns");
    std::unordered_map<int64_t, int> xi, yi;
    for (int64_t v : x) xi.emplace(v, int(xi.size()));
    for (int64_t v : y) yi.emplace(v, int(yi.size()));
    size_t r = xi.size(), c = yi.size();
    if (r < 2 || c < 2) return 0.0;

    std::vector<int64_t> table(r * c, 0), row_tot(r, 0), col_tot(c, 0);
    for (size_t k = 0; k < x.size(); ++k) {
        int i = xi[x[k]], j = yi[y[k]];
        ++table[size_t(i) * c + size_t(j)];
        ++row_tot[size_t(i)];
        ++col_tot[size_t(j)];
    }
    double n = double(x.size());
    double chi2 = 0.0;
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) {
            double e = double(row_tot[i]) * double(col_tot[j]) / n;
            if (e <= 0.0) continue;
            double d = double(table[i * c + j]) - e;
            chi2 += d * d / e;
        }
    return std::sqrt(chi2 / (n * double(std::min(r, c) - 1)));
}

namespace {

void validate_catalog_config(const CatalogConfig& cfg) {
    if (cfg.fact_tables < 1 || cfg.dim_tables < 1)
        throw ConfigError("catalog needs at least one fact and one dimension table");
    if (cfg.fact_rows < 1 || cfg.dim_rows < 1) throw ConfigError("row counts must be positive");
    if (cfg.attr_columns < 0) throw ConfigError("attr_columns must be non-negative");
    if (cfg.attr_domain < 1) throw ConfigError("attr_domain must be positive");
    if (cfg.histogram_buckets < 1) throw ConfigError("histogram_buckets must be positive");
    if (cfg.extra_fk_per_fact < 0) throw ConfigError("extra_fk_per_fact must be non-negative");
    if (!cfg.correlations.empty() && cfg.attr_domain < 2)
        throw ConfigError("attribute domain too small for the requested correlation structure");
    if (!cfg.correlations.empty() && cfg.attr_columns < 1)
        throw ConfigError("correlations need attribute columns");
    for (const auto& p : cfg.correlations)
        if (p.strength < 0.0 || p.strength >= 1.0)
            throw ConfigError("correlation strength must lie in [0, 1)");
}

bool is_attr_column(const TableDef& t, int32_t col) {
    if (col <= 0 || size_t(col) >= t.columns.size()) return false;
    for (const auto& fk : t.fk_edges)
        if (fk.column == col) return false;
    return true;
}

int32_t fk_column_to(const TableDef& t, RelationId target) {
    for (const auto& fk : t.fk_edges)
        if (fk.ref_table == target) return fk.column;
    return -1;
}

}  // namespace

Catalog generate_catalog(const CatalogConfig& cfg, uint64_t seed) {
    validate_catalog_config(cfg);
    Catalog cat;
    cat.seed = seed;
    cat.config = cfg;

    int F = cfg.fact_tables, D = cfg.dim_tables;

    // Schema: facts first, dimensions after. Fact f references dimensions
    // d with d % F == f, plus dimension 0 (the hub that keeps the FK graph
    // connected), plus `extra_fk_per_fact` further dimensions in cyclic order.
    for (int f = 0; f < F; ++f) {
        TableDef t;
        t.name = "fact" + std::to_string(f);
        t.row_count = cfg.fact_rows;
        t.columns.push_back({"id", cfg.fact_rows});
        std::vector<int> dims;
        for (int d = 0; d < D; ++d)
            if (d % F == f) dims.push_back(d);
        if (std::find(dims.begin(), dims.end(), 0) == dims.end()) dims.insert(dims.begin(), 0);
        for (int e = 0, d = 0; e < cfg.extra_fk_per_fact && int(dims.size()) < D; ++d) {
            int cand = d % D;
            if (std::find(dims.begin(), dims.end(), cand) == dims.end()) {
                dims.push_back(cand);
                ++e;
            }
        }
        std::sort(dims.begin(), dims.end());
        for (int d : dims) {
            FkEdge fk;
            fk.column = int32_t(t.columns.size());
            fk.ref_table = RelationId(F + d);
            t.columns.push_back({"fk_dim" + std::to_string(d), cfg.dim_rows});
            t.fk_edges.push_back(fk);
        }
        for (int a = 0; a < cfg.attr_columns; ++a)
            t.columns.push_back({"a" + std::to_string(a), cfg.attr_domain});
        cat.tables.push_back(std::move(t));
    }
    for (int d = 0; d < D; ++d) {
        TableDef t;
        t.name = "dim" + std::to_string(d);
        t.row_count = cfg.dim_rows;
        t.columns.push_back({"id", cfg.dim_rows});
        for (int a = 0; a < cfg.attr_columns; ++a)
            t.columns.push_back({"a" + std::to_string(a), cfg.attr_domain});
        cat.tables.push_back(std::move(t));
    }

    // Base data, one independent stream per column.
    Rng root(seed);
    cat.rows.resize(cat.tables.size());
    for (size_t t = 0; t < cat.tables.size(); ++t) {
        const TableDef& def = cat.tables[t];
        cat.rows[t].assign(size_t(def.row_count), std::vector<int64_t>(def.columns.size(), 0));
        for (size_t c = 0; c < def.columns.size(); ++c) {
            Rng col_rng = root.fork(uint64_t(t) * 64 + c);
            for (int64_t r = 0; r < def.row_count; ++r) {
                int64_t v;
                if (c == 0) v = r;  // primary key
                else v = int64_t(col_rng.next_below(uint64_t(def.columns[c].domain)));
                cat.rows[t][size_t(r)][c] = v;
            }
        }
    }

    // Correlation injection with verify-and-bump.
    std::set<std::pair<RelationId, int32_t>> used_cols;
    for (size_t pi = 0; pi < cfg.correlations.size(); ++pi) {
        const CorrelationPair& p = cfg.correlations[pi];
        const TableDef& st = cat.table(p.source_table);
        const TableDef& dt = cat.table(p.derived_table);
        if (!is_attr_column(st, p.source_column) || !is_attr_column(dt, p.derived_column))
            throw ConfigError("correlation endpoints must be attribute columns");
        int32_t via_fk = -1;
        if (p.source_table != p.derived_table) {
            via_fk = fk_column_to(dt, p.source_table);
            if (via_fk < 0)
                throw ConfigError("cross-table correlation requires an FK from " + dt.name +
                                  " to " + st.name);
        }
        for (auto key : {std::make_pair(p.source_table, p.source_column),
                         std::make_pair(p.derived_table, p.derived_column)})
            if (!used_cols.insert(key).second)
                throw ConfigError("a column may participate in at most one correlation pair");

        int64_t domain = dt.columns[size_t(p.derived_column)].domain;
        auto source_value = [&](int64_t derived_row) {
            int64_t src_row = p.source_table == p.derived_table
                                  ? derived_row
                                  : cat.rows[size_t(p.derived_table)][size_t(derived_row)]
                                            [size_t(via_fk)];
            return cat.rows[size_t(p.source_table)][size_t(src_row)][size_t(p.source_column)];
        };

        double alpha = std::min(1.0, 1.1 * p.strength + 0.02);
        bool ok = false;
        for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
            Rng rng = root.fork(0x5000 + pi * 16 + uint64_t(attempt));
            std::vector<int64_t> src(size_t(dt.row_count)), der(size_t(dt.row_count));
            for (int64_t r = 0; r < dt.row_count; ++r) {
                src[size_t(r)] = source_value(r);
                if (rng.next_double() < alpha)
                    der[size_t(r)] = (src[size_t(r)] % domain + 3) % domain;
                else
                    der[size_t(r)] = int64_t(rng.next_below(uint64_t(domain)));
            }
            if (cramers_v(src, der) >= p.strength) {
                for (int64_t r = 0; r < dt.row_count; ++r)
                    cat.rows[size_t(p.derived_table)][size_t(r)][size_t(p.derived_column)] =
                        der[size_t(r)];
                ok = true;
            } else {
                alpha = std::min(1.0, alpha * 1.15 + 0.05);
            }
        }
        if (!ok)
            throw ConfigError("could not reach correlation strength " +
                              std::to_string(p.strength) + " for pair " + std::to_string(pi));
    }

    cat.index_flags.assign(cat.tables.size(), cfg.indexes);
    rebuild_histograms(cat);
    return cat;
}

void rebuild_histograms(Catalog& catalog) {
    catalog.histograms.assign(catalog.tables.size(), {});
    for (size_t t = 0; t < catalog.tables.size(); ++t) {
        const TableDef& def = catalog.tables[t];
        catalog.histograms[t].resize(def.columns.size());
        for (size_t c = 0; c < def.columns.size(); ++c) {
            ColumnHistogram& h = catalog.histograms[t][c];
            int buckets = catalog.config.histogram_buckets;
            if (buckets < 1) buckets = 16;
            std::unordered_map<int64_t, int64_t> freq;
            int64_t lo = INT64_MAX, hi = INT64_MIN;
            for (const auto& row : catalog.rows[t]) {
                int64_t v = row[c];
                ++freq[v];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            h.rows = int64_t(catalog.rows[t].size());
            h.total_distinct = int64_t(freq.size());
            h.lo = double(lo);
            h.hi = double(hi) + 1.0;
            h.counts.assign(size_t(buckets), 0);
            h.distinct.assign(size_t(buckets), 0);
            double width = (h.hi - h.lo) / buckets;
            for (const auto& [v, n] : freq) {
                int b = std::min(buckets - 1, int((double(v) - h.lo) / width));
                h.counts[size_t(b)] += n;
                h.distinct[size_t(b)] += 1;
            }
        }
    }
}

namespace {
struct FnvStream {
    uint64_t h = 0xcbf29ce484222325ull;
    void byte(uint8_t b) {
        h ^= b;
        h *= 1099511628211ull;
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) byte(uint8_t(v >> (8 * i)));
    }
    void i64(int64_t v) { u64(uint64_t(v)); }
    void str(std::string_view s) {
        u64(s.size());
        for (char c : s) byte(uint8_t(c));
    }
};
}  // namespace

uint64_t catalog_fingerprint(const Catalog& catalog) {
    FnvStream f;
    f.u64(catalog.tables.size());
    for (size_t t = 0; t < catalog.tables.size(); ++t) {
        const TableDef& def = catalog.tables[t];
        f.str(def.name);
        f.i64(def.row_count);
        f.u64(def.columns.size());
        for (const auto& c : def.columns) {
            f.str(c.name);
            f.i64(c.domain);
        }
        f.u64(def.fk_edges.size());
        for (const auto& e : def.fk_edges) {
            f.i64(e.column);
            f.i64(e.ref_table);
        }
        f.byte(catalog.index_flags[t] ? 1 : 0);
        for (const auto& row : catalog.rows[t])
            for (int64_t v : row) f.i64(v);
    }
    return f.h;
}

namespace {
std::string hash_to_hex(uint64_t h) {
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

uint64_t hex_to_hash(const std::string& s) {
    if (s.size() != 16) throw IntegrityError("bad hash string");
    return strtoull(s.c_str(), nullptr, 16);
}

nlohmann::json correlations_to_json(const std::vector<CorrelationPair>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : v)
        arr.push_back({{"source_table", p.source_table},
                       {"source_column", p.source_column},
                       {"derived_table", p.derived_table},
                       {"derived_column", p.derived_column},
                       {"strength", p.strength}});
    return arr;
}

std::vector<CorrelationPair> correlations_from_json(const nlohmann::json& arr) {
    std::vector<CorrelationPair> v;
    for (const auto& j : arr) {
        CorrelationPair p;
        p.source_table = j.at("source_table").get<RelationId>();
        p.source_column = j.at("source_column").get<int32_t>();
        p.derived_table = j.at("derived_table").get<RelationId>();
        p.derived_column = j.at("derived_column").get<int32_t>();
        p.strength = j.at("strength").get<double>();
        v.push_back(p);
    }
    return v;
}
}  // namespace

nlohmann::json catalog_config_to_json(const CatalogConfig& cfg) {
    nlohmann::json j;
    j["fact_tables"] = cfg.fact_tables;
    j["dim_tables"] = cfg.dim_tables;
    j["fact_rows"] = cfg.fact_rows;
    j["dim_rows"] = cfg.dim_rows;
    j["attr_columns"] = cfg.attr_columns;
    j["attr_domain"] = cfg.attr_domain;
    j["histogram_buckets"] = cfg.histogram_buckets;
    j["extra_fk_per_fact"] = cfg.extra_fk_per_fact;
    j["indexes"] = cfg.indexes;
    j["correlations"] = correlations_to_json(cfg.correlations);
    return j;
}

CatalogConfig catalog_config_from_json(const nlohmann::json& j) {
    CatalogConfig cfg;
    cfg.fact_tables = j.value("fact_tables", cfg.fact_tables);
    cfg.dim_tables = j.value("dim_tables", cfg.dim_tables);
    cfg.fact_rows = j.value("fact_rows", cfg.fact_rows);
    cfg.dim_rows = j.value("dim_rows", cfg.dim_rows);
    cfg.attr_columns = j.value("attr_columns", cfg.attr_columns);
    cfg.attr_domain = j.value("attr_domain", cfg.attr_domain);
    cfg.histogram_buckets = j.value("histogram_buckets", cfg.histogram_buckets);
    cfg.extra_fk_per_fact = j.value("extra_fk_per_fact", cfg.extra_fk_per_fact);
    cfg.indexes = j.value("indexes", cfg.indexes);
    if (j.contains("correlations")) cfg.correlations = correlations_from_json(j["correlations"]);
    return cfg;
}

void save_catalog(const Catalog& catalog, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["seed"] = catalog.seed;
    j["config"] = catalog_config_to_json(catalog.config);
    j["tables"] = nlohmann::json::array();
    for (size_t t = 0; t < catalog.tables.size(); ++t) {
        const TableDef& def = catalog.tables[t];
        nlohmann::json tj;
        tj["name"] = def.name;
        tj["row_count"] = def.row_count;
        tj["columns"] = nlohmann::json::array();
        for (const auto& c : def.columns) tj["columns"].push_back({{"name", c.name}, {"domain", c.domain}});
        tj["fk"] = nlohmann::json::array();
        for (const auto& e : def.fk_edges) tj["fk"].push_back({e.column, e.ref_table});
        tj["indexed"] = bool(catalog.index_flags[t]);
        tj["rows"] = catalog.rows[t];
        j["tables"].push_back(std::move(tj));
    }
    j["fingerprint"] = hash_to_hex(catalog_fingerprint(catalog));
    std::ofstream out(path);
    if (!out) throw IntegrityError("cannot write " + path);
    out << j.dump() << '\n';
}

Catalog load_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IntegrityError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed catalog file: ") + e.what());
    }
    Catalog cat;
    try {
        cat.seed = j.at("seed").get<uint64_t>();
        cat.config = catalog_config_from_json(j.at("config"));
        for (const auto& tj : j.at("tables")) {
            TableDef def;
            def.name = tj.at("name").get<std::string>();
            def.row_count = tj.at("row_count").get<int64_t>();
            for (const auto& cj : tj.at("columns"))
                def.columns.push_back({cj.at("name").get<std::string>(), cj.at("domain").get<int64_t>()});
            for (const auto& ej : tj.at("fk")) {
                FkEdge e;
                e.column = ej.at(0).get<int32_t>();
                e.ref_table = ej.at(1).get<RelationId>();
                def.fk_edges.push_back(e);
            }
            cat.index_flags.push_back(tj.at("indexed").get<bool>());
            cat.rows.push_back(tj.at("rows").get<std::vector<std::vector<int64_t>>>());
            cat.tables.push_back(std::move(def));
        }
        uint64_t stored = hex_to_hash(j.at("fingerprint").get<std::string>());
        uint64_t actual = catalog_fingerprint(cat);
        if (stored != actual) throw IntegrityError("catalog fingerprint mismatch");
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed catalog file: ") + e.what());
    }

    // Referential and domain integrity.
    for (size_t t = 0; t < cat.tables.size(); ++t) {
        const TableDef& def = cat.tables[t];
        if (int64_t(cat.rows[t].size()) != def.row_count)
            throw IntegrityError("row count mismatch in table " + def.name);
        for (const auto& row : cat.rows[t]) {
            if (row.size() != def.columns.size())
                throw IntegrityError("row width mismatch in table " + def.name);
            for (const auto& fk : def.fk_edges) {
                int64_t v = row[size_t(fk.column)];
                if (fk.ref_table < 0 || size_t(fk.ref_table) >= cat.tables.size() ||
                    v < 0 || v >= cat.tables[size_t(fk.ref_table)].row_count)
                    throw IntegrityError("dangling FK value in table " + def.name);
            }
        }
    }
    rebuild_histograms(cat);
    return cat;
}

namespace {

struct FkAdjacency {
    // (table, peer, fk column on the fact side, fact table id)
    struct Edge {
        RelationId fact, dim;
        int32_t fact_col;
    };
    std::vector<Edge> edges;
    std::vector<std::vector<int>> adj;  // table -> edge indices
};

FkAdjacency build_adjacency(const Catalog& cat) {
    FkAdjacency g;
    g.adj.resize(size_t(cat.num_relations()));
    for (RelationId t = 0; t < cat.num_relations(); ++t)
        for (const auto& fk : cat.tables[size_t(t)].fk_edges) {
            int ei = int(g.edges.size());
            g.edges.push_back({t, fk.ref_table, fk.column});
            g.adj[size_t(t)].push_back(ei);
            g.adj[size_t(fk.ref_table)].push_back(ei);
        }
    return g;
}

std::vector<int32_t> attr_columns_of(const TableDef& t) {
    std::vector<int32_t> cols;
    for (int32_t c = 1; c < int32_t(t.columns.size()); ++c)
        if (is_attr_column(t, c)) cols.push_back(c);
    return cols;
}

}  // namespace

std::vector<Query> generate_workload(const Catalog& catalog, const WorkloadConfig& cfg,
                                     uint64_t seed) {
    if (cfg.num_queries < 0) throw ConfigError("num_queries must be non-negative");
    if (cfg.joins_min < 1 || cfg.joins_min > cfg.joins_max)
        throw ConfigError("invalid join count range");
    if (cfg.joins_max + 1 > catalog.num_relations())
        throw ConfigError("join count range exceeds the number of catalog tables");
    if (cfg.preds_min < 0 || cfg.preds_min > cfg.preds_max)
        throw ConfigError("invalid predicate count range");
    if (cfg.corr_prob < 0 || cfg.corr_prob > 1 || cfg.consistent_prob < 0 ||
        cfg.consistent_prob > 1)
        throw ConfigError("probabilities must lie in [0, 1]");

    FkAdjacency g = build_adjacency(catalog);
    Rng root(seed);
    std::vector<Query> queries;

    for (int qi = 0; qi < cfg.num_queries; ++qi) {
        Rng rng = root.fork(uint64_t(qi));
        Query q;
        q.id = qi;

        int n = int(rng.next_int(cfg.joins_min, cfg.joins_max)) + 1;
        std::vector<bool> chosen(size_t(catalog.num_relations()), false);
        std::vector<RelationId> members;
        RelationId start = RelationId(rng.next_below(uint64_t(catalog.num_relations())));
        chosen[size_t(start)] = true;
        members.push_back(start);
        while (int(members.size()) < n) {
            std::vector<int> frontier;
            for (RelationId m : members)
                for (int ei : g.adj[size_t(m)]) {
                    const auto& e = g.edges[size_t(ei)];
                    RelationId other = e.fact == m ? e.dim : e.fact;
                    if (!chosen[size_t(other)]) frontier.push_back(ei);
                }
            LQO_CHECK(!frontier.empty(), "FK graph smaller than requested query size");
            int ei = frontier[rng.next_below(frontier.size())];
            const auto& e = g.edges[size_t(ei)];
            RelationId grow = chosen[size_t(e.fact)] ? e.dim : e.fact;
            chosen[size_t(grow)] = true;
            members.push_back(grow);
        }
        std::sort(members.begin(), members.end());
        q.relations = members;

        for (const auto& e : g.edges)
            if (chosen[size_t(e.fact)] && chosen[size_t(e.dim)]) {
                JoinEdge edge;
                if (e.fact < e.dim) edge = {e.fact, e.fact_col, e.dim, 0};
                else edge = {e.dim, 0, e.fact, e.fact_col};
                q.join_edges.push_back(edge);
            }

        int want_preds = int(rng.next_int(cfg.preds_min, cfg.preds_max));
        std::set<std::pair<RelationId, int32_t>> used;

        if (rng.next_double() < cfg.corr_prob) {
            std::vector<const CorrelationPair*> cands;
            for (const auto& p : catalog.config.correlations)
                if (chosen[size_t(p.source_table)] && chosen[size_t(p.derived_table)])
                    cands.push_back(&p);
            if (!cands.empty()) {
                const CorrelationPair& p = *cands[rng.next_below(cands.size())];
                int64_t vs, vd;
                if (rng.next_double() < cfg.consistent_prob) {
                    int64_t r = int64_t(rng.next_below(
                        uint64_t(catalog.row_count(p.derived_table))));
                    const auto& row = catalog.rows[size_t(p.derived_table)][size_t(r)];
                    vd = row[size_t(p.derived_column)];
                    if (p.source_table == p.derived_table) {
                        vs = row[size_t(p.source_column)];
                    } else {
                        int32_t fkc = fk_column_to(catalog.table(p.derived_table), p.source_table);
                        vs = catalog.rows[size_t(p.source_table)][size_t(row[size_t(fkc)])]
                                         [size_t(p.source_column)];
                    }
                } else {
                    const TableDef& st = catalog.table(p.source_table);
                    const TableDef& dt = catalog.table(p.derived_table);
                    vs = int64_t(rng.next_below(uint64_t(st.columns[size_t(p.source_column)].domain)));
                    vd = int64_t(rng.next_below(uint64_t(dt.columns[size_t(p.derived_column)].domain)));
                }
                q.predicates.push_back({p.source_table, p.source_column, PredOp::eq, {vs}});
                q.predicates.push_back({p.derived_table, p.derived_column, PredOp::eq, {vd}});
                used.insert({p.source_table, p.source_column});
                used.insert({p.derived_table, p.derived_column});
            }
        }

        while (int(q.predicates.size()) < want_preds) {
            RelationId rel = members[rng.next_below(members.size())];
            std::vector<int32_t> cols;
            for (int32_t c : attr_columns_of(catalog.table(rel)))
                if (!used.count({rel, c})) cols.push_back(c);
            if (cols.empty()) {
                bool any = false;
                for (RelationId m : members)
                    for (int32_t c : attr_columns_of(catalog.table(m)))
                        if (!used.count({m, c})) { any = true; rel = m; }
                if (!any) break;
                cols = attr_columns_of(catalog.table(rel));
                std::erase_if(cols, [&](int32_t c) { return used.count({rel, c}); });
            }
            int32_t col = cols[rng.next_below(cols.size())];
            int64_t domain = catalog.table(rel).columns[size_t(col)].domain;
            auto sample_value = [&]() {
                int64_t r = int64_t(rng.next_below(uint64_t(catalog.row_count(rel))));
                return catalog.rows[size_t(rel)][size_t(r)][size_t(col)];
            };

            ColumnPredicate pred;
            pred.relation = rel;
            pred.column = col;
            double roll = rng.next_double();
            if (roll < 0.45) {
                pred.op = PredOp::eq;
                pred.values = {sample_value()};
            } else if (roll < 0.60) {
                if (domain < 2) continue;
                pred.op = PredOp::lt;
                pred.values = {int64_t(1 + rng.next_below(uint64_t(domain - 1)))};
            } else if (roll < 0.70) {
                if (domain < 2) continue;
                pred.op = PredOp::gt;
                pred.values = {int64_t(rng.next_below(uint64_t(domain - 1)))};
            } else if (roll < 0.85) {
                pred.op = PredOp::in_list;
                std::set<int64_t> vals;
                size_t m = 2 + rng.next_below(3);
                for (int tries = 0; tries < 16 && vals.size() < m; ++tries)
                    vals.insert(int64_t(rng.next_below(uint64_t(domain))));
                pred.values.assign(vals.begin(), vals.end());
            } else if (roll < 0.95) {
                pred.op = PredOp::like_prefix;
                std::string s = std::to_string(sample_value());
                size_t len = 1 + rng.next_below(s.size());
                pred.values = {std::stoll(s.substr(0, len))};
            } else {
                pred.op = PredOp::neq;
                pred.values = {sample_value()};
            }
            used.insert({rel, col});
            q.predicates.push_back(std::move(pred));
        }

        validate_query(q);
        queries.push_back(std::move(q));
    }
    return queries;
}

void save_workload(const std::vector<Query>& queries, uint64_t catalog_hash,
                   const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["catalog_hash"] = hash_to_hex(catalog_hash);
    j["queries"] = nlohmann::json::array();
    for (const auto& q : queries) j["queries"].push_back(query_to_json(q));
    std::ofstream out(path);
    if (!out) throw IntegrityError("cannot write " + path);
    out << j.dump() << '\n';
}

std::vector<Query> load_workload(const std::string& path, uint64_t expected_hash) {
    std::ifstream in(path);
    if (!in) throw IntegrityError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
        if (hex_to_hash(j.at("catalog_hash").get<std::string>()) != expected_hash)
            throw IntegrityError("workload was generated against a different catalog");
        std::vector<Query> out;
        for (const auto& qj : j.at("queries")) out.push_back(query_from_json(qj));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed workload file: ") + e.what());
    }
}

}  // namespace lqo

// Synthetic schema/data generation, statistics, and workload sampling.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "lqo/catalog.hpp"

using namespace lqo;

namespace {

CatalogConfig small_config() {
    CatalogConfig cfg;
    cfg.fact_tables = 2;
    cfg.dim_tables = 4;
    cfg.fact_rows = 500;
    cfg.dim_rows = 100;
    cfg.attr_columns = 2;
    cfg.attr_domain = 8;
    return cfg;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::vector<int64_t> column(const Catalog& cat, RelationId t, int32_t c) {
    std::vector<int64_t> out;
    for (const auto& row : cat.rows[size_t(t)]) out.push_back(row[size_t(c)]);
    return out;
}

}  // namespace

TEST_CASE("cramers_v matches hand-computed association levels") {
    // Perfect dependence: y = x.
    std::vector<int64_t> x, y;
    for (int i = 0; i < 400; ++i) {
        x.push_back(i % 4);
        y.push_back(i % 4);
    }
    CHECK(cramers_v(x, y) == doctest::Approx(1.0));

    // Perfect dependence through a relabeling is still 1.
    for (auto& v : y) v = (v + 3) % 4;
    CHECK(cramers_v(x, y) == doctest::Approx(1.0));

    // A constant column carries no association.
    std::vector<int64_t> c(x.size(), 7);
    CHECK(cramers_v(x, c) == 0.0);

    // Balanced independent columns: V ~ 0 (exactly 0 for a perfectly
    // balanced contingency table).
    std::vector<int64_t> a, b;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            a.push_back(i % 4);
            b.push_back(j % 4);
        }
    CHECK(cramers_v(a, b) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(cramers_v({1, 2}, {1}), ContractError);
}

TEST_CASE("generate_catalog is deterministic and FK-consistent") {
    CatalogConfig cfg = small_config();
    Catalog c1 = generate_catalog(cfg, 11);
    Catalog c2 = generate_catalog(cfg, 11);
    CHECK(catalog_fingerprint(c1) == catalog_fingerprint(c2));
    Catalog c3 = generate_catalog(cfg, 12);
    CHECK(catalog_fingerprint(c1) != catalog_fingerprint(c3));

    CHECK(c1.num_relations() == cfg.fact_tables + cfg.dim_tables);
    for (RelationId t = 0; t < c1.num_relations(); ++t) {
        const TableDef& def = c1.table(t);
        CHECK(int64_t(c1.rows[size_t(t)].size()) == def.row_count);
        // Primary keys are dense 0..n-1.
        for (int64_t r = 0; r < def.row_count; ++r) CHECK(c1.rows[size_t(t)][size_t(r)][0] == r);
        // Every FK value resolves to an existing referenced row.
        for (const auto& fk : def.fk_edges) {
            int64_t ref_rows = c1.row_count(fk.ref_table);
            for (const auto& row : c1.rows[size_t(t)]) {
                int64_t v = row[size_t(fk.column)];
                CHECK(v >= 0);
                CHECK(v < ref_rows);
            }
        }
    }

    // Dimension tables carry no FKs; every fact references dim0 (the hub).
    for (int d = 0; d < cfg.dim_tables; ++d)
        CHECK(c1.table(RelationId(cfg.fact_tables + d)).fk_edges.empty());
    for (int f = 0; f < cfg.fact_tables; ++f) {
        bool hits_hub = false;
        for (const auto& fk : c1.table(f).fk_edges)
            hits_hub = hits_hub || fk.ref_table == RelationId(cfg.fact_tables);
        CHECK(hits_hub);
    }
}

TEST_CASE("histogram bucket counts sum to the table row count") {
    Catalog cat = generate_catalog(small_config(), 5);
    for (RelationId t = 0; t < cat.num_relations(); ++t)
        for (int32_t c = 0; c < int32_t(cat.table(t).columns.size()); ++c) {
            const ColumnHistogram& h = cat.histogram(t, c);
            int64_t sum = 0;
            for (int64_t n : h.counts) sum += n;
            CHECK(sum == cat.row_count(t));
            CHECK(h.total_distinct >= 1);
            CHECK(h.lo < h.hi);
        }
}

TEST_CASE("zero-correlation config keeps all attribute pairs near independence") {
    CatalogConfig cfg = small_config();
    cfg.fact_rows = 10000;
    Catalog cat = generate_catalog(cfg, 3);
    // All attribute-column pairs within fact0 and across its dims.
    const TableDef& f0 = cat.table(0);
    std::vector<int32_t> attrs;
    for (int32_t c = 1; c < int32_t(f0.columns.size()); ++c)
        if (f0.columns[size_t(c)].name[0] == 'a') attrs.push_back(c);
    REQUIRE(attrs.size() == 2);
    double v = cramers_v(column(cat, 0, attrs[0]), column(cat, 0, attrs[1]));
    CHECK(v < 0.1);
}

TEST_CASE("correlation injection reaches the requested strength") {
    CatalogConfig cfg = small_config();
    cfg.fact_rows = 4000;
    const TableDef probe = generate_catalog(cfg, 1).table(0);
    // fact0's attribute columns sit after id and FK columns.
    int32_t a0 = -1, a1 = -1;
    for (int32_t c = 1; c < int32_t(probe.columns.size()); ++c) {
        if (probe.columns[size_t(c)].name == "a0") a0 = c;
        if (probe.columns[size_t(c)].name == "a1") a1 = c;
    }
    REQUIRE(a0 > 0);
    REQUIRE(a1 > 0);

    SUBCASE("same-table pair") {
        cfg.correlations = {{0, a0, 0, a1, 0.7}};
        Catalog cat = generate_catalog(cfg, 2);
        CHECK(cramers_v(column(cat, 0, a0), column(cat, 0, a1)) >= 0.7);
    }
    SUBCASE("cross-table pair through the FK") {
        // dim0 (table id fact_tables) is referenced by fact0; dim attr
        // columns start at 1.
        RelationId dim0 = RelationId(cfg.fact_tables);
        cfg.correlations = {{dim0, 1, 0, a0, 0.6}};
        Catalog cat = generate_catalog(cfg, 2);
        // Compare the derived column against the FK-dereferenced source.
        int32_t fkc = -1;
        for (const auto& fk : cat.table(0).fk_edges)
            if (fk.ref_table == dim0) fkc = fk.column;
        REQUIRE(fkc > 0);
        std::vector<int64_t> src, der;
        for (const auto& row : cat.rows[0]) {
            src.push_back(cat.rows[size_t(dim0)][size_t(row[size_t(fkc)])][1]);
            der.push_back(row[size_t(a0)]);
        }
        CHECK(cramers_v(src, der) >= 0.6);
    }
    SUBCASE("unlinked cross-table pair is rejected") {
        // dim1 is referenced only by fact1 under the round-robin assignment,
        // so a correlation from dim1 into fact0 has no FK path.
        RelationId dim1 = RelationId(cfg.fact_tables + 1);
        cfg.correlations = {{dim1, 1, 0, a0, 0.5}};
        CHECK_THROWS_AS(generate_catalog(cfg, 2), ConfigError);
    }
    SUBCASE("infeasible domain is rejected") {
        cfg.attr_domain = 1;
        cfg.correlations = {{0, a0, 0, a1, 0.7}};
        CHECK_THROWS_AS(generate_catalog(cfg, 2), ConfigError);
    }
}

TEST_CASE("catalog save/load round-trips content and rejects tampering") {
    CatalogConfig cfg = small_config();
    cfg.correlations = {{0, 3, 0, 4, 0.5}};
    Catalog cat = generate_catalog(cfg, 9);
    TempFile f("lqo_test_catalog.json");
    save_catalog(cat, f.path);
    Catalog back = load_catalog(f.path);
    CHECK(catalog_fingerprint(back) == catalog_fingerprint(cat));
    CHECK(back.table(0).name == "fact0");
    CHECK(back.histogram(0, 1).rows == cat.histogram(0, 1).rows);

    // Corrupt one data value: fingerprint check must fire.
    std::ifstream in(f.path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"rows\":[[0,");
    REQUIRE(pos != std::string::npos);
    text[pos + 9] = '1';
    std::ofstream out(f.path);
    out << text;
    out.close();
    CHECK_THROWS_AS(load_catalog(f.path), IntegrityError);
    CHECK_THROWS_AS(load_catalog("/nonexistent/nowhere.json"), IntegrityError);
}

TEST_CASE("generate_workload: shape, connectivity, determinism") {
    Catalog cat = generate_catalog(small_config(), 4);

    WorkloadConfig wc;
    wc.num_queries = 40;
    wc.joins_min = 1;
    wc.joins_max = 1;
    auto qs = generate_workload(cat, wc, 21);
    REQUIRE(int(qs.size()) == 40);
    for (const auto& q : qs) {
        CHECK(q.relations.size() == 2);
        CHECK(q.join_edges.size() == 1);
    }

    wc.joins_min = 2;
    wc.joins_max = 5;
    wc.num_queries = 100;
    auto qs2 = generate_workload(cat, wc, 22);
    auto qs3 = generate_workload(cat, wc, 22);
    REQUIRE(qs2.size() == qs3.size());
    for (size_t i = 0; i < qs2.size(); ++i) {
        CHECK_NOTHROW(validate_query(qs2[i]));  // connected by construction
        CHECK(qs2[i].relations == qs3[i].relations);
        CHECK(qs2[i].predicates.size() == qs3[i].predicates.size());
        CHECK(int(qs2[i].relations.size()) >= 3);
        CHECK(int(qs2[i].relations.size()) <= 6);
        // Predicates only target attribute columns.
        for (const auto& p : qs2[i].predicates) {
            const TableDef& t = cat.table(p.relation);
            CHECK(t.columns[size_t(p.column)].name[0] == 'a');
            CHECK(!p.values.empty());
        }
    }

    wc.joins_max = cat.num_relations();  // needs n+1 relations: one too many
    CHECK_THROWS_AS(generate_workload(cat, wc, 1), ConfigError);
}

TEST_CASE("workload save/load verifies the catalog hash") {
    Catalog cat = generate_catalog(small_config(), 4);
    WorkloadConfig wc;
    wc.num_queries = 6;
    wc.joins_min = 1;
    wc.joins_max = 3;
    auto qs = generate_workload(cat, wc, 77);
    uint64_t h = catalog_fingerprint(cat);

    TempFile f("lqo_test_workload.json");
    save_workload(qs, h, f.path);
    auto back = load_workload(f.path, h);
    REQUIRE(back.size() == qs.size());
    for (size_t i = 0; i < qs.size(); ++i) {
        CHECK(back[i].id == qs[i].id);
        CHECK(back[i].relations == qs[i].relations);
        CHECK(back[i].predicates.size() == qs[i].predicates.size());
    }
    CHECK_THROWS_AS(load_workload(f.path, h ^ 1), IntegrityError);
}

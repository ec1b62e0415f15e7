// Row-value embeddings: sentence extraction, skip-gram training behavior,
// predicate slot construction, and persistence.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lqo/rvec.hpp"

using namespace lqo;

namespace {

CatalogConfig tiny_config() {
    CatalogConfig cfg;
    cfg.fact_tables = 1;
    cfg.dim_tables = 2;
    cfg.fact_rows = 300;
    cfg.dim_rows = 60;
    cfg.attr_columns = 2;
    cfg.attr_domain = 6;
    return cfg;
}

/// Two-dimensional model over one column "dim0.a0" with values 2, 6, 13,
/// built by hand so every lookup path is fully controlled.
EmbeddingModel hand_model() {
    EmbeddingModel m;
    m.dim = 2;
    m.vocab = {"dim0.a0=2", "dim0.a0=6", "dim0.a0=13"};
    m.counts = {10, 20, 40};
    m.vectors = {1.0, 0.0, 0.0, 1.0, 3.0, 4.0};
    for (int32_t i = 0; i < 3; ++i) m.index.emplace(m.vocab[size_t(i)], i);
    m.column_values["dim0.a0"] = {{2, 0}, {6, 1}, {13, 2}};
    return m;
}

}  // namespace

TEST_CASE("value tokens spell table, column, and value") {
    Catalog cat = generate_catalog(tiny_config(), 3);
    CHECK(value_token(cat, 0, 0, 17) == "fact0.id=17");
    CHECK(value_token(cat, 1, 1, 4) == "dim0.a0=4");
    CHECK_THROWS_AS(value_token(cat, 1, 9, 0), ContractError);
}

TEST_CASE("sentences cover every row; denormalization appends FK-referenced rows") {
    Catalog cat = generate_catalog(tiny_config(), 3);
    const int64_t base_rows = 300 + 60 + 60;

    auto plain = build_sentences(cat, false);
    CHECK(int64_t(plain.size()) == base_rows);
    CHECK(plain[0].size() == cat.table(0).columns.size());

    auto denorm = build_sentences(cat, true);
    // Only the fact table has FK edges, so it contributes one extra sentence
    // per row.
    CHECK(int64_t(denorm.size()) == base_rows + 300);
    // Plain sentences come first and are identical.
    for (size_t i = 0; i < plain.size(); ++i) CHECK(denorm[i] == plain[i]);

    // The appended sentence for fact row 0: fact tokens, then the full rows of
    // both referenced dimensions, in FK order.
    const auto& wide = denorm[size_t(base_rows)];
    const size_t fact_cols = cat.table(0).columns.size();
    REQUIRE(wide.size() == fact_cols + 3 + 3);
    for (size_t c = 0; c < fact_cols; ++c) CHECK(wide[c] == plain[0][c]);
    // The dereferenced dimension rows are the ones the FK values point at.
    const int64_t key0 = cat.rows[0][0][size_t(cat.table(0).fk_edges[0].column)];
    const int64_t key1 = cat.rows[0][0][size_t(cat.table(0).fk_edges[1].column)];
    CHECK(wide[fact_cols] == value_token(cat, 1, 0, key0));
    CHECK(wide[fact_cols + 3] == value_token(cat, 2, 0, key1));
}

TEST_CASE("training is deterministic, filters rare tokens, and reduces loss") {
    Catalog cat = generate_catalog(tiny_config(), 7);
    auto sentences = build_sentences(cat, true);

    SgnsParams sg;
    sg.epochs = 3;
    std::vector<double> loss_a, loss_b;
    EmbeddingModel a = train_embeddings(sentences, sg, &loss_a);
    EmbeddingModel b = train_embeddings(sentences, sg, &loss_b);
    CHECK(a.vocab == b.vocab);
    CHECK(a.vectors == b.vectors);
    CHECK(loss_a == loss_b);

    REQUIRE(loss_a.size() == 3);
    CHECK(loss_a.back() < loss_a.front());

    // Every kept token meets min_count and the index is consistent.
    for (size_t i = 0; i < a.vocab.size(); ++i) {
        CHECK(a.counts[i] >= sg.min_count);
        CHECK(a.index.at(a.vocab[i]) == int32_t(i));
    }
    CHECK(a.dim == sg.dim);
    CHECK(a.vectors.size() == a.vocab.size() * size_t(sg.dim));

    // A different seed moves the vectors.
    SgnsParams other = sg;
    other.seed = 99;
    EmbeddingModel c = train_embeddings(sentences, other);
    CHECK(c.vocab == a.vocab);
    CHECK(c.vectors != a.vectors);

    CHECK_THROWS_AS(train_embeddings({}, sg), ConfigError);
    // min_count that nothing satisfies.
    SgnsParams strict = sg;
    strict.min_count = 1 << 20;
    CHECK_THROWS_AS(train_embeddings(sentences, strict), ConfigError);
}

TEST_CASE("tokens that share sentences embed closer than tokens that never do") {
    // Synthetic corpus: x=1 always appears with y=1 and never with y=2, and
    // each pairing drags its own slice of the padding vocabulary along, the
    // way correlated columns share the rest of their rows.
    std::vector<std::vector<std::string>> corpus;
    for (int i = 0; i < 200; ++i) {
        corpus.push_back({"a.x=1", "b.y=1", "p.q=" + std::to_string(i % 2)});
        corpus.push_back({"a.x=2", "b.y=2", "p.q=" + std::to_string(2 + i % 2)});
    }
    SgnsParams sg;
    sg.dim = 8;
    sg.epochs = 6;
    EmbeddingModel m = train_embeddings(corpus, sg);
    const double together = embedding_cosine(m, "a.x=1", "b.y=1");
    const double apart = embedding_cosine(m, "a.x=1", "b.y=2");
    CHECK(together > apart);

    CHECK_THROWS_AS(embedding_cosine(m, "a.x=1", "nope=0"), ConfigError);
}

TEST_CASE("predicate slots: operator one-hot, match count, mean vector, corpus mass") {
    Catalog cat = generate_catalog(tiny_config(), 3);
    EmbeddingModel m = hand_model();
    const RelationId rel = 1;  // dim0
    const int32_t a0 = 1;      // columns: id, a0, a1

    SUBCASE("equality hit") {
        auto v = embed_predicate(m, {rel, a0, PredOp::eq, {6}}, cat);
        REQUIRE(int(v.size()) == rvec_width(2));
        CHECK(v == std::vector<double>{1, 0, 0, 0, 0, 0, /*matched*/ 1, /*mean*/ 0, 1,
                                       /*count*/ 20});
    }
    SUBCASE("equality miss leaves embedding entries zero") {
        auto v = embed_predicate(m, {rel, a0, PredOp::eq, {5}}, cat);
        CHECK(v == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    }
    SUBCASE("inequality uses the same lookup with its own one-hot") {
        auto v = embed_predicate(m, {rel, a0, PredOp::neq, {2}}, cat);
        CHECK(v == std::vector<double>{0, 1, 0, 0, 0, 0, 1, 1, 0, 10});
    }
    SUBCASE("IN-list averages its in-vocabulary members") {
        auto v = embed_predicate(m, {rel, a0, PredOp::in_list, {2, 6, 99}}, cat);
        CHECK(v == std::vector<double>{0, 0, 0, 0, 1, 0, 2, 0.5, 0.5, 30});
    }
    SUBCASE("prefix matches every value whose decimal spelling starts with it") {
        // Prefix "1" matches 13 only; prefix "2" matches 2.
        auto v = embed_predicate(m, {rel, a0, PredOp::like_prefix, {1}}, cat);
        CHECK(v == std::vector<double>{0, 0, 0, 0, 0, 1, 1, 3, 4, 40});
        auto w = embed_predicate(m, {rel, a0, PredOp::like_prefix, {2}}, cat);
        CHECK(w[6] == 1.0);
        CHECK(w[7] == 1.0);
    }
    SUBCASE("range bounds snap to the nearest value, ties toward the smaller") {
        // Values are 2, 6, 13. Bound 4 ties between 2 and 6 -> picks 2.
        auto v = embed_predicate(m, {rel, a0, PredOp::lt, {4}}, cat);
        CHECK(v[6] == 1.0);
        CHECK(v[7] == 1.0);  // vector of value 2
        CHECK(v[8] == 0.0);
        // Bound 5 is closer to 6.
        auto w = embed_predicate(m, {rel, a0, PredOp::gt, {5}}, cat);
        CHECK(w[3] == 1.0);
        CHECK(w[8] == 1.0);  // vector of value 6
        // Bound beyond the largest value snaps to it.
        auto u = embed_predicate(m, {rel, a0, PredOp::lt, {100}}, cat);
        CHECK(u[7] == 3.0);
        CHECK(u[8] == 4.0);
    }
    SUBCASE("unknown column key matches nothing") {
        auto v = embed_predicate(m, {0, 3, PredOp::eq, {1}}, cat);  // fact0.a0
        CHECK(v[6] == 0.0);
    }
    SUBCASE("contract violations") {
        EmbeddingModel empty;
        CHECK_THROWS_AS(embed_predicate(empty, {rel, a0, PredOp::eq, {1}}, cat), ConfigError);
        CHECK_THROWS_AS(embed_predicate(m, {rel, a0, PredOp::eq, {}}, cat), ContractError);
        CHECK_THROWS_AS(embed_predicate(m, {rel, 9, PredOp::eq, {1}}, cat), ContractError);
    }
}

TEST_CASE("embedding persistence round-trips and rejects tampering") {
    Catalog cat = generate_catalog(tiny_config(), 11);
    SgnsParams sg;
    sg.epochs = 1;
    EmbeddingModel m = train_embeddings(build_sentences(cat, false), sg);

    const std::string path = (std::filesystem::temp_directory_path() / "lqo_emb.json").string();
    save_embeddings(m, path);
    EmbeddingModel r = load_embeddings(path);
    CHECK(r.dim == m.dim);
    CHECK(r.vocab == m.vocab);
    CHECK(r.counts == m.counts);
    CHECK(r.vectors == m.vectors);
    CHECK(r.index == m.index);
    CHECK(r.column_values == m.column_values);

    // Same predicate embeds identically through the reloaded model.
    ColumnPredicate p{1, 1, PredOp::eq, {3}};
    CHECK(embed_predicate(m, p, cat) == embed_predicate(r, p, cat));

    // Truncated vector payload must not load quietly.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const size_t at = text.find("\"vectors\": \"");
    REQUIRE(at != std::string::npos);
    text.erase(at + 12, 8);
    std::ofstream(path) << text;
    CHECK_THROWS_AS(load_embeddings(path), IntegrityError);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_embeddings("/nonexistent/emb.json"), ConfigError);
}

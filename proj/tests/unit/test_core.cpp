#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/core/util.hpp"

using namespace padapt;
using padapt::testing::TempDir;

TEST_SUITE("core") {

TEST_CASE("one_hot of a single class") {
    auto oh = one_hot(LabelMap(1, 1, {2}), 4);
    CHECK(oh.storage() == std::vector<std::uint8_t>{0, 0, 1, 0});
}

TEST_CASE("one_hot of IGNORE is all zeros") {
    auto oh = one_hot(LabelMap(1, 1, {kIgnore}), 4);
    CHECK(oh.storage() == std::vector<std::uint8_t>{0, 0, 0, 0});
}

TEST_CASE("one_hot 2x2 with one ignored pixel") {
    const LabelMap l(2, 2, {0, 1, 1, kIgnore});
    const auto oh = one_hot(l, 2);
    for (std::size_t y = 0; y < 2; ++y) {
        for (std::size_t x = 0; x < 2; ++x) {
            for (std::size_t k = 0; k < 2; ++k) {
                const std::uint8_t expect = l.at(y, x) == k ? 1 : 0;
                CHECK(oh.at(y, x, k) == expect);
            }
        }
    }
    CHECK(oh.at(1, 1, 0) + oh.at(1, 1, 1) == 0);
}

TEST_CASE("ProbMap rejects rows that do not sum to one") {
    CHECK_THROWS_AS(ProbMap(Grid3<double>(1, 1, 2, std::vector<double>{0.6, 0.6})), InvalidArgument);
    CHECK_THROWS_AS(ProbMap(Grid3<double>(1, 1, 2, std::vector<double>{1.2, -0.2})), InvalidArgument);
    CHECK_NOTHROW(ProbMap(Grid3<double>(1, 1, 2, std::vector<double>{0.3, 0.7 + 5e-6})));
}

TEST_CASE("argmax breaks ties toward the lower class") {
    const ProbMap p(Grid3<double>(1, 2, 3, std::vector<double>{0.4, 0.4, 0.2, 0.1, 0.45, 0.45}));
    const auto a = p.argmax();
    CHECK(a.at(0, 0) == 0);
    CHECK(a.at(0, 1) == 1);
}

TEST_CASE("WeakLabelMap enforces IGNORE <=> provenance none") {
    CHECK_NOTHROW(WeakLabelMap(LabelMap(1, 2, {1, kIgnore}), {Provenance::oracle, Provenance::none}));
    CHECK_THROWS_AS(WeakLabelMap(LabelMap(1, 2, {1, kIgnore}), {Provenance::none, Provenance::none}), InvalidArgument);
    CHECK_THROWS_AS(WeakLabelMap(LabelMap(1, 2, {1, kIgnore}), {Provenance::pseudo, Provenance::pseudo}),
                    InvalidArgument);
}

TEST_CASE("LabelMap::validate names the offending pixel") {
    const LabelMap l(2, 2, {0, 1, 4, kIgnore});
    CHECK_NOTHROW(l.validate(5));
    try {
        l.validate(4);
        FAIL("expected a throw");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("x=0") != std::string::npos);
        CHECK(std::string(e.what()).find("y=1") != std::string::npos);
    }
}

TEST_CASE("PADM round trip of a seeded ProbMap") {
    TempDir dir;
    std::mt19937_64 rng(7);
    const ProbMap p(padapt::testing::random_probs(5, 7, 4, rng));
    save_map(dir / "p.padm", p);
    CHECK(load_map<ProbMap>(dir / "p.padm") == p);
}

TEST_CASE("PADM round trip of labels with IGNORE") {
    TempDir dir;
    std::mt19937_64 rng(8);
    const LabelMap l = padapt::testing::random_labels(6, 3, 4, rng, 0.3);
    save_map(dir / "l.padm", l);
    CHECK(load_map<LabelMap>(dir / "l.padm") == l);

    const WeakLabelMap w(LabelMap(1, 3, {0, kIgnore, 2}), {Provenance::oracle, Provenance::none, Provenance::pseudo});
    save_map(dir / "w.padm", w);
    CHECK(load_map<WeakLabelMap>(dir / "w.padm") == w);
}

TEST_CASE("truncated PADM file is a FormatError") {
    TempDir dir;
    std::mt19937_64 rng(9);
    save_map(dir / "p.padm", ProbMap(padapt::testing::random_probs(4, 4, 2, rng)));
    auto bytes = read_file_bytes(dir / "p.padm");
    for (std::size_t cut : {std::size_t(3), std::size_t(12), bytes.size() - 1}) {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + long(cut));
        write_file_atomic(dir / "t.padm", part);
        CHECK_THROWS_AS(load_map<ProbMap>(dir / "t.padm"), FormatError);
    }
}

TEST_CASE("loading with the wrong dtype fails") {
    TempDir dir;
    save_map(dir / "l.padm", LabelMap(2, 2, 0));
    CHECK_THROWS_AS(load_map<ProbMap>(dir / "l.padm"), FormatError);
}

TEST_CASE("PNG round trip") {
    TempDir dir;
    std::mt19937_64 rng(3);
    const LabelMap l = padapt::testing::random_labels(9, 11, 4, rng, 0.1);
    write_png_gray(dir / "l.png", l);
    CHECK(read_png_gray(dir / "l.png") == l);

    Grid3<double> rgb(4, 5, 3);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& v : rgb.storage()) v = byte(rng) / 255.0;
    write_png_rgb(dir / "c.png", rgb);
    const auto back = read_png_rgb(dir / "c.png");
    REQUIRE(back.same_shape(rgb));
    for (std::size_t i = 0; i < rgb.size(); ++i) CHECK(back.data()[i] == doctest::Approx(rgb.data()[i]).epsilon(1e-12));
}

TEST_CASE("KeyValueConfig parses comments and sections") {
    const auto kv = KeyValueConfig::parse(
        "# header\n"
        "a = 1\n"
        "b=two words  # trailing\n"
        "\n"
        "[arm first]\n"
        "k = 3\n"
        "[arm second]\n"
        "k = 5\n");
    CHECK(kv.get("a") == "1");
    CHECK(kv.get("b") == "two words");
    CHECK_FALSE(kv.get("k"));
    REQUIRE(kv.sections().size() == 2);
    CHECK(kv.sections()[0].kind == "arm");
    CHECK(kv.sections()[0].name == "first");
    CHECK(kv.sections()[1].values.at("k") == "5");
    CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), InvalidArgument);
}

TEST_CASE("typed config lookups name the key") {
    CHECK(parse_long("n", "42") == 42);
    CHECK(parse_double("x", "1e-3") == doctest::Approx(1e-3));
    CHECK(parse_bool("f", "true"));
    CHECK_FALSE(parse_bool("f", "0"));
    CHECK(parse_long_list("s", "0,1, 2") == std::vector<long>{0, 1, 2});
    try {
        parse_long("uda.iterations", "ten");
        FAIL("expected a throw");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("uda.iterations") != std::string::npos);
    }
}

TEST_CASE("derive_seed separates tags and is stable") {
    CHECK(derive_seed(1, {"a", "b"}) == derive_seed(1, {"a", "b"}));
    CHECK(derive_seed(1, {"a", "b"}) != derive_seed(1, {"ab"}));
    CHECK(derive_seed(1, {"a"}) != derive_seed(2, {"a"}));
    CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
    CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
}

}  // TEST_SUITE

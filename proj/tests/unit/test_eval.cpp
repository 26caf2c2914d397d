#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/data/toyshapes.hpp"
#include "padapt/eval/metrics.hpp"
#include "padapt/eval/report.hpp"

using namespace padapt;
using padapt::testing::TempDir;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

IouResult example_result() { return iou(ConfusionMatrix::from_counts(2, {3, 1, 2, 4})); }

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("confusion matrix of a diagonal case") {
    ConfusionMatrix cm(3);
    cm.accumulate(LabelMap(1, 3, {0, 1, 2}), LabelMap(1, 3, {0, 1, 2}));
    for (std::size_t g = 0; g < 3; ++g)
        for (std::size_t p = 0; p < 3; ++p) CHECK(cm.at(g, p) == (g == p ? 1u : 0u));
    CHECK(cm.total() == 3);
}

TEST_CASE("IGNORE ground truth is never counted") {
    ConfusionMatrix cm(3);
    cm.accumulate(LabelMap(2, 2, {0, 1, 2, 0}), LabelMap(2, 2, kIgnore));
    CHECK(cm == ConfusionMatrix(3));
}

TEST_CASE("confusion matrix equals a brute-force count") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
        const auto gt = padapt::testing::random_labels(8, 8, 4, rng, 0.2);
        const auto pred = padapt::testing::random_labels(8, 8, 4, rng, 0.0);
        ConfusionMatrix cm(4);
        cm.accumulate(pred, gt);
        for (std::size_t g = 0; g < 4; ++g) {
            for (std::size_t p = 0; p < 4; ++p) {
                std::uint64_t n = 0;
                for (std::size_t y = 0; y < 8; ++y)
                    for (std::size_t x = 0; x < 8; ++x) n += gt.at(y, x) == g && pred.at(y, x) == p;
                CHECK(cm.at(g, p) == n);
            }
        }
    }
    ConfusionMatrix cm(4);
    CHECK_THROWS_AS(cm.accumulate(LabelMap(2, 2, 0), LabelMap(2, 3, 0)), ShapeError);
    CHECK_THROWS_AS(cm.accumulate(LabelMap(1, 1, {4}), LabelMap(1, 1, {0})), InvalidArgument);
    CHECK_THROWS_AS(cm.accumulate(LabelMap(1, 1, {0}), LabelMap(1, 1, {5})), InvalidArgument);
}

TEST_CASE("perfect prediction") {
    std::mt19937_64 rng(22);
    const auto gt = padapt::testing::random_labels(16, 16, 4, rng, 0.1);
    LabelMap pred = gt;
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x)
            if (pred.at(y, x) == kIgnore) pred.at(y, x) = 0;
    ConfusionMatrix cm(4);
    cm.accumulate(pred, gt);
    const auto r = iou(cm);
    CHECK(r.miou == 1.0);
    for (const auto& c : r.per_class) CHECK(c == 1.0);
}

TEST_CASE("disjoint masks score zero") {
    ConfusionMatrix cm(2);
    cm.accumulate(LabelMap(1, 4, {1, 1, 0, 0}), LabelMap(1, 4, {0, 0, 1, 1}));
    const auto r = iou(cm);
    CHECK(r.per_class[0] == 0.0);
    CHECK(r.per_class[1] == 0.0);
    CHECK(r.miou == 0.0);
}

TEST_CASE("two-class worked example") {
    const auto r = example_result();
    CHECK(*r.per_class[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(*r.per_class[1] - 0.571429) < 1e-6);
    CHECK(std::abs(r.miou - 0.535714) < 1e-6);
    CHECK(r.miou == doctest::Approx((0.5 + 4.0 / 7.0) / 2).epsilon(1e-12));
}

TEST_CASE("absent classes are undefined, or zero under the other convention") {
    const auto r = iou(ConfusionMatrix::from_counts(3, {2, 0, 0, 0, 2, 0, 0, 0, 0}));
    CHECK_FALSE(r.per_class[2]);
    CHECK(r.miou == 1.0);
    CHECK(r.miou_all_zero == doctest::Approx(2.0 / 3.0));
    const std::vector<std::size_t> subset{0};
    CHECK(*iou(ConfusionMatrix::from_counts(2, {3, 1, 2, 4}), &subset).miou_subset == doctest::Approx(0.5));
}

TEST_CASE("evaluate agrees with accumulating predictions") {
    const auto d = generate_toyshapes({.seed = 3, .n_source = 1, .n_target = 1, .n_val = 3});
    const SegNet g(4, 4, 3);
    ConfusionMatrix expect(4);
    for (const auto& it : d.target_val.items) expect.accumulate(g.predict_labels(it.image), *it.labels);
    CHECK(evaluate(g, d.target_val) == expect);
    CHECK(expect.total() == 3u * 64 * 64);
}

TEST_CASE("eval files round trip") {
    TempDir dir;
    const auto r = iou(ConfusionMatrix::from_counts(3, {2, 1, 0, 0, 2, 0, 0, 0, 0}));
    write_eval(dir.path(), r, {"a", "b", "c"});
    std::vector<std::string> names;
    const auto back = read_eval(dir.path(), &names);
    CHECK(names == std::vector<std::string>{"a", "b", "c"});
    CHECK(back.miou == doctest::Approx(r.miou).epsilon(1e-12));
    CHECK(back.miou_all_zero == doctest::Approx(r.miou_all_zero).epsilon(1e-12));
    REQUIRE(back.per_class.size() == 3);
    CHECK_FALSE(back.per_class[2]);
    CHECK(*back.per_class[0] == doctest::Approx(*r.per_class[0]).epsilon(1e-12));
}

TEST_CASE("report tables") {
    const std::vector<std::string> classes{"bg", "fg"};
    std::vector<ArmRow> rows;
    for (const char* n : {"self_training", "random", "active", "full"}) rows.push_back({n, example_result()});

    const auto text = split(render_table_text(rows, classes), '\n');
    CHECK(text.size() == 6);  // header, 4 rows, trailing empty
    CHECK(text[3].find("active") == 0);
    CHECK(text[3].find("53.6") != std::string::npos);
    CHECK(split(render_table_text({rows[0]}, classes), '\n').size() == 3);

    const auto csv = split(render_table_csv(rows, classes), '\n');
    REQUIRE(csv.size() == 6);
    CHECK(csv[0] == "arm,bg,fg,miou,miou_all_zero_convention");
    for (std::size_t i = 1; i <= 4; ++i) {
        const auto cells = split(csv[i], ',');
        REQUIRE(cells.size() == 5);
        CHECK(std::stod(cells[1]) == doctest::Approx(0.5));
        CHECK(std::stod(cells[3]) == doctest::Approx(0.535714).epsilon(1e-6));
    }
}

TEST_CASE("report over arm directories") {
    TempDir dir;
    for (const char* n : {"random", "active"}) write_eval(dir.path() / n / "eval", example_result(), {"bg", "fg"});
    std::filesystem::create_directories(dir.path() / "broken");
    ReportOptions opts;
    opts.runs = {dir.path() / "random", dir.path() / "active", dir.path() / "broken"};
    opts.out = dir.path() / "report";
    const auto r = render_report(opts);
    CHECK(r.rows.size() == 2);
    REQUIRE(r.missing.size() == 1);
    CHECK(r.missing[0] == dir.path() / "broken");
    CHECK(std::filesystem::exists(opts.out / "table.txt"));
    CHECK(std::filesystem::exists(opts.out / "missing.txt"));
    const auto csv = read_file_bytes(opts.out / "table.csv");
    CHECK(std::string(csv.begin(), csv.end()).find("\nrandom,") != std::string::npos);
}

TEST_CASE("panels and overlays") {
    const LabelMap l(1, 2, {0, kIgnore});
    const auto c = colorize(l);
    CHECK(c.at(0, 1, 0) == 0.0);
    CHECK(c.at(0, 1, 2) == 0.0);

    const auto s = hstack({Grid3<double>(4, 3, 3, 0.0), Grid3<double>(4, 5, 3, 0.0)});
    CHECK(s.width() == 10);
    CHECK(s.at(0, 3, 0) == 1.0);
    CHECK(s.at(0, 5, 0) == 0.0);
    CHECK_THROWS_AS(hstack({Grid3<double>(4, 3, 3), Grid3<double>(5, 3, 3)}), ShapeError);

    const auto grid = PatchGrid::tile(16, 16, 2, 2);
    const auto o = draw_patch_overlay(Grid3<double>(16, 16, 3, 0.0), grid, {3});
    CHECK(o.at(8, 8, 0) == 1.0);
    CHECK(o.at(15, 12, 1) == 1.0);
    CHECK(o.at(12, 12, 0) == 0.0);
    CHECK(o.at(0, 0, 0) == 0.0);
}

}  // TEST_SUITE

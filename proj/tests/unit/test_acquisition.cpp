#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "padapt/acquisition/acquisition.hpp"
#include "padapt/acquisition/manifest.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/data/toyshapes.hpp"
#include "padapt/uda/losses.hpp"

using namespace padapt;
using padapt::testing::TempDir;

namespace {

EntropyMap random_entropy(std::size_t h, std::size_t w, std::mt19937_64& rng, double spread = 2.0) {
    return entropy_map(ProbMap(padapt::testing::random_probs(h, w, 4, rng, spread)));
}

std::vector<PatchScore> as_scores(std::initializer_list<double> v) {
    std::vector<PatchScore> out;
    int i = 0;
    for (double s : v) out.push_back({i++, s});
    return out;
}

}  // namespace

TEST_SUITE("acquisition") {

TEST_CASE("grid tiling") {
    const auto g = PatchGrid::tile(64, 64, 8, 8);
    CHECK(g.count() == 64);
    CHECK(g.area() == 64);
    CHECK(g.x0(9) == 8);
    CHECK(g.y0(9) == 8);
    CHECK(g.index_of(63, 63) == 63);
    CHECK(g.contains(9, 15, 8));
    CHECK_FALSE(g.contains(9, 16, 8));
    CHECK_THROWS_AS(PatchGrid::tile(64, 64, 7, 8), InvalidArgument);
    const auto r = PatchGrid::tile(32, 64, 4, 2);  // 4 columns, 2 rows
    CHECK(r.patch_w == 16);
    CHECK(r.patch_h == 16);
}

TEST_CASE("uniform map scores ln4 / 4 everywhere") {
    const ProbMap u(Grid3<double>(64, 64, 4, 0.25));
    for (const auto& s : score_patches(entropy_map(u), PatchGrid::tile(64, 64, 8, 8))) {
        CHECK(s.score == doctest::Approx(std::log(4.0) / 4).epsilon(1e-12));
    }
    CHECK(std::abs(std::log(4.0) / 4 - 0.346574) < 1e-6);
}

TEST_CASE("one-hot map scores zero") {
    Grid3<double> g(16, 16, 4, 0.0);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) g.at(y, x, (x + y) % 4) = 1.0;
    for (const auto& s : score_patches(entropy_map(ProbMap(g)), PatchGrid::tile(16, 16, 4, 4))) CHECK(s.score == 0.0);
}

TEST_CASE("hand-built 4x4 map on a 2x2 grid") {
    // Channel 0 holds a known value per pixel; channel 1 is zero.
    const double v[4][4] = {{0.1, 0.2, 0.3, 0.0}, {0.0, 0.3, 0.1, 0.1}, {0.2, 0.2, 0.05, 0.05}, {0.1, 0.0, 0.3, 0.3}};
    Grid3<double> e(4, 4, 2, 0.0);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) e.at(y, x, 0) = v[y][x];
    const auto scores = score_patches(EntropyMap(e), PatchGrid::tile(4, 4, 2, 2));
    const double expect[4] = {(0.1 + 0.2 + 0.0 + 0.3) / 8, (0.3 + 0.0 + 0.1 + 0.1) / 8,
                              (0.2 + 0.2 + 0.1 + 0.0) / 8, (0.05 + 0.05 + 0.3 + 0.3) / 8};
    for (int p = 0; p < 4; ++p) CHECK(scores[std::size_t(p)].score == doctest::Approx(expect[p]).epsilon(1e-12));
    CHECK(select_top_k(scores, 1) == std::set<int>{3});
}

TEST_CASE("patch scores equal a brute-force pixel loop") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 10; ++t) {
        const auto e = random_entropy(32, 32, rng);
        const auto grid = PatchGrid::tile(32, 32, 4, 8);
        const auto scores = sum_patches(e, grid);
        std::vector<double> brute(std::size_t(grid.count()), 0.0);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                for (std::size_t k = 0; k < 4; ++k) brute[std::size_t(grid.index_of(x, y))] += e.at(std::size_t(y), std::size_t(x), k);
        for (int p = 0; p < grid.count(); ++p) CHECK(scores[std::size_t(p)].score == doctest::Approx(brute[std::size_t(p)]).epsilon(1e-12));
    }
}

TEST_CASE("top-K examples") {
    CHECK(select_top_k(as_scores({0.1, 0.9, 0.5}), 1) == std::set<int>{1});
    CHECK(select_top_k(as_scores({0.1, 0.9, 0.5}), 0).empty());
    CHECK(select_top_k(as_scores({0.5, 0.5, 0.1}), 1) == std::set<int>{0});
    CHECK(select_top_k(as_scores({0.2, 0.7, 0.7, 0.7}), 2) == std::set<int>{1, 2});
    CHECK_THROWS_AS(select_top_k(as_scores({0.1}), 2), InvalidArgument);
}

TEST_CASE("mean and sum rank identically") {
    std::mt19937_64 rng(13);
    const auto grid = PatchGrid::tile(64, 64, 8, 8);
    for (int t = 0; t < 50; ++t) {
        const auto e = random_entropy(64, 64, rng, 1.0 + t % 4);
        for (int k : {1, 5, 10, 64}) CHECK(select_top_k(score_patches(e, grid), k) == select_top_k(sum_patches(e, grid), k));
    }
}

TEST_CASE("top-K sets are nested in K") {
    std::mt19937_64 rng(14);
    const auto grid = PatchGrid::tile(64, 64, 8, 8);
    const auto scores = score_patches(random_entropy(64, 64, rng), grid);
    std::set<int> prev;
    for (int k = 0; k <= 64; ++k) {
        const auto cur = select_top_k(scores, k);
        CHECK(cur.size() == std::size_t(k));
        CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        prev = cur;
    }
}

TEST_CASE("random selection is seeded per image") {
    const auto a = select_random(64, 10, 3, "img_a");
    CHECK(a.size() == 10);
    CHECK(select_random(64, 10, 3, "img_a") == a);
    CHECK(select_random(64, 10, 3, "img_b") != a);
    CHECK(select_random(64, 10, 4, "img_a") != a);
    CHECK(select_random(64, 64, 3, "x").size() == 64);
    CHECK_THROWS_AS(select_random(64, 65, 3, "x"), InvalidArgument);
}

TEST_CASE("points in one 16x16 patch") {
    const auto grid = PatchGrid::tile(16, 16, 1, 1);
    const auto pts = sample_points("img", {0}, grid, 5, 42);
    REQUIRE(pts.size() == 5);
    std::set<std::pair<int, int>> seen;
    for (const auto& r : pts) {
        CHECK(grid.contains(0, r.x, r.y));
        CHECK(r.status == RequestStatus::pending);
        seen.insert({r.x, r.y});
    }
    CHECK(seen.size() == 5);
    CHECK(sample_points("img", {0}, grid, 5, 42) == pts);
    CHECK(sample_points("img", {0}, grid, 5, 43) != pts);
}

TEST_CASE("no selected patches, no requests") {
    CHECK(sample_points("img", {}, PatchGrid::tile(64, 64, 8, 8), 5, 0).empty());
}

TEST_CASE("ten patches with five points give fifty unique requests") {
    const auto grid = PatchGrid::tile(64, 64, 8, 8);
    const std::set<int> sel{0, 3, 9, 17, 22, 31, 40, 47, 58, 63};
    const auto pts = sample_points("img", sel, grid, 5, 1);
    CHECK(pts.size() == 50);
    std::set<std::string> ids;
    for (const auto& r : pts) {
        ids.insert(r.request_id);
        CHECK(sel.count(r.patch_index) == 1);
        CHECK(grid.contains(r.patch_index, r.x, r.y));
        CHECK(r.request_id == request_id("img", r.patch_index, int(&r - pts.data()) % 5));
    }
    CHECK(ids.size() == 50);
    CHECK_THROWS_AS(sample_points("img", {0}, grid, 65, 1), InvalidArgument);
}

TEST_CASE("a patch gets the same points whichever strategy picked it") {
    std::mt19937_64 rng(15);
    const auto e = random_entropy(64, 64, rng);
    AcquisitionConfig active;
    active.k = 20;
    active.seed = 9;
    AcquisitionConfig random = active;
    random.strategy = Strategy::random;
    const auto ma = acquire_image("im", e, active), mr = acquire_image("im", e, random);
    CHECK(ma.points.size() == mr.points.size());
    std::size_t shared = 0;
    for (const auto& a : ma.points) {
        for (const auto& r : mr.points) {
            if (a.request_id != r.request_id) continue;
            CHECK(a.x == r.x);
            CHECK(a.y == r.y);
            ++shared;
        }
    }
    std::set<int> both;
    std::set_intersection(ma.selected.begin(), ma.selected.end(), mr.selected.begin(), mr.selected.end(),
                          std::inserter(both, both.begin()));
    CHECK(shared == both.size() * 5);
}

TEST_CASE("K = 0 merges to the pure pseudo map") {
    std::mt19937_64 rng(16);
    const ProbMap p(padapt::testing::random_probs(16, 16, 4, rng));
    const auto w = merge_labels(p, PatchGrid::tile(16, 16, 4, 4), {}, {});
    CHECK(w.classes() == p.argmax());
    CHECK(w.count(Provenance::pseudo) == 256);
}

TEST_CASE("full selection answered everywhere reproduces ground truth") {
    std::mt19937_64 rng(17);
    const ProbMap p(padapt::testing::random_probs(16, 16, 4, rng));
    const LabelMap gt = padapt::testing::random_labels(16, 16, 4, rng);
    Grid3<double> e = entropy_values(p.grid());
    AcquisitionConfig cfg;
    cfg.strategy = Strategy::full;
    cfg.grid_m = cfg.grid_n = 4;
    auto m = acquire_image("im", EntropyMap(e), cfg);
    CHECK(m.points.size() == 256);
    m = answer_with_oracle({m}, {{"im", gt}}).front();
    const auto w = merge_manifest(m, p);
    CHECK(w.classes() == gt);
    CHECK(w.count(Provenance::oracle) == 256);
}

TEST_CASE("two-patch case with one answered point") {
    // 4 rows x 8 columns, two 4x4 patches side by side; patch 1 is selected.
    Grid3<double> g(4, 8, 2);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            const double a = (x + 2 * y) % 3 == 0 ? 0.8 : 0.3;
            g.at(y, x, 0) = a;
            g.at(y, x, 1) = 1 - a;
        }
    const ProbMap p(g);
    const auto grid = PatchGrid::tile(4, 8, 2, 1);
    AnnotationRequest r;
    r.request_id = "q";
    r.x = 5;
    r.y = 2;
    r.patch_index = 1;
    r.status = RequestStatus::answered;
    r.answer = 1;
    const auto w = merge_labels(p, grid, {1}, {r});
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 8; ++x) {
            std::uint8_t cls = kIgnore;
            Provenance prov = Provenance::none;
            if (x < 4) {
                cls = (x + 2 * y) % 3 == 0 ? 0 : 1;
                prov = Provenance::pseudo;
            } else if (x == 5 && y == 2) {
                cls = 1;
                prov = Provenance::oracle;
            }
            CHECK(w.classes().at(std::size_t(y), std::size_t(x)) == cls);
            CHECK(w.provenance(std::size_t(y), std::size_t(x)) == prov);
        }
    }

    // Point-only pseudo labels: exactly points_per_patch pseudo pixels in patch 0.
    MergeOptions sparse{false, 3, 5, "im"};
    const auto ws = merge_labels(p, grid, {1}, {r}, sparse);
    CHECK(ws.count(Provenance::pseudo) == 3);
    CHECK(ws.count(Provenance::oracle) == 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x)
            if (ws.provenance(std::size_t(y), std::size_t(x)) == Provenance::pseudo) CHECK(x < 4);
    CHECK(merge_labels(p, grid, {1}, {r}, sparse) == ws);
}

TEST_CASE("merge rejects bad answers") {
    const ProbMap p(Grid3<double>(4, 8, 2, 0.5));
    const auto grid = PatchGrid::tile(4, 8, 2, 1);
    AnnotationRequest r;
    r.request_id = "q";
    r.x = 5;
    r.y = 2;
    r.patch_index = 1;
    CHECK_THROWS_AS(merge_labels(p, grid, {1}, {r}), InvalidArgument);  // pending
    r.status = RequestStatus::answered;
    r.answer = 2;
    CHECK_THROWS_AS(merge_labels(p, grid, {1}, {r}), InvalidArgument);  // class >= C
    r.answer = 0;
    CHECK_THROWS_AS(merge_labels(p, grid, {0}, {r}), InvalidArgument);  // outside selection
    r.x = 9;
    CHECK_THROWS_AS(merge_labels(p, grid, {1}, {r}), InvalidArgument);  // outside image
}

TEST_CASE("budget accounting per strategy") {
    std::mt19937_64 rng(18);
    const auto e = random_entropy(64, 64, rng);
    AcquisitionConfig cfg;
    for (int k : {0, 1, 3, 10, 64}) {
        for (auto s : {Strategy::active, Strategy::random}) {
            cfg.strategy = s;
            cfg.k = k;
            const auto m = acquire_image("im", e, cfg);
            CHECK(m.selected.size() == std::size_t(k));
            CHECK(m.points.size() == std::size_t(5 * k));
        }
    }
    cfg.strategy = Strategy::none;
    CHECK(acquire_image("im", e, cfg).points.empty());
    cfg.strategy = Strategy::active;
    cfg.k = 65;
    CHECK_THROWS_AS(acquire_image("im", e, cfg), InvalidArgument);
}

TEST_CASE("simulated oracle reads the ground truth") {
    const auto scene = render_scene(scene_seed(0, "source", 3), 64, 64);
    std::vector<AnnotationRequest> reqs;
    int fg_x = -1, fg_y = -1;
    for (int y = 0; y < 64 && fg_x < 0; ++y)
        for (int x = 0; x < 64; ++x)
            if (scene.labels.at(std::size_t(y), std::size_t(x)) != 0) {
                fg_x = x;
                fg_y = y;
                break;
            }
    REQUIRE(fg_x >= 0);
    AnnotationRequest shape;
    shape.x = fg_x;
    shape.y = fg_y;
    reqs.push_back(shape);
    const auto answered = simulated_oracle(reqs, scene.labels);
    CHECK(answered[0].answer == scene.labels.at(std::size_t(fg_y), std::size_t(fg_x)));
    CHECK(answered[0].status == RequestStatus::answered);

    const LabelMap bg(64, 64, 0);
    const auto pts = sample_points("im", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, PatchGrid::tile(64, 64, 8, 8), 5, 0);
    const auto all = simulated_oracle(pts, scene.labels);
    CHECK(all.size() == 50);
    for (const auto& r : all) CHECK(r.answer == scene.labels.at(std::size_t(r.y), std::size_t(r.x)));
    for (const auto& r : simulated_oracle(pts, bg)) CHECK(r.answer == 0);

    AnnotationRequest out;
    out.x = 64;
    CHECK_THROWS_AS(simulated_oracle({out}, bg), InvalidArgument);
}

TEST_CASE("manifest JSON round trip") {
    TempDir dir;
    std::mt19937_64 rng(19);
    AcquisitionConfig cfg;
    cfg.k = 4;
    cfg.seed = 3;
    cfg.pseudo_dense = false;
    auto m = acquire_image("img_7", random_entropy(64, 64, rng), cfg);
    m.points[1].status = RequestStatus::answered;
    m.points[1].answer = 2;
    CHECK(manifest_from_json(manifest_to_json(m)) == m);
    save_manifest(dir.path(), m);
    CHECK(load_manifest(dir / "img_7.json") == m);
    CHECK(m.count_answered() == 1);

    auto j = manifest_to_json(m);
    j.erase("grid");
    CHECK_THROWS_AS(manifest_from_json(j), FormatError);
    j = manifest_to_json(m);
    j["points"][0]["x"] = "three";
    CHECK_THROWS_AS(manifest_from_json(j), FormatError);
}

}  // TEST_SUITE

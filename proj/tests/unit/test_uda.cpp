#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/data/toyshapes.hpp"
#include "padapt/uda/losses.hpp"
#include "padapt/uda/train_uda.hpp"

using namespace padapt;
using padapt::testing::TempDir;

namespace {

double scalar_ce(const Grid3<double>& p, const LabelMap& y) {
    double s = 0;
    int n = 0;
    for (std::size_t r = 0; r < y.height(); ++r)
        for (std::size_t c = 0; c < y.width(); ++c) {
            if (y.at(r, c) == kIgnore) continue;
            s -= std::log(std::max(p.at(r, c, y.at(r, c)), 1e-12));
            ++n;
        }
    return n ? s / n : 0.0;
}

ToyShapes tiny_data(std::uint64_t seed, std::size_t n = 8) {
    ToyShapesConfig c;
    c.seed = seed;
    c.n_source = n;
    c.n_target = n;
    c.n_val = 2;
    return generate_toyshapes(c);
}

UdaConfig tiny_cfg(long iters) {
    UdaConfig c;
    c.iterations = iters;
    c.width = 4;
    c.disc_width = 8;
    return c;
}

}  // namespace

TEST_SUITE("uda") {

TEST_CASE("cross-entropy closed forms") {
    const Grid3<double> uniform(1, 1, 2, std::vector<double>{0.5, 0.5});
    CHECK(cross_entropy(uniform, LabelMap(1, 1, {0})) == doctest::Approx(0.693147).epsilon(1e-6));
    const Grid3<double> onehot(1, 1, 3, std::vector<double>{0.0, 1.0, 0.0});
    CHECK(cross_entropy(onehot, LabelMap(1, 1, {1})) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cross_entropy(uniform, LabelMap(1, 1, {kIgnore})) == 0.0);
}

TEST_CASE("cross-entropy matches a scalar recomputation") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto p = padapt::testing::random_probs(2, 2, 3, rng);
        const auto y = padapt::testing::random_labels(2, 2, 3, rng, 0.25);
        CHECK(std::abs(cross_entropy(p, y) - scalar_ce(p, y)) < 1e-12);
        CHECK(std::abs(seg_loss(ProbMap(p), y) - scalar_ce(p, y)) < 1e-12);
    }
}

TEST_CASE("weighted cross-entropy keeps the unweighted normalization") {
    const Grid3<double> p(1, 2, 2, std::vector<double>{0.25, 0.75, 0.5, 0.5});
    const LabelMap y(1, 2, {1, 0});
    const std::vector<double> w{2.0, 0.0};
    CHECK(cross_entropy_weighted(p, y, w) == doctest::Approx(2.0 * -std::log(0.75) / 2.0));
}

TEST_CASE("entropy closed forms") {
    const ProbMap uniform(Grid3<double>(1, 1, 4, 0.25));
    CHECK(entropy_map(uniform).pixel_entropy(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(std::abs(entropy_map(uniform).pixel_entropy(0, 0) - 1.386294361) < 1e-9);

    const ProbMap onehot(Grid3<double>(1, 1, 4, std::vector<double>{0, 0, 1, 0}));
    for (std::size_t k = 0; k < 4; ++k) CHECK(entropy_map(onehot).at(0, 0, k) == 0.0);

    const ProbMap two(Grid3<double>(1, 1, 2, std::vector<double>{0.7, 0.3}));
    const auto e = entropy_map(two);
    CHECK(e.at(0, 0, 0) == doctest::Approx(-0.7 * std::log(0.7)).epsilon(1e-12));
    CHECK(e.at(0, 0, 0) == doctest::Approx(0.249672).epsilon(1e-5));
    CHECK(e.at(0, 0, 1) == doctest::Approx(0.361192).epsilon(1e-5));
    CHECK(e.pixel_entropy(0, 0) == doctest::Approx(0.610864).epsilon(1e-5));
}

TEST_CASE("entropy backward matches finite differences") {
    std::mt19937_64 rng(6);
    const auto p = padapt::testing::random_probs(3, 3, 4, rng);
    Grid3<double> w(3, 3, 4);
    std::normal_distribution<double> n;
    for (auto& v : w.storage()) v = n(rng);
    auto f = [&](const Grid3<double>& q) {
        const auto e = entropy_values(q);
        double s = 0;
        for (std::size_t i = 0; i < e.size(); ++i) s += w.data()[i] * e.data()[i];
        return s;
    };
    const auto g = entropy_backward(p, w);
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto a = p, b = p;
        a.storage()[i] += 1e-6;
        b.storage()[i] -= 1e-6;
        CHECK(g.data()[i] == doctest::Approx((f(a) - f(b)) / 2e-6).epsilon(1e-6));
    }
}

TEST_CASE("adversarial losses at a chance-level discriminator") {
    const std::vector<double> half(10, 0.5);
    const auto l = adv_losses(half, half);
    CHECK(l.loss_d == doctest::Approx(2 * std::numbers::ln2).epsilon(1e-12));
    CHECK(l.loss_g_fool == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("perfect discriminator has near-zero loss") {
    const std::vector<double> one(6, 1.0), eps(6, 1e-12);
    CHECK(adv_losses(one, eps).loss_d < 1e-9);
    // Swapped convention: the same maps now look maximally wrong.
    CHECK(adv_losses(one, eps, DomainConvention::target_is_one).loss_d > 20.0);
}

TEST_CASE("adversarial losses match a scalar recomputation") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> ds(9), dt(9);
        for (auto& v : ds) v = u(rng);
        for (auto& v : dt) v = u(rng);
        double ld = 0, lg = 0;
        for (int i = 0; i < 9; ++i) {
            ld += -(std::log(ds[i]) + std::log(1 - dt[i])) / 9;
            lg += -std::log(dt[i]) / 9;
        }
        const auto l = adv_losses(ds, dt);
        CHECK(std::abs(l.loss_d - ld) < 1e-12);
        CHECK(std::abs(l.loss_g_fool - lg) < 1e-12);
    }
}

TEST_CASE("logit_bce agrees with the probability form") {
    nn::Tensor z(1, 2, 2);
    z.v = {-3.0, -0.5, 0.7, 4.0};
    double expect = 0;
    for (double v : z.v) expect += -std::log(nn::sigmoid(v)) / 4;
    CHECK(logit_bce(z, true) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::isfinite(logit_bce(nn::Tensor(1, 1, 1, 30.0), false)));
}

TEST_CASE("ten iterations reduce the segmentation loss") {
    const auto d = tiny_data(0);
    auto cfg = tiny_cfg(10);
    cfg.batch_source = 4;
    const auto r = train_uda(labeled(d.source), images_only(d.target_train), cfg);
    REQUIRE(r.log.size() == 10);
    CHECK(r.log.back().seg_loss < r.log.front().seg_loss);
    for (const auto& e : r.log) CHECK_FALSE(e.seg_target);
}

TEST_CASE("lambda_adv = 0 reduces to supervised training") {
    const auto d = tiny_data(1);
    auto cfg = tiny_cfg(6);
    cfg.lambda_adv = 0.0;
    const auto uda = train_uda(labeled(d.source), images_only(d.target_train), cfg);
    const auto src = train_source_only(labeled(d.source), cfg);
    CHECK(uda.generator.params() == src.params());

    // Different target images do not change G either.
    const auto other = tiny_data(2);
    const auto uda2 = train_uda(labeled(d.source), images_only(other.target_train), cfg);
    CHECK(uda2.generator.params() == src.params());
}

TEST_CASE("training is deterministic in its seed") {
    const auto d = tiny_data(3);
    const auto cfg = tiny_cfg(4);
    const auto a = train_uda(labeled(d.source), images_only(d.target_train), cfg);
    const auto b = train_uda(labeled(d.source), images_only(d.target_train), cfg);
    CHECK(a.generator.params() == b.generator.params());
    CHECK(a.discriminator.params() == b.discriminator.params());
    auto cfg2 = cfg;
    cfg2.seed = 1;
    CHECK(train_uda(labeled(d.source), images_only(d.target_train), cfg2).generator.params() != a.generator.params());
}

TEST_CASE("identical domains leave the discriminator at chance") {
    auto cfg = ToyShapesConfig{};
    cfg.seed = 9;
    cfg.n_source = 40;
    cfg.n_target = 1;
    cfg.n_val = 1;
    const auto d = generate_toyshapes(cfg);
    DatasetSplit train = d.source, held = d.source;
    train.items.resize(30);
    held.items.erase(held.items.begin(), held.items.begin() + 30);
    auto ucfg = tiny_cfg(500);
    const auto r = train_uda(labeled(train), images_only(train), ucfg);
    const auto imgs = images_only(held).images;
    const std::vector<SegImage> a(imgs.begin(), imgs.begin() + 5), b(imgs.begin() + 5, imgs.end());
    const double acc = discriminator_accuracy(r.generator, r.discriminator, a, b);
    CHECK(acc >= 0.4);
    CHECK(acc <= 0.6);
}

TEST_CASE("exported maps round trip bit for bit") {
    TempDir dir;
    const auto d = tiny_data(4, 5);
    const SegNet g(4, 4, 4);
    const auto target = images_only(d.target_train);
    const auto maps = export_target_maps(g, target, dir / "maps");
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "maps")) files += e.is_regular_file();
    CHECK(files == 2 * target.size());

    const auto loaded = load_target_maps(dir / "maps");
    REQUIRE(loaded.size() == target.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].image_id == target.images[i].id());
        CHECK(entropy_map(loaded[i].probs) == loaded[i].entropy);
        CHECK(loaded[i].probs == maps[i].probs);
    }
    const auto before = read_file_bytes(dir / "maps" / (target.images[0].id() + ".prob.padm"));
    export_target_maps(g, target, dir / "maps");
    CHECK(read_file_bytes(dir / "maps" / (target.images[0].id() + ".prob.padm")) == before);
}

TEST_CASE("UdaConfig text round trip and validation") {
    UdaConfig c;
    c.iterations = 123;
    c.lr_g = 0.005;
    c.aux_head = true;
    c.seed = 77;
    const auto back = UdaConfig::from_config(KeyValueConfig::parse(c.to_config_text("uda.")), "uda.");
    CHECK(back.to_config_text() == c.to_config_text());
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK_THROWS_AS(UdaConfig::from_config(KeyValueConfig::parse("lr_g = fast\n")), InvalidArgument);
}

}  // TEST_SUITE

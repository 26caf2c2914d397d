#include "padapt/model/models.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <random>

#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/core/util.hpp"

namespace padapt {

using nn::Conv2d;
using nn::Tensor;

namespace {

Tensor conv_act(const Conv2d& conv, std::span<const double> params, const Tensor& in, LayerCache* c, bool act) {
    if (c) c->in = in;
    Tensor y = conv.forward(params, in, c ? &c->cols : nullptr);
    if (act) {
        if (c) c->pre = y;
        nn::silu_inplace(y);
    }
    return y;
}

Tensor conv_act_back(const Conv2d& conv, std::span<const double> params, std::span<double> grad, const LayerCache& c,
                     Tensor dy, bool act, bool need_dx) {
    if (act) nn::silu_backward(c.pre, dy);
    Tensor dx;
    conv.backward(params, grad, c.in, c.cols, dy, need_dx ? &dx : nullptr);
    return dx;
}

std::size_t bind_all(std::span<Conv2d> layers, std::size_t offset) {
    for (auto& l : layers) {
        l.bind(offset);
        offset += l.num_params();
    }
    return offset;
}

}  // namespace

// ---------------------------------------------------------------------------
// SegNet

SegNet::SegNet(int num_classes, int width, std::uint64_t seed, bool aux_head)
    : num_classes_(num_classes), width_(width), seed_(seed), aux_head_(aux_head) {
    if (num_classes < 2) throw InvalidArgument("SegNet: need at least 2 classes");
    if (width < 1) throw InvalidArgument("SegNet: width must be positive");
    const int w = width, w2 = 2 * width;
    body_ = {
        Conv2d(3, w, 3, 1, 1),        // e1  H
        Conv2d(w, w, 3, 2, 1),        // e2  H/2
        Conv2d(w, w2, 3, 2, 1),       // e3  H/4
        Conv2d(w2, w2, 3, 2, 1),      // e4  H/8
        Conv2d(w2, w2, 3, 2, 1),      // e5  H/16
        Conv2d(w2 + w2, w2, 3, 1, 1), // d4  H/8
        Conv2d(w2 + w2, w2, 3, 1, 1), // d3  H/4
        Conv2d(w2 + w, w, 3, 1, 1),   // d2  H/2
        Conv2d(w + w, w, 1, 1, 0),    // d1  H (pointwise fuse of skip + upsampled)
    };
    head_ = Conv2d(w, num_classes, 1, 1, 0);
    aux_ = Conv2d(w2, num_classes, 1, 1, 0);
    std::size_t n = bind_all(body_, 0);
    head_.bind(n);
    n += head_.num_params();
    if (aux_head_) {
        aux_.bind(n);
        n += aux_.num_params();
    }
    params_.assign(n, 0.0);

    std::mt19937_64 rng(derive_seed(seed, {kArchitecture, "init"}));
    for (const auto& l : body_) l.init(params_, rng);
    head_.init(params_, rng, 0.5);
    if (aux_head_) aux_.init(params_, rng, 0.5);
}

SegNet::Output SegNet::forward(const Tensor& image, Cache* cache) const {
    if (image.c != 3) throw ShapeError("SegNet: expected a 3-channel image");
    if (image.h % 16 != 0 || image.w % 16 != 0) throw ShapeError("SegNet: image size must be a multiple of 16");
    auto lc = [&](int i) { return cache ? &cache->body[i] : nullptr; };
    const std::span<const double> p(params_);

    Tensor e1 = conv_act(body_[0], p, image, lc(0), true);
    Tensor e2 = conv_act(body_[1], p, e1, lc(1), true);
    Tensor e3 = conv_act(body_[2], p, e2, lc(2), true);
    Tensor e4 = conv_act(body_[3], p, e3, lc(3), true);
    Tensor e5 = conv_act(body_[4], p, e4, lc(4), true);
    Tensor d4 = conv_act(body_[5], p, nn::concat(nn::upsample2x(e5), e4), lc(5), true);
    Tensor d3 = conv_act(body_[6], p, nn::concat(nn::upsample2x(d4), e3), lc(6), true);
    Tensor d2 = conv_act(body_[7], p, nn::concat(nn::upsample2x(d3), e2), lc(7), true);
    Tensor d1 = conv_act(body_[8], p, nn::concat(nn::upsample2x(d2), e1), lc(8), true);

    Output out;
    out.logits = conv_act(head_, p, d1, cache ? &cache->head : nullptr, false);
    nn::clamp_logits(out.logits);
    if (aux_head_) {
        Tensor a = conv_act(aux_, p, d3, cache ? &cache->aux_head : nullptr, false);
        nn::clamp_logits(a);
        if (cache) cache->aux = a;
        out.aux = std::move(a);
    }
    if (cache) cache->logits = out.logits;
    return out;
}

void SegNet::backward(const Cache& cache, const Tensor& dlogits, const Tensor* daux, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw ShapeError("SegNet::backward: gradient size mismatch");
    const std::span<const double> p(params_);
    Tensor g = dlogits;
    nn::clamp_logits_backward(cache.logits, g);
    Tensor dd1 = conv_act_back(head_, p, grad, cache.head, std::move(g), false, true);

    // Skip-connection gradients accumulate into the encoder outputs.
    Tensor up, skip;
    Tensor dd2_in = conv_act_back(body_[8], p, grad, cache.body[8], std::move(dd1), true, true);
    nn::split_grad(dd2_in, width_, up, skip);
    Tensor de1 = std::move(skip);
    Tensor dd2 = nn::upsample2x_backward(up);

    Tensor dd3_in = conv_act_back(body_[7], p, grad, cache.body[7], std::move(dd2), true, true);
    nn::split_grad(dd3_in, 2 * width_, up, skip);
    Tensor de2 = std::move(skip);
    Tensor dd3 = nn::upsample2x_backward(up);
    if (aux_head_ && daux) {
        Tensor ga = *daux;
        nn::clamp_logits_backward(cache.aux, ga);
        Tensor da = conv_act_back(aux_, p, grad, cache.aux_head, std::move(ga), false, true);
        for (std::size_t i = 0; i < dd3.v.size(); ++i) dd3.v[i] += da.v[i];
    }

    Tensor dd4_in = conv_act_back(body_[6], p, grad, cache.body[6], std::move(dd3), true, true);
    nn::split_grad(dd4_in, 2 * width_, up, skip);
    Tensor de3 = std::move(skip);
    Tensor dd4 = nn::upsample2x_backward(up);

    Tensor de5_in = conv_act_back(body_[5], p, grad, cache.body[5], std::move(dd4), true, true);
    nn::split_grad(de5_in, 2 * width_, up, skip);
    Tensor de4 = std::move(skip);
    Tensor de5 = nn::upsample2x_backward(up);

    auto add = [](Tensor& a, const Tensor& b) {
        for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    };
    Tensor t = conv_act_back(body_[4], p, grad, cache.body[4], std::move(de5), true, true);
    add(de4, t);
    t = conv_act_back(body_[3], p, grad, cache.body[3], std::move(de4), true, true);
    add(de3, t);
    t = conv_act_back(body_[2], p, grad, cache.body[2], std::move(de3), true, true);
    add(de2, t);
    t = conv_act_back(body_[1], p, grad, cache.body[1], std::move(de2), true, true);
    add(de1, t);
    conv_act_back(body_[0], p, grad, cache.body[0], std::move(de1), true, false);
}

ProbMap SegNet::predict(const SegImage& image) const {
    return ProbMap(nn::softmax_hwc(forward(nn::to_chw(image.pixels())).logits));
}

LabelMap SegNet::predict_labels(const SegImage& image) const { return predict(image).argmax(); }

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(int num_classes, std::uint64_t seed, int width)
    : num_classes_(num_classes), width_(width), seed_(seed) {
    if (num_classes < 2) throw InvalidArgument("Discriminator: need at least 2 classes");
    layers_ = {
        Conv2d(num_classes, width, 3, 2, 1),
        Conv2d(width, 2 * width, 3, 2, 1),
        Conv2d(2 * width, 2 * width, 3, 2, 1),
        Conv2d(2 * width, 1, 3, 1, 1),
    };
    params_.assign(bind_all(layers_, 0), 0.0);
    std::mt19937_64 rng(derive_seed(seed, {kArchitecture, "init"}));
    for (int i = 0; i < 3; ++i) layers_[i].init(params_, rng);
    layers_[3].init(params_, rng, 0.5);
}

Tensor Discriminator::forward(const Tensor& entropy, Cache* cache) const {
    if (entropy.c != num_classes_) throw ShapeError("Discriminator: channel count mismatch");
    const std::span<const double> p(params_);
    auto lc = [&](int i) { return cache ? &cache->layers[i] : nullptr; };
    Tensor h = conv_act(layers_[0], p, entropy, lc(0), true);
    h = conv_act(layers_[1], p, h, lc(1), true);
    h = conv_act(layers_[2], p, h, lc(2), true);
    Tensor logits = conv_act(layers_[3], p, h, lc(3), false);
    nn::clamp_logits(logits);
    if (cache) cache->logits = logits;
    return logits;
}

void Discriminator::backward(const Cache& cache, const Tensor& dlogits, std::span<double> grad, Tensor* dx) const {
    // Parameter gradients go to a scratch buffer when the caller only wants dx.
    std::vector<double> scratch;
    if (grad.empty()) {
        scratch.assign(params_.size(), 0.0);
        grad = scratch;
    }
    if (grad.size() != params_.size()) throw ShapeError("Discriminator::backward: gradient size mismatch");
    const std::span<const double> p(params_);
    Tensor g = dlogits;
    nn::clamp_logits_backward(cache.logits, g);
    g = conv_act_back(layers_[3], p, grad, cache.layers[3], std::move(g), false, true);
    g = conv_act_back(layers_[2], p, grad, cache.layers[2], std::move(g), true, true);
    g = conv_act_back(layers_[1], p, grad, cache.layers[1], std::move(g), true, true);
    g = conv_act_back(layers_[0], p, grad, cache.layers[0], std::move(g), true, dx != nullptr);
    if (dx) *dx = std::move(g);
}

std::vector<double> Discriminator::probabilities(const EntropyMap& e) const {
    Tensor logits = forward(nn::to_chw(e.grid()));
    std::vector<double> out(logits.v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = nn::sigmoid(logits.v[i]);
    return out;
}

void Discriminator::negate_output() {
    const auto& last = layers_[3];
    for (std::size_t i = 0; i < last.num_params(); ++i) params_[last.offset() + i] = -params_[last.offset() + i];
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::filesystem::path stem_of(std::filesystem::path p) {
    if (p.extension() == ".padm" || p.extension() == ".json") p.replace_extension();
    return p;
}

void write_manifest(const std::filesystem::path& stem, const CheckpointInfo& info) {
    nlohmann::json j{{"architecture", info.architecture}, {"C", info.num_classes}, {"width", info.width},
                     {"seed", info.seed},                 {"iteration", info.iteration}, {"aux_head", info.aux_head}};
    std::filesystem::path json = stem;
    json += ".json";
    write_text_atomic(json, j.dump(2) + "\n");
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
    std::filesystem::path p = stem;
    p += ext;
    return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const SegNet& net, long iteration) {
    save_map(with_ext(stem, ".padm"), std::span<const double>(net.params()));
    write_manifest(stem, {SegNet::kArchitecture, net.num_classes(), net.width(), net.seed(), iteration,
                          net.has_aux_head()});
}

void save_checkpoint(const std::filesystem::path& stem, const Discriminator& net, long iteration) {
    save_map(with_ext(stem, ".padm"), std::span<const double>(net.params()));
    write_manifest(stem, {Discriminator::kArchitecture, net.num_classes(), net.width(), net.seed(), iteration, false});
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
    const auto json_path = with_ext(stem_of(path), ".json");
    std::ifstream in(json_path);
    if (!in) throw IoError("missing checkpoint manifest " + json_path.string());
    nlohmann::json j;
    try {
        in >> j;
        return {j.at("architecture").get<std::string>(), j.at("C").get<int>(), j.at("width").get<int>(),
                j.at("seed").get<std::uint64_t>(), j.at("iteration").get<long>(), j.value("aux_head", false)};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(json_path.string() + ": " + e.what());
    }
}

SegNet load_segnet(const std::filesystem::path& path) {
    const auto stem = stem_of(path);
    const auto info = read_checkpoint_info(stem);
    if (info.architecture != SegNet::kArchitecture) throw FormatError("checkpoint is not a " + std::string(SegNet::kArchitecture));
    SegNet net(info.num_classes, info.width, info.seed, info.aux_head);
    auto params = load_map<std::vector<double>>(with_ext(stem, ".padm"));
    if (params.size() != net.num_params()) throw FormatError("checkpoint parameter count mismatch");
    net.params() = std::move(params);
    return net;
}

Discriminator load_discriminator(const std::filesystem::path& path) {
    const auto stem = stem_of(path);
    const auto info = read_checkpoint_info(stem);
    if (info.architecture != Discriminator::kArchitecture) throw FormatError("checkpoint is not a discriminator");
    Discriminator net(info.num_classes, info.seed, info.width);
    auto params = load_map<std::vector<double>>(with_ext(stem, ".padm"));
    if (params.size() != net.num_params()) throw FormatError("checkpoint parameter count mismatch");
    net.params() = std::move(params);
    return net;
}

}  // namespace padapt

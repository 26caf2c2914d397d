#include "padapt/uda/train_uda.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/model/optim.hpp"
#include "padapt/uda/losses.hpp"

namespace padapt {

void UdaConfig::validate() const {
    if (iterations <= 0 || batch_source <= 0 || batch_target <= 0) {
        throw InvalidArgument("UdaConfig: iterations and batch sizes must be positive");
    }
    if (!(lr_g > 0) || !(lr_d > 0) || !(momentum > 0) || !(weight_decay > 0)) {
        throw InvalidArgument("UdaConfig: learning rates, momentum and weight decay must be positive");
    }
    if (!(lambda_adv >= 0)) throw InvalidArgument("UdaConfig: lambda_adv must be >= 0");
    if (width < 1 || disc_width < 1) throw InvalidArgument("UdaConfig: model widths must be positive");
}

UdaConfig UdaConfig::from_config(const KeyValueConfig& kv, const std::string& prefix) {
    UdaConfig c;
    auto num = [&](const char* key, auto& field) {
        const auto v = kv.get(prefix + key);
        if (!v) return;
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_same_v<T, double>) field = parse_double(prefix + key, *v);
        else if constexpr (std::is_same_v<T, bool>) field = parse_bool(prefix + key, *v);
        else field = static_cast<T>(parse_long(prefix + key, *v));
    };
    num("iterations", c.iterations);
    num("batch_source", c.batch_source);
    num("batch_target", c.batch_target);
    num("lr_g", c.lr_g);
    num("momentum", c.momentum);
    num("weight_decay", c.weight_decay);
    num("lr_d", c.lr_d);
    num("lambda_adv", c.lambda_adv);
    num("seed", c.seed);
    num("lr_power", c.lr_power);
    num("width", c.width);
    num("disc_width", c.disc_width);
    num("aux_head", c.aux_head);
    num("aux_weight", c.aux_weight);
    c.validate();
    return c;
}

std::string UdaConfig::to_config_text(const std::string& prefix) const {
    std::ostringstream os;
    os.precision(17);
    os << prefix << "iterations = " << iterations << "\n"
       << prefix << "batch_source = " << batch_source << "\n"
       << prefix << "batch_target = " << batch_target << "\n"
       << prefix << "lr_g = " << lr_g << "\n"
       << prefix << "momentum = " << momentum << "\n"
       << prefix << "weight_decay = " << weight_decay << "\n"
       << prefix << "lr_d = " << lr_d << "\n"
       << prefix << "lambda_adv = " << lambda_adv << "\n"
       << prefix << "seed = " << seed << "\n"
       << prefix << "lr_power = " << lr_power << "\n"
       << prefix << "width = " << width << "\n"
       << prefix << "disc_width = " << disc_width << "\n"
       << prefix << "aux_head = " << (aux_head ? "true" : "false") << "\n"
       << prefix << "aux_weight = " << aux_weight << "\n";
    return os.str();
}

namespace {

/// Epoch-wise shuffled index stream.
class Sampler {
public:
    Sampler(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
        std::iota(order_.begin(), order_.end(), 0);
        pos_ = n;
    }
    std::size_t next() {
        if (pos_ == order_.size()) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

/// Nearest (cell-center) subsampling of labels for the lower-resolution head.
LabelMap subsample(const LabelMap& l, std::size_t factor) {
    LabelMap out(l.height() / factor, l.width() / factor);
    for (std::size_t y = 0; y < out.height(); ++y)
        for (std::size_t x = 0; x < out.width(); ++x) out.at(y, x) = l.at(y * factor + factor / 2, x * factor + factor / 2);
    return out;
}

void check_finite(double v, const char* what, long iter) {
    if (!std::isfinite(v)) {
        throw TrainingError(std::string("non-finite ") + what + " at iteration " + std::to_string(iter), iter);
    }
}

struct HeadPass {
    Grid3<double> probs;
    nn::Tensor dlogits;
    bool has_grad = false;
};

void add_into(Grid3<double>& a, const Grid3<double>& b) {
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

std::vector<nn::Tensor> to_tensors(const std::vector<SegImage>& images) {
    std::vector<nn::Tensor> out;
    out.reserve(images.size());
    for (const auto& im : images) out.push_back(nn::to_chw(im.pixels()));
    return out;
}

}  // namespace

AdversarialResult train_adversarial(const LabeledSet& source, const ImageSet& target,
                                    const std::vector<WeakLabelMap>* target_labels, const UdaConfig& cfg,
                                    const std::string& stage, ProvenanceWeights weights) {
    cfg.validate();
    retain_heap_memory();
    if (source.size() == 0 || target.size() == 0) throw InvalidArgument("train: empty source or target set");
    if (source.labels.size() != source.images.size()) throw InvalidArgument("train: source labels missing");
    if (target_labels && target_labels->size() != target.size()) {
        throw InvalidArgument("train: every target image needs a weak label map");
    }
    const int C = int(source.num_classes);
    SegNet g(C, cfg.width, derive_seed(cfg.seed, {stage, "G"}), cfg.aux_head);
    std::vector<Discriminator> ds;
    ds.emplace_back(C, derive_seed(cfg.seed, {stage, "D"}), cfg.disc_width);
    if (cfg.aux_head) ds.emplace_back(C, derive_seed(cfg.seed, {stage, "D_aux"}), cfg.disc_width);

    SgdMomentum opt_g(g.num_params(), cfg.momentum, cfg.weight_decay);
    std::vector<Adam> opt_d;
    for (const auto& d : ds) opt_d.emplace_back(d.num_params());

    Sampler src_sampler(source.size(), derive_seed(cfg.seed, {stage, "source-order"}));
    Sampler tgt_sampler(target.size(), derive_seed(cfg.seed, {stage, "target-order"}));
    const auto src_x = to_tensors(source.images);
    const auto tgt_x = to_tensors(target.images);

    std::vector<std::vector<double>> tgt_weights;
    if (target_labels) {
        for (const auto& w : *target_labels) {
            std::vector<double> pw(w.height() * w.width());
            auto prov = w.provenance();
            for (std::size_t i = 0; i < pw.size(); ++i) {
                pw[i] = prov[i] == Provenance::oracle ? weights.oracle : prov[i] == Provenance::pseudo ? weights.pseudo : 0.0;
            }
            tgt_weights.push_back(std::move(pw));
        }
    }
    const std::size_t aux_factor = 4;

    std::vector<double> grad_g(g.num_params());
    std::vector<std::vector<double>> grad_d;
    for (const auto& d : ds) grad_d.emplace_back(d.num_params());

    AdversarialResult result{g, ds.front(), {}};
    const double inv_bs = 1.0 / cfg.batch_source, inv_bt = 1.0 / cfg.batch_target;

    for (long it = 0; it < cfg.iterations; ++it) {
        const double lr_g = poly_lr(cfg.lr_g, it, cfg.iterations, cfg.lr_power);
        const double lr_d = poly_lr(cfg.lr_d, it, cfg.iterations, cfg.lr_power);
        std::fill(grad_g.begin(), grad_g.end(), 0.0);
        TrainLogEntry entry;
        entry.iter = it;
        double seg_t = 0.0;

        // Entropy maps of this iteration per head, kept (detached) for the D step.
        std::vector<std::vector<nn::Tensor>> e_src(ds.size()), e_tgt(ds.size());

        // ---- G step: source supervision
        for (int b = 0; b < cfg.batch_source; ++b) {
            const std::size_t i = src_sampler.next();
            SegNet::Cache cache;
            const auto out = g.forward(src_x[i], &cache);
            const Grid3<double> p = nn::softmax_hwc(out.logits);
            Grid3<double> dp;
            entry.seg_loss += inv_bs * cross_entropy(p, source.labels[i], &dp, inv_bs);
            const nn::Tensor dlogits = nn::softmax_backward(p, dp);
            e_src[0].push_back(nn::to_chw(entropy_values(p)));
            nn::Tensor daux;
            if (out.aux) {
                const Grid3<double> pa = nn::softmax_hwc(*out.aux);
                Grid3<double> dpa;
                cross_entropy(pa, subsample(source.labels[i], aux_factor), &dpa, inv_bs * cfg.aux_weight);
                daux = nn::softmax_backward(pa, dpa);
                e_src[1].push_back(nn::to_chw(entropy_values(pa)));
            }
            g.backward(cache, dlogits, out.aux ? &daux : nullptr, grad_g);
        }

        // ---- G step: target (weak labels in stage 2, fooling term when lambda > 0)
        for (int b = 0; b < cfg.batch_target; ++b) {
            const std::size_t i = tgt_sampler.next();
            SegNet::Cache cache;
            const auto out = g.forward(tgt_x[i], &cache);
            std::vector<HeadPass> heads(out.aux ? 2 : 1);
            heads[0].probs = nn::softmax_hwc(out.logits);
            if (out.aux) heads[1].probs = nn::softmax_hwc(*out.aux);

            for (std::size_t h = 0; h < heads.size(); ++h) {
                auto& hp = heads[h];
                Grid3<double> dp(hp.probs.height(), hp.probs.width(), hp.probs.channels(), 0.0);
                if (target_labels) {
                    const auto& wl = (*target_labels)[i];
                    Grid3<double> dce;
                    const double head_scale = h == 0 ? inv_bt : inv_bt * cfg.aux_weight;
                    if (h == 0) {
                        seg_t += inv_bt * cross_entropy_weighted(hp.probs, wl.classes(), tgt_weights[i], &dce, head_scale);
                    } else {
                        cross_entropy(hp.probs, subsample(wl.classes(), aux_factor), &dce, head_scale);
                    }
                    add_into(dp, dce);
                    hp.has_grad = true;
                }
                if (cfg.lambda_adv > 0) {
                    Grid3<double> dfool;
                    const double f = fool_loss(hp.probs, ds[h], &dfool, cfg.lambda_adv * inv_bt);
                    if (h == 0) entry.adv_g += inv_bt * f;
                    add_into(dp, dfool);
                    hp.has_grad = true;
                }
                if (hp.has_grad) hp.dlogits = nn::softmax_backward(hp.probs, dp);
                e_tgt[h].push_back(nn::to_chw(entropy_values(hp.probs)));
            }
            if (heads[0].has_grad) {
                g.backward(cache, heads[0].dlogits, heads.size() > 1 ? &heads[1].dlogits : nullptr, grad_g);
            }
        }
        if (target_labels) entry.seg_target = seg_t;
        check_finite(entry.seg_loss, "segmentation loss", it);
        check_finite(seg_t, "target segmentation loss", it);
        check_finite(entry.adv_g, "fooling loss", it);
        opt_g.step(g.params(), grad_g, lr_g);

        // ---- D step on detached entropy maps
        for (std::size_t h = 0; h < ds.size(); ++h) {
            std::fill(grad_d[h].begin(), grad_d[h].end(), 0.0);
            double loss_d = 0.0;
            for (auto* group : {&e_src[h], &e_tgt[h]}) {
                const bool is_source = group == &e_src[h];
                const double scale = 1.0 / double(group->size());
                for (const auto& e : *group) {
                    Discriminator::Cache dc;
                    const nn::Tensor logits = ds[h].forward(e, &dc);
                    nn::Tensor dl;
                    loss_d += scale * logit_bce(logits, is_source, &dl, scale);
                    ds[h].backward(dc, dl, grad_d[h], nullptr);
                }
            }
            if (h == 0) entry.adv_d = loss_d;
            check_finite(loss_d, "discriminator loss", it);
            opt_d[h].step(ds[h].params(), grad_d[h], lr_d);
        }
        result.log.push_back(entry);
    }
    result.generator = std::move(g);
    result.discriminator = std::move(ds.front());
    return result;
}

AdversarialResult train_uda(const LabeledSet& source, const ImageSet& target, const UdaConfig& cfg) {
    return train_adversarial(source, target, nullptr, cfg, "stage1");
}

SegNet train_source_only(const LabeledSet& source, const UdaConfig& cfg) {
    cfg.validate();
    retain_heap_memory();
    const std::string stage = "stage1";
    SegNet g(int(source.num_classes), cfg.width, derive_seed(cfg.seed, {stage, "G"}), cfg.aux_head);
    SgdMomentum opt(g.num_params(), cfg.momentum, cfg.weight_decay);
    Sampler sampler(source.size(), derive_seed(cfg.seed, {stage, "source-order"}));
    const auto xs = to_tensors(source.images);
    std::vector<double> grad(g.num_params());
    const double inv_bs = 1.0 / cfg.batch_source;
    for (long it = 0; it < cfg.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int b = 0; b < cfg.batch_source; ++b) {
            const std::size_t i = sampler.next();
            SegNet::Cache cache;
            const auto out = g.forward(xs[i], &cache);
            const Grid3<double> p = nn::softmax_hwc(out.logits);
            Grid3<double> dp;
            check_finite(cross_entropy(p, source.labels[i], &dp, inv_bs), "segmentation loss", it);
            nn::Tensor daux;
            if (out.aux) {
                const Grid3<double> pa = nn::softmax_hwc(*out.aux);
                Grid3<double> dpa;
                cross_entropy(pa, subsample(source.labels[i], 4), &dpa, inv_bs * cfg.aux_weight);
                daux = nn::softmax_backward(pa, dpa);
            }
            g.backward(cache, nn::softmax_backward(p, dp), out.aux ? &daux : nullptr, grad);
        }
        opt.step(g.params(), grad, poly_lr(cfg.lr_g, it, cfg.iterations, cfg.lr_power));
    }
    return g;
}

void write_log_jsonl(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log) {
    std::string text;
    for (const auto& e : log) {
        nlohmann::json j{{"iter", e.iter}, {"seg_loss", e.seg_loss}, {"adv_d", e.adv_d}, {"adv_g", e.adv_g}};
        if (e.seg_target) j["seg_target"] = *e.seg_target;
        text += j.dump() + "\n";
    }
    write_text_atomic(path, text);
}

std::vector<ExportedMaps> export_target_maps(const SegNet& g, const ImageSet& target,
                                             const std::filesystem::path& out_dir) {
    std::vector<ExportedMaps> out;
    out.reserve(target.size());
    for (const auto& im : target.images) {
        ProbMap p = g.predict(im);
        EntropyMap e = entropy_map(p);
        if (!out_dir.empty()) {
            save_map(out_dir / (im.id() + ".prob.padm"), p);
            save_map(out_dir / (im.id() + ".entropy.padm"), e);
        }
        out.push_back({im.id(), std::move(p), std::move(e)});
    }
    return out;
}

std::vector<ExportedMaps> load_target_maps(const std::filesystem::path& dir) {
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = ".prob.padm";
        if (name.size() > suffix.size() && name.ends_with(suffix)) ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    std::vector<ExportedMaps> out;
    for (const auto& id : ids) {
        out.push_back({id, load_map<ProbMap>(dir / (id + ".prob.padm")), load_map<EntropyMap>(dir / (id + ".entropy.padm"))});
    }
    return out;
}

double discriminator_accuracy(const SegNet& g, const Discriminator& d, const std::vector<SegImage>& as_source,
                              const std::vector<SegImage>& as_target) {
    std::size_t correct = 0, total = 0;
    for (const bool is_source : {true, false}) {
        for (const auto& im : is_source ? as_source : as_target) {
            for (double p : d.probabilities(entropy_map(g.predict(im)))) {
                correct += is_source ? (p > 0.5) : (p < 0.5);
                ++total;
            }
        }
    }
    return total ? double(correct) / double(total) : 0.0;
}

}  // namespace padapt

#include "padapt/weakda/weak_da.hpp"

#include <sstream>

#include "padapt/acquisition/manifest.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/uda/losses.hpp"

namespace padapt {

void WeakDaConfig::validate() const {
    train.validate();
    if (!(weights.oracle >= 0) || !(weights.pseudo >= 0)) throw InvalidArgument("WeakDaConfig: weights must be >= 0");
}

WeakDaConfig WeakDaConfig::from_config(const KeyValueConfig& kv, const std::string& prefix) {
    WeakDaConfig c;
    c.train = UdaConfig::from_config(kv, prefix);
    if (auto v = kv.get(prefix + "oracle_weight")) c.weights.oracle = parse_double(prefix + "oracle_weight", *v);
    if (auto v = kv.get(prefix + "pseudo_weight")) c.weights.pseudo = parse_double(prefix + "pseudo_weight", *v);
    if (auto v = kv.get(prefix + "target_label_dir")) c.target_label_dir = *v;
    c.validate();
    return c;
}

std::string WeakDaConfig::to_config_text(const std::string& prefix) const {
    std::ostringstream os;
    os.precision(17);
    os << train.to_config_text(prefix) << prefix << "oracle_weight = " << weights.oracle << "\n"
       << prefix << "pseudo_weight = " << weights.pseudo << "\n";
    if (!target_label_dir.empty()) os << prefix << "target_label_dir = " << target_label_dir.string() << "\n";
    return os.str();
}

double weak_seg_loss(const ProbMap& p_source, const DenseLabelMap& y_source, const ProbMap& p_target,
                     const WeakLabelMap& y_target) {
    if (p_target.height() != y_target.height() || p_target.width() != y_target.width()) {
        throw ShapeError("weak_seg_loss: target prediction and label sizes differ");
    }
    return seg_loss(p_source, y_source) + cross_entropy(p_target.grid(), y_target.classes());
}

std::vector<WeakLabelMap> load_weak_labels(const std::filesystem::path& dir, const ImageSet& target) {
    std::vector<WeakLabelMap> out;
    out.reserve(target.size());
    for (const auto& im : target.images) {
        const auto path = weak_label_path(dir, im.id());
        if (!std::filesystem::exists(path)) throw InvalidArgument("missing weak labels for target image " + im.id());
        auto w = load_map<WeakLabelMap>(path);
        if (w.height() != im.height() || w.width() != im.width()) {
            throw ShapeError("weak labels of " + im.id() + " do not match the image size");
        }
        out.push_back(std::move(w));
    }
    return out;
}

AdversarialResult train_weak_da(const LabeledSet& source, const ImageSet& target,
                                const std::vector<WeakLabelMap>& weak_labels, const WeakDaConfig& cfg) {
    cfg.validate();
    if (weak_labels.size() != target.size()) throw InvalidArgument("train_weak_da: every target image needs weak labels");
    for (const auto& w : weak_labels) w.classes().validate(source.num_classes);
    return train_adversarial(source, target, &weak_labels, cfg.train, "stage2", cfg.weights);
}

}  // namespace padapt

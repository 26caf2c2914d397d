#pragma once
// Stage 2: retrain a fresh generator / discriminator pair on dense source
// labels plus merged weak target labels (oracle points and pseudo labels).

#include <filesystem>
#include <string>
#include <vector>

#include "padapt/uda/train_uda.hpp"

namespace padapt {

struct WeakDaConfig {
    UdaConfig train;
    ProvenanceWeights weights;
    std::filesystem::path target_label_dir;

    void validate() const;
    /// Keys as UdaConfig plus oracle_weight, pseudo_weight and target_label_dir.
    static WeakDaConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "");
    std::string to_config_text(const std::string& prefix = "") const;
};

/// Source cross-entropy plus target cross-entropy over non-IGNORE target
/// pixels, each normalized by its own pixel count.
double weak_seg_loss(const ProbMap& p_source, const DenseLabelMap& y_source, const ProbMap& p_target,
                     const WeakLabelMap& y_target);

/// Reads `<dir>/<id>.weak.padm` for each target image, in image order.
std::vector<WeakLabelMap> load_weak_labels(const std::filesystem::path& dir, const ImageSet& target);

/// Fresh G2 / D2, trained with the stage-1 loop plus the weak target term.
AdversarialResult train_weak_da(const LabeledSet& source, const ImageSet& target,
                                const std::vector<WeakLabelMap>& weak_labels, const WeakDaConfig& cfg);

}  // namespace padapt

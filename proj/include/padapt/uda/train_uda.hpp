#pragma once
// Stage 1: source-supervised segmentation with entropy-map adversarial
// alignment on unlabeled target images, plus map export for acquisition.
//
// The adversarial objective uses the standard non-saturating split of the
// min-max game: D minimizes -[ln D(E_s) + ln(1 - D(E_t))] while G minimizes
// seg + lambda * -ln D(E_t). Both players share the fixed point of the
// min-max form (D* = p_s / (p_s + p_t), reached when the entropy
// distributions match); the fooling form only gives G stronger gradients
// while D still rejects target maps easily.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "padapt/core/util.hpp"
#include "padapt/data/dataset.hpp"
#include "padapt/model/models.hpp"

namespace padapt {

struct UdaConfig {
    long iterations = 2000;
    int batch_source = 1;
    int batch_target = 1;
    double lr_g = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr_d = 1e-4;
    double lambda_adv = 0.001;
    std::uint64_t seed = 0;
    double lr_power = 0.9;
    int width = 16;            // generator width
    int disc_width = 16;
    bool aux_head = false;     // optional second, lower-resolution output head
    double aux_weight = 0.1;

    /// Throws InvalidArgument when a field is out of range.
    void validate() const;
    /// Reads every field from `key = value` entries; unknown keys are ignored.
    static UdaConfig from_config(const KeyValueConfig& cfg, const std::string& prefix = "");
    std::string to_config_text(const std::string& prefix = "") const;
};

struct TrainLogEntry {
    long iter = 0;
    double seg_loss = 0.0;              // source term
    double adv_d = 0.0;
    double adv_g = 0.0;
    std::optional<double> seg_target;   // stage 2 only
};

struct AdversarialResult {
    SegNet generator;
    Discriminator discriminator;
    std::vector<TrainLogEntry> log;
};

/// Per-pixel loss weights for target labels by provenance.
struct ProvenanceWeights {
    double oracle = 1.0;
    double pseudo = 1.0;
};

/// Shared alternating G/D loop. With `target_labels` set (stage 2), target
/// images also contribute a cross-entropy term over non-IGNORE pixels.
/// `stage` salts the initialization so different stages start fresh.
AdversarialResult train_adversarial(const LabeledSet& source, const ImageSet& target,
                                    const std::vector<WeakLabelMap>* target_labels, const UdaConfig& cfg,
                                    const std::string& stage, ProvenanceWeights weights = {});

AdversarialResult train_uda(const LabeledSet& source, const ImageSet& target, const UdaConfig& cfg);

/// Plain supervised training on the source set with the same initialization,
/// sampling order and optimizer as train_uda.
SegNet train_source_only(const LabeledSet& source, const UdaConfig& cfg);

void write_log_jsonl(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log);

struct ExportedMaps {
    std::string image_id;
    ProbMap probs;
    EntropyMap entropy;
};

/// Predicts every target image; writes `<out>/<id>.prob.padm` and
/// `<out>/<id>.entropy.padm` when out_dir is non-empty.
std::vector<ExportedMaps> export_target_maps(const SegNet& g, const ImageSet& target,
                                             const std::filesystem::path& out_dir);
/// Reads every `<id>.prob.padm` / `<id>.entropy.padm` pair, sorted by id.
std::vector<ExportedMaps> load_target_maps(const std::filesystem::path& dir);

/// Fraction of locations the discriminator labels correctly when the maps
/// of `as_source` are called source and those of `as_target` target.
double discriminator_accuracy(const SegNet& g, const Discriminator& d, const std::vector<SegImage>& as_source,
                              const std::vector<SegImage>& as_target);

}  // namespace padapt

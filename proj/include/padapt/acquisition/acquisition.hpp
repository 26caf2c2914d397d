#pragma once
// Patch-level label acquisition: grid an entropy map, rank patches by mean
// entropy, query a few random points inside the chosen patches and merge the
// answers with pseudo labels.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "padapt/core/arrays.hpp"

namespace padapt {

/// Regular tiling of an H x W image into grid_m columns by grid_n rows of
/// patch_w x patch_h patches. Patches are indexed row-major.
struct PatchGrid {
    int grid_m = 8;
    int grid_n = 8;
    int patch_h = 8;
    int patch_w = 8;
    int height = 64;
    int width = 64;

    /// Throws InvalidArgument unless m and n divide W and H exactly.
    static PatchGrid tile(std::size_t height, std::size_t width, int grid_m, int grid_n);

    int count() const noexcept { return grid_m * grid_n; }
    int area() const noexcept { return patch_h * patch_w; }
    int x0(int patch) const noexcept { return (patch % grid_m) * patch_w; }
    int y0(int patch) const noexcept { return (patch / grid_m) * patch_h; }
    int index_of(int x, int y) const noexcept { return (y / patch_h) * grid_m + x / patch_w; }
    bool contains(int patch, int x, int y) const noexcept {
        return x >= x0(patch) && x < x0(patch) + patch_w && y >= y0(patch) && y < y0(patch) + patch_h;
    }
    /// Exact tiling and positive sizes.
    void validate() const;
    bool tiles(std::size_t h, std::size_t w) const noexcept { return std::size_t(height) == h && std::size_t(width) == w; }

    friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

struct PatchScore {
    int patch_index = 0;
    double score = 0.0;  // mean entropy per element, nats
};

enum class Strategy { active, random, full, none };
Strategy parse_strategy(const std::string& s);
std::string to_string(Strategy s);

struct AcquisitionConfig {
    Strategy strategy = Strategy::active;
    int k = 10;
    int points_per_patch = 5;
    std::uint64_t seed = 0;
    int grid_m = 8;
    int grid_n = 8;
    /// Non-selected patches keep their whole pseudo label (true) or only the
    /// pseudo label at points_per_patch random positions (false).
    bool pseudo_dense = true;

    void validate(int patch_count) const;
};

enum class RequestStatus { pending, answered };

struct AnnotationRequest {
    std::string request_id;
    std::string image_id;
    int x = 0;
    int y = 0;
    int patch_index = 0;
    RequestStatus status = RequestStatus::pending;
    std::optional<std::uint8_t> answer;
    double score = 0.0;  // score of the enclosing patch; orders the service queue

    friend bool operator==(const AnnotationRequest&, const AnnotationRequest&) = default;
};

/// hash(image_id, patch_index, ordinal) as 16 hex digits.
std::string request_id(const std::string& image_id, int patch_index, int ordinal);

/// One score per patch in patch order: sum of e over the patch / (h * w * C).
std::vector<PatchScore> score_patches(const EntropyMap& e, const PatchGrid& grid);
/// Same ranking quantity without the normalization.
std::vector<PatchScore> sum_patches(const EntropyMap& e, const PatchGrid& grid);

/// The k highest scores; equal scores go to the lower patch index.
std::set<int> select_top_k(const std::vector<PatchScore>& scores, int k);
/// k distinct patches uniformly at random, seeded per image.
std::set<int> select_random(int patch_count, int k, std::uint64_t seed, const std::string& image_id);

/// points_per_patch distinct uniform positions in each selected patch,
/// seeded per (seed, image, patch). Requests are ordered by patch, then ordinal.
std::vector<AnnotationRequest> sample_points(const std::string& image_id, const std::set<int>& selected,
                                             const PatchGrid& grid, int points_per_patch, std::uint64_t seed,
                                             const std::vector<PatchScore>* scores = nullptr);

struct MergeOptions {
    bool pseudo_dense = true;
    // Only used when pseudo_dense is false.
    int points_per_patch = 5;
    std::uint64_t seed = 0;
    std::string image_id;
};

/// Pseudo labels (argmax of P_t) outside the selected patches, oracle answers
/// at the queried points and IGNORE elsewhere inside selected patches.
WeakLabelMap merge_labels(const ProbMap& probs, const PatchGrid& grid, const std::set<int>& selected,
                          const std::vector<AnnotationRequest>& answered, const MergeOptions& opts = {});

/// Answers every request from the ground truth.
std::vector<AnnotationRequest> simulated_oracle(std::vector<AnnotationRequest> requests, const LabelMap& truth);

}  // namespace padapt

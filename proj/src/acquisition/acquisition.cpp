#include "padapt/acquisition/acquisition.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "padapt/core/errors.hpp"
#include "padapt/core/util.hpp"

namespace padapt {

PatchGrid PatchGrid::tile(std::size_t height, std::size_t width, int grid_m, int grid_n) {
    if (grid_m < 1 || grid_n < 1) throw InvalidArgument("PatchGrid: grid dimensions must be positive");
    if (width % std::size_t(grid_m) != 0 || height % std::size_t(grid_n) != 0) {
        throw InvalidArgument("PatchGrid: a " + std::to_string(grid_m) + "x" + std::to_string(grid_n) +
                              " grid does not tile " + std::to_string(width) + "x" + std::to_string(height));
    }
    PatchGrid g;
    g.grid_m = grid_m;
    g.grid_n = grid_n;
    g.patch_w = int(width) / grid_m;
    g.patch_h = int(height) / grid_n;
    g.width = int(width);
    g.height = int(height);
    return g;
}

void PatchGrid::validate() const {
    if (grid_m < 1 || grid_n < 1 || patch_h < 1 || patch_w < 1) throw InvalidArgument("PatchGrid: non-positive size");
    if (grid_m * patch_w != width || grid_n * patch_h != height) throw InvalidArgument("PatchGrid: inexact tiling");
}

Strategy parse_strategy(const std::string& s) {
    if (s == "active") return Strategy::active;
    if (s == "random") return Strategy::random;
    if (s == "full") return Strategy::full;
    if (s == "none") return Strategy::none;
    throw InvalidArgument("unknown strategy '" + s + "' (expected active, random, full or none)");
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::active: return "active";
        case Strategy::random: return "random";
        case Strategy::full: return "full";
        case Strategy::none: return "none";
    }
    return "?";
}

void AcquisitionConfig::validate(int patch_count) const {
    if (k < 0 || k > patch_count) {
        throw InvalidArgument("AcquisitionConfig: K=" + std::to_string(k) + " outside [0, " +
                              std::to_string(patch_count) + "]");
    }
    if (points_per_patch < 1) throw InvalidArgument("AcquisitionConfig: points_per_patch must be >= 1");
}

std::string request_id(const std::string& image_id, int patch_index, int ordinal) {
    return hex64(fnv1a(image_id + "/" + std::to_string(patch_index) + "/" + std::to_string(ordinal)));
}

namespace {

std::vector<PatchScore> patch_sums(const EntropyMap& e, const PatchGrid& grid, double divisor) {
    grid.validate();
    if (!grid.tiles(e.height(), e.width())) throw InvalidArgument("score_patches: grid does not tile the entropy map");
    const std::size_t C = e.num_classes();
    std::vector<PatchScore> out(std::size_t(grid.count()));
    const auto data = e.grid().data();
    for (int p = 0; p < grid.count(); ++p) {
        double s = 0.0;
        for (int y = grid.y0(p); y < grid.y0(p) + grid.patch_h; ++y) {
            const double* row = data.data() + (std::size_t(y) * e.width() + std::size_t(grid.x0(p))) * C;
            for (std::size_t i = 0; i < std::size_t(grid.patch_w) * C; ++i) s += row[i];
        }
        out[std::size_t(p)] = {p, s / divisor};
    }
    return out;
}

}  // namespace

std::vector<PatchScore> score_patches(const EntropyMap& e, const PatchGrid& grid) {
    return patch_sums(e, grid, double(grid.area()) * double(e.num_classes()));
}

std::vector<PatchScore> sum_patches(const EntropyMap& e, const PatchGrid& grid) { return patch_sums(e, grid, 1.0); }

std::set<int> select_top_k(const std::vector<PatchScore>& scores, int k) {
    if (k < 0 || std::size_t(k) > scores.size()) throw InvalidArgument("select_top_k: K out of range");
    std::vector<PatchScore> order(scores);
    std::stable_sort(order.begin(), order.end(), [](const PatchScore& a, const PatchScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.patch_index < b.patch_index;
    });
    std::set<int> out;
    for (int i = 0; i < k; ++i) out.insert(order[std::size_t(i)].patch_index);
    return out;
}

std::set<int> select_random(int patch_count, int k, std::uint64_t seed, const std::string& image_id) {
    if (k < 0 || k > patch_count) throw InvalidArgument("select_random: K out of range");
    std::vector<int> idx(static_cast<std::size_t>(patch_count));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, {"random-patches", image_id}));
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, patch_count - 1);
        std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
    }
    return {idx.begin(), idx.begin() + k};
}

namespace {

/// `count` distinct offsets in [0, area) by partial Fisher-Yates.
std::vector<int> distinct_offsets(int area, int count, std::uint64_t seed) {
    std::vector<int> cells(static_cast<std::size_t>(area));
    std::iota(cells.begin(), cells.end(), 0);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, area - 1);
        std::swap(cells[std::size_t(i)], cells[std::size_t(pick(rng))]);
    }
    cells.resize(std::size_t(count));
    return cells;
}

}  // namespace

std::vector<AnnotationRequest> sample_points(const std::string& image_id, const std::set<int>& selected,
                                             const PatchGrid& grid, int points_per_patch, std::uint64_t seed,
                                             const std::vector<PatchScore>* scores) {
    grid.validate();
    if (points_per_patch < 1) throw InvalidArgument("sample_points: points_per_patch must be >= 1");
    if (points_per_patch > grid.area()) {
        throw InvalidArgument("sample_points: " + std::to_string(points_per_patch) + " points exceed the patch area " +
                              std::to_string(grid.area()));
    }
    std::vector<AnnotationRequest> out;
    out.reserve(selected.size() * std::size_t(points_per_patch));
    for (int p : selected) {
        if (p < 0 || p >= grid.count()) throw InvalidArgument("sample_points: patch index out of range");
        const auto offsets = distinct_offsets(grid.area(), points_per_patch,
                                              derive_seed(seed, {"points", image_id, std::to_string(p)}));
        for (int o = 0; o < points_per_patch; ++o) {
            AnnotationRequest r;
            r.request_id = request_id(image_id, p, o);
            r.image_id = image_id;
            r.x = grid.x0(p) + offsets[std::size_t(o)] % grid.patch_w;
            r.y = grid.y0(p) + offsets[std::size_t(o)] / grid.patch_w;
            r.patch_index = p;
            if (scores) r.score = (*scores)[std::size_t(p)].score;
            out.push_back(std::move(r));
        }
    }
    return out;
}

WeakLabelMap merge_labels(const ProbMap& probs, const PatchGrid& grid, const std::set<int>& selected,
                          const std::vector<AnnotationRequest>& answered, const MergeOptions& opts) {
    grid.validate();
    if (!grid.tiles(probs.height(), probs.width())) throw InvalidArgument("merge_labels: grid does not tile the map");
    const std::size_t H = probs.height(), W = probs.width();
    const LabelMap pseudo = probs.argmax();
    LabelMap classes(H, W, kIgnore);
    std::vector<Provenance> prov(H * W, Provenance::none);

    std::vector<bool> is_selected(std::size_t(grid.count()), false);
    for (int p : selected) {
        if (p < 0 || p >= grid.count()) throw InvalidArgument("merge_labels: patch index out of range");
        is_selected[std::size_t(p)] = true;
    }
    auto set_pseudo = [&](std::size_t y, std::size_t x) {
        classes.at(y, x) = pseudo.at(y, x);
        prov[y * W + x] = Provenance::pseudo;
    };
    for (int p = 0; p < grid.count(); ++p) {
        if (is_selected[std::size_t(p)]) continue;
        if (opts.pseudo_dense) {
            for (int y = grid.y0(p); y < grid.y0(p) + grid.patch_h; ++y)
                for (int x = grid.x0(p); x < grid.x0(p) + grid.patch_w; ++x) set_pseudo(std::size_t(y), std::size_t(x));
        } else {
            const auto offsets = distinct_offsets(grid.area(), std::min(opts.points_per_patch, grid.area()),
                                                  derive_seed(opts.seed, {"pseudo-points", opts.image_id, std::to_string(p)}));
            for (int o : offsets) set_pseudo(std::size_t(grid.y0(p) + o / grid.patch_w), std::size_t(grid.x0(p) + o % grid.patch_w));
        }
    }
    const std::size_t C = probs.num_classes();
    for (const auto& r : answered) {
        if (r.status != RequestStatus::answered || !r.answer) {
            throw InvalidArgument("merge_labels: request " + r.request_id + " is not answered");
        }
        if (r.x < 0 || r.y < 0 || r.x >= grid.width || r.y >= grid.height) {
            throw InvalidArgument("merge_labels: request " + r.request_id + " lies outside the image");
        }
        const int p = grid.index_of(r.x, r.y);
        if (!is_selected[std::size_t(p)]) {
            throw InvalidArgument("merge_labels: request " + r.request_id + " lies outside every selected patch");
        }
        if (*r.answer >= C) throw InvalidArgument("merge_labels: answer of " + r.request_id + " exceeds class count");
        classes.at(std::size_t(r.y), std::size_t(r.x)) = *r.answer;
        prov[std::size_t(r.y) * W + std::size_t(r.x)] = Provenance::oracle;
    }
    return WeakLabelMap(std::move(classes), std::move(prov));
}

std::vector<AnnotationRequest> simulated_oracle(std::vector<AnnotationRequest> requests, const LabelMap& truth) {
    for (auto& r : requests) {
        if (r.x < 0 || r.y < 0 || std::size_t(r.x) >= truth.width() || std::size_t(r.y) >= truth.height()) {
            throw InvalidArgument("simulated_oracle: point (" + std::to_string(r.x) + ", " + std::to_string(r.y) +
                                  ") of " + r.request_id + " is out of bounds");
        }
        r.answer = truth.at(std::size_t(r.y), std::size_t(r.x));
        r.status = RequestStatus::answered;
    }
    return requests;
}

}  // namespace padapt

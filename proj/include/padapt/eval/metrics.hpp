#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "padapt/data/dataset.hpp"
#include "padapt/model/models.hpp"

namespace padapt {

/// counts[g][p]: pixels of ground-truth class g predicted as p. IGNORE ground
/// truth is never counted.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes = 0);
    /// Row-major C x C counts.
    static ConfusionMatrix from_counts(std::size_t num_classes, std::vector<std::uint64_t> counts);

    std::size_t num_classes() const noexcept { return c_; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * c_ + pred]; }
    std::uint64_t total() const;
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    /// Throws ShapeError on size mismatch and InvalidArgument on out-of-range classes.
    void accumulate(const LabelMap& pred, const LabelMap& gt);
    ConfusionMatrix& operator+=(const ConfusionMatrix& o);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t c_ = 0;
    std::vector<std::uint64_t> counts_;
};

struct IouResult {
    std::vector<std::optional<double>> per_class;  // empty when absent from gt and pred
    double miou = 0.0;                             // mean over defined classes
    double miou_all_zero = 0.0;                    // undefined classes counted as 0
    std::optional<double> miou_subset;
};

/// IoU_c = TP / (TP + FP + FN). `subset` restricts an extra mean to those classes.
IouResult iou(const ConfusionMatrix& cm, const std::vector<std::size_t>* subset = nullptr);

ConfusionMatrix evaluate(const SegNet& g, const DatasetSplit& split);

/// `iou.csv` (class,iou,defined) and `summary.json` {miou, miou_all_zero_convention, per_class}.
void write_eval(const std::filesystem::path& out_dir, const IouResult& r, const std::vector<std::string>& class_names);
/// Reads what write_eval wrote; class names in row order go to `class_names` when set.
IouResult read_eval(const std::filesystem::path& out_dir, std::vector<std::string>* class_names = nullptr);

}  // namespace padapt

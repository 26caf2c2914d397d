#include "padapt/eval/metrics.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"

namespace padapt {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : c_(num_classes), counts_(num_classes * num_classes, 0) {}

ConfusionMatrix ConfusionMatrix::from_counts(std::size_t num_classes, std::vector<std::uint64_t> counts) {
    if (counts.size() != num_classes * num_classes) throw ShapeError("ConfusionMatrix: need C*C counts");
    ConfusionMatrix cm(num_classes);
    cm.counts_ = std::move(counts);
    return cm;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) throw ShapeError("accumulate: map sizes differ");
    const auto p = pred.data();
    const auto g = gt.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] == kIgnore) continue;
        if (g[i] >= c_ || p[i] >= c_) throw InvalidArgument("accumulate: class index out of range");
        ++counts_[std::size_t(g[i]) * c_ + p[i]];
    }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    if (o.c_ != c_) throw ShapeError("ConfusionMatrix: class count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
}

IouResult iou(const ConfusionMatrix& cm, const std::vector<std::size_t>* subset) {
    const std::size_t C = cm.num_classes();
    IouResult r;
    r.per_class.resize(C);
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < C; ++c) {
        std::uint64_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < C; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const std::uint64_t tp = cm.at(c, c);
        const std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        r.per_class[c] = double(tp) / double(denom);
        sum += *r.per_class[c];
        ++defined;
    }
    r.miou = defined ? sum / double(defined) : 0.0;
    r.miou_all_zero = C ? sum / double(C) : 0.0;
    if (subset) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t c : *subset) {
            if (c >= C) throw InvalidArgument("iou: subset class out of range");
            if (!r.per_class[c]) continue;
            s += *r.per_class[c];
            ++n;
        }
        r.miou_subset = n ? s / double(n) : 0.0;
    }
    return r;
}

ConfusionMatrix evaluate(const SegNet& g, const DatasetSplit& split) {
    ConfusionMatrix cm(split.num_classes());
    for (const auto& item : split.items) {
        if (!item.labels) throw InvalidArgument("evaluate: image " + item.image.id() + " has no labels");
        cm.accumulate(g.predict_labels(item.image), *item.labels);
    }
    return cm;
}

void write_eval(const std::filesystem::path& out_dir, const IouResult& r, const std::vector<std::string>& class_names) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    csv.precision(17);
    csv << "class,iou,defined\n";
    json per_class = json::object();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
        const auto& v = r.per_class[c];
        csv << name << ',' << (v ? *v : 0.0) << ',' << (v ? 1 : 0) << '\n';
        per_class[name] = v ? json(*v) : json(nullptr);
    }
    write_text_atomic(out_dir / "iou.csv", csv.str());
    json summary{{"miou", r.miou}, {"miou_all_zero_convention", r.miou_all_zero}, {"per_class", per_class}};
    write_text_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
}

IouResult read_eval(const std::filesystem::path& out_dir, std::vector<std::string>* class_names) {
    const auto bytes = read_file_bytes(out_dir / "summary.json");
    const auto j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded() || !j.contains("miou")) throw FormatError((out_dir / "summary.json").string() + " is not a summary");
    IouResult r;
    r.miou = j.at("miou").get<double>();
    r.miou_all_zero = j.at("miou_all_zero_convention").get<double>();

    const auto csv = read_file_bytes(out_dir / "iou.csv");
    std::istringstream in(std::string(csv.begin(), csv.end()));
    std::string line;
    std::getline(in, line);
    if (line != "class,iou,defined") throw FormatError((out_dir / "iou.csv").string() + ": unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto a = line.find(','), b = line.rfind(',');
        if (a == std::string::npos || a == b) throw FormatError((out_dir / "iou.csv").string() + ": bad row");
        if (class_names) class_names->push_back(line.substr(0, a));
        const bool defined = line.substr(b + 1) == "1";
        r.per_class.push_back(defined ? std::optional<double>(std::stod(line.substr(a + 1, b - a - 1))) : std::nullopt);
    }
    return r;
}

}  // namespace padapt

#include "padapt/eval/report.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include "padapt/acquisition/manifest.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/core/palette.hpp"

namespace padapt {

namespace fs = std::filesystem;

namespace {

std::string pct(const std::optional<double>& v) {
    if (!v) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * *v;
    return os.str();
}

}  // namespace

std::string render_table_text(const std::vector<ArmRow>& rows, const std::vector<std::string>& class_names) {
    std::size_t name_w = 4;
    for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
    std::vector<std::size_t> col_w;
    for (const auto& c : class_names) col_w.push_back(std::max<std::size_t>(c.size(), 6));

    std::ostringstream os;
    os << std::left << std::setw(int(name_w)) << "arm";
    for (std::size_t c = 0; c < class_names.size(); ++c) os << "  " << std::right << std::setw(int(col_w[c])) << class_names[c];
    os << "  " << std::setw(6) << "mIoU" << '\n';
    for (const auto& r : rows) {
        os << std::left << std::setw(int(name_w)) << r.name;
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            std::optional<double> v;
            if (c < r.result.per_class.size()) v = r.result.per_class[c];
            os << "  " << std::right << std::setw(int(col_w[c])) << pct(v);
        }
        os << "  " << std::setw(6) << pct(r.result.miou) << '\n';
    }
    return os.str();
}

std::string render_table_csv(const std::vector<ArmRow>& rows, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os.precision(10);
    os << "arm";
    for (const auto& c : class_names) os << ',' << c;
    os << ",miou,miou_all_zero_convention\n";
    for (const auto& r : rows) {
        os << r.name;
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            std::optional<double> v;
            if (c < r.result.per_class.size()) v = r.result.per_class[c];
            os << ',';
            if (v) os << *v;
        }
        os << ',' << r.result.miou << ',' << r.result.miou_all_zero << '\n';
    }
    return os.str();
}

Grid3<double> colorize(const LabelMap& labels) {
    Grid3<double> out(labels.height(), labels.width(), 3, 0.0);
    for (std::size_t y = 0; y < labels.height(); ++y) {
        for (std::size_t x = 0; x < labels.width(); ++x) {
            const auto k = labels.at(y, x);
            if (k == kIgnore) continue;
            const Rgb8 c = class_color(k);
            for (int i = 0; i < 3; ++i) out.at(y, x, std::size_t(i)) = c[std::size_t(i)] / 255.0;
        }
    }
    return out;
}

Grid3<double> hstack(const std::vector<Grid3<double>>& tiles) {
    if (tiles.empty()) throw InvalidArgument("hstack: no tiles");
    const std::size_t h = tiles.front().height(), gap = 2;
    std::size_t w = 0;
    for (const auto& t : tiles) {
        if (t.height() != h || t.channels() != 3) throw ShapeError("hstack: tiles must be RGB of equal height");
        w += t.width();
    }
    w += gap * (tiles.size() - 1);
    Grid3<double> out(h, w, 3, 1.0);
    std::size_t x0 = 0;
    for (const auto& t : tiles) {
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < t.width(); ++x)
                for (std::size_t k = 0; k < 3; ++k) out.at(y, x0 + x, k) = t.at(y, x, k);
        x0 += t.width() + gap;
    }
    return out;
}

Grid3<double> draw_patch_overlay(const Grid3<double>& rgb, const PatchGrid& grid, const std::set<int>& selected) {
    grid.validate();
    if (!grid.tiles(rgb.height(), rgb.width())) throw InvalidArgument("draw_patch_overlay: grid does not tile the image");
    Grid3<double> out = rgb;
    auto white = [&](int x, int y) {
        for (std::size_t k = 0; k < 3; ++k) out.at(std::size_t(y), std::size_t(x), k) = 1.0;
    };
    for (int p : selected) {
        const int x0 = grid.x0(p), y0 = grid.y0(p), x1 = x0 + grid.patch_w - 1, y1 = y0 + grid.patch_h - 1;
        for (int x = x0; x <= x1; ++x) {
            white(x, y0);
            white(x, y1);
        }
        for (int y = y0; y <= y1; ++y) {
            white(x0, y);
            white(x1, y);
        }
    }
    return out;
}

ReportResult render_report(const ReportOptions& opts) {
    ReportResult res;
    fs::create_directories(opts.out);
    std::vector<std::string> class_names;
    std::map<std::string, fs::path> by_name;
    for (const auto& run : opts.runs) {
        const fs::path eval = run / "eval";
        if (!fs::exists(eval / "summary.json") || !fs::exists(eval / "iou.csv")) {
            res.missing.push_back(run);
            continue;
        }
        std::vector<std::string> names;
        ArmRow row{run.filename().string(), read_eval(eval, &names)};
        if (class_names.empty()) class_names = names;
        by_name[row.name] = run;
        res.rows.push_back(std::move(row));
    }
    auto emit = [&](const fs::path& p, const std::string& text) {
        write_text_atomic(p, text);
        res.files.push_back(p);
    };
    emit(opts.out / "table.txt", render_table_text(res.rows, class_names));
    emit(opts.out / "table.csv", render_table_csv(res.rows, class_names));
    if (!res.missing.empty()) {
        std::string text;
        for (const auto& m : res.missing) text += m.string() + "\n";
        emit(opts.out / "missing.txt", text);
    }

    // input | random | active | ground truth
    const bool have_models = by_name.count("random") && by_name.count("active") &&
                             fs::exists(by_name["random"] / "stage2" / "g2.padm") &&
                             fs::exists(by_name["active"] / "stage2" / "g2.padm");
    if (have_models && !opts.val_dir.empty()) {
        const SegNet g_random = load_segnet(by_name["random"] / "stage2" / "g2");
        const SegNet g_active = load_segnet(by_name["active"] / "stage2" / "g2");
        const DatasetSplit val = ingest_directory(opts.val_dir, true, Domain::target);
        fs::create_directories(opts.out / "panels");
        for (std::size_t i = 0; i < std::min(opts.max_images, val.size()); ++i) {
            const auto& item = val.items[i];
            const auto panel = hstack({item.image.pixels(), colorize(g_random.predict_labels(item.image)),
                                       colorize(g_active.predict_labels(item.image)), colorize(*item.labels)});
            const fs::path p = opts.out / "panels" / (item.image.id() + ".png");
            write_png_rgb(p, panel);
            res.files.push_back(p);
        }
    }

    if (!opts.target_dir.empty()) {
        for (const auto& row : res.rows) {
            const fs::path mdir = by_name[row.name] / "manifests";
            if (!fs::is_directory(mdir)) continue;
            const auto manifests = load_manifests(mdir);
            fs::create_directories(opts.out / "overlays" / row.name);
            for (std::size_t i = 0; i < std::min(opts.max_images, manifests.size()); ++i) {
                const auto& m = manifests[i];
                const fs::path img = opts.target_dir / "images" / (m.image_id + ".png");
                if (!fs::exists(img)) continue;
                const fs::path p = opts.out / "overlays" / row.name / (m.image_id + ".png");
                write_png_rgb(p, draw_patch_overlay(read_png_rgb(img), m.grid, m.selected));
                res.files.push_back(p);
            }
        }
    }
    return res;
}

}  // namespace padapt

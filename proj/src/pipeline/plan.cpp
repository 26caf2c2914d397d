#include "padapt/pipeline/plan.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/eval/metrics.hpp"
#include "padapt/service/server.hpp"

namespace padapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void read_num(const KeyValueConfig& kv, const std::string& key, T& field) {
    const auto v = kv.get(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, double>) field = parse_double(key, *v);
    else if constexpr (std::is_same_v<T, bool>) field = parse_bool(key, *v);
    else field = static_cast<T>(parse_long(key, *v));
}

std::string value_or(const std::map<std::string, std::string>& m, const std::string& k, const std::string& d) {
    const auto it = m.find(k);
    return it == m.end() ? d : it->second;
}

}  // namespace

ExperimentPlan ExperimentPlan::parse(const KeyValueConfig& kv) {
    ExperimentPlan p;
    p.name = kv.get_or("name", p.name);
    p.out = kv.get_or("out", p.out.string());
    if (auto v = kv.get("seeds")) {
        p.seeds.clear();
        for (long s : parse_long_list("seeds", *v)) {
            if (s < 0) throw InvalidArgument("seeds must be non-negative");
            p.seeds.push_back(std::uint64_t(s));
        }
    }
    read_num(kv, "data.n_source", p.data.n_source);
    read_num(kv, "data.n_target", p.data.n_target);
    read_num(kv, "data.n_val", p.data.n_val);
    read_num(kv, "data.height", p.data.height);
    read_num(kv, "data.width", p.data.width);
    read_num(kv, "data.hue_shift", p.data.gap.hue_shift);
    read_num(kv, "data.noise_sigma", p.data.gap.noise_sigma);
    read_num(kv, "data.texture_strength", p.data.gap.texture_strength);
    read_num(kv, "data.blur_radius", p.data.gap.blur_radius);
    p.uda = UdaConfig::from_config(kv, "uda.");
    p.weak = WeakDaConfig::from_config(kv, "weak.");

    AcquisitionConfig base;
    read_num(kv, "acq.grid_m", base.grid_m);
    read_num(kv, "acq.grid_n", base.grid_n);
    read_num(kv, "acq.points", base.points_per_patch);
    read_num(kv, "acq.k", base.k);
    read_num(kv, "acq.pseudo_dense", base.pseudo_dense);

    p.human.host = kv.get_or("human.host", p.human.host);
    read_num(kv, "human.port", p.human.port);
    read_num(kv, "human.timeout_s", p.human.timeout_s);
    read_num(kv, "human.poll_ms", p.human.poll_ms);
    read_num(kv, "human.allow_sim_oracle", p.human.allow_sim_oracle);

    for (const auto& sec : kv.sections()) {
        if (sec.kind != "arm") throw InvalidArgument("plan: unknown section kind '" + sec.kind + "'");
        ArmSpec arm;
        arm.name = sec.name;
        arm.acquisition = base;
        const auto& v = sec.values;
        arm.acquisition.strategy = parse_strategy(value_or(v, "strategy", "active"));
        if (v.count("k")) arm.acquisition.k = int(parse_long(sec.name + ".k", v.at("k")));
        if (v.count("points")) arm.acquisition.points_per_patch = int(parse_long(sec.name + ".points", v.at("points")));
        if (v.count("pseudo_dense")) arm.acquisition.pseudo_dense = parse_bool(sec.name + ".pseudo_dense", v.at("pseudo_dense"));
        const std::string oracle = value_or(v, "oracle", "sim");
        if (oracle == "sim") arm.oracle = OracleKind::simulated;
        else if (oracle == "human") arm.oracle = OracleKind::human;
        else throw InvalidArgument("plan: arm " + sec.name + ": oracle must be sim or human");
        for (const auto& [key, val] : v) {
            static const std::set<std::string> known = {"strategy", "k", "points", "pseudo_dense", "oracle"};
            if (!known.count(key)) throw InvalidArgument("plan: arm " + sec.name + ": unknown key '" + key + "'");
        }
        p.arms.push_back(std::move(arm));
    }
    p.validate();
    return p;
}

ExperimentPlan ExperimentPlan::load(const fs::path& file) { return parse(KeyValueConfig::load(file)); }

void ExperimentPlan::validate() const {
    if (seeds.empty()) throw InvalidArgument("plan: no seeds");
    if (arms.empty()) throw InvalidArgument("plan: no [arm ...] sections");
    std::set<std::string> names;
    for (const auto& a : arms) {
        if (a.name.empty() || a.name.find('/') != std::string::npos) throw InvalidArgument("plan: bad arm name '" + a.name + "'");
        if (!names.insert(a.name).second) throw InvalidArgument("plan: duplicate arm " + a.name);
        const auto grid = PatchGrid::tile(data.height, data.width, a.acquisition.grid_m, a.acquisition.grid_n);
        if (a.acquisition.strategy == Strategy::active || a.acquisition.strategy == Strategy::random) {
            a.acquisition.validate(grid.count());
        }
    }
    uda.validate();
    weak.validate();
}

std::string ExperimentPlan::to_config_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "name = " << name << "\nout = " << out.string() << "\nseeds = ";
    for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
    os << "\ndata.n_source = " << data.n_source << "\ndata.n_target = " << data.n_target << "\ndata.n_val = " << data.n_val
       << "\ndata.height = " << data.height << "\ndata.width = " << data.width << "\ndata.hue_shift = " << data.gap.hue_shift
       << "\ndata.noise_sigma = " << data.gap.noise_sigma << "\ndata.texture_strength = " << data.gap.texture_strength
       << "\ndata.blur_radius = " << data.gap.blur_radius << "\n";
    os << uda.to_config_text("uda.") << weak.to_config_text("weak.");
    os << "human.host = " << human.host << "\nhuman.port = " << human.port << "\nhuman.timeout_s = " << human.timeout_s
       << "\nhuman.poll_ms = " << human.poll_ms << "\nhuman.allow_sim_oracle = " << (human.allow_sim_oracle ? "true" : "false")
       << "\n";
    if (!arms.empty()) {
        os << "acq.grid_m = " << arms.front().acquisition.grid_m << "\nacq.grid_n = " << arms.front().acquisition.grid_n
           << "\n";
    }
    for (const auto& a : arms) {
        const auto& c = a.acquisition;
        os << "\n[arm " << a.name << "]\nstrategy = " << to_string(c.strategy) << "\nk = " << c.k
           << "\npoints = " << c.points_per_patch << "\npseudo_dense = " << (c.pseudo_dense ? "true" : "false")
           << "\noracle = " << (a.oracle == OracleKind::human ? "human" : "sim") << "\n";
    }
    return os.str();
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
    return s;
}

}  // namespace

SessionTimeout::SessionTimeout(std::size_t answered, std::size_t total, std::vector<std::string> pending)
    : Error("annotation session timed out with " + std::to_string(answered) + "/" + std::to_string(total) +
            " answered; pending: " + join_ids(pending)),
      pending_(std::move(pending)) {}

std::vector<Manifest> human_session(const fs::path& service_dir, const std::vector<Manifest>& manifests,
                                    const std::vector<SegImage>& images, const std::vector<std::string>& class_names,
                                    const std::map<std::string, LabelMap>* truth, const HumanSessionConfig& cfg,
                                    std::ostream* log) {
    std::size_t total = 0;
    for (const auto& m : manifests) total += m.points.size();
    if (total == 0) return manifests;

    prepare_service_dir(service_dir, manifests, images, class_names, cfg.allow_sim_oracle ? truth : nullptr);
    ServiceConfig sc;
    sc.data_dir = service_dir;
    sc.host = cfg.host;
    sc.port = cfg.port;
    sc.allow_sim_oracle = cfg.allow_sim_oracle;
    {
        AnnotationServer server(sc);
        server.start();
        if (log) *log << "annotation service on http://" << cfg.host << ":" << server.port() << " (" << total << " requests)\n";
        if (cfg.on_ready) cfg.on_ready(server.port());

        httplib::Client client(cfg.host, server.port());
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg.timeout_s);
        while (true) {
            if (auto res = client.Get("/v1/progress"); res && res->status == 200) {
                const auto j = json::parse(res->body, nullptr, false);
                if (!j.is_discarded() && j.value("pending", std::size_t(1)) == 0) break;
            }
            if (std::chrono::steady_clock::now() >= deadline) {
                const auto p = server.queue().progress();
                auto pending = server.queue().pending_ids();
                server.stop();
                throw SessionTimeout(p.answered, p.total, std::move(pending));
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg.poll_ms));
        }
        server.stop();
    }
    // The event log is authoritative; rebuild from it like any restart would.
    AnnotationQueue q(load_manifests(service_dir / "manifests"), class_names.size(), service_dir / "events.jsonl");
    return q.answered_manifests();
}

std::optional<double> PlanResults::median(const std::string& arm) const {
    std::vector<double> v;
    for (const auto& [seed, arms] : per_seed) {
        const auto it = arms.find(arm);
        if (it != arms.end() && it->second.miou) v.push_back(*it->second.miou);
    }
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> PlanResults::mean(const std::string& arm) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& [seed, arms] : per_seed) {
        const auto it = arms.find(arm);
        if (it != arms.end() && it->second.miou) {
            s += *it->second.miou;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return s / double(n);
}

std::string PlanResults::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json ps = json::object();
    for (const auto& [seed, arms_out] : per_seed) {
        json s = json::object();
        for (const auto& [arm, o] : arms_out) {
            json a{{"miou", opt(o.miou)}, {"miou_all_zero_convention", opt(o.miou_all_zero)}, {"oracle_answers", o.oracle_answers}};
            if (!o.error.empty()) a["error"] = o.error;
            s[arm] = std::move(a);
        }
        ps[std::to_string(seed)] = std::move(s);
    }
    json summary = json::object();
    for (const auto& arm : arms) summary[arm] = {{"median", opt(median(arm))}, {"mean", opt(mean(arm))}};
    return json{{"seeds", seeds}, {"arms", arms}, {"per_seed", ps}, {"summary", summary}}.dump(2) + "\n";
}

namespace {

class Logger {
public:
    explicit Logger(std::ostream* os) : os_(os) {}
    template <typename... A>
    void operator()(const A&... parts) const {
        if (!os_) return;
        ((*os_) << ... << parts) << '\n';
        os_->flush();
    }

private:
    std::ostream* os_;
};

ArmOutcome run_arm(const ExperimentPlan& plan, const ArmSpec& arm, std::uint64_t seed, const fs::path& arm_dir,
                   const ToyShapes& data, const std::vector<ExportedMaps>& maps,
                   const std::map<std::string, LabelMap>& truth, const Logger& log) {
    ArmOutcome out;
    AcquisitionConfig acq = arm.acquisition;
    acq.seed = seed;
    auto manifests = acquire(maps, acq);
    for (const auto& m : manifests) save_manifest(arm_dir / "manifests", m);

    if (arm.oracle == OracleKind::human) {
        manifests = human_session(arm_dir / "service", manifests, images_only(data.target_train).images,
                                  data.target_train.class_names, &truth, plan.human, nullptr);
    } else {
        manifests = answer_with_oracle(std::move(manifests), truth);
    }
    std::vector<WeakLabelMap> weak;
    weak.reserve(maps.size());
    for (std::size_t i = 0; i < manifests.size(); ++i) {
        save_manifest(arm_dir / "answers", manifests[i]);
        out.oracle_answers += manifests[i].count_answered();
        weak.push_back(merge_manifest(manifests[i], maps[i].probs));
    }
    fs::create_directories(arm_dir / "weak_labels");
    for (std::size_t i = 0; i < weak.size(); ++i) save_map(weak_label_path(arm_dir / "weak_labels", maps[i].image_id), weak[i]);
    log("  seed ", seed, " arm ", arm.name, ": ", out.oracle_answers, " oracle answers");

    WeakDaConfig wcfg = plan.weak;
    wcfg.train.seed = seed;
    wcfg.target_label_dir = arm_dir / "weak_labels";
    fs::create_directories(arm_dir / "stage2");
    write_text_atomic(arm_dir / "stage2" / "config.cfg", wcfg.to_config_text());
    const auto r = train_weak_da(labeled(data.source), images_only(data.target_train), weak, wcfg);
    save_checkpoint(arm_dir / "stage2" / "g2", r.generator, wcfg.train.iterations);
    save_checkpoint(arm_dir / "stage2" / "d2", r.discriminator, wcfg.train.iterations);
    write_log_jsonl(arm_dir / "stage2" / "log.jsonl", r.log);

    const auto res = iou(evaluate(r.generator, data.target_val));
    write_eval(arm_dir / "eval", res, data.target_val.class_names);
    out.miou = res.miou;
    out.miou_all_zero = res.miou_all_zero;
    log("  seed ", seed, " arm ", arm.name, ": mIoU ", 100.0 * res.miou);
    return out;
}

}  // namespace

PlanResults run_plan(const ExperimentPlan& plan, std::ostream* os) {
    plan.validate();
    const Logger log(os);
    fs::create_directories(plan.out);
    write_text_atomic(plan.out / "plan.cfg", plan.to_config_text());

    PlanResults results;
    results.seeds = plan.seeds;
    for (const auto& a : plan.arms) results.arms.push_back(a.name);

    for (const std::uint64_t seed : plan.seeds) {
        const fs::path sdir = plan.out / ("seed_" + std::to_string(seed));
        log("seed ", seed, ": generating data");
        ToyShapesConfig dcfg = plan.data;
        dcfg.seed = seed;
        const ToyShapes data = generate_toyshapes(dcfg);
        export_directory(data.source, sdir / "data" / "source");
        export_directory(data.target_train, sdir / "data" / "target_train");
        export_directory(data.target_val, sdir / "data" / "target_val");

        std::map<std::string, LabelMap> truth;
        for (const auto& item : data.target_train.items) truth.emplace(item.image.id(), *item.labels);

        auto& seed_out = results.per_seed[seed];
        std::vector<ExportedMaps> maps;
        try {
            log("seed ", seed, ": stage 1");
            UdaConfig ucfg = plan.uda;
            ucfg.seed = seed;
            fs::create_directories(sdir / "stage1");
            write_text_atomic(sdir / "stage1" / "config.cfg", ucfg.to_config_text());
            const auto r = train_uda(labeled(data.source), images_only(data.target_train), ucfg);
            save_checkpoint(sdir / "stage1" / "g1", r.generator, ucfg.iterations);
            save_checkpoint(sdir / "stage1" / "d1", r.discriminator, ucfg.iterations);
            write_log_jsonl(sdir / "stage1" / "log.jsonl", r.log);
            fs::create_directories(sdir / "maps");
            maps = export_target_maps(r.generator, images_only(data.target_train), sdir / "maps");
        } catch (const std::exception& e) {
            log("seed ", seed, ": stage 1 failed: ", e.what());
            for (const auto& a : plan.arms) seed_out[a.name].error = std::string("stage 1 failed: ") + e.what();
            continue;
        }

        for (const auto& arm : plan.arms) {
            try {
                seed_out[arm.name] = run_arm(plan, arm, seed, sdir / "arms" / arm.name, data, maps, truth, log);
            } catch (const std::exception& e) {
                log("  seed ", seed, " arm ", arm.name, " failed: ", e.what());
                seed_out[arm.name] = ArmOutcome{};
                seed_out[arm.name].error = e.what();
            }
        }
        write_text_atomic(plan.out / "results.json", results.to_json());
    }
    write_text_atomic(plan.out / "results.json", results.to_json());
    return results;
}

}  // namespace padapt

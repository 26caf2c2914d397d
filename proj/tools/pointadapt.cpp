// pointadapt: command-line entry point for every pipeline stage.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "padapt/acquisition/manifest.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/data/toyshapes.hpp"
#include "padapt/eval/metrics.hpp"
#include "padapt/eval/report.hpp"
#include "padapt/pipeline/plan.hpp"
#include "padapt/service/server.hpp"
#include "padapt/weakda/weak_da.hpp"

namespace fs = std::filesystem;
using namespace padapt;

namespace {

AnnotationServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

/// Training configs name their data with source_dir / target_dir keys.
struct TrainInputs {
    LabeledSet source;
    ImageSet target;
};

TrainInputs load_train_inputs(const KeyValueConfig& kv) {
    const auto src = kv.get("source_dir");
    const auto tgt = kv.get("target_dir");
    if (!src || !tgt) throw InvalidArgument("config needs source_dir and target_dir");
    return {labeled(ingest_directory(*src, true, Domain::source)),
            images_only(ingest_directory(*tgt, false, Domain::target))};
}

std::map<std::string, LabelMap> truth_of(const DatasetSplit& split) {
    std::map<std::string, LabelMap> truth;
    for (const auto& item : split.items)
        if (item.labels) truth.emplace(item.image.id(), *item.labels);
    return truth;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point-supervised domain adaptation for segmentation"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Render a ToyShapes-DA dataset");
    ToyShapesConfig tcfg;
    fs::path gen_out;
    bool no_gap = false;
    gen->add_option("--out", gen_out, "Output root")->required();
    gen->add_option("--seed", tcfg.seed);
    gen->add_option("--n-source", tcfg.n_source);
    gen->add_option("--n-target", tcfg.n_target);
    gen->add_option("--n-val", tcfg.n_val);
    gen->add_option("--height", tcfg.height);
    gen->add_option("--width", tcfg.width);
    gen->add_option("--hue-shift", tcfg.gap.hue_shift);
    gen->add_option("--noise", tcfg.gap.noise_sigma);
    gen->add_option("--texture", tcfg.gap.texture_strength);
    gen->add_option("--blur", tcfg.gap.blur_radius);
    gen->add_flag("--no-gap", no_gap, "Render the target with the source style");

    // train-uda
    auto* tu = app.add_subcommand("train-uda", "Stage 1: entropy-adversarial adaptation");
    fs::path tu_config, tu_out;
    tu->add_option("--config", tu_config)->required()->check(CLI::ExistingFile);
    tu->add_option("--out", tu_out)->required();

    // export-maps
    auto* em = app.add_subcommand("export-maps", "Write target probability and entropy maps");
    fs::path em_ckpt, em_data, em_out;
    em->add_option("--ckpt", em_ckpt)->required();
    em->add_option("--data", em_data)->required()->check(CLI::ExistingDirectory);
    em->add_option("--out", em_out)->required();

    // acquire
    auto* aq = app.add_subcommand("acquire", "Select patches and points to annotate");
    fs::path aq_maps, aq_out;
    std::string aq_strategy = "active";
    AcquisitionConfig acfg;
    aq->add_option("--maps", aq_maps)->required()->check(CLI::ExistingDirectory);
    aq->add_option("--strategy", aq_strategy)->check(CLI::IsMember({"active", "random", "full", "none"}));
    aq->add_option("--k", acfg.k);
    aq->add_option("--points", acfg.points_per_patch);
    aq->add_option("--seed", acfg.seed);
    aq->add_option("--grid-m", acfg.grid_m);
    aq->add_option("--grid-n", acfg.grid_n);
    aq->add_option("--pseudo-dense", acfg.pseudo_dense, "Dense pseudo labels outside selected patches");
    aq->add_option("--out", aq_out)->required();

    // oracle
    auto* orc = app.add_subcommand("oracle", "Answer manifests from ground truth");
    fs::path or_manifests, or_data, or_out;
    orc->add_option("--manifests", or_manifests)->required()->check(CLI::ExistingDirectory);
    orc->add_option("--data", or_data, "Labeled target-train split")->required()->check(CLI::ExistingDirectory);
    orc->add_option("--out", or_out)->required();

    // merge
    auto* mg = app.add_subcommand("merge", "Merge answers and pseudo labels into weak labels");
    fs::path mg_manifests, mg_maps, mg_out;
    mg->add_option("--manifests", mg_manifests)->required()->check(CLI::ExistingDirectory);
    mg->add_option("--maps", mg_maps)->required()->check(CLI::ExistingDirectory);
    mg->add_option("--out", mg_out)->required();

    // service-init
    auto* si = app.add_subcommand("service-init", "Lay out a data directory for the annotation service");
    fs::path si_manifests, si_data, si_out;
    bool si_truth = false;
    si->add_option("--manifests", si_manifests)->required()->check(CLI::ExistingDirectory);
    si->add_option("--data", si_data, "Target-train split")->required()->check(CLI::ExistingDirectory);
    si->add_option("--out", si_out)->required();
    si->add_flag("--with-truth", si_truth, "Copy ground truth for the simulated oracle");

    // serve
    auto* sv = app.add_subcommand("serve", "Run the annotation service (PADAPT_* environment)");
    ServiceConfig scfg;
    std::optional<int> sv_port;
    std::optional<std::string> sv_dir;
    bool sv_oracle = false;
    sv->add_option("--port", sv_port);
    sv->add_option("--data-dir", sv_dir);
    sv->add_option("--host", scfg.host);
    sv->add_flag("--allow-sim-oracle", sv_oracle);

    // export-answers
    auto* ea = app.add_subcommand("export-answers", "Replay a service event log into answered manifests");
    fs::path ea_dir, ea_out;
    ea->add_option("--data-dir", ea_dir)->required()->check(CLI::ExistingDirectory);
    ea->add_option("--out", ea_out)->required();

    // train-weak-da
    auto* tw = app.add_subcommand("train-weak-da", "Stage 2: retrain with weak target labels");
    fs::path tw_config, tw_weak, tw_out;
    tw->add_option("--config", tw_config)->required()->check(CLI::ExistingFile);
    tw->add_option("--weak-labels", tw_weak)->required()->check(CLI::ExistingDirectory);
    tw->add_option("--out", tw_out)->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Per-class IoU on a labeled split");
    fs::path ev_ckpt, ev_data, ev_out;
    ev->add_option("--ckpt", ev_ckpt)->required();
    ev->add_option("--data", ev_data)->required()->check(CLI::ExistingDirectory);
    ev->add_option("--out", ev_out)->required();

    // report
    auto* rp = app.add_subcommand("report", "Tables and panels from arm directories");
    ReportOptions ropts;
    rp->add_option("--runs", ropts.runs)->required();
    rp->add_option("--out", ropts.out)->required();
    rp->add_option("--val", ropts.val_dir, "Labeled target-val split for prediction panels");
    rp->add_option("--target", ropts.target_dir, "Target-train split for patch overlays");
    rp->add_option("--max-images", ropts.max_images);

    // plan run
    auto* pl = app.add_subcommand("plan", "Experiment plans");
    auto* plr = pl->add_subcommand("run", "Run every seed and arm of a plan");
    pl->require_subcommand(1);
    fs::path plan_file;
    plr->add_option("plan", plan_file)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            if (no_gap) tcfg.gap = DomainGapSpec{0, 0, 0, 0};
            const auto data = generate_toyshapes(tcfg);
            export_directory(data.source, gen_out / "source");
            export_directory(data.target_train, gen_out / "target_train");
            export_directory(data.target_val, gen_out / "target_val");
            std::cout << "wrote " << data.source.size() << "/" << data.target_train.size() << "/" << data.target_val.size()
                      << " images to " << gen_out << "\n";
        } else if (tu->parsed()) {
            const auto kv = KeyValueConfig::load(tu_config);
            const auto cfg = UdaConfig::from_config(kv);
            const auto in = load_train_inputs(kv);
            fs::create_directories(tu_out);
            write_text_atomic(tu_out / "config.cfg", cfg.to_config_text());
            const auto r = train_uda(in.source, in.target, cfg);
            save_checkpoint(tu_out / "g1", r.generator, cfg.iterations);
            save_checkpoint(tu_out / "d1", r.discriminator, cfg.iterations);
            write_log_jsonl(tu_out / "log.jsonl", r.log);
            std::cout << "seg loss " << r.log.front().seg_loss << " -> " << r.log.back().seg_loss << "\n";
        } else if (em->parsed()) {
            const SegNet g = load_segnet(em_ckpt);
            fs::create_directories(em_out);
            const auto maps = export_target_maps(g, images_only(ingest_directory(em_data, false, Domain::target)), em_out);
            std::cout << "exported " << maps.size() << " maps\n";
        } else if (aq->parsed()) {
            acfg.strategy = parse_strategy(aq_strategy);
            const auto manifests = acquire(load_target_maps(aq_maps), acfg);
            std::size_t n = 0;
            for (const auto& m : manifests) {
                save_manifest(aq_out, m);
                n += m.points.size();
            }
            std::cout << manifests.size() << " manifests, " << n << " requests\n";
        } else if (orc->parsed()) {
            const auto answered =
                answer_with_oracle(load_manifests(or_manifests), truth_of(ingest_directory(or_data, true, Domain::target)));
            for (const auto& m : answered) save_manifest(or_out, m);
        } else if (mg->parsed()) {
            fs::create_directories(mg_out);
            for (const auto& m : load_manifests(mg_manifests)) {
                const auto probs = load_map<ProbMap>(mg_maps / (m.image_id + ".prob.padm"));
                save_map(weak_label_path(mg_out, m.image_id), merge_manifest(m, probs));
            }
        } else if (si->parsed()) {
            const auto split = ingest_directory(si_data, si_truth, Domain::target);
            const auto truth = truth_of(split);
            prepare_service_dir(si_out, load_manifests(si_manifests), images_only(split).images, split.class_names,
                                si_truth ? &truth : nullptr);
        } else if (sv->parsed()) {
            ServiceConfig cfg = ServiceConfig::from_env();
            cfg.host = scfg.host;
            if (sv_port) cfg.port = *sv_port;
            if (sv_dir) cfg.data_dir = *sv_dir;
            if (sv_oracle) cfg.allow_sim_oracle = true;
            AnnotationServer server(cfg);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const auto p = server.queue().progress();
            std::cout << "serving " << cfg.data_dir << " on " << cfg.host << ":" << cfg.port << " (" << p.answered << "/"
                      << p.total << " answered)" << std::endl;
            server.run();
            g_server = nullptr;
        } else if (ea->parsed()) {
            AnnotationQueue q(load_manifests(ea_dir / "manifests"), read_meta(ea_dir).size(), ea_dir / "events.jsonl");
            q.export_answers(ea_out);
            const auto p = q.progress();
            std::cout << p.answered << "/" << p.total << " answered\n";
        } else if (tw->parsed()) {
            const auto kv = KeyValueConfig::load(tw_config);
            auto cfg = WeakDaConfig::from_config(kv);
            cfg.target_label_dir = tw_weak;
            const auto in = load_train_inputs(kv);
            const auto weak = load_weak_labels(tw_weak, in.target);
            fs::create_directories(tw_out);
            write_text_atomic(tw_out / "config.cfg", cfg.to_config_text());
            const auto r = train_weak_da(in.source, in.target, weak, cfg);
            save_checkpoint(tw_out / "g2", r.generator, cfg.train.iterations);
            save_checkpoint(tw_out / "d2", r.discriminator, cfg.train.iterations);
            write_log_jsonl(tw_out / "log.jsonl", r.log);
        } else if (ev->parsed()) {
            const SegNet g = load_segnet(ev_ckpt);
            const auto split = ingest_directory(ev_data, true, Domain::target);
            const auto r = iou(evaluate(g, split));
            write_eval(ev_out, r, split.class_names);
            std::cout << "mIoU " << 100.0 * r.miou << "\n";
        } else if (rp->parsed()) {
            const auto r = render_report(ropts);
            const auto table = read_file_bytes(ropts.out / "table.txt");
            std::cout << std::string(table.begin(), table.end());
            for (const auto& m : r.missing) std::cerr << "missing eval: " << m << "\n";
        } else if (plr->parsed()) {
            const auto plan = ExperimentPlan::load(plan_file);
            const auto r = run_plan(plan, &std::cout);
            for (const auto& arm : r.arms) {
                const auto med = r.median(arm);
                std::cout << arm << ": median mIoU " << (med ? 100.0 * *med : 0.0) << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

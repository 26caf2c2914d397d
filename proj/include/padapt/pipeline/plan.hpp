#pragma once
// Experiment plans: one shared stage-1 run per seed, then one stage-2 run
// per acquisition arm, evaluated on the target validation split.
//
// Results tree:
//   <out>/plan.cfg                     copy of the plan
//   <out>/results.json                 per-seed, per-arm mIoU and cross-seed median / mean
//   <out>/seed_<s>/data/{source,target_train,target_val}/
//   <out>/seed_<s>/stage1/{g1,d1}.{padm,json}, log.jsonl, config.cfg
//   <out>/seed_<s>/maps/<id>.{prob,entropy}.padm
//   <out>/seed_<s>/arms/<arm>/manifests/    requests as acquired
//   <out>/seed_<s>/arms/<arm>/answers/      manifests with answers
//   <out>/seed_<s>/arms/<arm>/weak_labels/  merged targets
//   <out>/seed_<s>/arms/<arm>/stage2/{g2,d2}.{padm,json}, log.jsonl, config.cfg
//   <out>/seed_<s>/arms/<arm>/eval/{iou.csv,summary.json}

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "padapt/acquisition/manifest.hpp"
#include "padapt/core/errors.hpp"
#include "padapt/data/toyshapes.hpp"
#include "padapt/weakda/weak_da.hpp"

namespace padapt {

enum class OracleKind { simulated, human };

struct ArmSpec {
    std::string name;
    AcquisitionConfig acquisition;  // seed is replaced by the plan seed
    OracleKind oracle = OracleKind::simulated;
};

struct HumanSessionConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    double timeout_s = 3600.0;
    int poll_ms = 500;
    bool allow_sim_oracle = false;
    /// Called with the bound port once the service is accepting requests.
    std::function<void(int)> on_ready;
};

struct ExperimentPlan {
    std::string name = "experiment";
    std::filesystem::path out = "results";
    std::vector<std::uint64_t> seeds = {0};
    ToyShapesConfig data;  // seed is replaced by the plan seed
    UdaConfig uda;
    WeakDaConfig weak;
    std::vector<ArmSpec> arms;
    HumanSessionConfig human;

    /// Flat keys (data.*, uda.*, weak.*, acq.*, human.*, seeds, out, name) and
    /// `[arm NAME]` sections with strategy, k, points, pseudo_dense, oracle.
    static ExperimentPlan parse(const KeyValueConfig& kv);
    static ExperimentPlan load(const std::filesystem::path& file);
    std::string to_config_text() const;
    void validate() const;
};

/// Thrown when a human session runs out of time.
class SessionTimeout : public Error {
public:
    SessionTimeout(std::size_t answered, std::size_t total, std::vector<std::string> pending);
    const std::vector<std::string>& pending() const noexcept { return pending_; }

private:
    std::vector<std::string> pending_;
};

/// Serves the manifests from `service_dir` until every request is answered
/// and returns them with answers. Requests-free input returns immediately.
std::vector<Manifest> human_session(const std::filesystem::path& service_dir, const std::vector<Manifest>& manifests,
                                    const std::vector<SegImage>& images, const std::vector<std::string>& class_names,
                                    const std::map<std::string, LabelMap>* truth, const HumanSessionConfig& cfg,
                                    std::ostream* log = nullptr);

struct ArmOutcome {
    std::optional<double> miou;
    std::optional<double> miou_all_zero;
    std::size_t oracle_answers = 0;
    std::string error;
};

struct PlanResults {
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> arms;
    std::map<std::uint64_t, std::map<std::string, ArmOutcome>> per_seed;

    /// Median / mean over seeds that produced a value.
    std::optional<double> median(const std::string& arm) const;
    std::optional<double> mean(const std::string& arm) const;
    std::string to_json() const;
};

PlanResults run_plan(const ExperimentPlan& plan, std::ostream* log = nullptr);

}  // namespace padapt

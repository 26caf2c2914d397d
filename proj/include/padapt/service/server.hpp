#pragma once
// HTTP front of the annotation queue (JSON over /v1).
//
// Data directory layout:
//   manifests/<image_id>.json   requests to answer
//   images/<image_id>.png       target images shown to annotators
//   meta                        class names, one per line
//   truth/<image_id>.png        ground truth, read only by the simulated oracle
//   events.jsonl                append-only label log (created on first start)

#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "padapt/service/queue.hpp"

namespace httplib {
class Server;
}

namespace padapt {

struct ServiceConfig {
    std::filesystem::path data_dir = ".";
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    bool allow_sim_oracle = false;

    /// PADAPT_DATA_DIR, PADAPT_PORT, PADAPT_ALLOW_SIM_ORACLE=0|1.
    static ServiceConfig from_env();
};

/// Copies what a service needs into `data_dir`: manifests, target images,
/// class names and, when given, the ground truth for the simulated oracle.
void prepare_service_dir(const std::filesystem::path& data_dir, const std::vector<Manifest>& manifests,
                         const std::vector<SegImage>& images, const std::vector<std::string>& class_names,
                         const std::map<std::string, LabelMap>* truth);

class AnnotationServer {
public:
    /// Loads manifests and replays the event log; a corrupt log line throws FormatError.
    explicit AnnotationServer(ServiceConfig cfg);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Binds and serves on a background thread. Throws IoError when the port is taken.
    void start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const noexcept { return port_; }

    AnnotationQueue& queue() { return *queue_; }

private:
    void bind();
    void routes();
    std::size_t run_oracle();

    ServiceConfig cfg_;
    std::vector<std::string> class_names_;
    std::unique_ptr<AnnotationQueue> queue_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace padapt

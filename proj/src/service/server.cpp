#include "padapt/service/server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

#include "padapt/core/errors.hpp"
#include "padapt/core/io.hpp"
#include "padapt/core/palette.hpp"
#include "padapt/core/util.hpp"
#include "padapt/data/dataset.hpp"

namespace padapt {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceConfig ServiceConfig::from_env() {
    ServiceConfig c;
    if (const char* v = std::getenv("PADAPT_DATA_DIR")) c.data_dir = v;
    if (const char* v = std::getenv("PADAPT_PORT")) c.port = int(parse_long("PADAPT_PORT", v));
    if (const char* v = std::getenv("PADAPT_ALLOW_SIM_ORACLE")) c.allow_sim_oracle = parse_bool("PADAPT_ALLOW_SIM_ORACLE", v);
    return c;
}

void prepare_service_dir(const fs::path& data_dir, const std::vector<Manifest>& manifests,
                         const std::vector<SegImage>& images, const std::vector<std::string>& class_names,
                         const std::map<std::string, LabelMap>* truth) {
    fs::create_directories(data_dir / "manifests");
    fs::create_directories(data_dir / "images");
    for (const auto& m : manifests) save_manifest(data_dir / "manifests", m);
    for (const auto& im : images) write_png_rgb(data_dir / "images" / (im.id() + ".png"), im.pixels());
    std::string meta;
    for (const auto& n : class_names) meta += n + "\n";
    write_text_atomic(data_dir / "meta", meta);
    if (truth) {
        fs::create_directories(data_dir / "truth");
        for (const auto& [id, l] : *truth) write_png_gray(data_dir / "truth" / (id + ".png"), l);
    }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) { send_json(res, status, {{"error", msg}}); }

/// Transparent layer with a ring around (x, y).
std::vector<std::uint8_t> point_overlay(int h, int w, int px, int py) {
    std::vector<std::uint8_t> rgba(std::size_t(h) * w * 4, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int d2 = (x - px) * (x - px) + (y - py) * (y - py);
            const bool ring = d2 >= 4 && d2 <= 9;
            const bool center = d2 == 0;
            if (!ring && !center) continue;
            std::uint8_t* p = rgba.data() + (std::size_t(y) * w + x) * 4;
            p[0] = 255;
            p[1] = center ? 255 : 0;
            p[2] = center ? 255 : 255;
            p[3] = 255;
        }
    }
    return rgba;
}

}  // namespace

AnnotationServer::AnnotationServer(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    class_names_ = read_meta(cfg_.data_dir);
    if (class_names_.empty()) throw InvalidArgument("service: no classes in " + (cfg_.data_dir / "meta").string());
    queue_ = std::make_unique<AnnotationQueue>(load_manifests(cfg_.data_dir / "manifests"), class_names_.size(),
                                               cfg_.data_dir / "events.jsonl");
    http_ = std::make_unique<httplib::Server>();
    // httplib's default also sets SO_REUSEPORT, which lets a second server share a busy port.
    http_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::routes() {
    auto& s = *http_;

    s.Get("/v1/progress", [this](const httplib::Request&, httplib::Response& res) {
        const auto p = queue_->progress();
        send_json(res, 200, {{"answered", p.answered}, {"pending", p.pending}, {"total", p.total}});
    });

    s.Get("/v1/tasks/next", [this](const httplib::Request&, httplib::Response& res) {
        const auto r = queue_->next_task();
        if (!r) {
            res.status = 204;
            return;
        }
        json classes = json::array();
        for (std::size_t k = 0; k < class_names_.size(); ++k) {
            classes.push_back({{"id", k}, {"name", class_names_[k]}, {"color", hex_color(class_color(k))}});
        }
        send_json(res, 200,
                  {{"request_id", r->request_id},
                   {"image_id", r->image_id},
                   {"point", {{"x", r->x}, {"y", r->y}}},
                   {"patch_index", r->patch_index},
                   {"score", r->score},
                   {"image_png_url", "/v1/images/" + r->image_id + ".png"},
                   {"overlay_png_url", "/v1/images/" + r->image_id + ".png?overlay=" + r->request_id},
                   {"classes", classes}});
    });

    s.Post(R"(/v1/tasks/([^/]+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("class_id") ||
            !body["class_id"].is_number_integer()) {
            send_error(res, 400, "body must be {\"class_id\": int, \"annotator\": string}");
            return;
        }
        LabelEvent e{id, body["class_id"].get<int>(), body.value("annotator", std::string("anonymous")), iso8601_now()};
        const auto r = queue_->submit(e);
        switch (r.status) {
            case SubmitStatus::accepted: send_json(res, 200, {{"status", "accepted"}}); break;
            case SubmitStatus::duplicate: send_json(res, 200, {{"status", "accepted"}, {"duplicate", true}}); break;
            case SubmitStatus::conflict:
                send_json(res, 409, {{"error", "request already answered with a different class"},
                                     {"existing_class_id", r.existing->class_id}});
                break;
            case SubmitStatus::unknown_request: send_error(res, 404, "unknown request " + id); break;
            case SubmitStatus::invalid_class: send_error(res, 400, "class_id out of range"); break;
        }
    });

    s.Get(R"(/v1/images/([^/]+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const fs::path file = cfg_.data_dir / "images" / (id + ".png");
        if (!queue_->has_image(id) || !fs::exists(file)) {
            send_error(res, 404, "unknown image " + id);
            return;
        }
        if (req.has_param("overlay")) {
            const auto r = queue_->find(req.get_param_value("overlay"));
            if (!r || r->image_id != id) {
                send_error(res, 404, "unknown request for this image");
                return;
            }
            const auto img = read_png_rgb(file);
            const auto rgba = point_overlay(int(img.height()), int(img.width()), r->x, r->y);
            const auto png = encode_png_rgba8(img.height(), img.width(), rgba);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
            return;
        }
        const auto bytes = read_file_bytes(file);
        res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    });

    s.Post("/v1/oracle/run", [this](const httplib::Request&, httplib::Response& res) {
        if (!cfg_.allow_sim_oracle) {
            send_error(res, 403, "simulated oracle is disabled (set PADAPT_ALLOW_SIM_ORACLE=1)");
            return;
        }
        const std::size_t n = run_oracle();
        const auto p = queue_->progress();
        send_json(res, 200, {{"submitted", n}, {"answered", p.answered}, {"pending", p.pending}, {"total", p.total}});
    });

    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        } catch (...) {
            send_error(res, 500, "internal error");
        }
    });
}

std::size_t AnnotationServer::run_oracle() {
    std::map<std::string, LabelMap> truth;
    for (const auto& id : queue_->pending_ids()) {
        const auto r = queue_->find(id);
        if (!r || truth.count(r->image_id)) continue;
        truth.emplace(r->image_id, read_png_gray(cfg_.data_dir / "truth" / (r->image_id + ".png")));
    }
    return run_simulated_oracle(*queue_, truth);
}

void AnnotationServer::bind() {
    if (cfg_.port == 0) {
        port_ = http_->bind_to_any_port(cfg_.host);
        if (port_ < 0) throw IoError("service: could not bind any port on " + cfg_.host);
    } else {
        if (!http_->bind_to_port(cfg_.host, cfg_.port)) {
            throw IoError("service: port " + std::to_string(cfg_.port) + " on " + cfg_.host + " is busy");
        }
        port_ = cfg_.port;
    }
}

void AnnotationServer::start() {
    bind();
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
}

void AnnotationServer::run() {
    bind();
    http_->listen_after_bind();
}

void AnnotationServer::stop() {
    if (http_) http_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace padapt

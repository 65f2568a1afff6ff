#include "uod/pipeline.hpp"

#include "uod/coco_io.hpp"
#include "uod/eval_metrics.hpp"
#include "uod/feature_store.hpp"
#include "uod/part_discovery.hpp"
#include "uod/proposal_ranking.hpp"
#include "uod/region_classifier.hpp"
#include "uod/spectral_graph.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

namespace fs = std::filesystem;

namespace uod {

namespace {

const char* state_name(ImageState s) {
    switch (s) {
        case ImageState::ok: return "ok";
        case ImageState::cached: return "cached";
        case ImageState::failed: return "failed";
    }
    return "failed";
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

ImageStatus& status_for(RunManifest& manifest, const std::string& id) {
    auto it = std::lower_bound(manifest.images.begin(), manifest.images.end(), id,
                               [](const ImageStatus& s, const std::string& key) { return s.image_id < key; });
    if (it == manifest.images.end() || it->image_id != id) {
        ImageStatus fresh;
        fresh.image_id = id;
        it = manifest.images.insert(it, std::move(fresh));
    }
    return *it;
}

void register_entries(RunManifest& manifest, std::span<const ManifestEntry> entries) {
    for (const auto& e : entries) status_for(manifest, e.id);
}

ImageRecord load_record(const fs::path& archive_dir, const ManifestEntry& entry) {
    ImageRecord rec = read_image_record(archive_dir / entry.file);
    if (rec.features.image_id != entry.id) {
        throw InvariantError("image_id", "archive " + entry.file + " holds '" + rec.features.image_id +
                                             "', manifest says '" + entry.id + "'");
    }
    if (rec.proposals.image_width != entry.width || rec.proposals.image_height != entry.height) {
        throw InvariantError("image_width", "archive " + entry.file + " size differs from the manifest");
    }
    return rec;
}

std::string model_digest(const ClusterModel& m) {
    std::uint64_t h = fnv1a(std::string_view(reinterpret_cast<const char*>(m.centroids.data()),
                                             m.centroids.size() * sizeof(float)));
    std::string flags;
    for (bool b : m.is_foreground) flags.push_back(b ? '1' : '0');
    h = fnv1a(flags, h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(m.bg_pattern.data()), m.bg_pattern.size() * sizeof(double)), h);
    h = fnv1a(nlohmann::json(m.class_ids).dump() + nlohmann::json(m.t_bg).dump(), h);
    return hex(h);
}

std::string run_key(const PipelineConfig& config, const ClusterModel& model) {
    nlohmann::json snap = config.snapshot();
    snap.erase("archive_dir");
    snap.erase("output_dir");
    return hex(fnv1a(snap.dump() + model_digest(model) + kToolVersion));
}

}  // namespace

std::size_t RunManifest::failures() const {
    return static_cast<std::size_t>(
        std::count_if(images.begin(), images.end(), [](const ImageStatus& s) { return s.state == ImageState::failed; }));
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& s : timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    nlohmann::json imgs = nlohmann::json::array();
    for (const auto& s : images) {
        nlohmann::json e = {{"id", s.image_id}, {"status", state_name(s.state)}, {"stage", s.stage}};
        if (s.state == ImageState::failed) {
            e["error"] = s.error;
        } else {
            e["instances"] = s.n_instances;
        }
        imgs.push_back(std::move(e));
    }
    return {{"tool_version", tool_version},
            {"config", config},
            {"timings", t},
            {"images", imgs},
            {"failures", failures()}};
}

nlohmann::json priors_to_json(std::span<const ImagePriors> priors) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : priors) {
        arr.push_back({{"image_id", p.image_id}, {"order", p.order}, {"scores", p.scores}, {"top", p.top}, {"bottom", p.bottom}});
    }
    return {{"images", arr}};
}

std::vector<ImagePriors> priors_from_json(const nlohmann::json& j) {
    std::vector<ImagePriors> out;
    try {
        for (const auto& e : j.at("images")) {
            ImagePriors p;
            p.image_id = e.at("image_id").get<std::string>();
            p.order = e.at("order").get<std::vector<std::size_t>>();
            p.scores = e.at("scores").get<std::vector<double>>();
            p.top = e.at("top").get<std::vector<std::size_t>>();
            p.bottom = e.at("bottom").get<std::vector<std::size_t>>();
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("$.images", e.what());
    }
    return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

std::vector<ManifestEntry> sorted_entries(const fs::path& archive_dir) {
    auto entries = read_manifest(archive_dir / "manifest.json").images;
    std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].id == entries[i - 1].id) throw InvariantError("images", "duplicate image id " + entries[i].id);
    }
    return entries;
}

void write_text_atomic(const std::string& text, const fs::path& path) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError(FormatErrorKind::io, "cannot write " + tmp.string());
        out << text;
        if (!out) throw FormatError(FormatErrorKind::io, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<ImagePriors> run_rank(const PipelineConfig& config, RunManifest& manifest) {
    Stopwatch clock;
    const auto entries = sorted_entries(config.archive_dir);
    register_entries(manifest, entries);
    const RankingParams params = config.ranking();

    std::vector<std::optional<ImagePriors>> results(entries.size());
    std::vector<std::string> errors(entries.size());
    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
        try {
            const ImageRecord rec = load_record(config.archive_dir, entries[i]);
            const RankedProposals ranked = objectness_scores(rec.proposals, params);
            const PriorSelection sel = select_priors(ranked, params);
            results[i] = ImagePriors{entries[i].id, ranked.order, ranked.scores, sel.top, sel.bottom};
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::vector<ImagePriors> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        ImageStatus& st = status_for(manifest, entries[i].id);
        st.stage = "rank";
        if (results[i]) {
            out.push_back(std::move(*results[i]));
        } else {
            st.state = ImageState::failed;
            st.error = errors[i];
        }
    }
    fs::create_directories(config.output_dir);
    write_text_atomic(priors_to_json(out).dump(2) + "\n", config.output_dir / "rankings.json");
    manifest.timings.push_back({"rank", clock.seconds()});
    return out;
}

ClusterModel run_fit(const PipelineConfig& config, std::span<const ImagePriors> priors, RunManifest& manifest) {
    Stopwatch clock;
    const auto entries = sorted_entries(config.archive_dir);
    std::map<std::string, const ManifestEntry*> by_id;
    for (const auto& e : entries) by_id[e.id] = &e;

    struct Pool {
        std::vector<double> top;
        std::vector<double> bottom;
        std::string error;
    };
    std::vector<Pool> pools(priors.size());
    parallel_for(priors.size(), config.jobs, [&](std::size_t i) {
        try {
            auto it = by_id.find(priors[i].image_id);
            if (it == by_id.end()) throw InvariantError("image_id", "not in the archive manifest");
            const ImageRecord rec = load_record(config.archive_dir, *it->second);
            auto append = [&](std::vector<double>& dst, std::span<const std::size_t> idx) {
                for (auto k : idx) {
                    if (k >= rec.proposals.proposals.size()) throw InvariantError("rankings", "proposal index out of range");
                    const auto& cls = rec.proposals.proposals[k].cls;
                    dst.insert(dst.end(), cls.begin(), cls.end());
                }
            };
            append(pools[i].top, priors[i].top);
            append(pools[i].bottom, priors[i].bottom);
        } catch (const std::exception& e) {
            pools[i].error = e.what();
        }
    });

    std::vector<double> top;
    std::vector<double> bottom;
    std::size_t dim = 0;
    for (std::size_t i = 0; i < priors.size(); ++i) {
        ImageStatus& st = status_for(manifest, priors[i].image_id);
        st.stage = "fit";
        if (!pools[i].error.empty()) {
            st.state = ImageState::failed;
            st.error = pools[i].error;
            continue;
        }
        const std::size_t rows = priors[i].top.size() + priors[i].bottom.size();
        if (rows > 0) {
            const std::size_t d = (pools[i].top.size() + pools[i].bottom.size()) / rows;
            if (dim != 0 && d != dim) {
                st.state = ImageState::failed;
                st.error = "feature dimension " + std::to_string(d) + " differs from " + std::to_string(dim);
                continue;
            }
            dim = d;
        }
        top.insert(top.end(), pools[i].top.begin(), pools[i].top.end());
        bottom.insert(bottom.end(), pools[i].bottom.begin(), pools[i].bottom.end());
    }
    if (dim == 0) throw PipelineError("fit: no proposal features available");

    ClusterModel model;
    try {
        model = fit(PointsView{top, dim}, PointsView{bottom, dim}, config.fit());
    } catch (const PipelineError& e) {
        throw PipelineError(std::string("fit: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw PipelineError(std::string("fit: ") + e.what());
    } catch (const InvariantError& e) {
        throw PipelineError(std::string("fit: ") + e.what());
    }
    fs::create_directories(config.output_dir);
    save_cluster_model(model, config.output_dir / "cluster_model.json");
    manifest.timings.push_back({"fit", clock.seconds()});
    return model;
}

InstanceSet discover_image(const PipelineConfig& config, const ClusterModel& model, const ImageRecord& record) {
    AffinityOptions aff;
    aff.floor = config.affinity_floor;
    aff.binarize = config.binarize;
    aff.binarize_tau = config.binarize_tau;
    const AffinityGraph graph = build_affinity(record.features, aff);

    EigenOptions eig;
    eig.dense_below = config.dense_below;
    const EigenBasis basis = eigendecompose(graph, config.n_eigenvectors, eig);
    const PixelFeatureSpace space =
        build_feature_space(basis, record.features.h_patches, record.features.w_patches, config.upsample);

    DiscoveryParams dp;
    dp.thresh = config.thresh;
    dp.k_max = config.k_max;
    dp.seed = config.seed;
    dp.kmeans.n_init = config.local_n_init;
    const SegmentMap map = discover_parts(space, dp);

    const CentroidClassifier backend(model, config.temperature);
    return assemble(map, record, backend, config.assembly());
}

fs::path instance_path(const fs::path& output_dir, const std::string& image_id) {
    std::string name;
    for (char c : image_id) {
        const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '_' || c == '.';
        name.push_back(safe ? c : '_');
    }
    if (name != image_id || name.empty() || name.front() == '.') name += "_" + hex(fnv1a(image_id)).substr(0, 8);
    return output_dir / "instances" / (name + ".json");
}

std::vector<InstanceSet> run_assemble(const PipelineConfig& config, const ClusterModel& model,
                                      std::span<const std::string> image_ids, RunManifest& manifest) {
    Stopwatch clock;
    const auto entries = sorted_entries(config.archive_dir);
    std::map<std::string, const ManifestEntry*> by_id;
    for (const auto& e : entries) by_id[e.id] = &e;
    const std::string key = run_key(config, model);
    fs::create_directories(config.output_dir / "instances");

    struct Outcome {
        std::optional<InstanceSet> set;
        bool cached = false;
        std::string error;
    };
    std::vector<Outcome> outcomes(image_ids.size());
    parallel_for(image_ids.size(), config.jobs, [&](std::size_t i) {
        const std::string& id = image_ids[i];
        try {
            const fs::path path = instance_path(config.output_dir, id);
            if (fs::exists(path)) {
                try {
                    const nlohmann::json j = read_json_file(path);
                    if (j.value("run_key", std::string{}) == key && j.value("image_id", std::string{}) == id) {
                        outcomes[i].set = instance_set_from_json(j);
                        outcomes[i].cached = true;
                        return;
                    }
                } catch (const Error&) {
                    // unreadable cache entry: recompute
                }
            }
            auto it = by_id.find(id);
            if (it == by_id.end()) throw InvariantError("image_id", "not in the archive manifest");
            const ImageRecord rec = load_record(config.archive_dir, *it->second);
            InstanceSet set = discover_image(config, model, rec);
            nlohmann::json j = instance_set_to_json(set);
            j["run_key"] = key;
            write_text_atomic(j.dump(2) + "\n", path);
            outcomes[i].set = std::move(set);
        } catch (const std::exception& e) {
            outcomes[i].error = e.what();
        }
    });

    std::vector<InstanceSet> out;
    for (std::size_t i = 0; i < image_ids.size(); ++i) {
        ImageStatus& st = status_for(manifest, image_ids[i]);
        st.stage = "assemble";
        if (outcomes[i].set) {
            st.state = outcomes[i].cached ? ImageState::cached : ImageState::ok;
            st.n_instances = outcomes[i].set->instances.size();
            out.push_back(std::move(*outcomes[i].set));
        } else {
            st.state = ImageState::failed;
            st.error = outcomes[i].error;
        }
    }
    std::sort(out.begin(), out.end(), [](const InstanceSet& a, const InstanceSet& b) { return a.image_id < b.image_id; });
    manifest.timings.push_back({"assemble", clock.seconds()});
    return out;
}

DiscoverResult run_discover(const PipelineConfig& config, const std::optional<fs::path>& model_path) {
    config.validate();
    DiscoverResult result;
    RunManifest& manifest = result.manifest;
    manifest.config = config.snapshot();
    fs::create_directories(config.output_dir);

    ClusterModel model;
    std::vector<std::string> ids;
    if (model_path) {
        model = load_cluster_model(*model_path);
        const auto entries = sorted_entries(config.archive_dir);
        register_entries(manifest, entries);
        for (const auto& e : entries) ids.push_back(e.id);
    } else {
        const auto priors = run_rank(config, manifest);
        model = run_fit(config, priors, manifest);
        for (const auto& p : priors) {
            if (status_for(manifest, p.image_id).state != ImageState::failed) ids.push_back(p.image_id);
        }
    }
    result.instances = run_assemble(config, model, ids, manifest);
    write_text_atomic(manifest.to_json().dump(2) + "\n", config.output_dir / "run_manifest.json");
    return result;
}

std::vector<InstanceSet> load_instance_sets(const fs::path& output_dir) {
    const fs::path dir = output_dir / "instances";
    if (!fs::is_directory(dir)) throw FormatError(FormatErrorKind::io, "no instances directory in " + output_dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::vector<InstanceSet> sets;
    for (const auto& f : files) {
        try {
            sets.push_back(instance_set_from_json(read_json_file(f)));
        } catch (const SchemaError& e) {
            throw SchemaError(e.field(), f.string() + ": " + e.what());
        }
    }
    std::sort(sets.begin(), sets.end(), [](const InstanceSet& a, const InstanceSet& b) { return a.image_id < b.image_id; });
    return sets;
}

void export_pseudo_labels(std::span<const InstanceSet> sets, const fs::path& json_path,
                          const std::optional<fs::path>& mask_dir) {
    if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
    write_text_atomic(pseudo_labels_json(sets).dump(2) + "\n", json_path);
    if (!mask_dir) return;
    fs::create_directories(*mask_dir);
    for (const auto& s : sets) {
        const std::size_t n = s.instances.size();
        const bool wide = n > 254;
        std::string img = "P5\n" + std::to_string(s.width) + " " + std::to_string(s.height) + "\n" +
                          (wide ? "65535" : "255") + "\n";
        std::vector<std::uint16_t> label(s.width * s.height, 0);
        for (std::size_t k = 0; k < n; ++k) {
            const GridMask& m = s.instances[k].mask;
            for (std::size_t i = 0; i < m.cells.size(); ++i) {
                if (m.cells[i]) label[i] = static_cast<std::uint16_t>(k + 1);
            }
        }
        for (auto v : label) {
            if (wide) img.push_back(static_cast<char>(v >> 8));
            img.push_back(static_cast<char>(v & 0xff));
        }
        fs::path out = instance_path(*mask_dir, s.image_id).filename();
        out.replace_extension(".pgm");
        write_text_atomic(img, *mask_dir / out);
    }
}

EvalTask eval_task_from_string(const std::string& s) {
    if (s == "ap50") return EvalTask::ap50;
    if (s == "odap") return EvalTask::odap;
    if (s == "miou") return EvalTask::miou;
    if (s == "recall") return EvalTask::recall;
    throw std::invalid_argument("unknown task '" + s + "' (expected ap50, odap, miou or recall)");
}

std::string to_string(EvalTask task) {
    switch (task) {
        case EvalTask::ap50: return "ap50";
        case EvalTask::odap: return "odap";
        case EvalTask::miou: return "miou";
        case EvalTask::recall: return "recall";
    }
    return "?";
}

nlohmann::json evaluate(const nlohmann::json& predictions, const nlohmann::json& ground_truth,
                        std::span<const EvalTask> tasks) {
    const std::vector<Detection> dets = detections_from_json(predictions);
    const std::vector<GroundTruth> gts = ground_truth_from_json(ground_truth);
    std::map<std::string, const GroundTruth*> by_id;
    std::size_t n_objects = 0;
    for (const auto& g : gts) {
        by_id[g.image_id] = &g;
        n_objects += g.boxes.size();
    }
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (!by_id.count(dets[i].image_id)) {
            throw SchemaError("$[" + std::to_string(i) + "].image_id", "image '" + dets[i].image_id + "' not in ground truth");
        }
    }

    nlohmann::json metrics = nlohmann::json::object();
    nlohmann::json task_names = nlohmann::json::array();
    for (EvalTask t : tasks) {
        task_names.push_back(to_string(t));
        switch (t) {
            case EvalTask::ap50:
                metrics["ap50"] = ap50(dets, gts);
                break;
            case EvalTask::odap: {
                const std::vector<double> t50{0.5};
                metrics["odap50"] = odap(dets, gts, t50).mean;
                const auto thr = coco_iou_thresholds();
                const OdapResult r = odap(dets, gts, thr);
                metrics["odap50_95"] = r.mean;
                nlohmann::json per = nlohmann::json::object();
                for (std::size_t k = 0; k < thr.size(); ++k) {
                    char name[16];
                    std::snprintf(name, sizeof name, "%.2f", thr[k]);
                    per[name] = r.per_threshold[k];
                }
                metrics["odap_per_threshold"] = per;
                break;
            }
            case EvalTask::miou: {
                std::vector<ImageMasks> preds;
                for (const auto& g : gts) {
                    if (g.masks.size() != g.boxes.size()) {
                        throw SchemaError("$.annotations", "miou needs a segmentation for every ground-truth object");
                    }
                    preds.push_back({g.image_id, {}});
                }
                std::map<std::string, std::size_t> slot;
                for (std::size_t i = 0; i < gts.size(); ++i) slot[gts[i].image_id] = i;
                for (std::size_t i = 0; i < dets.size(); ++i) {
                    if (!dets[i].mask) {
                        throw SchemaError("$[" + std::to_string(i) + "].segmentation", "miou needs prediction masks");
                    }
                    const GroundTruth& g = *by_id[dets[i].image_id];
                    if (dets[i].mask->height != g.height || dets[i].mask->width != g.width) {
                        throw SchemaError("$[" + std::to_string(i) + "].segmentation", "mask size differs from image size");
                    }
                    preds[slot[dets[i].image_id]].masks.push_back(*dets[i].mask);
                }
                metrics["miou"] = miou(preds, gts);
                break;
            }
            case EvalTask::recall: {
                std::map<std::string, std::vector<const Detection*>> per_image;
                for (const auto& d : dets) per_image[d.image_id].push_back(&d);
                std::vector<RankedBoxes> ranked;
                for (const auto& g : gts) {
                    auto& v = per_image[g.image_id];
                    std::stable_sort(v.begin(), v.end(), [](const Detection* a, const Detection* b) { return a->score > b->score; });
                    RankedBoxes rb{g.image_id, {}};
                    for (const auto* d : v) rb.boxes.push_back(d->bbox);
                    ranked.push_back(std::move(rb));
                }
                nlohmann::json rec = nlohmann::json::object();
                for (std::size_t k : {1, 4, 10, 20, 50}) rec[std::to_string(k)] = detection_rate(ranked, gts, k, 0.5);
                metrics["recall"] = rec;
                break;
            }
        }
    }
    return {{"tool_version", kToolVersion},
            {"config", {{"tasks", task_names}, {"iou_thresholds", coco_iou_thresholds()}, {"recall_iou", 0.5}}},
            {"counts", {{"images", gts.size()}, {"ground_truth", n_objects}, {"detections", dets.size()}}},
            {"metrics", metrics}};
}

nlohmann::json evaluate_files(const fs::path& predictions, const fs::path& ground_truth, std::span<const EvalTask> tasks) {
    return evaluate(read_json_file(predictions), read_json_file(ground_truth), tasks);
}

}  // namespace uod

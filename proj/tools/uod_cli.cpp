// uod: unsupervised object discovery pipeline.
//
//   uod rank     --config run.toml
//   uod fit      --config run.toml
//   uod discover --config run.toml [--model cluster_model.json]
//   uod export   --from OUTPUT_DIR --out labels.json [--masks DIR]
//   uod eval     --pred labels.json --gt gt.json [--task ap50 --task odap ...] [--out report.json]
//   uod synth    --out DIR [--images N] [--seed S]
//
// Every config key is also accepted as a flag (--alpha 0.5) and overrides
// the file. Exit codes: 0 success, 2 partial failure, 1 usage or config error.

#include "uod/coco_io.hpp"
#include "uod/config.hpp"
#include "uod/pipeline.hpp"
#include "uod/simd/kernels.hpp"
#include "uod/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

namespace {

struct ConfigArgs {
    std::string path;
    std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.path, "pipeline config file")->required()->check(CLI::ExistingFile);
    for (const auto& key : uod::config_keys()) {
        cmd->add_option_function<std::string>(
               "--" + key, [&args, key](const std::string& v) { args.overrides[key] = v; }, "override " + key)
            ->group("Config overrides");
    }
}

uod::PipelineConfig resolve(const ConfigArgs& args) {
    uod::PipelineConfig c = uod::load_config(args.path);
    for (const auto& [k, v] : args.overrides) uod::apply_setting(c, k, v);
    c.validate();
    return c;
}

void report_images(const uod::RunManifest& m) {
    for (const auto& s : m.images) {
        if (s.state == uod::ImageState::failed) std::cerr << "failed: " << s.image_id << " [" << s.stage << "] " << s.error << '\n';
    }
}

// True when every annotation (or result entry) carries a segmentation.
bool all_segmented(const nlohmann::json& j) {
    const nlohmann::json* anns = &j;
    if (j.is_object()) {
        if (!j.contains("annotations")) return false;
        anns = &j["annotations"];
    }
    if (!anns->is_array()) return false;
    for (const auto& a : *anns) {
        if (!a.is_object() || !a.contains("segmentation")) return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised object discovery from pre-extracted ViT features"};
    app.require_subcommand(1);
    std::string simd;
    app.add_option("--simd", simd, "kernel backend: scalar, avx2 or neon");

    ConfigArgs rank_args;
    ConfigArgs fit_args;
    ConfigArgs discover_args;
    auto* rank_cmd = app.add_subcommand("rank", "rank proposals and select priors; writes rankings.json");
    add_config_flags(rank_cmd, rank_args);
    auto* fit_cmd = app.add_subcommand("fit", "fit the cluster model from rankings.json");
    add_config_flags(fit_cmd, fit_args);
    auto* discover_cmd = app.add_subcommand("discover", "run the pipeline and write per-image instances");
    add_config_flags(discover_cmd, discover_args);
    std::string model_path;
    discover_cmd->add_option("--model", model_path, "reuse a fitted cluster model")->check(CLI::ExistingFile);

    auto* export_cmd = app.add_subcommand("export", "write COCO-style pseudo-labels");
    std::string export_from;
    std::string export_out;
    std::string export_masks;
    export_cmd->add_option("--from", export_from, "discover output directory")->required()->check(CLI::ExistingDirectory);
    export_cmd->add_option("--out", export_out, "pseudo-label JSON file")->required();
    export_cmd->add_option("--masks", export_masks, "directory for per-image PGM label maps");

    auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
    std::string pred_path;
    std::string gt_path;
    std::string report_path;
    std::vector<std::string> tasks;
    eval_cmd->add_option("--pred", pred_path, "predictions (results array or dataset JSON)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--gt", gt_path, "ground-truth dataset JSON")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--task", tasks, "ap50, odap, miou, recall (default: all; miou only when every entry has a segmentation)");
    eval_cmd->add_option("--out", report_path, "report file (default: stdout)");

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic archive set for trying the pipeline");
    std::string synth_out;
    uod::SyntheticOptions synth_opts;
    synth_cmd->add_option("--out", synth_out, "archive directory")->required();
    synth_cmd->add_option("--images", synth_opts.n_images, "number of images");
    synth_cmd->add_option("--seed", synth_opts.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!simd.empty()) {
            bool found = false;
            for (auto b : {uod::simd::Backend::scalar, uod::simd::Backend::avx2, uod::simd::Backend::neon}) {
                if (simd == uod::simd::backend_name(b)) {
                    uod::simd::set_backend(b);
                    found = true;
                }
            }
            if (!found) throw uod::ConfigError("--simd: unknown backend '" + simd + "'");
        }

        if (*rank_cmd) {
            const auto config = resolve(rank_args);
            uod::RunManifest m;
            m.config = config.snapshot();
            const auto priors = uod::run_rank(config, m);
            report_images(m);
            std::cout << "ranked " << priors.size() << " of " << m.images.size() << " images -> "
                      << (config.output_dir / "rankings.json").string() << '\n';
            return m.exit_code();
        }
        if (*fit_cmd) {
            const auto config = resolve(fit_args);
            uod::RunManifest m;
            const auto priors = uod::priors_from_json(uod::read_json_file(config.output_dir / "rankings.json"));
            const auto model = uod::run_fit(config, priors, m);
            report_images(m);
            std::cout << "cluster model: " << model.k_g() << " clusters, " << model.n_classes()
                      << " foreground classes, silhouette " << model.silhouette << '\n';
            return m.exit_code();
        }
        if (*discover_cmd) {
            const auto config = resolve(discover_args);
            std::optional<std::filesystem::path> model;
            if (!model_path.empty()) model = model_path;
            const auto result = uod::run_discover(config, model);
            report_images(result.manifest);
            std::size_t n = 0;
            for (const auto& s : result.instances) n += s.instances.size();
            std::cout << "discovered " << n << " instances in " << result.instances.size() << " images ("
                      << result.manifest.failures() << " failed) -> " << config.output_dir.string() << '\n';
            return result.manifest.exit_code();
        }
        if (*export_cmd) {
            const auto sets = uod::load_instance_sets(export_from);
            std::optional<std::filesystem::path> masks;
            if (!export_masks.empty()) masks = export_masks;
            uod::export_pseudo_labels(sets, export_out, masks);
            std::cout << "exported " << sets.size() << " images -> " << export_out << '\n';
            return 0;
        }
        if (*eval_cmd) {
            std::vector<uod::EvalTask> parsed;
            for (const auto& t : tasks) parsed.push_back(uod::eval_task_from_string(t));
            const auto pred_json = uod::read_json_file(pred_path);
            const auto gt_json = uod::read_json_file(gt_path);
            if (parsed.empty()) {
                parsed = {uod::EvalTask::ap50, uod::EvalTask::odap, uod::EvalTask::recall};
                if (all_segmented(gt_json) && all_segmented(pred_json)) parsed.push_back(uod::EvalTask::miou);
            }
            const auto report = uod::evaluate(pred_json, gt_json, parsed);
            if (report_path.empty()) {
                std::cout << report.dump(2) << '\n';
            } else {
                uod::write_json_file(report, report_path);
            }
            return 0;
        }
        if (*synth_cmd) {
            const auto data = uod::make_synthetic_dataset(synth_opts);
            uod::write_synthetic_dataset(data, synth_out);
            std::cout << "wrote " << data.records.size() << " archives to " << synth_out << '\n';
            return 0;
        }
    } catch (const uod::SchemaError& e) {
        std::cerr << "schema error at " << e.field() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

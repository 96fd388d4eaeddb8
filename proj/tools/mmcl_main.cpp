#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmcl/experiment.hpp"

namespace {

using nlohmann::ordered_json;

// Flag overrides are spliced into the raw config tree and the result is
// re-validated, so a flag can never bypass a check the file would hit.
int do_run(const std::string& config_path, const CLI::App& cmd,
           const std::vector<std::uint64_t>& seeds, const std::string& method,
           const std::string& modality, int epochs, long long buffer,
           double lr, int batch, const std::string& output_dir) {
    std::ifstream is(config_path);
    if (!is)
        throw mmcl::ConfigError("config: cannot open '" + config_path + "'");
    ordered_json j;
    try {
        j = ordered_json::parse(is);
    } catch (const std::exception& e) {
        throw mmcl::ConfigError(std::string("config: invalid JSON: ") +
                                e.what());
    }
    if (!j.is_object())
        throw mmcl::ConfigError("config: top level: expected an object");

    if (cmd.count("--method") || cmd.count("--modality") ||
        cmd.count("--epochs-per-task") || cmd.count("--buffer-capacity") ||
        cmd.count("--learning-rate") || cmd.count("--batch-size")) {
        if (!j.contains("train")) j["train"] = ordered_json::object();
        if (cmd.count("--method")) j["train"]["method"] = method;
        if (cmd.count("--modality")) j["train"]["modality"] = modality;
        if (cmd.count("--epochs-per-task"))
            j["train"]["epochs_per_task"] = epochs;
        if (cmd.count("--buffer-capacity"))
            j["train"]["buffer_capacity"] = buffer;
        if (cmd.count("--learning-rate")) j["train"]["learning_rate"] = lr;
        if (cmd.count("--batch-size")) j["train"]["batch_size"] = batch;
    }
    if (!seeds.empty()) {
        if (!j.contains("seeds")) j["seeds"] = ordered_json::array();
        for (std::uint64_t s : seeds) j["seeds"].push_back(s);
    }

    mmcl::ExperimentConfig cfg = mmcl::parse_experiment_config(j.dump());
    if (cmd.count("--output-dir"))
        cfg.output_dir = output_dir;
    else if (const char* env = std::getenv("MMCL_OUTPUT_DIR"))
        cfg.output_dir = env;

    const mmcl::RunArtifacts art = mmcl::run_experiment(cfg);
    std::cout << mmcl::compare_results({art.results_json});
    std::cout << "\nresults: " << art.results_json.string() << "\n";
    std::cout << "config:  " << art.resolved_config.string() << "\n";
    return 0;
}

int do_compare(const std::vector<std::string>& files,
               const std::string& csv_path) {
    std::vector<std::filesystem::path> paths(files.begin(), files.end());
    std::string csv;
    const std::string text =
        mmcl::compare_results(paths, csv_path.empty() ? nullptr : &csv);
    std::cout << text;
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("cannot write " + csv_path);
        os << csv;
        std::cout << "\ncsv: " << csv_path << "\n";
    }
    return 0;
}

int do_plot(const std::vector<std::string>& files,
            const std::string& svg_path) {
    std::vector<std::filesystem::path> paths(files.begin(), files.end());
    const std::string svg = mmcl::plot_results_svg(paths);
    std::ofstream os(svg_path);
    if (!os) throw std::runtime_error("cannot write " + svg_path);
    os << svg;
    std::cout << "plot: " << svg_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal continual learning experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::uint64_t> extra_seeds;
    std::string method, modality, output_dir;
    int epochs = 0, batch = 0;
    long long buffer = 0;
    double lr = 0.0;
    CLI::App* run =
        app.add_subcommand("run", "train a config and write artifacts");
    run->add_option("-c,--config", config_path, "experiment config (JSON)")
        ->required();
    run->add_option("--seed", extra_seeds,
                    "append a seed to the config's seed list (repeatable)");
    run->add_option("--method", method,
                    "override train.method (samm|er|sgd|joint)");
    run->add_option("--modality", modality,
                    "override train.modality (audio|visual|multi)");
    run->add_option("--epochs-per-task", epochs,
                    "override train.epochs_per_task");
    run->add_option("--buffer-capacity", buffer,
                    "override train.buffer_capacity");
    run->add_option("--learning-rate", lr, "override train.learning_rate");
    run->add_option("--batch-size", batch, "override train.batch_size");
    run->add_option("--output-dir", output_dir,
                    "output directory (overrides MMCL_OUTPUT_DIR and config)");

    std::vector<std::string> cmp_files;
    std::string csv_path;
    CLI::App* cmp = app.add_subcommand(
        "compare", "tabulate results.json files side by side");
    cmp->add_option("files", cmp_files, "results.json files")
        ->required()
        ->expected(-1);
    cmp->add_option("--csv", csv_path, "also write the table as CSV");

    std::vector<std::string> plot_files;
    std::string svg_path = "accuracy.svg";
    CLI::App* plot = app.add_subcommand(
        "plot", "SVG line chart of mean accuracy per training step");
    plot->add_option("files", plot_files, "results.json files")
        ->required()
        ->expected(-1);
    plot->add_option("-o,--output", svg_path, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (run->parsed())
            return do_run(config_path, *run, extra_seeds, method, modality,
                          epochs, buffer, lr, batch, output_dir);
        if (cmp->parsed()) return do_compare(cmp_files, csv_path);
        return do_plot(plot_files, svg_path);
    } catch (const mmcl::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

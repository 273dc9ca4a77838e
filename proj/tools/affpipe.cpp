// affpipe command line: one subcommand per pipeline stage.

#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "affpipe/error.hpp"
#include "affpipe/pipeline.hpp"

namespace {

int exit_code(affpipe::ErrorKind kind) {
    using affpipe::ErrorKind;
    switch (kind) {
        case ErrorKind::Io: return 2;
        case ErrorKind::Parse: return 3;
        case ErrorKind::Validation: return 4;
        case ErrorKind::Schema: return 5;
        case ErrorKind::Contract: return 6;
        case ErrorKind::Numerical: return 7;
    }
    return 1;
}

struct Options {
    std::string config_file;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    std::map<std::string, std::string> paths;
};

using Command = std::string (*)(const affpipe::RunContext&);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"affpipe: multi-task affect heads, temporal smoothing, ensembling and compound labels"};
    app.require_subcommand(1);
    Options opt;

    const std::vector<std::pair<std::string, std::string>> path_flags = {
        {"features", "paths.features"},     {"labels", "paths.labels"},
        {"predictions", "paths.predictions"}, {"predictions2", "paths.predictions2"},
        {"weights", "paths.weights"},       {"thresholds", "paths.thresholds"},
        {"blend-weights", "paths.blend_weights"}, {"faces", "paths.faces"},
        {"output-name", "output.name"},
    };

    const std::vector<std::tuple<std::string, std::string, Command>> commands = {
        {"synth", "generate a synthetic corpus", affpipe::cmd_synth},
        {"train", "train the multi-task head", affpipe::cmd_train},
        {"predict", "run a trained head over features", affpipe::cmd_predict},
        {"smooth", "temporally smooth predictions", affpipe::cmd_smooth},
        {"blend", "blend two prediction files", affpipe::cmd_blend},
        {"tune-blend", "grid-search per-task blend weights", affpipe::cmd_tune_blend},
        {"tune-au", "grid-search per-AU thresholds", affpipe::cmd_tune_au},
        {"eval", "score predictions against labels", affpipe::cmd_eval},
        {"compound", "label compound expressions from per-face probabilities", affpipe::cmd_compound},
        {"report", "smoothing curve over a variance sweep", affpipe::cmd_report},
    };

    Command selected = nullptr;
    for (const auto& [name, help, fn] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config_file, "config file (key = value lines)");
        sub->add_option("--seed", opt.seed, "random seed")->each([&](const std::string&) { opt.seed_given = true; });
        sub->add_option("-o,--out", opt.out_dir, "output directory");
        sub->add_option("--set", opt.overrides, "override a config key (key=value), repeatable");
        for (const auto& [flag, key] : path_flags) {
            sub->add_option_function<std::string>(
                "--" + flag, [&opt, key = key](const std::string& v) { opt.paths[key] = v; }, "sets " + key);
        }
        sub->callback([&selected, fn = fn] { selected = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        affpipe::RunContext ctx;
        if (!opt.config_file.empty()) ctx.config = affpipe::Config::from_file(opt.config_file);
        for (const auto& [key, value] : opt.paths) ctx.config.set(key, value);
        for (const auto& a : opt.overrides) ctx.config.set_assignment(a);
        ctx.seed = opt.seed_given ? opt.seed : static_cast<std::uint64_t>(ctx.config.get_int("seed", 0));
        ctx.out_dir = opt.out_dir;
        std::cout << selected(ctx) << '\n';
        return 0;
    } catch (const affpipe::Error& e) {
        std::cerr << "error: " << affpipe::to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
}

// Command-line front end: train, oracle, sample, score, run, ablate.

#include "ppr/array_io.hpp"
#include "ppr/experiment.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ppr;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "override the config seed");
    cmd->add_option("--out", c.out, "output directory");
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = ExperimentConfig::load(c.config);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

int cmd_train(const Common& c) {
    ExperimentConfig cfg = load(c);
    fs::create_directories(c.out);
    if (cfg.kind == ExperimentKind::Data2d) {
        for (const auto& d : cfg.datasets)
            save_checkpoint(*load_or_train_data2d(cfg, d, &std::cerr), (fs::path(c.out) / ("net-" + d + ".ppra")).string());
    } else {
        save_checkpoint(*load_or_train_ks(cfg, &std::cerr), (fs::path(c.out) / "net-ks.ppra").string());
    }
    return 0;
}

int cmd_oracle(const Common& c) {
    ExperimentConfig cfg = load(c);
    if (cfg.kind != ExperimentKind::Data2d) throw ValidationError("oracle: only data2d experiments have oracles");
    fs::create_directories(c.out);
    for (const auto& d : cfg.datasets) {
        auto net = load_or_train_data2d(cfg, d, &std::cerr);
        auto constraints = data2d_constraints(cfg, d);
        for (std::size_t i = 0; i < constraints.size(); ++i) {
            ArrayFile f;
            f.meta = {{"dataset", d}, {"constraint", constraints[i]->to_json()}, {"oracle", cfg.oracle.to_json()}};
            f.put("cloud", Matrix(load_or_build_oracle(cfg, d, *net, *constraints[i], &std::cerr)));
            f.write((fs::path(c.out) / ("oracle-" + d + "-c" + std::to_string(i) + ".ppra")).string());
        }
    }
    return 0;
}

int cmd_sample(const Common& c, const std::string& method_name, const std::string& dataset, int index) {
    ExperimentConfig cfg = load(c);
    if (cfg.kind != ExperimentKind::Data2d) throw ValidationError("sample: use `run` for ks experiments");
    const Method method = method_from_string(method_name);
    const std::string d = dataset.empty() ? cfg.datasets.front() : dataset;
    auto net = load_or_train_data2d(cfg, d, &std::cerr);
    auto constraints = data2d_constraints(cfg, d);
    if (index < 0 || index >= int(constraints.size())) throw RangeError("sample: constraint index out of range");
    const Constraint& con = *constraints[std::size_t(index)];
    SamplerConfig s = cfg.sampler;
    const std::string tag = d + "/" + std::to_string(index);
    const double param = tune_baseline(method, *net, con, cfg, cfg.tune.samples, cfg.seed ^ fnv1a(tag));
    if (std::isfinite(param)) set_baseline_param(s, method, param);
    Rng rng = labeled_stream(cfg.seed, tag + "/sample");
    SampleRun run = run_method(method, *net, con, s, cfg.num_samples, rng);
    ArrayFile f;
    f.meta = {{"method", method_name}, {"dataset", d}, {"constraint", con.to_json()}, {"seed", run.seed},
              {"seconds", run.seconds}, {"config_hash", hex_digest(config_hash(cfg.to_json()))}};
    f.put("cloud", Matrix(run.cloud));
    f.put("violation", run.violation);
    for (const auto& [step, cloud] : run.snapshots) f.put("snapshot_" + std::to_string(step), Matrix(cloud));
    fs::create_directories(c.out);
    const fs::path path = fs::path(c.out) / (d + "-c" + std::to_string(index) + "-" + method_name + ".ppra");
    f.write(path.string());
    std::cout << path.string() << "\n";
    return 0;
}

int cmd_score(const std::string& samples, const std::string& reference, const std::string& out, int k, int repeats,
              std::uint64_t seed) {
    ArrayFile a = ArrayFile::read(samples);
    ArrayFile b = ArrayFile::read(reference);
    const PointCloud A = a.matrix("cloud"), B = b.matrix("cloud");
    Rng rng(seed);
    const int sub = int(std::min(A.rows(), B.rows()));
    json result = {{"samples", samples}, {"reference", reference}};
    result["cross_edge_rate"] = knn_cross_edge_rate(A, B, k, sub, repeats, rng);
    const SinkhornResult s = sinkhorn_divergence(A, B);
    result["sinkhorn"] = s.divergence;
    result["sinkhorn_eps"] = s.eps;
    result["sinkhorn_converged"] = s.converged;
    if (a.meta.contains("constraint")) {
        ConstraintPtr con = constraint_from_json(a.meta.at("constraint"));
        result["violation"] = violation_stats(A, *con).to_json();
    }
    const std::string text = result.dump(2);
    if (out.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream(out) << text << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained diffusion sampling experiments"};
    app.require_subcommand(1);

    Common train_c, oracle_c, sample_c, run_c, ablate_c;
    auto* train_cmd = app.add_subcommand("train", "train (or load cached) denoiser nets");
    add_common(train_cmd, train_c);
    auto* oracle_cmd = app.add_subcommand("oracle", "build rejection-sampling oracle clouds");
    add_common(oracle_cmd, oracle_c);

    auto* sample_cmd = app.add_subcommand("sample", "run one sampler on one constraint");
    add_common(sample_cmd, sample_c);
    std::string method = "ppr", dataset;
    int index = 0;
    sample_cmd->add_option("--method", method, "pc | ppr | dps | x0proj | xtproj");
    sample_cmd->add_option("--dataset", dataset, "dataset name (default: first in config)");
    sample_cmd->add_option("--constraint", index, "constraint index");

    auto* score_cmd = app.add_subcommand("score", "compare a sample file against a reference cloud");
    std::string samples, reference, score_out, score_config;
    std::uint64_t score_seed = 0;
    int k = 5, repeats = 3;
    score_cmd->add_option("--samples", samples, "sample array file")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--reference", reference, "reference array file")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--config", score_config, "unused; accepted for uniformity");
    score_cmd->add_option("--seed", score_seed, "subsampling seed");
    score_cmd->add_option("--out", score_out, "output JSON path (default: stdout)");
    score_cmd->add_option("--k", k, "neighbours per node");
    score_cmd->add_option("--repeats", repeats, "subsampling repeats");

    auto* run_cmd = app.add_subcommand("run", "full pipeline: nets, oracles, samplers, metrics");
    add_common(run_cmd, run_c);

    auto* ablate_cmd = app.add_subcommand("ablate", "sweep one PPR setting");
    add_common(ablate_cmd, ablate_c);
    std::string axis;
    std::vector<double> values;
    ablate_cmd->add_option("--axis", axis, "renoise_M | correct_N | proj_steps")->required();
    ablate_cmd->add_option("--values", values, "values to sweep (comma separated)")->required()->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return cmd_train(train_c);
        if (*oracle_cmd) return cmd_oracle(oracle_c);
        if (*sample_cmd) return cmd_sample(sample_c, method, dataset, index);
        if (*score_cmd) return cmd_score(samples, reference, score_out, k, repeats, score_seed);
        if (*run_cmd) {
            run_experiment(load(run_c), run_c.out, &std::cerr);
            return 0;
        }
        if (*ablate_cmd) {
            ablate(load(ablate_c), ablation_axis_from_string(axis), values, ablate_c.out, &std::cerr);
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

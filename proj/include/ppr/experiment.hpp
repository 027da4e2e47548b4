#pragma once

#include "ppr/common.hpp"
#include "ppr/constraints.hpp"
#include "ppr/datagen.hpp"
#include "ppr/ks.hpp"
#include "ppr/metrics.hpp"
#include "ppr/net.hpp"
#include "ppr/oracle.hpp"
#include "ppr/samplers.hpp"
#include "ppr/train.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace ppr {

std::uint64_t fnv1a(const std::string& bytes);
/// Hash of the canonical (key-sorted, compact) serialization.
std::uint64_t config_hash(const nlohmann::json& j);
std::string hex_digest(std::uint64_t h);
/// $PPR_CACHE_DIR, or ".ppr-cache" under the working directory.
std::filesystem::path cache_dir();
/// Independent stream keyed by a seed and a text label.
Rng labeled_stream(std::uint64_t seed, const std::string& label);

struct MetricConfig {
    int k = 5;
    int subsample = 2048;
    int repeats = 3;
    int sinkhorn_points = 1024;
};

/// Per-baseline grids; each baseline keeps the value that minimizes its own
/// median violation on a separate tuning run.
struct TuneConfig {
    bool enabled = true;
    int samples = 256;
    std::vector<double> dps_zeta = {1e-3, 1e-2, 1e-1, 1.0};
    std::vector<double> x0proj_lr = {0.05, 0.1, 0.25, 0.5};
    std::vector<double> xtproj_lr = {0.05, 0.1, 0.25, 0.5};
};

enum class ExperimentKind { Data2d, Ks };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Data2d;
    std::uint64_t seed = 0;

    // Data2D
    std::vector<std::string> datasets = {"checkerboard", "banana"};
    Checkerboard2D checkerboard;
    BananaGmm banana = BananaGmm::defaults();
    int train_size = 100000;
    int num_constraints = 4;
    GrfHyper grf;
    OracleConfig oracle;

    // KS
    KsParams ks;
    int ks_train_count = 256;
    int ks_rows = 32;
    int ks_cols = 32;
    int test_count = 8;
    int ensemble_size = 8;
    ObservationMap observation_map = ObservationMap::Identity;
    std::vector<int> observed_rows = {0, 16, 31};

    NetConfig net;
    TrainConfig train;
    SamplerConfig sampler;
    std::vector<Method> methods = {Method::Ppr, Method::Dps, Method::X0Proj, Method::XtProj};
    int num_samples = 2048;
    MetricConfig metrics;
    TuneConfig tune;

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
};

struct Data2dRow {
    std::string dataset;
    int constraint_id = 0;
    std::string method;
    /// Tuned baseline parameter (NaN for untuned methods).
    double param = 0.0;
    ViolationStats violation;
    /// Cross-edge rate against the oracle marginal, keyed by schedule step.
    std::map<int, double> cross_edge;
    double sinkhorn = 0.0;
    long failures = 0;
    double seconds = 0.0;
};

struct KsRow {
    std::string method;
    double param = 0.0;
    ViolationStats violation;
    EnsembleScores ensemble;
    /// Averages over samples of each sample's mean / max time-step norm.
    double continuity_mean = 0.0;
    double continuity_max = 0.0;
    long failures = 0;
    double seconds = 0.0;
};

struct Report {
    std::vector<Data2dRow> data2d;
    std::vector<KsRow> ks;
    nlohmann::json to_json() const;
};

// Stages; each caches its product under cache_dir() keyed by config hashes.

PointCloud data2d_training_set(const ExperimentConfig& cfg, const std::string& dataset);
std::shared_ptr<const DenoiserNet> load_or_train_data2d(const ExperimentConfig& cfg, const std::string& dataset,
                                                        std::ostream* log);
std::vector<ConstraintPtr> data2d_constraints(const ExperimentConfig& cfg, const std::string& dataset);
PointCloud load_or_build_oracle(const ExperimentConfig& cfg, const std::string& dataset, const DenoiserNet& net,
                                const Constraint& constraint, std::ostream* log);

KsDataset load_or_build_ks_dataset(const ExperimentConfig& cfg, std::ostream* log);
std::shared_ptr<const DenoiserNet> load_or_train_ks(const ExperimentConfig& cfg, std::ostream* log);

/// Baseline parameter chosen by the tuning protocol (NaN for PPR and PC).
double tune_baseline(Method method, const DenoiserNet& net, const Constraint& constraint,
                     const ExperimentConfig& cfg, int n, std::uint64_t seed);
void set_baseline_param(SamplerConfig& sampler, Method method, double value);

/// Full pipeline. Artifacts are written under `out` unless it is empty.
Report run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* log);

enum class AblationAxis { RenoiseM, CorrectN, ProjSteps };
AblationAxis ablation_axis_from_string(const std::string& s);
std::string to_string(AblationAxis a);

/// One PPR-only run per value sharing nets and oracles.
std::vector<std::pair<double, Report>> ablate(const ExperimentConfig& cfg, AblationAxis axis,
                                              const std::vector<double>& values, const std::filesystem::path& out,
                                              std::ostream* log);

void write_report(const Report& report, const std::filesystem::path& out);

}  // namespace ppr

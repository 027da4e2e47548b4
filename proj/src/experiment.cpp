#include "ppr/experiment.hpp"

#include "ppr/array_io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ppr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void note(std::ostream* log, const std::string& msg) {
    if (log) *log << msg << std::endl;
}
}  // namespace

// ---------------------------------------------------------------- hashing

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const json& j) { return fnv1a(j.dump()); }

std::string hex_digest(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

fs::path cache_dir() {
    if (const char* env = std::getenv("PPR_CACHE_DIR"); env && *env) return fs::path(env);
    return fs::path(".ppr-cache");
}

Rng labeled_stream(std::uint64_t seed, const std::string& label) { return Rng(seed).split(fnv1a(label)); }

// ---------------------------------------------------------------- config

namespace {

json net_to_json(const NetConfig& n) {
    json j = {{"hidden", n.hidden},
              {"activation", to_string(n.activation)},
              {"embed_features", n.embed_features},
              {"sigma_data", n.sigma_data}};
    if (n.gaussian_skip) j["gaussian_skip"] = true;
    return j;
}

NetConfig net_from_json(const json& j, NetConfig n = {}) {
    n.hidden = j.value("hidden", n.hidden);
    n.activation = activation_from_string(j.value("activation", to_string(n.activation)));
    n.embed_features = j.value("embed_features", n.embed_features);
    n.sigma_data = j.value("sigma_data", n.sigma_data);
    n.gaussian_skip = j.value("gaussian_skip", n.gaussian_skip);
    return n;
}

json train_to_json(const TrainConfig& t) {
    return {{"batch", t.batch},       {"steps", t.steps},         {"lr", t.lr},
            {"lr_final_fraction", t.lr_final_fraction},           {"beta1", t.beta1},
            {"beta2", t.beta2},       {"adam_eps", t.adam_eps},   {"p_mean", t.p_mean},
            {"p_std", t.p_std},       {"sigma_min", t.sigma_min}, {"sigma_max", t.sigma_max}};
}

TrainConfig train_from_json(const json& j, TrainConfig t = {}) {
    t.batch = j.value("batch", t.batch);
    t.steps = j.value("steps", t.steps);
    t.lr = j.value("lr", t.lr);
    t.lr_final_fraction = j.value("lr_final_fraction", t.lr_final_fraction);
    t.beta1 = j.value("beta1", t.beta1);
    t.beta2 = j.value("beta2", t.beta2);
    t.adam_eps = j.value("adam_eps", t.adam_eps);
    t.p_mean = j.value("p_mean", t.p_mean);
    t.p_std = j.value("p_std", t.p_std);
    t.sigma_min = j.value("sigma_min", t.sigma_min);
    t.sigma_max = j.value("sigma_max", t.sigma_max);
    return t;
}

json grf_to_json(const GrfHyper& g) {
    return {{"num_features", g.num_features},
            {"lengthscale", g.lengthscale},
            {"kernel_variance", g.kernel_variance},
            {"bias_std", g.bias_std}};
}

GrfHyper grf_from_json(const json& j) {
    GrfHyper g;
    g.num_features = j.value("num_features", g.num_features);
    g.lengthscale = j.value("lengthscale", g.lengthscale);
    g.kernel_variance = j.value("kernel_variance", g.kernel_variance);
    g.bias_std = j.value("bias_std", g.bias_std);
    return g;
}

BananaGmm banana_from_json(const json& j) {
    BananaGmm b;
    b.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& m : j.at("means")) b.means.emplace_back(m.at(0).get<double>(), m.at(1).get<double>());
    for (const auto& s : j.at("stds")) b.stds.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
    b.curvature = j.value("curvature", 0.0);
    b.validate();
    return b;
}

NetConfig effective_net(const ExperimentConfig& cfg) {
    NetConfig n = cfg.net;
    n.dim = cfg.kind == ExperimentKind::Data2d ? 2 : cfg.ks_rows * cfg.ks_cols;
    return n;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (kind == ExperimentKind::Data2d) {
        if (datasets.empty()) throw ValidationError("experiment: no datasets listed");
        for (const auto& d : datasets)
            if (d != "checkerboard" && d != "banana") throw ValidationError("experiment: unknown dataset " + d);
        checkerboard.validate();
        banana.validate();
        if (train_size < 2) throw ValidationError("experiment: train_size must be at least 2");
        if (num_constraints < 1) throw ValidationError("experiment: num_constraints must be positive");
        grf.validate();
        oracle.validate();
    } else {
        ks.validate();
        if (ks_train_count < 2) throw ValidationError("experiment: ks_train_count must be at least 2");
        if (ks_rows < 1 || ks_cols < 1) throw ValidationError("experiment: ks output size must be positive");
        if (test_count < 1 || ensemble_size < 2) throw ValidationError("experiment: invalid ks ensemble sizes");
        for (int r : observed_rows)
            if (r < 0 || r >= ks_rows) throw ValidationError("experiment: observed row outside the field");
    }
    effective_net(*this).validate();
    train.validate();
    sampler.validate();
    if (methods.empty()) throw ValidationError("experiment: no methods listed");
    if (num_samples < 2) throw ValidationError("experiment: num_samples must be at least 2");
    if (metrics.k < 1 || metrics.subsample <= metrics.k || metrics.repeats < 1 || metrics.sinkhorn_points < 1)
        throw ValidationError("experiment: invalid metric settings");
    if (tune.samples < 2) throw ValidationError("experiment: tune.samples must be at least 2");
}

json ExperimentConfig::to_json() const {
    json methods_j = json::array();
    for (Method m : methods) methods_j.push_back(to_string(m));
    json j = {{"experiment", kind == ExperimentKind::Data2d ? "data2d" : "ks"},
              {"seed", seed},
              {"net", net_to_json(net)},
              {"train", train_to_json(train)},
              {"sampler", sampler.to_json()},
              {"methods", methods_j},
              {"num_samples", num_samples},
              {"metrics",
               {{"k", metrics.k},
                {"subsample", metrics.subsample},
                {"repeats", metrics.repeats},
                {"sinkhorn_points", metrics.sinkhorn_points}}},
              {"tune",
               {{"enabled", tune.enabled},
                {"samples", tune.samples},
                {"dps_zeta", tune.dps_zeta},
                {"x0proj_lr", tune.x0proj_lr},
                {"xtproj_lr", tune.xtproj_lr}}}};
    if (kind == ExperimentKind::Data2d) {
        j["datasets"] = datasets;
        j["checkerboard"] = checkerboard.to_json();
        j["banana"] = banana.to_json();
        j["train_size"] = train_size;
        j["num_constraints"] = num_constraints;
        j["grf"] = grf_to_json(grf);
        j["oracle"] = oracle.to_json();
    } else {
        j["ks"] = ks.to_json();
        j["ks_train_count"] = ks_train_count;
        j["ks_rows"] = ks_rows;
        j["ks_cols"] = ks_cols;
        j["test_count"] = test_count;
        j["ensemble_size"] = ensemble_size;
        j["observation_map"] = to_string(observation_map);
        j["observed_rows"] = observed_rows;
    }
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    try {
        const std::string kind = j.value("experiment", std::string("data2d"));
        if (kind == "data2d") c.kind = ExperimentKind::Data2d;
        else if (kind == "ks") c.kind = ExperimentKind::Ks;
        else throw ValidationError("experiment: unknown kind " + kind);
        c.seed = j.value("seed", c.seed);
        if (c.kind == ExperimentKind::Ks) {
            // Desk defaults for the trajectory study.
            c.net.hidden = {512, 512, 512, 512, 512, 512};
            c.net.gaussian_skip = true;
            c.train.batch = 64;
            c.train.steps = 4000;
            c.num_samples = c.ensemble_size;
        }
        if (j.contains("net")) c.net = net_from_json(j.at("net"), c.net);
        if (j.contains("train")) c.train = train_from_json(j.at("train"), c.train);
        if (j.contains("sampler")) c.sampler = SamplerConfig::from_json(j.at("sampler"));
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
        }
        c.num_samples = j.value("num_samples", c.num_samples);
        if (j.contains("metrics")) {
            const auto& m = j.at("metrics");
            c.metrics.k = m.value("k", c.metrics.k);
            c.metrics.subsample = m.value("subsample", c.metrics.subsample);
            c.metrics.repeats = m.value("repeats", c.metrics.repeats);
            c.metrics.sinkhorn_points = m.value("sinkhorn_points", c.metrics.sinkhorn_points);
        }
        if (j.contains("tune")) {
            const auto& t = j.at("tune");
            c.tune.enabled = t.value("enabled", c.tune.enabled);
            c.tune.samples = t.value("samples", c.tune.samples);
            c.tune.dps_zeta = t.value("dps_zeta", c.tune.dps_zeta);
            c.tune.x0proj_lr = t.value("x0proj_lr", c.tune.x0proj_lr);
            c.tune.xtproj_lr = t.value("xtproj_lr", c.tune.xtproj_lr);
        }
        c.datasets = j.value("datasets", c.datasets);
        if (j.contains("checkerboard")) {
            c.checkerboard.grid_size = j.at("checkerboard").value("grid_size", c.checkerboard.grid_size);
            c.checkerboard.jitter = j.at("checkerboard").value("jitter", c.checkerboard.jitter);
        }
        if (j.contains("banana")) c.banana = banana_from_json(j.at("banana"));
        c.train_size = j.value("train_size", c.train_size);
        c.num_constraints = j.value("num_constraints", c.num_constraints);
        if (j.contains("grf")) c.grf = grf_from_json(j.at("grf"));
        if (j.contains("oracle")) c.oracle = OracleConfig::from_json(j.at("oracle"));
        if (j.contains("ks")) c.ks = KsParams::from_json(j.at("ks"));
        c.ks_train_count = j.value("ks_train_count", c.ks_train_count);
        c.ks_rows = j.value("ks_rows", c.ks_rows);
        c.ks_cols = j.value("ks_cols", c.ks_cols);
        c.test_count = j.value("test_count", c.test_count);
        c.ensemble_size = j.value("ensemble_size", c.ensemble_size);
        if (j.contains("observation_map"))
            c.observation_map = observation_map_from_string(j.at("observation_map").get<std::string>());
        c.observed_rows = j.value("observed_rows", c.observed_rows);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("config " + path + ": " + e.what());
    }
    return from_json(j);
}

// ---------------------------------------------------------------- report

json Report::to_json() const {
    json rows = json::array();
    for (const auto& r : data2d) {
        json ce = json::object();
        for (const auto& [step, rate] : r.cross_edge) ce[std::to_string(step)] = rate;
        rows.push_back({{"dataset", r.dataset},
                        {"constraint", r.constraint_id},
                        {"method", r.method},
                        {"param", std::isfinite(r.param) ? json(r.param) : json()},
                        {"violation", r.violation.to_json()},
                        {"cross_edge", ce},
                        {"sinkhorn", r.sinkhorn},
                        {"failures", r.failures},
                        {"seconds", r.seconds}});
    }
    json ks_rows = json::array();
    for (const auto& r : ks)
        ks_rows.push_back({{"method", r.method},
                           {"param", std::isfinite(r.param) ? json(r.param) : json()},
                           {"violation", r.violation.to_json()},
                           {"ensemble", r.ensemble.to_json()},
                           {"continuity_mean", r.continuity_mean},
                           {"continuity_max", r.continuity_max},
                           {"failures", r.failures},
                           {"seconds", r.seconds}});
    return {{"data2d", rows}, {"ks", ks_rows}};
}

void write_report(const Report& report, const fs::path& out) {
    fs::create_directories(out);
    std::ofstream(out / "report.json") << report.to_json().dump(2) << "\n";
    if (!report.data2d.empty()) {
        std::ofstream res(out / "results.csv");
        res << std::setprecision(10);
        res << "dataset,constraint,method,param,median,q25,q75,max,mean,sinkhorn,failures,seconds\n";
        std::ofstream ce(out / "cross_edge.csv");
        ce << std::setprecision(10) << "dataset,constraint,method,step,rate\n";
        std::ofstream hist(out / "violation_hist.csv");
        hist << "dataset,constraint,method,bin_lo,bin_hi,count\n";
        for (const auto& r : report.data2d) {
            res << r.dataset << ',' << r.constraint_id << ',' << r.method << ',' << r.param << ','
                << r.violation.median << ',' << r.violation.q25 << ',' << r.violation.q75 << ',' << r.violation.max
                << ',' << r.violation.mean << ',' << r.sinkhorn << ',' << r.failures << ',' << r.seconds << '\n';
            for (const auto& [step, rate] : r.cross_edge)
                ce << r.dataset << ',' << r.constraint_id << ',' << r.method << ',' << step << ',' << rate << '\n';
            for (std::size_t b = 0; b < r.violation.counts.size(); ++b)
                hist << r.dataset << ',' << r.constraint_id << ',' << r.method << ',' << r.violation.edges[b] << ','
                     << r.violation.edges[b + 1] << ',' << r.violation.counts[b] << '\n';
        }
    }
    if (!report.ks.empty()) {
        std::ofstream res(out / "ks_results.csv");
        res << std::setprecision(10);
        res << "method,param,median,q25,q75,max,skill,spread,ratio,crps,continuity_mean,continuity_max,failures,"
               "seconds\n";
        for (const auto& r : report.ks)
            res << r.method << ',' << r.param << ',' << r.violation.median << ',' << r.violation.q25 << ','
                << r.violation.q75 << ',' << r.violation.max << ',' << r.ensemble.skill << ',' << r.ensemble.spread
                << ',' << r.ensemble.ratio << ',' << r.ensemble.crps << ',' << r.continuity_mean << ','
                << r.continuity_max << ',' << r.failures << ',' << r.seconds << '\n';
    }
}

// ---------------------------------------------------------------- stages

namespace {

json data2d_net_key(const ExperimentConfig& cfg, const std::string& dataset) {
    return {{"kind", "data2d-net"},
            {"dataset", dataset},
            {"params", dataset == "checkerboard" ? cfg.checkerboard.to_json() : cfg.banana.to_json()},
            {"train_size", cfg.train_size},
            {"net", net_to_json(cfg.net)},
            {"train", train_to_json(cfg.train)},
            {"seed", cfg.seed}};
}

json ks_dataset_key(const ExperimentConfig& cfg) {
    return {{"kind", "ks-dataset"},
            {"ks", cfg.ks.to_json()},
            {"count", cfg.ks_train_count},
            {"rows", cfg.ks_rows},
            {"cols", cfg.ks_cols},
            {"seed", cfg.seed}};
}

std::shared_ptr<const DenoiserNet> load_or_train(const json& key, const PointCloud& data, const NetConfig& net_cfg,
                                                 const TrainConfig& train_cfg, std::uint64_t seed,
                                                 const BatchAugment& augment, std::ostream* log) {
    const fs::path path = cache_dir() / ("net-" + hex_digest(config_hash(key)) + ".ppra");
    if (fs::exists(path)) {
        note(log, "net cache hit " + path.string());
        return std::make_shared<DenoiserNet>(load_checkpoint(path.string()));
    }
    note(log, "training net (" + std::to_string(train_cfg.steps) + " steps) -> " + path.string());
    // A Gaussian skip is already a usable denoiser; start the residual at zero.
    auto net = std::make_shared<DenoiserNet>(net_cfg, seed, net_cfg.gaussian_skip);
    Rng rng = labeled_stream(seed, "train-loop");
    auto history = train(*net, data, train_cfg, rng, augment);
    fs::create_directories(path.parent_path());
    save_checkpoint(*net, path.string());
    fs::path loss = path;
    loss.replace_extension(".loss.csv");
    write_loss_csv(loss.string(), history);
    return net;
}

PointCloud finite_rows(const PointCloud& cloud) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < cloud.rows(); ++i)
        if (cloud.row(i).allFinite()) keep.push_back(i);
    PointCloud out(Eigen::Index(keep.size()), cloud.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) out.row(Eigen::Index(i)) = cloud.row(keep[i]);
    return out;
}

Vec finite_values(const Vec& v) {
    std::vector<double> keep;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::isfinite(v(i))) keep.push_back(v(i));
    if (keep.empty()) return Vec::Constant(1, kInf);
    return Eigen::Map<Vec>(keep.data(), Eigen::Index(keep.size()));
}

// Median violation with failed samples counted as infinitely bad.
double tuning_score(const SampleRun& run) {
    std::vector<double> v(std::size_t(run.violation.size()));
    for (Eigen::Index i = 0; i < run.violation.size(); ++i)
        v[std::size_t(i)] = (run.failed[std::size_t(i)] || !std::isfinite(run.violation(i))) ? kInf : run.violation(i);
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

void save_run(const SampleRun& run, const fs::path& path, const json& meta) {
    ArrayFile f;
    f.meta = meta;
    f.meta["seed"] = run.seed;
    f.meta["seconds"] = run.seconds;
    f.put("cloud", Matrix(run.cloud));
    if (run.violation.size() > 0) f.put("violation", run.violation);
    Vec failed(Eigen::Index(run.failed.size()));
    for (std::size_t i = 0; i < run.failed.size(); ++i) failed(Eigen::Index(i)) = run.failed[i] ? 1.0 : 0.0;
    f.put("failed", failed);
    for (const auto& [step, cloud] : run.snapshots) f.put("snapshot_" + std::to_string(step), Matrix(cloud));
    fs::create_directories(path.parent_path());
    f.write(path.string());
}

}  // namespace

PointCloud data2d_training_set(const ExperimentConfig& cfg, const std::string& dataset) {
    Rng rng = labeled_stream(cfg.seed, "train-data/" + dataset);
    if (dataset == "checkerboard") return checkerboard_sample(cfg.checkerboard, cfg.train_size, rng);
    if (dataset == "banana") return banana_sample(cfg.banana, cfg.train_size, rng);
    throw ValidationError("unknown dataset " + dataset);
}

std::shared_ptr<const DenoiserNet> load_or_train_data2d(const ExperimentConfig& cfg, const std::string& dataset,
                                                        std::ostream* log) {
    const json key = data2d_net_key(cfg, dataset);
    const fs::path path = cache_dir() / ("net-" + hex_digest(config_hash(key)) + ".ppra");
    PointCloud data = fs::exists(path) ? PointCloud() : data2d_training_set(cfg, dataset);
    return load_or_train(key, data, effective_net(cfg), cfg.train, cfg.seed ^ fnv1a(dataset), {}, log);
}

std::vector<ConstraintPtr> data2d_constraints(const ExperimentConfig& cfg, const std::string& dataset) {
    std::vector<ConstraintPtr> out;
    for (int i = 0; i < cfg.num_constraints; ++i) {
        Rng rng = labeled_stream(cfg.seed, "grf/" + dataset + "/" + std::to_string(i));
        out.push_back(std::make_shared<GrfConstraint>(grf_sample(cfg.grf, rng)));
    }
    return out;
}

PointCloud load_or_build_oracle(const ExperimentConfig& cfg, const std::string& dataset, const DenoiserNet& net,
                                const Constraint& constraint, std::ostream* log) {
    SamplerConfig prior_cfg = cfg.sampler;
    prior_cfg.snapshot_steps.clear();
    const json key = {{"kind", "oracle"},
                      {"net", hex_digest(config_hash(data2d_net_key(cfg, dataset)))},
                      {"constraint", hex_digest(constraint_hash(constraint))},
                      {"oracle", cfg.oracle.to_json()},
                      {"prior", prior_cfg.to_json()},
                      {"seed", cfg.seed}};
    const fs::path path = cache_dir() / ("oracle-" + hex_digest(config_hash(key)) + ".ppra");
    if (fs::exists(path)) {
        note(log, "oracle cache hit " + path.string());
        return ArrayFile::read(path.string()).matrix("cloud");
    }
    PriorSampler prior = [&](int n, Rng& rng) { return pc_sample(net, prior_cfg, n, rng).cloud; };
    Rng rng = labeled_stream(cfg.seed, "oracle/" + hex_digest(constraint_hash(constraint)));
    OracleResult res = rejection_sample(prior, constraint, cfg.oracle, rng);
    note(log, "oracle built: " + std::to_string(res.accepted) + "/" + std::to_string(res.proposals) + " accepted");
    ArrayFile f;
    f.meta = key;
    f.meta["proposals"] = res.proposals;
    f.meta["accepted"] = res.accepted;
    f.put("cloud", Matrix(res.cloud));
    fs::create_directories(path.parent_path());
    f.write(path.string());
    return res.cloud;
}

KsDataset load_or_build_ks_dataset(const ExperimentConfig& cfg, std::ostream* log) {
    const json key = ks_dataset_key(cfg);
    const fs::path path = cache_dir() / ("ksdata-" + hex_digest(config_hash(key)) + ".ppra");
    KsDataset ds;
    if (fs::exists(path)) {
        note(log, "ks dataset cache hit " + path.string());
        ArrayFile f = ArrayFile::read(path.string());
        ds.mean = f.meta.at("mean").get<double>();
        ds.std = f.meta.at("std").get<double>();
        const Matrix cloud = f.matrix("cloud");
        for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
            Trajectory t;
            t.values = Eigen::Map<const Matrix>(cloud.row(i).data(), cfg.ks_rows, cfg.ks_cols);
            t.dt = f.meta.at("dt").get<double>();
            t.dx = f.meta.at("dx").get<double>();
            ds.trajectories.push_back(std::move(t));
        }
        return ds;
    }
    note(log, "solving " + std::to_string(cfg.ks_train_count) + " KS trajectories");
    Rng rng = labeled_stream(cfg.seed, "ks-data");
    ds = prepare_ks_dataset(cfg.ks_train_count, cfg.ks, cfg.ks_rows, cfg.ks_cols, rng);
    ArrayFile f;
    f.meta = key;
    f.meta["mean"] = ds.mean;
    f.meta["std"] = ds.std;
    f.meta["dt"] = ds.trajectories.front().dt;
    f.meta["dx"] = ds.trajectories.front().dx;
    f.put("cloud", Matrix(ds.as_cloud()));
    fs::create_directories(path.parent_path());
    f.write(path.string());
    return ds;
}

std::shared_ptr<const DenoiserNet> load_or_train_ks(const ExperimentConfig& cfg, std::ostream* log) {
    const json key = {{"kind", "ks-net"},
                      {"data", hex_digest(config_hash(ks_dataset_key(cfg)))},
                      {"net", net_to_json(cfg.net)},
                      {"train", train_to_json(cfg.train)},
                      {"seed", cfg.seed}};
    const fs::path path = cache_dir() / ("net-" + hex_digest(config_hash(key)) + ".ppra");
    PointCloud data;
    if (!fs::exists(path)) data = load_or_build_ks_dataset(cfg, log).as_cloud();
    const int rows = cfg.ks_rows, cols = cfg.ks_cols;
    // Periodic domain: random circular shifts in space are exact symmetries.
    BatchAugment shift = [rows, cols](Matrix& batch, Rng& rng) {
        Eigen::RowVectorXd tmp(cols);
        for (Eigen::Index b = 0; b < batch.rows(); ++b) {
            const int s = int(rng.integer(0, cols - 1));
            if (s == 0) continue;
            for (int r = 0; r < rows; ++r) {
                auto seg = batch.row(b).segment(Eigen::Index(r) * cols, cols);
                for (int c = 0; c < cols; ++c) tmp((c + s) % cols) = seg(c);
                seg = tmp;
            }
        }
    };
    return load_or_train(key, data, effective_net(cfg), cfg.train, cfg.seed ^ fnv1a("ks"), shift, log);
}

void set_baseline_param(SamplerConfig& s, Method m, double v) {
    switch (m) {
        case Method::Dps: s.dps_zeta = v; break;
        case Method::X0Proj: s.x0proj_lr = v; break;
        case Method::XtProj: s.xtproj_lr = v; break;
        default: break;
    }
}

namespace {
double current_baseline_param(const SamplerConfig& s, Method m) {
    switch (m) {
        case Method::Dps: return s.dps_zeta;
        case Method::X0Proj: return s.x0proj_lr;
        case Method::XtProj: return s.xtproj_lr;
        default: return kNaN;
    }
}
}  // namespace

double tune_baseline(Method method, const DenoiserNet& net, const Constraint& constraint, const ExperimentConfig& cfg,
                     int n, std::uint64_t seed) {
    const std::vector<double>* grid = nullptr;
    switch (method) {
        case Method::Dps: grid = &cfg.tune.dps_zeta; break;
        case Method::X0Proj: grid = &cfg.tune.x0proj_lr; break;
        case Method::XtProj: grid = &cfg.tune.xtproj_lr; break;
        default: return kNaN;
    }
    if (!cfg.tune.enabled || grid->empty()) return current_baseline_param(cfg.sampler, method);
    double best = grid->front(), best_score = kInf;
    for (double v : *grid) {
        SamplerConfig s = cfg.sampler;
        s.snapshot_steps.clear();
        set_baseline_param(s, method, v);
        Rng rng = labeled_stream(seed, "tune");
        const double score = tuning_score(run_method(method, net, constraint, s, n, rng));
        if (score < best_score) {
            best_score = score;
            best = v;
        }
    }
    return best;
}

// ---------------------------------------------------------------- run

namespace {

Report run_data2d(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log) {
    Report report;
    const auto& sched = cfg.sampler.schedule;
    for (const auto& dataset : cfg.datasets) {
        auto net = load_or_train_data2d(cfg, dataset, log);
        auto constraints = data2d_constraints(cfg, dataset);
        for (std::size_t ci = 0; ci < constraints.size(); ++ci) {
            const Constraint& c = *constraints[ci];
            const std::string tag = dataset + "/" + std::to_string(ci);
            PointCloud oracle = load_or_build_oracle(cfg, dataset, *net, c, log);
            std::map<int, PointCloud> reference;
            for (int step : cfg.sampler.snapshot_steps) {
                Rng r = labeled_stream(cfg.seed, tag + "/marginal/" + std::to_string(step));
                reference[step] = step == 0 ? oracle : marginal_cloud(oracle, sched.sigma(step), r);
            }
            for (Method m : cfg.methods) {
                SamplerConfig s = cfg.sampler;
                const double param = tune_baseline(m, *net, c, cfg, cfg.tune.samples, cfg.seed ^ fnv1a(tag));
                if (std::isfinite(param)) set_baseline_param(s, m, param);
                Rng rng = labeled_stream(cfg.seed, tag + "/sample");
                SampleRun run = run_method(m, *net, c, s, cfg.num_samples, rng);

                Data2dRow row;
                row.dataset = dataset;
                row.constraint_id = int(ci);
                row.method = to_string(m);
                row.param = param;
                row.failures = run.failure_count();
                row.seconds = run.seconds;
                row.violation = violation_stats(finite_values(run.violation));
                Rng metric_rng = labeled_stream(cfg.seed, tag + "/metric/" + row.method);
                for (const auto& [step, ref] : reference) {
                    const PointCloud cloud = finite_rows(run.snapshots.at(step));
                    const int sub = int(std::min<Eigen::Index>({cfg.metrics.subsample, cloud.rows(), ref.rows()}));
                    row.cross_edge[step] = sub > cfg.metrics.k
                                               ? knn_cross_edge_rate(cloud, ref, cfg.metrics.k, sub,
                                                                     cfg.metrics.repeats, metric_rng)
                                               : kNaN;
                }
                const PointCloud fin = finite_rows(run.cloud);
                const Eigen::Index sp = std::min<Eigen::Index>({cfg.metrics.sinkhorn_points, fin.rows(), oracle.rows()});
                row.sinkhorn = sp > 0 ? sinkhorn_divergence(subsample_rows(fin, sp, metric_rng),
                                                            subsample_rows(oracle, sp, metric_rng))
                                            .divergence
                                      : kNaN;
                note(log, tag + " " + row.method + ": median violation " + std::to_string(row.violation.median) +
                              ", sinkhorn " + std::to_string(row.sinkhorn) + ", " + std::to_string(run.seconds) + " s");
                if (!out.empty())
                    save_run(run, out / "samples" / (dataset + "-c" + std::to_string(ci) + "-" + row.method + ".ppra"),
                             {{"method", row.method}, {"dataset", dataset}, {"constraint", c.to_json()},
                              {"config_hash", hex_digest(config_hash(cfg.to_json()))}});
                report.data2d.push_back(std::move(row));
            }
        }
    }
    return report;
}

KsRow ks_method_row(Method m, const std::string& name, const DenoiserNet& net,
                    const std::vector<std::shared_ptr<ObservationConstraint>>& constraints, const Matrix& truths,
                    const ExperimentConfig& cfg, const SamplerConfig& s, double param) {
    KsRow row;
    row.method = name;
    row.param = param;
    std::vector<double> violations;
    std::vector<Matrix> ensembles;
    std::vector<Eigen::Index> kept_cases;
    double cmean = 0.0, cmax = 0.0;
    long counted = 0;
    for (std::size_t k = 0; k < constraints.size(); ++k) {
        Rng rng = labeled_stream(cfg.seed, "ks/case/" + std::to_string(k));
        SampleRun run = run_method(m, net, *constraints[k], s, cfg.ensemble_size, rng);
        row.failures += run.failure_count();
        row.seconds += run.seconds;
        bool all_ok = true;
        for (Eigen::Index i = 0; i < run.cloud.rows(); ++i) {
            if (run.failed[std::size_t(i)] || !run.cloud.row(i).allFinite()) {
                all_ok = false;
                continue;
            }
            violations.push_back(run.violation(i));
            const Matrix field = Eigen::Map<const Matrix>(run.cloud.row(i).data(), cfg.ks_rows, cfg.ks_cols);
            const ContinuityScore cs = continuity_norms(field);
            cmean += cs.mean_step_norm;
            cmax += cs.max_step_norm;
            ++counted;
        }
        if (all_ok) {
            ensembles.push_back(run.cloud);
            kept_cases.push_back(Eigen::Index(k));
        }
    }
    row.violation = violation_stats(violations.empty() ? Vec::Constant(1, kInf)
                                                       : Vec(Eigen::Map<Vec>(violations.data(), Eigen::Index(violations.size()))));
    row.continuity_mean = counted ? cmean / double(counted) : kNaN;
    row.continuity_max = counted ? cmax / double(counted) : kNaN;
    if (!ensembles.empty()) {
        Matrix t(Eigen::Index(kept_cases.size()), truths.cols());
        for (std::size_t i = 0; i < kept_cases.size(); ++i) t.row(Eigen::Index(i)) = truths.row(kept_cases[i]);
        row.ensemble = ensemble_scores(ensembles, t);
    } else {
        row.ensemble.skill = row.ensemble.spread = row.ensemble.crps = row.ensemble.ratio = kNaN;
    }
    return row;
}

Report run_ks(const ExperimentConfig& cfg, std::ostream* log) {
    Report report;
    auto net = load_or_train_ks(cfg, log);
    SamplerConfig s = cfg.sampler;
    s.snapshot_steps.clear();
    Rng test_rng = labeled_stream(cfg.seed, "ks/test");
    const Matrix truths = pc_sample(*net, s, cfg.test_count, test_rng).cloud;
    const auto idx = row_indices(cfg.observed_rows, cfg.ks_cols);
    std::vector<std::shared_ptr<ObservationConstraint>> constraints;
    for (Eigen::Index k = 0; k < truths.rows(); ++k)
        constraints.push_back(std::make_shared<ObservationConstraint>(
            ObservationConstraint::from_truth(cfg.observation_map, idx, truths.row(k).transpose())));

    KsRow prior = ks_method_row(Method::Pc, "pc", *net, constraints, truths, cfg, s, kNaN);
    note(log, "ks pc: continuity max " + std::to_string(prior.continuity_max));
    report.ks.push_back(prior);
    for (Method m : cfg.methods) {
        if (m == Method::Pc) continue;
        SamplerConfig ms = s;
        const double param = tune_baseline(m, *net, *constraints.front(), cfg, cfg.ensemble_size, cfg.seed ^ fnv1a("ks"));
        if (std::isfinite(param)) set_baseline_param(ms, m, param);
        KsRow row = ks_method_row(m, to_string(m), *net, constraints, truths, cfg, ms, param);
        note(log, "ks " + row.method + ": median violation " + std::to_string(row.violation.median) +
                      ", continuity max " + std::to_string(row.continuity_max) + ", crps " +
                      std::to_string(row.ensemble.crps));
        report.ks.push_back(std::move(row));
    }
    return report;
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log) {
    cfg.validate();
    json manifest = {{"config_hash", hex_digest(config_hash(cfg.to_json()))}, {"stages_completed", json::array()}};
    auto mark = [&](const std::string& stage) {
        manifest["stages_completed"].push_back(stage);
        if (!out.empty()) std::ofstream(out / "manifest.json") << manifest.dump(2) << "\n";
    };
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream(out / "config.json") << cfg.to_json().dump(2) << "\n";
        mark("config");
    }
    Report report = cfg.kind == ExperimentKind::Data2d ? run_data2d(cfg, out, log) : run_ks(cfg, log);
    if (!out.empty()) {
        mark("sample");
        write_report(report, out);
        mark("score");
    }
    return report;
}

AblationAxis ablation_axis_from_string(const std::string& s) {
    if (s == "renoise_M") return AblationAxis::RenoiseM;
    if (s == "correct_N") return AblationAxis::CorrectN;
    if (s == "proj_steps") return AblationAxis::ProjSteps;
    throw ValidationError("unknown ablation axis: " + s);
}

std::string to_string(AblationAxis a) {
    switch (a) {
        case AblationAxis::RenoiseM: return "renoise_M";
        case AblationAxis::CorrectN: return "correct_N";
        case AblationAxis::ProjSteps: return "proj_steps";
    }
    return "?";
}

std::vector<std::pair<double, Report>> ablate(const ExperimentConfig& cfg, AblationAxis axis,
                                              const std::vector<double>& values, const fs::path& out,
                                              std::ostream* log) {
    if (values.empty()) throw ValidationError("ablate: empty values list");
    std::vector<ExperimentConfig> runs;
    for (double v : values) {
        if (v < 0 || v != std::floor(v)) throw ValidationError("ablate: values must be nonnegative integers");
        ExperimentConfig c = cfg;
        c.methods = {Method::Ppr};
        switch (axis) {
            case AblationAxis::RenoiseM:
                c.sampler.inner_steps = int(v);
                c.sampler.allow_zero_inner = true;
                break;
            case AblationAxis::CorrectN: c.sampler.correct_steps = int(v); break;
            case AblationAxis::ProjSteps: c.sampler.projection.max_iters = int(v); break;
        }
        c.validate();
        runs.push_back(std::move(c));
    }
    std::vector<std::pair<double, Report>> results;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        note(log, "ablation " + to_string(axis) + "=" + std::to_string(values[i]));
        const fs::path sub = out.empty() ? fs::path() : out / (to_string(axis) + "=" + std::to_string(int(values[i])));
        results.emplace_back(values[i], run_experiment(runs[i], sub, log));
    }
    if (!out.empty()) {
        std::ofstream csv(out / "ablation.csv");
        csv << std::setprecision(10);
        csv << "axis,value,dataset,constraint,method,median,q25,q75,max,cross_edge_dist,sinkhorn,continuity_max,crps\n";
        for (const auto& [v, rep] : results) {
            for (const auto& r : rep.data2d) {
                double dist = 0.0;
                for (const auto& [step, rate] : r.cross_edge) dist += std::abs(rate - 0.5);
                if (!r.cross_edge.empty()) dist /= double(r.cross_edge.size());
                csv << to_string(axis) << ',' << v << ',' << r.dataset << ',' << r.constraint_id << ',' << r.method
                    << ',' << r.violation.median << ',' << r.violation.q25 << ',' << r.violation.q75 << ','
                    << r.violation.max << ',' << dist << ',' << r.sinkhorn << ",,\n";
            }
            for (const auto& r : rep.ks)
                csv << to_string(axis) << ',' << v << ",ks,," << r.method << ',' << r.violation.median << ','
                    << r.violation.q25 << ',' << r.violation.q75 << ',' << r.violation.max << ",,,"
                    << r.continuity_max << ',' << r.ensemble.crps << '\n';
        }
    }
    return results;
}

}  // namespace ppr

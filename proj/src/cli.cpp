#include "qflair/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qflair/error.hpp"
#include "qflair/flair.hpp"
#include "qflair/rng.hpp"

namespace qflair::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t parse_shots(const std::string& s) {
    if (s == "exact") return 0;
    try {
        const unsigned long v = std::stoul(s);
        if (v == 0) throw ConfigError("--shots must be 'exact' or a positive count");
        return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("--shots must be 'exact' or a positive count");
    }
}

std::size_t parse_batch(const std::string& s) {
    if (s == "full") return 0;
    try {
        const unsigned long v = std::stoul(s);
        if (v == 0) throw ConfigError("--batch must be 'full' or a positive size");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("--batch must be 'full' or a positive size");
    }
}

TrainMode parse_mode(const std::string& s) {
    if (s == "full") return TrainMode::Full;
    if (s == "ablate-gate") return TrainMode::AblateGate;
    if (s == "ablate-feature") return TrainMode::AblateFeature;
    if (s == "ablate-weight") return TrainMode::AblateWeight;
    if (s == "traditional") return TrainMode::Traditional;
    throw ConfigError("unknown mode '" + s + "'");
}

PoolProfile parse_pool(const std::string& s) {
    if (s == "qnn") return PoolProfile::Qnn;
    if (s == "qsvm-sim") return PoolProfile::QsvmSim;
    if (s == "qsvm-hw") return PoolProfile::QsvmHw;
    throw ConfigError("unknown pool '" + s + "'");
}

KernelRepair parse_repair(const std::string& s) {
    if (s == "none") return KernelRepair::None;
    if (s == "diag") return KernelRepair::DiagonalShift;
    if (s == "clip") return KernelRepair::EigenClip;
    throw ConfigError("unknown repair mode '" + s + "'");
}

std::string default_mnist_dir() {
    if (const char* env = std::getenv("QFLAIR_MNIST_DIR")) return env;
    return "data/mnist";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

struct TrainFlags {
    std::string data;
    std::string out = "qflair-run";
    std::string mnist_dir = default_mnist_dir();
    std::uint64_t seed = 0;
    std::string shots = "exact";
    std::string pool;  // empty = default for the model
    std::string mode = "full";
    std::string batch = "full";
    double delta_l = 1e-3;
    int max_gates = 200;
    int qubit_cap = 10;
    std::string probe = "all";
    int grid_points = 201;
    std::size_t test_cap = 0;
    std::size_t train_n = 0;
    std::size_t test_n = 0;
    bool no_trace_acc = false;
    std::string repair = "none";
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--data", f.data, "dataset directory or mnist name")->required();
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--mnist-dir", f.mnist_dir, "directory with MNIST IDX files");
    cmd->add_option("--seed", f.seed, "root seed");
    cmd->add_option("--shots", f.shots, "'exact' or shot count (e.g. 1024)");
    cmd->add_option("--pool", f.pool, "qnn | qsvm-sim | qsvm-hw");
    cmd->add_option("--mode", f.mode,
                    "full | ablate-gate | ablate-feature | ablate-weight | traditional");
    cmd->add_option("--batch", f.batch, "'full' or mini-batch size");
    cmd->add_option("--delta-l", f.delta_l, "convergence threshold on loss improvement");
    cmd->add_option("--max-gates", f.max_gates, "gate budget");
    cmd->add_option("--qubit-cap", f.qubit_cap, "maximum number of qubits");
    cmd->add_option("--probe", f.probe, "all | restricted (qubit placement policy)");
    cmd->add_option("--grid-points", f.grid_points, "theta grid size for the weight search");
    cmd->add_option("--test-cap", f.test_cap, "cap test points in per-iteration metrics (0 = all)");
    cmd->add_option("--train-n", f.train_n, "truncate training set (0 = default)");
    cmd->add_option("--test-n", f.test_n, "truncate test set (0 = default)");
    cmd->add_flag("--no-trace-acc", f.no_trace_acc, "skip per-iteration accuracy evaluation");
    cmd->add_option("--repair", f.repair, "kernel repair: none | diag | clip");
}

TrainConfig to_config(const TrainFlags& f) {
    TrainConfig cfg;
    cfg.seed = f.seed;
    cfg.shots = parse_shots(f.shots);
    cfg.mode = parse_mode(f.mode);
    cfg.batch_size = parse_batch(f.batch);
    cfg.delta_l = f.delta_l;
    cfg.max_gates = f.max_gates;
    cfg.qubit_cap = f.qubit_cap;
    if (f.probe == "all") {
        cfg.probe_policy = ProbePolicy::AllQubits;
    } else if (f.probe == "restricted") {
        cfg.probe_policy = ProbePolicy::Restricted;
    } else {
        throw ConfigError("--probe must be 'all' or 'restricted'");
    }
    cfg.grid_points = f.grid_points;
    cfg.test_cap = f.test_cap;
    cfg.eval_accuracy_each_iteration = !f.no_trace_acc;
    cfg.repair = parse_repair(f.repair);
    return cfg;
}

json config_manifest(const TrainFlags& f, const std::string& model) {
    json j;
    j["model"] = model;
    j["data"] = f.data;
    j["seed"] = f.seed;
    j["shots"] = f.shots;
    j["pool"] = f.pool;
    j["mode"] = f.mode;
    j["batch"] = f.batch;
    j["delta_l"] = f.delta_l;
    j["max_gates"] = f.max_gates;
    j["qubit_cap"] = f.qubit_cap;
    j["probe"] = f.probe;
    j["grid_points"] = f.grid_points;
    j["test_cap"] = f.test_cap;
    j["train_n"] = f.train_n;
    j["test_n"] = f.test_n;
    j["repair"] = f.repair;
    return j;
}

// --- gen-data -----------------------------------------------------------------

struct GenFlags {
    std::string generator;
    std::size_t n = 1000;
    int d = 10;
    std::uint64_t seed = 0;
    std::string out = "dataset";
    double margin = 0.3;
    int curvature = 3;
    double separation = 0.55;
    double noise_sigma = 0.2;
    std::string mnist_dir = default_mnist_dir();
};

int cmd_gen_data(const GenFlags& f) {
    Dataset all;
    json params;
    if (f.generator == "linsep") {
        all = gen_linearly_separable(f.d, 2 * f.n, f.margin, f.seed);
        params["margin"] = f.margin;
        params["d"] = f.d;
    } else if (f.generator == "two-curves") {
        all = gen_two_curves(f.d, 2 * f.n, f.curvature, f.separation, f.seed);
        params["curvature"] = f.curvature;
        params["separation"] = f.separation;
        params["d"] = f.d;
    } else if (f.generator == "bars-stripes") {
        all = gen_bars_stripes(2 * f.n, f.noise_sigma, f.seed);
        params["noise_sigma"] = f.noise_sigma;
    } else if (f.generator == "mnist-pca") {
        auto [train, test] = resolve_dataset("mnistpca", f.mnist_dir, 0, 0);
        fs::create_directories(f.out);
        write_dataset_csv((fs::path(f.out) / "train.csv").string(), train);
        write_dataset_csv((fs::path(f.out) / "test.csv").string(), test);
        json manifest;
        manifest["generator"] = f.generator;
        manifest["n_train"] = train.n;
        manifest["n_test"] = test.n;
        manifest["d"] = train.d;
        write_text(fs::path(f.out) / "manifest.json", manifest.dump(2));
        std::printf("wrote %s (train %zu, test %zu, d=%zu)\n", f.out.c_str(), train.n, test.n,
                    train.d);
        return 0;
    } else {
        throw ConfigError("unknown generator '" + f.generator +
                          "' (expected linsep | two-curves | bars-stripes | mnist-pca)");
    }

    const Dataset train = subset(all, 0, f.n);
    const Dataset test = subset(all, f.n, f.n);
    fs::create_directories(f.out);
    write_dataset_csv((fs::path(f.out) / "train.csv").string(), train);
    write_dataset_csv((fs::path(f.out) / "test.csv").string(), test);

    json manifest;
    manifest["generator"] = f.generator;
    manifest["seed"] = f.seed;
    manifest["n_train"] = f.n;
    manifest["n_test"] = f.n;
    manifest["d"] = train.d;
    manifest["params"] = params;
    write_text(fs::path(f.out) / "manifest.json", manifest.dump(2));
    std::printf("wrote %s (train %zu, test %zu, d=%zu)\n", f.out.c_str(), train.n, test.n,
                train.d);
    return 0;
}

}  // namespace

std::pair<Dataset, Dataset> resolve_dataset(const std::string& name_or_path,
                                            const std::string& mnist_dir,
                                            std::size_t train_n, std::size_t test_n) {
    if (name_or_path.rfind("mnist", 0) == 0) {
        const std::string variant = name_or_path.substr(5);
        std::pair<int, int> digits{3, 5};
        int pool = 1;
        bool pca = false;
        if (variant == "01") {
            digits = {0, 1};
        } else if (variant == "35" || variant == "28x28" || variant.empty()) {
            // defaults
        } else if (variant == "14x14") {
            pool = 2;
        } else if (variant == "7x7") {
            pool = 4;
        } else if (variant == "pca") {
            pca = true;
        } else {
            throw ConfigError("unknown mnist variant '" + name_or_path + "'");
        }
        const fs::path dir(mnist_dir);
        const std::string train_images = (dir / "train-images-idx3-ubyte").string();
        const std::string train_labels = (dir / "train-labels-idx1-ubyte").string();
        const std::string test_images = (dir / "t10k-images-idx3-ubyte").string();
        const std::string test_labels = (dir / "t10k-labels-idx1-ubyte").string();
        if (!fs::exists(train_images)) {
            throw DataError("MNIST IDX files not found under '" + mnist_dir +
                            "' (see README for how to provide them)");
        }
        const std::size_t want_train = train_n == 0 ? (pca ? 0 : 1000) : train_n;
        const std::size_t want_test = test_n;
        Dataset train = load_mnist_idx(train_images, train_labels, digits, nullptr, pool,
                                       pca ? 0 : want_train);
        Dataset test =
            load_mnist_idx(test_images, test_labels, digits, &train.norm, pool, want_test);
        if (pca) {
            const PcaTransform t = pca_fit(train.x, train.n, train.d, 10);
            Dataset ptrain;
            ptrain.name = "mnistpca";
            ptrain.n = train.n;
            ptrain.d = 10;
            ptrain.x = pca_apply(t, train.x, train.n);
            ptrain.y = train.y;
            Dataset ptest;
            ptest.name = "mnistpca";
            ptest.n = test.n;
            ptest.d = 10;
            ptest.x = pca_apply(t, test.x, test.n);
            ptest.y = test.y;
            normalize_features(ptrain, ptest);
            if (want_train > 0 && want_train < ptrain.n) ptrain = subset(ptrain, 0, want_train);
            return {std::move(ptrain), std::move(ptest)};
        }
        train.name = name_or_path;
        test.name = name_or_path;
        return {std::move(train), std::move(test)};
    }

    const fs::path dir(name_or_path);
    const fs::path train_csv = dir / "train.csv";
    const fs::path test_csv = dir / "test.csv";
    if (!fs::exists(train_csv) || !fs::exists(test_csv)) {
        throw DataError("dataset directory '" + name_or_path + "' needs train.csv and test.csv");
    }
    Dataset train = read_dataset_csv(train_csv.string());
    Dataset test = read_dataset_csv(test_csv.string());
    if (train_n > 0 && train_n < train.n) train = subset(train, 0, train_n);
    if (test_n > 0 && test_n < test.n) test = subset(test, 0, test_n);
    return {std::move(train), std::move(test)};
}

namespace {

int cmd_train(const std::string& model_name, const TrainFlags& f) {
    const ModelType type = model_name == "qnn" ? ModelType::Qnn : ModelType::Qsvm;
    const TrainConfig cfg = to_config(f);
    const std::string pool_name =
        f.pool.empty() ? (type == ModelType::Qnn ? "qnn" : "qsvm-sim") : f.pool;
    const GatePool pool = GatePool::standard(parse_pool(pool_name));

    auto [train_data, test_data] = resolve_dataset(f.data, f.mnist_dir, f.train_n, f.test_n);
    train_data.validate();
    test_data.validate();

    const TrainResult result = train(type, train_data, test_data, pool, cfg);

    fs::create_directories(f.out);
    write_text(fs::path(f.out) / "circuit.json",
               serialize_circuit(result.model.circuit, result.model.meta));
    write_metrics_csv((fs::path(f.out) / "metrics.csv").string(), result.trace);
    json manifest = config_manifest(f, model_name);
    manifest["pool"] = pool_name;
    manifest["iterations"] = result.iterations;
    manifest["converged"] = result.converged;
    manifest["final_train_bal_acc"] = result.final_train_bal_acc;
    manifest["final_test_bal_acc"] = result.final_test_bal_acc;
    manifest["total_evals"] = result.total_evals;
    write_text(fs::path(f.out) / "manifest.json", manifest.dump(2));

    std::printf("gates=%zu qubits=%d iterations=%d evals=%llu\n",
                result.model.circuit.gates.size(), result.model.circuit.num_qubits,
                result.iterations, static_cast<unsigned long long>(result.total_evals));
    std::printf("train_bal_acc=%.6f test_bal_acc=%.6f\n", result.final_train_bal_acc,
                result.final_test_bal_acc);
    return 0;
}

int cmd_eval(const std::string& circuit_path, const std::string& data, const TrainFlags& f) {
    std::ifstream in(circuit_path);
    if (!in) throw DataError("cannot open " + circuit_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const ParsedModel parsed = parse_circuit(text);

    auto [train_data, test_data] = resolve_dataset(data, f.mnist_dir, f.train_n, f.test_n);
    const std::uint32_t shots = parse_shots(f.shots);
    ShotSampler sampler(shots, derive_seed(f.seed, "eval"));
    ShotSampler* sp = shots == 0 ? nullptr : &sampler;

    double train_acc = 0.0;
    double test_acc = 0.0;
    if (std::holds_alternative<QnnMeta>(parsed.meta)) {
        const QnnModel model{parsed.circuit, std::get<QnnMeta>(parsed.meta).threshold_b};
        train_acc = evaluate_qnn(model, train_data, sp);
        test_acc = evaluate_qnn(model, test_data, sp);
    } else {
        const auto& meta = std::get<QsvmMeta>(parsed.meta);
        train_acc = evaluate_qsvm(parsed.circuit, meta, train_data, sp);
        test_acc = evaluate_qsvm(parsed.circuit, meta, test_data, sp);
    }
    std::printf("train_bal_acc=%.6f test_bal_acc=%.6f\n", train_acc, test_acc);
    return 0;
}

int cmd_ablate(const std::string& model_name, const TrainFlags& f, int reps) {
    if (reps < 1) throw ConfigError("--reps must be >= 1");
    const TrainConfig base_cfg = to_config(f);
    if (base_cfg.mode == TrainMode::Full) {
        // the command aggregates randomized modes, but a full-mode baseline
        // aggregate is allowed too
    }
    const ModelType type = model_name == "qnn" ? ModelType::Qnn : ModelType::Qsvm;
    const std::string pool_name =
        f.pool.empty() ? (type == ModelType::Qnn ? "qnn" : "qsvm-sim") : f.pool;
    const GatePool pool = GatePool::standard(parse_pool(pool_name));

    auto [train_data, test_data] = resolve_dataset(f.data, f.mnist_dir, f.train_n, f.test_n);
    train_data.validate();
    test_data.validate();

    fs::create_directories(f.out);
    std::FILE* summary = std::fopen((fs::path(f.out) / "summary.csv").string().c_str(), "w");
    if (!summary) throw DataError("cannot write summary.csv");
    std::fprintf(summary, "rep,seed,gates,final_train_loss,train_bal_acc,test_bal_acc,evals_total\n");

    double mean_train = 0.0, mean_test = 0.0, mean_loss = 0.0;
    std::vector<double> test_accs;
    for (int rep = 0; rep < reps; ++rep) {
        TrainConfig cfg = base_cfg;
        cfg.seed = derive_seed(f.seed, "ablate-rep", static_cast<std::uint64_t>(rep));
        const TrainResult r = train(type, train_data, test_data, pool, cfg);
        write_metrics_csv(
            (fs::path(f.out) / ("metrics_rep" + std::to_string(rep) + ".csv")).string(), r.trace);
        std::fprintf(summary, "%d,%llu,%zu,%.12g,%.12g,%.12g,%llu\n", rep,
                     static_cast<unsigned long long>(cfg.seed), r.model.circuit.gates.size(),
                     r.final_train_loss, r.final_train_bal_acc, r.final_test_bal_acc,
                     static_cast<unsigned long long>(r.total_evals));
        mean_train += r.final_train_bal_acc;
        mean_test += r.final_test_bal_acc;
        mean_loss += r.final_train_loss;
        test_accs.push_back(r.final_test_bal_acc);
    }
    mean_train /= reps;
    mean_test /= reps;
    mean_loss /= reps;
    double var = 0.0;
    for (double a : test_accs) var += (a - mean_test) * (a - mean_test);
    const double stddev = reps > 1 ? std::sqrt(var / (reps - 1)) : 0.0;
    std::fprintf(summary, "mean,,,%.12g,%.12g,%.12g,\n", mean_loss, mean_train, mean_test);
    std::fprintf(summary, "stddev,,,,,%.12g,\n", stddev);
    std::fclose(summary);
    std::printf("mode=%s reps=%d mean_test_bal_acc=%.6f stddev=%.6f\n", f.mode.c_str(), reps,
                mean_test, stddev);
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) noexcept {
    try {
        CLI::App app{"Greedy quantum feature-map learning with analytic reconstructions"};
        app.require_subcommand(1);

        GenFlags gen;
        CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate benchmark datasets");
        gen_cmd->add_option("generator", gen.generator,
                            "linsep | two-curves | bars-stripes | mnist-pca")
            ->required();
        gen_cmd->add_option("--n", gen.n, "samples per split");
        gen_cmd->add_option("--d", gen.d, "feature dimension");
        gen_cmd->add_option("--seed", gen.seed, "generator seed");
        gen_cmd->add_option("--out", gen.out, "output directory");
        gen_cmd->add_option("--margin", gen.margin, "linsep margin");
        gen_cmd->add_option("--curvature", gen.curvature, "two-curves harmonics");
        gen_cmd->add_option("--separation", gen.separation, "two-curves class offset");
        gen_cmd->add_option("--noise-sigma", gen.noise_sigma, "bars-stripes pixel noise");
        gen_cmd->add_option("--mnist-dir", gen.mnist_dir, "MNIST IDX directory (mnist-pca)");

        TrainFlags tf;
        std::string train_model;
        CLI::App* train_cmd = app.add_subcommand("train", "train a model with Q-FLAIR");
        train_cmd->add_option("model", train_model, "qnn | qsvm")->required();
        add_train_flags(train_cmd, tf);

        TrainFlags ef;
        std::string eval_circuit;
        CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved circuit");
        eval_cmd->add_option("--circuit", eval_circuit, "circuit JSON file")->required();
        add_train_flags(eval_cmd, ef);  // reuses --data/--shots/--seed/--mnist-dir

        TrainFlags af;
        std::string ablate_model = "qnn";
        int reps = 10;
        CLI::App* ablate_cmd = app.add_subcommand("ablate", "repeat seeded ablation runs");
        ablate_cmd->add_option("--model", ablate_model, "qnn | qsvm");
        ablate_cmd->add_option("--reps", reps, "number of repetitions");
        add_train_flags(ablate_cmd, af);

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 1;
        }

        if (gen_cmd->parsed()) return cmd_gen_data(gen);
        if (train_cmd->parsed()) {
            if (train_model != "qnn" && train_model != "qsvm") {
                throw ConfigError("model must be qnn or qsvm");
            }
            return cmd_train(train_model, tf);
        }
        if (eval_cmd->parsed()) return cmd_eval(eval_circuit, ef.data, ef);
        if (ablate_cmd->parsed()) {
            if (ablate_model != "qnn" && ablate_model != "qsvm") {
                throw ConfigError("model must be qnn or qsvm");
            }
            return cmd_ablate(ablate_model, af, reps);
        }
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const TrainError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace qflair::cli

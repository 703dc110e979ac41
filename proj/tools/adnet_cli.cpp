#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adnet/checkpoint.hpp"
#include "adnet/kernels.hpp"
#include "adnet/op_count.hpp"
#include "adnet/parallel.hpp"
#include "adnet/trainer.hpp"
#include "adnet/verify_lab.hpp"

using namespace adnet;
namespace vf = adnet::verify;

namespace {

// --config loads first so explicit flags override file values
void add_config_options(CLI::App* cmd, TrainConfig& config, std::string& config_path) {
    cmd->add_option("--config", config_path, "flat key=value config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--backend", config.backend, "adder|conv|l2adder");
    cmd->add_option("--dataset", config.dataset, "mnist|blobs");
    cmd->add_option("--data-dir", config.data_dir, "dataset root (default $ADNET_DATA, then ./data)");
    cmd->add_option("--epochs", config.epochs);
    cmd->add_option("--batch-size", config.batch_size);
    cmd->add_option("--gamma0", config.gamma0, "initial global learning rate");
    cmd->add_option("--eta", config.eta, "adder local-rate hyper-parameter");
    cmd->add_option("--momentum", config.momentum);
    cmd->add_option("--weight-decay", config.weight_decay);
    cmd->add_option("--lr-mode", config.lr_mode, "alr|ilr|none");
    cmd->add_option("--ilr-factor", config.ilr_factor);
    cmd->add_option("--grad-rule", config.grad_rule, "full|sign filter-gradient rule");
    cmd->add_option("--seed", config.seed);
    cmd->add_flag("--replace-fc,!--no-replace-fc", config.replace_fc,
                  "use adder FC layers in the adder backend");
    cmd->add_option("--blobs-train", config.blobs_train);
    cmd->add_option("--blobs-test", config.blobs_test);
    cmd->add_option("--blobs-classes", config.blobs_classes);
    cmd->add_option("--out-dir", config.out_dir);
}

TrainConfig preload_config(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") return TrainConfig::from_file(argv[i + 1]);
    return TrainConfig{};
}

int run_probes(const std::vector<std::string>& selections, const std::string& jsonl_path) {
    std::vector<vf::ProbeReport> reports;
    auto selected = [&](const std::string& name) {
        if (selections.empty()) return true;
        for (const std::string& s : selections)
            if (s == name || s == "all") return true;
        return false;
    };
    if (selected("kernels")) reports.push_back(vf::kernel_oracle_probe(100, 2024));
    if (selected("gradcheck")) reports.push_back(vf::gradcheck_probe(20, 900));
    if (selected("affine")) reports.push_back(vf::affine_identity_probe(20, 901));
    if (selected("variance")) reports.push_back(vf::variance_claims_probe(200000, 902));
    if (selected("props")) reports.push_back(vf::propositions_probe());
    if (reports.empty()) {
        std::cerr << "no probes matched the selection\n";
        return 2;
    }

    bool all_pass = true;
    for (const vf::ProbeReport& r : reports) {
        std::cout << r.to_text();
        all_pass = all_pass && r.pass();
    }
    if (!jsonl_path.empty()) {
        std::ofstream out(jsonl_path, std::ios::trunc);
        for (const vf::ProbeReport& r : reports) out << r.to_json_line() << "\n";
    }
    std::cout << (all_pass ? "all probes passed\n" : "PROBE FAILURES PRESENT\n");
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adnet: multiplication-free (adder) network training engine"};
    app.require_subcommand(1);
    int threads = 0;
    std::string kernel_impl;
    app.add_option("--threads", threads, "worker thread count (0 = auto)");
    app.add_option("--kernel", kernel_impl, "force kernel variant: scalar|avx2");

    TrainConfig config;
    try {
        config = preload_config(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::string config_path, checkpoint_path, csv_path, jsonl_path;

    CLI::App* train = app.add_subcommand("train", "train LeNet-5-BN and write checkpoints");
    add_config_options(train, config, config_path);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the config's test split");
    add_config_options(eval, config, config_path);
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint to load")->required();

    CLI::App* count = app.add_subcommand("count-ops", "per-layer multiplication/addition counts");
    add_config_options(count, config, config_path);
    CountConvention convention;
    count->add_flag("!--no-fc", convention.include_fc, "exclude FC layers from totals");
    count->add_flag("!--no-first-last", convention.include_first_last,
                    "exclude the first/last weighted layers");
    count->add_flag("--include-bn", convention.include_bn, "count batch-norm ops");
    count->add_option("--csv", csv_path, "also write the table as CSV");
    LatencyModel latency;
    count->add_option("--mul-cycles", latency.mul_cycles);
    count->add_option("--add-cycles", latency.add_cycles);

    CLI::App* verify = app.add_subcommand("verify", "run the verification probes");
    std::vector<std::string> probes;
    verify->add_option("--probe", probes, "kernels|gradcheck|affine|variance|props|all")
        ->expected(-1);
    verify->add_option("--jsonl", jsonl_path, "write machine-readable probe records");

    CLI::App* stats = app.add_subcommand("weight-stats", "per-layer weight statistics");
    stats->add_option("--checkpoint", checkpoint_path)->required();
    stats->add_option("--csv", csv_path, "also write histograms as CSV");

    CLI::App* sweep = app.add_subcommand("eta-sweep", "train once per eta and tabulate accuracy");
    add_config_options(sweep, config, config_path);
    std::vector<double> etas{1.0, 0.5, 0.2, 0.1, 0.05};
    sweep->add_option("--etas", etas, "eta values to sweep")->expected(-1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (threads > 0) set_num_threads(threads);
        if (!kernel_impl.empty()) {
            if (kernel_impl == "scalar")
                kernels::set_active_impl(kernels::Impl::Scalar);
            else if (kernel_impl == "avx2")
                kernels::set_active_impl(kernels::Impl::Avx2);
            else
                throw std::invalid_argument("unknown kernel variant '" + kernel_impl + "'");
        }
        std::cerr << "kernel variant: " << kernels::impl_name(kernels::active_impl()) << ", "
                  << num_threads() << " thread(s)\n";

        if (train->parsed()) {
            config.validate();
            TrainResult r = cmd_train(config);
            std::printf("final test accuracy: %.4f\n", r.final_test_acc);
            std::printf("best test accuracy:  %.4f\n", r.best_test_acc);
            std::printf("metrics: %s\nfinal checkpoint: %s\nbest checkpoint: %s\n",
                        r.metrics_path.c_str(), r.final_checkpoint.c_str(),
                        r.best_checkpoint.c_str());
            return 0;
        }
        if (eval->parsed()) {
            const double acc = cmd_eval(checkpoint_path, config);
            std::printf("top-1 accuracy: %.4f\n", acc);
            return 0;
        }
        if (count->parsed()) {
            Network net = build_lenet5_bn(backend_from_string(config.backend), config.replace_fc);
            OpCountReport report = count_ops(net, convention);
            std::cout << report.to_text();
            std::printf("modeled latency (mul=%g, add=%g cycles/op): %.0f cycles/image\n",
                        latency.mul_cycles, latency.add_cycles, model_latency(report, latency));
            if (!csv_path.empty()) {
                std::ofstream out(csv_path, std::ios::trunc);
                out << report.to_csv();
            }
            return 0;
        }
        if (verify->parsed()) return run_probes(probes, jsonl_path);
        if (stats->parsed()) {
            auto rows = weight_stats(read_checkpoint_entries(checkpoint_path));
            std::cout << weight_stats_text(rows);
            if (!csv_path.empty()) {
                std::ofstream out(csv_path, std::ios::trunc);
                out << weight_stats_csv(rows);
            }
            return 0;
        }
        if (sweep->parsed()) {
            config.validate();
            auto rows = eta_sweep(config, etas);
            std::cout << eta_sweep_text(rows);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

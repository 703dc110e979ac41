#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adnet/data_io.hpp"
#include "adnet/model.hpp"

namespace adnet {

/// Flat key=value config with CLI overrides on top; unknown keys are errors.
struct TrainConfig {
    std::string backend = "adder";   // adder|conv|l2adder
    std::string dataset = "mnist";   // mnist|blobs
    std::string data_dir;            // defaults to $ADNET_DATA, then ./data
    int epochs = 50;
    int batch_size = 256;
    double gamma0 = 0.1;
    double eta = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::string lr_mode = "alr";     // alr|ilr|none
    double ilr_factor = 100.0;
    std::string grad_rule = "full";  // full|sign
    uint64_t seed = 1;
    bool replace_fc = true;
    int blobs_train = 4096;
    int blobs_test = 1024;
    int blobs_classes = 10;
    std::string out_dir = "out";

    static TrainConfig from_file(const std::string& path);
    void set_kv(const std::string& key, const std::string& value); // throws on unknown key
    void validate() const;
    std::string describe() const; // deterministic one-line JSON
    std::string resolved_data_dir() const;
};

struct DatasetPair {
    Dataset train, test;
};

/// mnist: IDX files (optionally .gz) under data_dir; blobs: synthetic.
DatasetPair load_datasets(const TrainConfig& config);

struct TrainResult {
    double final_test_acc = 0.0;
    double best_test_acc = 0.0;
    double final_train_loss = 0.0;
    std::string final_checkpoint, best_checkpoint, metrics_path;
};

/// Full training run: per-epoch cosine schedule, NAG step with the
/// per-layer adaptive rate, per-epoch metrics record (train loss, test
/// accuracy, last-batch filter-gradient norms and alpha values), best and
/// final checkpoints.  Byte-deterministic given (config, seed).
TrainResult cmd_train(const TrainConfig& config);

/// Top-1 accuracy with BN in eval mode.
double evaluate(Network& net, const Dataset& ds, int batch_size = 256);

/// Rebuilds the config's network, loads the checkpoint, evaluates the
/// config's test split.
double cmd_eval(const std::string& checkpoint_path, const TrainConfig& config);

struct WeightStatsRow {
    std::string name;
    int64_t count = 0;
    double mean = 0.0, stddev = 0.0, excess_kurtosis = 0.0;
    std::vector<int64_t> histogram; // 41 bins over mean +/- 4 std
};

std::vector<WeightStatsRow> weight_stats(const std::vector<std::pair<std::string, Tensor>>& entries);
std::string weight_stats_text(const std::vector<WeightStatsRow>& rows);
std::string weight_stats_csv(const std::vector<WeightStatsRow>& rows);

struct EtaSweepRow {
    double eta;
    double test_acc;
};

/// Trains one run per eta value (same seed/config otherwise).
std::vector<EtaSweepRow> eta_sweep(const TrainConfig& base, const std::vector<double>& etas);
std::string eta_sweep_text(const std::vector<EtaSweepRow>& rows);

} // namespace adnet

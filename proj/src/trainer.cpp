#include "adnet/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "adnet/checkpoint.hpp"
#include "adnet/optim.hpp"

namespace adnet {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config -------------------------------------------------------------------

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    TrainConfig config;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key=value, got '" + line + "'");
        auto trim = [](std::string s) {
            const size_t b = s.find_first_not_of(" \t\r");
            const size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        config.set_kv(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

void TrainConfig::set_kv(const std::string& key, const std::string& value) {
    auto to_int = [&](const std::string& v) { return std::stoi(v); };
    auto to_double = [&](const std::string& v) { return std::stod(v); };
    auto to_bool = [&](const std::string& v) {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw std::invalid_argument("boolean key '" + key + "' got '" + v + "'");
    };
    if (key == "backend") backend = value;
    else if (key == "dataset") dataset = value;
    else if (key == "data_dir") data_dir = value;
    else if (key == "epochs") epochs = to_int(value);
    else if (key == "batch_size") batch_size = to_int(value);
    else if (key == "gamma0") gamma0 = to_double(value);
    else if (key == "eta") eta = to_double(value);
    else if (key == "momentum") momentum = to_double(value);
    else if (key == "weight_decay") weight_decay = to_double(value);
    else if (key == "lr_mode") lr_mode = value;
    else if (key == "ilr_factor") ilr_factor = to_double(value);
    else if (key == "grad_rule") grad_rule = value;
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "replace_fc") replace_fc = to_bool(value);
    else if (key == "blobs_train") blobs_train = to_int(value);
    else if (key == "blobs_test") blobs_test = to_int(value);
    else if (key == "blobs_classes") blobs_classes = to_int(value);
    else if (key == "out_dir") out_dir = value;
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

void TrainConfig::validate() const {
    backend_from_string(backend);
    lr_mode_from_string(lr_mode);
    if (dataset != "mnist" && dataset != "blobs")
        throw std::invalid_argument("dataset must be mnist or blobs");
    if (grad_rule != "full" && grad_rule != "sign")
        throw std::invalid_argument("grad_rule must be full or sign");
    if (epochs < 1 || epochs > 100000) throw std::invalid_argument("epochs out of range");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 (BN needs it)");
    if (gamma0 <= 0.0) throw std::invalid_argument("gamma0 must be positive");
    if (lr_mode == "alr" && eta <= 0.0) throw std::invalid_argument("eta must be positive in ALR");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (ilr_factor <= 0.0) throw std::invalid_argument("ilr_factor must be positive");
    if (blobs_train < blobs_classes || blobs_test < blobs_classes || blobs_classes < 2)
        throw std::invalid_argument("blob dataset sizes out of range");
}

std::string TrainConfig::resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("ADNET_DATA")) return env;
    return "data";
}

std::string TrainConfig::describe() const {
    json j{{"record", "config"},
           {"backend", backend},
           {"dataset", dataset},
           {"epochs", epochs},
           {"batch_size", batch_size},
           {"gamma0", gamma0},
           {"eta", eta},
           {"momentum", momentum},
           {"weight_decay", weight_decay},
           {"lr_mode", lr_mode},
           {"ilr_factor", ilr_factor},
           {"grad_rule", grad_rule},
           {"seed", seed},
           {"replace_fc", replace_fc}};
    return j.dump();
}

// ---- data ---------------------------------------------------------------------

namespace {

std::string find_idx_file(const std::string& dir, const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
        const std::string candidate = dir + "/" + stem + suffix;
        if (fs::exists(candidate)) return candidate;
    }
    throw std::runtime_error("MNIST file '" + stem + "[.gz]' not found under '" + dir + "'");
}

} // namespace

DatasetPair load_datasets(const TrainConfig& config) {
    if (config.dataset == "blobs") {
        return {synthetic_blobs(config.blobs_train, config.blobs_classes, config.seed * 2 + 1),
                synthetic_blobs(config.blobs_test, config.blobs_classes, config.seed * 2 + 2)};
    }
    const std::string dir = config.resolved_data_dir();
    RawMnist train_raw = load_mnist_idx(find_idx_file(dir, "train-images-idx3-ubyte"),
                                        find_idx_file(dir, "train-labels-idx1-ubyte"));
    RawMnist test_raw = load_mnist_idx(find_idx_file(dir, "t10k-images-idx3-ubyte"),
                                       find_idx_file(dir, "t10k-labels-idx1-ubyte"));
    const PixelStats stats = compute_pixel_stats(train_raw);
    return {preprocess(train_raw, stats, "train"), preprocess(test_raw, stats, "test")};
}

// ---- evaluation ------------------------------------------------------------------

double evaluate(Network& net, const Dataset& ds, int batch_size) {
    const int n = ds.images.dim(0);
    const int c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    const int64_t sample = int64_t(c) * h * w;
    int64_t correct = 0;
    for (int start = 0; start < n; start += batch_size) {
        const int take = std::min(batch_size, n - start);
        Tensor x({take, c, h, w},
                 std::vector<float>(ds.images.data() + int64_t(start) * sample,
                                    ds.images.data() + (int64_t(start) + take) * sample));
        Tensor logits = net.forward(x, false);
        for (int i = 0; i < take; ++i) {
            const float* row = logits.data() + int64_t(i) * logits.dim(1);
            int arg = 0;
            for (int k = 1; k < logits.dim(1); ++k)
                if (row[k] > row[arg]) arg = k;
            if (arg == ds.labels[size_t(start + i)]) ++correct;
        }
    }
    return double(correct) / double(n);
}

// ---- training ---------------------------------------------------------------------

TrainResult cmd_train(const TrainConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);

    DatasetPair data = load_datasets(config);
    if (data.train.images.dim(0) % config.batch_size == 1)
        throw std::invalid_argument(
            "train size " + std::to_string(data.train.images.dim(0)) + " with batch size " +
            std::to_string(config.batch_size) +
            " leaves a single-sample final batch, which batch norm rejects; adjust batch_size");
    Network net = build_lenet5_bn(backend_from_string(config.backend), config.replace_fc);
    net.grad_rule = config.grad_rule == "sign" ? GradRule::Sign : GradRule::FullPrecision;
    init_params(net, InitScheme::FanIn, 0.0f, config.seed);

    OptimizerState opt;
    opt.gamma0 = config.gamma0;
    opt.total_epochs = config.epochs;
    opt.eta = config.eta;
    opt.momentum = config.momentum;
    opt.weight_decay = config.weight_decay;
    opt.lr_mode = lr_mode_from_string(config.lr_mode);
    opt.ilr_factor = config.ilr_factor;

    TrainResult result;
    result.metrics_path = config.out_dir + "/metrics.jsonl";
    result.final_checkpoint = config.out_dir + "/final.adnw";
    result.best_checkpoint = config.out_dir + "/best.adnw";

    std::ofstream metrics(result.metrics_path, std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics log '" + result.metrics_path + "'");
    metrics << config.describe() << "\n";

    BatchIterator iterator(data.train, config.batch_size, mix64(config.seed, 0x17));
    double best_acc = -1.0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        begin_epoch(opt, epoch);
        iterator.start_epoch(epoch);

        double loss_sum = 0.0;
        int batches = 0;
        std::map<std::string, double> grad_norms;
        std::map<std::string, double> alphas;
        Tensor x;
        std::vector<int> y;
        while (iterator.next(x, y)) {
            Tensor logits = net.forward(x, true);
            LossGrad lg = softmax_cross_entropy(logits, y);
            if (!std::isfinite(lg.loss))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                         " batch " + std::to_string(batches));
            GradMap grads = net.backward(lg.d_logits);

            grad_norms.clear();
            for (const NamedParam& p : net.parameters())
                if (p.cls == NamedParam::Class::AdderFilter ||
                    p.cls == NamedParam::Class::Weight)
                    grad_norms[p.name] = grads.at(p.name).l2_norm();

            alphas.clear();
            sgd_step(opt, net, grads, &alphas);
            loss_sum += lg.loss;
            ++batches;
        }

        const double train_loss = loss_sum / double(batches);
        const double test_acc = evaluate(net, data.test, config.batch_size);

        json rec{{"record", "epoch"},
                 {"epoch", epoch},
                 {"lr", opt.current_lr},
                 {"train_loss", train_loss},
                 {"test_acc", test_acc},
                 {"grad_norms", grad_norms},
                 {"alpha", alphas}};
        metrics << rec.dump() << "\n";
        metrics.flush();

        result.final_train_loss = train_loss;
        result.final_test_acc = test_acc;
        if (test_acc > best_acc) {
            best_acc = test_acc;
            save_checkpoint(result.best_checkpoint, net);
        }
    }
    result.best_test_acc = best_acc;
    save_checkpoint(result.final_checkpoint, net);
    return result;
}

double cmd_eval(const std::string& checkpoint_path, const TrainConfig& config) {
    config.validate();
    DatasetPair data = load_datasets(config);
    if (data.test.images.dim(0) < 1) throw std::runtime_error("empty evaluation dataset");
    Network net = build_lenet5_bn(backend_from_string(config.backend), config.replace_fc);
    load_checkpoint(checkpoint_path, net);
    return evaluate(net, data.test, config.batch_size);
}

// ---- weight statistics ---------------------------------------------------------------

std::vector<WeightStatsRow> weight_stats(
    const std::vector<std::pair<std::string, Tensor>>& entries) {
    std::vector<WeightStatsRow> rows;
    for (const auto& [name, tensor] : entries) {
        // statistics are only meaningful for weight tensors
        if (name.find(".filters") == std::string::npos && name.find(".weights") == std::string::npos)
            continue;
        WeightStatsRow row;
        row.name = name;
        row.count = tensor.size();
        row.mean = tensor.mean();
        row.stddev = std::sqrt(tensor.variance());
        row.excess_kurtosis = row.stddev > 0.0 ? tensor.excess_kurtosis() : 0.0;
        row.histogram.assign(41, 0);
        const double lo = row.mean - 4.0 * row.stddev;
        const double width = 8.0 * row.stddev / 41.0;
        for (int64_t i = 0; i < tensor.size(); ++i) {
            int bin = width > 0 ? int((double(tensor[i]) - lo) / width) : 20;
            bin = std::max(0, std::min(40, bin));
            ++row.histogram[size_t(bin)];
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string weight_stats_text(const std::vector<WeightStatsRow>& rows) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "layer weight statistics (excess kurtosis: normal ~ 0, Laplace ~ 3)\n";
    for (const auto& row : rows)
        os << "  " << row.name << ": n=" << row.count << " mean=" << row.mean
           << " std=" << row.stddev << " excess_kurtosis=" << row.excess_kurtosis << "\n";
    return os.str();
}

std::string weight_stats_csv(const std::vector<WeightStatsRow>& rows) {
    std::ostringstream os;
    os << "name,count,mean,stddev,excess_kurtosis";
    for (int b = 0; b < 41; ++b) os << ",bin" << b;
    os << "\n" << std::setprecision(9);
    for (const auto& row : rows) {
        os << row.name << "," << row.count << "," << row.mean << "," << row.stddev << ","
           << row.excess_kurtosis;
        for (int64_t v : row.histogram) os << "," << v;
        os << "\n";
    }
    return os.str();
}

// ---- eta sweep ------------------------------------------------------------------------

std::vector<EtaSweepRow> eta_sweep(const TrainConfig& base, const std::vector<double>& etas) {
    std::vector<EtaSweepRow> rows;
    for (double eta : etas) {
        TrainConfig config = base;
        config.eta = eta;
        std::ostringstream dir;
        dir << base.out_dir << "/eta_" << eta;
        config.out_dir = dir.str();
        TrainResult r = cmd_train(config);
        rows.push_back({eta, r.final_test_acc});
    }
    return rows;
}

std::string eta_sweep_text(const std::vector<EtaSweepRow>& rows) {
    std::ostringstream os;
    os << std::setprecision(4);
    os << "eta     ";
    for (const auto& r : rows) os << "| " << std::setw(7) << r.eta << " ";
    os << "\nacc (%) ";
    for (const auto& r : rows) os << "| " << std::setw(7) << 100.0 * r.test_acc << " ";
    os << "\n";
    return os.str();
}

} // namespace adnet

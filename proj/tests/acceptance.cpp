// Acceptance suite: one line per criterion, PASS/FAIL/SKIP, exit 0 only when
// nothing failed.  --suite core runs the dataset-independent criteria;
// --suite mnist runs the MNIST-dependent ones and reports [ctest-skip] when
// the IDX files are absent; --full adds the 50-epoch headline runs.
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adnet/checkpoint.hpp"
#include "adnet/model.hpp"
#include "adnet/op_count.hpp"
#include "adnet/optim.hpp"
#include "adnet/parallel.hpp"
#include "adnet/trainer.hpp"
#include "adnet/verify_lab.hpp"

using namespace adnet;
namespace vf = adnet::verify;

namespace {

int g_failures = 0;
int g_skips = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
    std::cout << "CRITERION " << id << ": " << (pass ? "PASS" : "FAIL") << " - " << detail << "\n";
    std::cout.flush();
    if (!pass) ++g_failures;
}

void report_skip(const std::string& id, const std::string& why) {
    std::cout << "CRITERION " << id << ": SKIP - " << why << "\n";
    std::cout.flush();
    ++g_skips;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::optional<DatasetPair> try_load_mnist() {
    TrainConfig config;
    config.dataset = "mnist";
    try {
        return load_datasets(config);
    } catch (const std::exception& e) {
        std::cout << "note: " << e.what() << "\n";
        return std::nullopt;
    }
}

TrainConfig mnist_config(const std::string& out_dir) {
    TrainConfig config; // defaults are the full-schedule hyper-parameters
    config.dataset = "mnist";
    config.out_dir = out_dir;
    return config;
}

// ---- criteria 3-6, 9-11 (dataset independent) ----------------------------------

void criterion_kernel_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    vf::ProbeReport r = vf::kernel_oracle_probe(100, 2024);
    const double secs = elapsed_s(t0);
    report("3 (kernel-oracle equivalence, 100 configs, 1e-5 abs)", r.pass() && secs < 60.0,
           "worst diffs within 1e-5: " + std::string(r.pass() ? "yes" : "NO") + ", runtime " +
               fmt(secs, 1) + "s (limit 60s)");
    if (!r.pass()) std::cout << r.to_text();
}

void criterion_gradcheck() {
    vf::ProbeReport r = vf::gradcheck_probe(20, 900);
    std::string detail;
    for (const auto& m : r.rows) detail += m.label + "=" + fmt(m.measured, 8) + " ";
    report("4 (conv/BN/l2 finite differences, rel err <= 1e-4, 20 instances)", r.pass(), detail);
}

void criterion_affine() {
    vf::ProbeReport r = vf::affine_identity_probe(20, 901);
    report("5 (l2-adder affine identity, 1e-4 relative)", r.pass(),
           r.rows[0].label + "=" + fmt(r.rows[0].measured, 9));
}

void criterion_propositions() {
    vf::ProbeReport r = vf::propositions_probe();
    report("6 (convergence propositions)", r.pass(),
           r.pass() ? "two-cycle at alpha=0.3 with error floor 0.1, exact at 0.25, "
                      "full-precision grid converges"
                    : "see probe rows");
    if (!r.pass()) std::cout << r.to_text();
}

void criterion_op_accounting() {
    OpCountReport adder = count_ops(build_lenet5_bn(NetBackend::Adder, true));
    OpCountReport conv = count_ops(build_lenet5_bn(NetBackend::Conv, true));
    LatencyModel model; // mul 4 cycles, add 2 cycles
    const double lat_adder = model_latency(adder, model);
    const double lat_conv = model_latency(conv, model);
    const bool pass = adder.total_mul == 0 && std::fabs(adder.total_add / 870e3 - 1.0) < 0.10 &&
                      std::fabs(conv.total_mul / 435e3 - 1.0) < 0.10 &&
                      std::fabs(lat_adder / 1.7e6 - 1.0) < 0.10 &&
                      std::fabs(lat_conv / 2.6e6 - 1.0) < 0.10;
    report("9 (op accounting vs ~435K mul / ~870K add / 1.7M vs 2.6M cycles, +/-10%)", pass,
           "adder: mul=" + std::to_string(adder.total_mul) + " add=" +
               std::to_string(adder.total_add) + " latency=" + fmt(lat_adder, 0) +
               "; conv: mul=" + std::to_string(conv.total_mul) + " latency=" + fmt(lat_conv, 0) +
               " (convention: all replaced layers incl. FC, per image)");
}

void criterion_variance() {
    vf::ProbeReport r = vf::variance_claims_probe(200000, 902);
    std::string detail = "unit-variance adder MC=" + fmt(r.rows[1].measured, 3) + " vs analytic " +
                         fmt(r.rows[1].expected, 3) + "; MC ratio at Var[F]=1e-4: " +
                         fmt(r.rows.back().measured, 0) + "x (>100x)";
    report("10 (variance probe, MC within 5%, >100x ratio)", r.pass(), detail);
    if (!r.pass()) std::cout << r.to_text();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void criterion_determinism(const std::optional<DatasetPair>& mnist) {
    TrainConfig a;
    a.dataset = "blobs";
    a.backend = "adder";
    a.epochs = 1;
    a.batch_size = 32;
    a.blobs_train = 256;
    a.blobs_test = 128;
    a.seed = 3;
    a.out_dir = "acceptance_out/det_a";
    TrainConfig b = a;
    b.out_dir = "acceptance_out/det_b";

    set_num_threads(1);
    TrainResult ra = cmd_train(a);
    set_num_threads(4);
    TrainResult rb = cmd_train(b);
    set_num_threads(0);
    bool pass = slurp(ra.final_checkpoint) == slurp(rb.final_checkpoint) &&
                slurp(ra.metrics_path) == slurp(rb.metrics_path) &&
                !slurp(ra.final_checkpoint).empty();
    std::string detail = "blobs run, 1 vs 4 threads: checkpoints+metrics byte-identical=" +
                         std::string(pass ? "yes" : "NO");

    if (mnist) {
        TrainConfig m = mnist_config("acceptance_out/det_m1");
        m.epochs = 1;
        TrainConfig m2 = m;
        m2.out_dir = "acceptance_out/det_m2";
        set_num_threads(2);
        TrainResult rm1 = cmd_train(m);
        set_num_threads(1);
        TrainResult rm2 = cmd_train(m2);
        set_num_threads(0);
        const bool mnist_pass = slurp(rm1.final_checkpoint) == slurp(rm2.final_checkpoint) &&
                                slurp(rm1.metrics_path) == slurp(rm2.metrics_path);
        pass = pass && mnist_pass;
        detail += "; mnist 1-epoch, 2 vs 1 threads: byte-identical=" +
                  std::string(mnist_pass ? "yes" : "NO");
    }
    report("11 (determinism: identical seed/config => identical bytes)", pass, detail);
}

// ---- criteria 1, 2, 7, 8 (MNIST-dependent) ---------------------------------------

void criterion_mnist_headline(bool full) {
    {
        TrainConfig smoke = mnist_config("acceptance_out/mnist_smoke");
        smoke.epochs = 8;
        const auto t0 = std::chrono::steady_clock::now();
        TrainResult r = cmd_train(smoke);
        const double secs = elapsed_s(t0);
        report("1a (MNIST smoke: adder, 8 epochs, >= 98.0%, <= 30 min)",
               r.final_test_acc >= 0.98 && secs <= 1800.0,
               "accuracy " + fmt(r.final_test_acc) + ", runtime " + fmt(secs / 60.0, 1) + " min");
    }
    if (!full) {
        report_skip("1b (MNIST full: adder 50 epochs >= 99.0%, conv >= 99.2%)",
                    "full schedule not requested; run with --full");
        return;
    }
    TrainConfig adder = mnist_config("acceptance_out/mnist_full_adder");
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult ra = cmd_train(adder);
    TrainConfig conv = adder;
    conv.backend = "conv";
    conv.out_dir = "acceptance_out/mnist_full_conv";
    TrainResult rc = cmd_train(conv);
    const double secs = elapsed_s(t0);
    report("1b (MNIST full: adder 50 epochs >= 99.0%, conv >= 99.2%)",
           ra.final_test_acc >= 0.990 && rc.final_test_acc >= 0.992,
           "adder " + fmt(ra.final_test_acc) + ", conv " + fmt(rc.final_test_acc) + ", total " +
               fmt(secs / 60.0, 1) + " min");

    // informational: trained adder weights trend heavier-tailed (Laplace-like)
    // than the conv counterparts
    std::cout << "weight excess kurtosis after full training (adder vs conv):\n";
    auto ka = weight_stats(read_checkpoint_entries(ra.final_checkpoint));
    auto kc = weight_stats(read_checkpoint_entries(rc.final_checkpoint));
    for (size_t i = 0; i < ka.size() && i < kc.size(); ++i)
        std::cout << "  " << ka[i].name << ": " << fmt(ka[i].excess_kurtosis, 3) << " vs "
                  << fmt(kc[i].excess_kurtosis, 3) << "\n";
}

void criterion_ablation() {
    struct Run {
        const char* name;
        const char* lr_mode;
        const char* rule;
        double acc = 0.0;
    };
    Run runs[4] = {{"ALR/full", "alr", "full"},
                   {"ILR/full", "ilr", "full"},
                   {"ALR/sign", "alr", "sign"},
                   {"ILR/sign", "ilr", "sign"}};
    std::string detail;
    for (Run& run : runs) {
        TrainConfig config = mnist_config(std::string("acceptance_out/abl_") + run.lr_mode + "_" +
                                          run.rule);
        config.epochs = 5;
        config.lr_mode = run.lr_mode;
        config.grad_rule = run.rule;
        run.acc = cmd_train(config).final_test_acc;
        detail += std::string(run.name) + "=" + fmt(run.acc) + " ";
    }
    const bool order = runs[0].acc >= runs[1].acc && runs[1].acc > runs[2].acc &&
                       runs[2].acc >= runs[3].acc;
    const bool gap = runs[1].acc - runs[2].acc >= 0.003; // 0.3 accuracy points
    report("2 (ablation ordering ALR/full >= ILR/full > ALR/sign >= ILR/sign, >=0.3pt mode gap)",
           order && gap, detail);
}

void criterion_alr_invariant(const Tensor& batch, const std::vector<int>& labels,
                             const std::string& batch_kind) {
    Network net = build_lenet5_bn(NetBackend::Adder, true);
    init_params(net, InitScheme::FanIn, 0.0f, 1);
    Tensor logits = net.forward(batch, true);
    LossGrad lg = softmax_cross_entropy(logits, labels);
    GradMap grads = net.backward(lg.d_logits);

    const double eta = 0.1;
    double worst_rel = 0.0;
    for (const NamedParam& p : net.parameters()) {
        if (p.cls != NamedParam::Class::AdderFilter) continue;
        const Tensor& g = grads.at(p.name);
        const double alpha = adaptive_local_lr(g, eta);
        Tensor scaled = g;
        scaled.scale_(float(alpha));
        const double want = eta * std::sqrt(double(g.size()));
        worst_rel = std::max(worst_rel, std::fabs(scaled.l2_norm() - want) / want);
    }
    report("7 (ALR invariant ||alpha*grad|| = eta*sqrt(k), 1e-6 relative, " + batch_kind + ")",
           worst_rel < 1e-6, "worst relative deviation " + fmt(worst_rel, 9));
}

void criterion_grad_norm_ordering(const Tensor& batch, const std::vector<int>& labels,
                                  const std::string& batch_kind) {
    std::vector<vf::GradNormRow> rows = vf::grad_norm_table(batch, labels, 1);
    bool pass = true;
    std::string detail;
    for (const auto& row : rows) {
        detail += row.layer + ": " + fmt(row.adder_norm, 5) + " vs " + fmt(row.conv_norm, 5) + "; ";
        // ordering applies to every layer with a BN between it and the loss
        if (row.layer != "fc3") pass = pass && row.adder_norm < row.conv_norm;
    }
    report("8 (adder filter-gradient norms below conv's at iteration 1, " + batch_kind + ")", pass,
           detail + "(fc3 informational: no BN downstream)");
}

} // namespace

int main(int argc, char** argv) {
    std::string suite = "all";
    bool full = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--suite") == 0 && i + 1 < argc) suite = argv[++i];
        else if (std::strcmp(argv[i], "--full") == 0) full = true;
        else {
            std::cerr << "usage: acceptance [--suite core|mnist|all] [--full]\n";
            return 2;
        }
    }
    const bool run_core = suite == "core" || suite == "all";
    const bool run_mnist = suite == "mnist" || suite == "all";

    try {
        std::optional<DatasetPair> mnist;
        if (run_mnist || suite == "all") mnist = try_load_mnist();

        if (run_core) {
            criterion_kernel_oracle();
            criterion_gradcheck();
            criterion_affine();
            criterion_propositions();
            criterion_op_accounting();
            criterion_variance();
            criterion_determinism(run_mnist ? mnist : std::nullopt);
        }

        if (run_mnist) {
            if (mnist) {
                std::cout << "MNIST loaded: " << mnist->train.images.dim(0) << " train / "
                          << mnist->test.images.dim(0) << " test samples, normalization mean="
                          << fmt(mnist->train.stats.mean, 6) << " std="
                          << fmt(mnist->train.stats.stddev, 6) << "\n";
                BatchIterator it(mnist->train, 256, 0);
                Tensor batch;
                std::vector<int> labels;
                it.next(batch, labels);
                criterion_mnist_headline(full);
                criterion_ablation();
                criterion_alr_invariant(batch, labels, "MNIST batch");
                criterion_grad_norm_ordering(batch, labels, "MNIST batch");
            } else {
                std::cout << "[ctest-skip] MNIST IDX files not found (set ADNET_DATA or place "
                             "them under ./data); criteria 1, 2, 7, 8 skipped\n";
                report_skip("1a/1b (MNIST headline accuracy)", "dataset unavailable");
                report_skip("2 (ablation ordering)", "dataset unavailable");
                report_skip("7 (ALR invariant on a real MNIST batch)", "dataset unavailable");
                report_skip("8 (gradient-norm ordering on a real MNIST batch)",
                            "dataset unavailable");
                // supplementary, clearly labeled: the same checks on a seeded
                // synthetic batch so the machinery is still exercised
                Tensor batch = Tensor::randn({256, 1, 32, 32}, 0.0f, 1.0f, 99);
                std::vector<int> labels;
                for (int i = 0; i < 256; ++i) labels.push_back(i % 10);
                criterion_alr_invariant(batch, labels, "supplementary synthetic batch");
                criterion_grad_norm_ordering(batch, labels, "supplementary synthetic batch");
            }
        }
    } catch (const std::exception& e) {
        std::cout << "ACCEPTANCE ABORTED: " << e.what() << "\n";
        return 1;
    }

    std::cout << "acceptance summary: " << g_failures << " failed, " << g_skips << " skipped\n";
    return g_failures == 0 ? 0 : 1;
}

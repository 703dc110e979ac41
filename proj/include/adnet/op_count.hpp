#pragma once

#include <string>
#include <vector>

#include "adnet/model.hpp"

namespace adnet {

/// Which layers enter the totals.  MNIST-style accounting counts every
/// replaced layer including FC (the defaults); the CIFAR-style convention
/// drops BN and the first/last layers.
struct CountConvention {
    bool include_fc = true;
    bool include_first_last = true;
    bool include_bn = false;
    std::string tag = "v1";
};

struct LayerOpCount {
    std::string name;
    std::string kind;
    bool counted = true;
    long long mul = 0, add = 0, xnor = 0;
    long long params = 0;
};

struct OpCountReport {
    std::vector<LayerOpCount> layers;
    long long total_mul = 0, total_add = 0, total_xnor = 0;
    CountConvention convention;

    std::string to_text() const;
    std::string to_csv() const;
};

/// Per-image operation counts from the network's inferred shapes.
/// conv: mul = add = k^2 c_in c_out H'W'; adder: mul = 0, add = 2 k^2 c_in
/// c_out H'W' (subtract + accumulate per tap); l2-adder: the square is a
/// multiplication, so mul = k^2 c_in c_out H'W' and add doubles; FC is the
/// 1x1 case.  BN counts 2 mul + 2 add per output element when included;
/// pooling/ReLU/flatten count as zero.
OpCountReport count_ops(const Network& net, CountConvention convention = {});

struct LatencyModel {
    double mul_cycles = 4.0;
    double add_cycles = 2.0;
    std::string source = "float mul/add latency 4/2 cycles (VIA Nano class CPU)";
};

/// cycles = mul_cycles * #mul + add_cycles * #add over the counted totals.
double model_latency(const OpCountReport& report, const LatencyModel& model);

} // namespace adnet

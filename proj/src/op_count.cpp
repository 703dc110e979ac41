#include "adnet/op_count.hpp"

#include <sstream>
#include <stdexcept>

namespace adnet {

namespace {

bool is_weighted(LayerKind k) {
    switch (k) {
    case LayerKind::AdderConv:
    case LayerKind::Conv:
    case LayerKind::L2AdderConv:
    case LayerKind::AdderFc:
    case LayerKind::Fc:
        return true;
    default:
        return false;
    }
}

} // namespace

OpCountReport count_ops(const Network& net, CountConvention convention) {
    OpCountReport report;
    report.convention = convention;

    int first_weighted = -1, last_weighted = -1;
    const auto& layers = net.layers();
    for (size_t i = 0; i < layers.size(); ++i) {
        if (is_weighted(layers[i].spec.kind)) {
            if (first_weighted < 0) first_weighted = int(i);
            last_weighted = int(i);
        }
    }

    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        const LayerSpec& spec = layer.spec;
        LayerOpCount row;
        row.name = spec.name;
        row.kind = layer_kind_name(spec.kind);
        row.params = layer.weights.size();
        if (spec.kind == LayerKind::BatchNorm)
            row.params = layer.bn.gamma.size() + layer.bn.beta.size();

        long long out_elems = 1;
        for (int e : layer.out_shape) out_elems *= e;

        switch (spec.kind) {
        case LayerKind::Conv:
        case LayerKind::AdderConv:
        case LayerKind::L2AdderConv: {
            const long long taps =
                (long long)(spec.kernel) * spec.kernel * layer.in_shape[0] * out_elems;
            if (spec.kind == LayerKind::Conv) {
                row.mul = taps;
                row.add = taps;
            } else if (spec.kind == LayerKind::AdderConv) {
                row.mul = 0;
                row.add = 2 * taps;
            } else { // l2-adder: the square is a multiplication
                row.mul = taps;
                row.add = 2 * taps;
            }
            break;
        }
        case LayerKind::Fc:
        case LayerKind::AdderFc: {
            const long long taps = (long long)(layer.in_shape[0]) * spec.out_channels;
            if (spec.kind == LayerKind::Fc) {
                row.mul = taps;
                row.add = taps;
            } else {
                row.mul = 0;
                row.add = 2 * taps;
            }
            break;
        }
        case LayerKind::BatchNorm:
            row.mul = 2 * out_elems;
            row.add = 2 * out_elems;
            break;
        case LayerKind::ReLU:
        case LayerKind::MaxPool2:
        case LayerKind::AvgPool2:
        case LayerKind::Flatten:
            break;
        default:
            throw std::invalid_argument("count_ops: unknown layer kind");
        }

        row.counted = true;
        if (spec.kind == LayerKind::BatchNorm && !convention.include_bn) row.counted = false;
        if ((spec.kind == LayerKind::Fc || spec.kind == LayerKind::AdderFc) &&
            !convention.include_fc)
            row.counted = false;
        if (!convention.include_first_last &&
            (int(i) == first_weighted || int(i) == last_weighted))
            row.counted = false;

        if (row.counted) {
            report.total_mul += row.mul;
            report.total_add += row.add;
            report.total_xnor += row.xnor;
        }
        report.layers.push_back(std::move(row));
    }
    return report;
}

double model_latency(const OpCountReport& report, const LatencyModel& model) {
    if (model.mul_cycles <= 0.0 || model.add_cycles <= 0.0)
        throw std::invalid_argument("latency model cycles must be positive");
    return model.mul_cycles * double(report.total_mul) + model.add_cycles * double(report.total_add);
}

std::string OpCountReport::to_text() const {
    std::ostringstream os;
    os << "per-image operation counts (convention " << convention.tag
       << ": fc=" << (convention.include_fc ? "yes" : "no")
       << " first/last=" << (convention.include_first_last ? "yes" : "no")
       << " bn=" << (convention.include_bn ? "yes" : "no") << ")\n";
    for (const auto& row : layers) {
        os << "  " << row.name << " [" << row.kind << "]"
           << (row.counted ? "" : " (not counted)") << ": mul=" << row.mul << " add=" << row.add
           << " xnor=" << row.xnor << " params=" << row.params << "\n";
    }
    os << "  total: mul=" << total_mul << " add=" << total_add << " xnor=" << total_xnor << "\n";
    return os.str();
}

std::string OpCountReport::to_csv() const {
    std::ostringstream os;
    os << "layer,kind,counted,mul,add,xnor,params\n";
    for (const auto& row : layers)
        os << row.name << "," << row.kind << "," << (row.counted ? 1 : 0) << "," << row.mul << ","
           << row.add << "," << row.xnor << "," << row.params << "\n";
    os << "total,,," << total_mul << "," << total_add << "," << total_xnor << ",\n";
    return os.str();
}

} // namespace adnet

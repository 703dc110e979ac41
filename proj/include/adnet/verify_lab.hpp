#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adnet/kernels.hpp"
#include "adnet/tensor.hpp"

namespace adnet::verify {

using kernels::ConvGeom;

// ---- naive double-precision oracles ------------------------------------------
//
// Direct index-by-index translation of the layer definitions, with explicit
// bounds handling (out-of-range input reads as 0, out-of-range outputs are
// skipped).  No shared code with the production kernels; used as the
// reference side of every kernel equivalence test.

std::vector<double> tensor_to_double(const Tensor& t);
Tensor double_to_tensor(const std::vector<int>& shape, const std::vector<double>& v);

std::vector<double> oracle_adder_forward(const std::vector<double>& x,
                                         const std::vector<double>& f, const ConvGeom& g);
std::vector<double> oracle_adder_grad_filter(const std::vector<double>& x,
                                             const std::vector<double>& f,
                                             const std::vector<double>& dy, const ConvGeom& g);
std::vector<double> oracle_adder_grad_filter_sign(const std::vector<double>& x,
                                                  const std::vector<double>& f,
                                                  const std::vector<double>& dy, const ConvGeom& g);
std::vector<double> oracle_adder_grad_input(const std::vector<double>& x,
                                            const std::vector<double>& f,
                                            const std::vector<double>& dy, const ConvGeom& g);
std::vector<double> oracle_conv_forward(const std::vector<double>& x, const std::vector<double>& f,
                                        const ConvGeom& g);
std::vector<double> oracle_conv_grad_filter(const std::vector<double>& x,
                                            const std::vector<double>& f,
                                            const std::vector<double>& dy, const ConvGeom& g);
std::vector<double> oracle_conv_grad_input(const std::vector<double>& x,
                                           const std::vector<double>& f,
                                           const std::vector<double>& dy, const ConvGeom& g);
std::vector<double> oracle_l2_forward(const std::vector<double>& x, const std::vector<double>& f,
                                      const ConvGeom& g);
std::vector<double> oracle_l2_grad_filter(const std::vector<double>& x,
                                          const std::vector<double>& f,
                                          const std::vector<double>& dy, const ConvGeom& g);
std::vector<double> oracle_l2_grad_input(const std::vector<double>& x,
                                         const std::vector<double>& f,
                                         const std::vector<double>& dy, const ConvGeom& g);

// ---- probe reports ------------------------------------------------------------

enum class Cmp { AbsDiff, RelDiff, GreaterThan, LessThan };

struct Measurement {
    std::string label;
    double measured = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    Cmp cmp = Cmp::AbsDiff;
    bool pass = false;
};

Measurement check(std::string label, double measured, double expected, double tolerance,
                  Cmp cmp = Cmp::AbsDiff);

struct ProbeReport {
    std::string name;
    std::vector<Measurement> rows;
    std::string notes;

    bool pass() const;
    std::string to_text() const;
    std::string to_json_line() const;
};

// ---- finite-difference harness --------------------------------------------------

enum class FdOp { Conv, BatchNorm, L2Adder, AdderSurrogate };

/// Central finite differences in double precision against the production
/// float backward of a randomly built instance.  Relative error metric:
/// max|fd - grad| / max(max|fd|, max|grad|, 1e-12) per checked tensor.
/// FdOp::AdderSurrogate is refused (std::invalid_argument): the adder
/// backward rules are surrogates, not gradients of the forward.
ProbeReport fd_gradcheck(FdOp op, uint64_t seed, double epsilon);

// ---- output-variance probe -------------------------------------------------------

/// Monte-Carlo Var[Y] of one output unit under iid normal X, F, against the
/// analytic values K*VarX*VarF (cross-correlation) and K*(1-2/pi)*(VarX+VarF)
/// (adder; from Var|Z| for normal Z).  The sqrt(pi/2) coefficient found in
/// some treatments is recorded in the notes, not asserted.
ProbeReport variance_probe(int d, int c_in, double var_x, double var_f, int64_t samples,
                           uint64_t seed);

// ---- kernel/oracle equivalence -----------------------------------------------------

/// Seeded random geometry for equivalence sweeps (k <= 3, spatial <= 8,
/// channels <= 4, batch <= 3, stride in {1,2}, pad in [0, k-1]).
ConvGeom random_geometry(uint64_t seed);

/// Runs `configs` random geometries through every adder kernel (forward,
/// both filter-gradient rules, input gradient) and the conv/l2 kernels,
/// comparing the production path against the naive oracles at 1e-5 absolute.
ProbeReport kernel_oracle_probe(int configs, uint64_t seed);

/// Production l2-adder output against 2*conv - patch/filter square sums,
/// max-norm relative tolerance 1e-4 per instance.
ProbeReport affine_identity_probe(int instances, uint64_t seed);

/// fd_gradcheck over `instances` random cases split across conv, batch norm
/// and l2-adder; one worst-case row per op family.
ProbeReport gradcheck_probe(int instances, uint64_t seed);

/// Both toy descent propositions at the canonical settings: the 0.3-step
/// two-cycle, the 0.25-step exact convergence, and the full-precision alpha
/// grid.
ProbeReport propositions_probe();

/// Variance analysis end to end: MC vs analytic at unit variances, plus the
/// >100x adder/cnn variance ratio when Var[F] = 1e-4.
ProbeReport variance_claims_probe(int64_t samples, uint64_t seed);

// ---- toy convergence simulations ---------------------------------------------------

struct ToyTrace {
    enum class Verdict { Converged, TwoCycle, NotConverged };
    std::vector<double> iterates; // f_0 .. f_iters
    Verdict verdict = Verdict::NotConverged;
    double final_error = 0.0;
    double min_error = 0.0;
};

/// f <- f - alpha * sgn(f - x): the sign-rule descent on |x - f|.
ToyTrace prop1_sim(double x, double f0, double alpha, int iters);
/// f <- f - alpha * (f - x): full-precision descent, converges for alpha in (0,1).
ToyTrace prop2_sim(double x, double f0, double alpha, int iters);

} // namespace adnet::verify

namespace adnet {
class Network;
}

namespace adnet::verify {

// ---- per-layer filter-gradient norms --------------------------------------------

/// One forward/backward on the batch; ||dF||_2 per filter/weight parameter.
std::map<std::string, double> filter_grad_norms(Network& net, const Tensor& batch,
                                                const std::vector<int>& labels);

struct GradNormRow {
    std::string layer;
    double adder_norm = 0.0;
    double conv_norm = 0.0;
};

/// LeNet-5-BN adder vs conv backends under identical init and batch, first
/// iteration.  One row per replaceable layer.
std::vector<GradNormRow> grad_norm_table(const Tensor& batch, const std::vector<int>& labels,
                                         uint64_t init_seed);

} // namespace adnet::verify

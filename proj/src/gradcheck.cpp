#include "repinfo/gradcheck.hpp"

#include "repinfo/errors.hpp"
#include "repinfo/loss.hpp"

#include <algorithm>
#include <cmath>

namespace repinfo {

namespace {

constexpr double kRelFloor = 1e-6;
constexpr int kStepShrinks = 3;

// Which side of the kink every (leaky-)ReLU input sits on.
std::vector<bool> kink_pattern(const NetworkSpec& spec, const ForwardTrace& t) {
  std::vector<bool> bits;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto kind = spec.layers[i].kind;
    if (kind != LayerKind::relu && kind != LayerKind::leaky_relu) continue;
    const Matrix& in = i == 0 ? t.input : t.outputs[i - 1];
    for (Eigen::Index k = 0; k < in.size(); ++k) bits.push_back(in.data()[k] > 0.0);
  }
  return bits;
}

}  // namespace

GradCheckReport gradient_check(const NetworkSpec& spec, std::uint64_t seed, double step,
                               int batch_rows) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InputError("gradient_check step must be > 0");
  if (batch_rows < 2) throw InputError("gradient_check needs at least 2 rows");

  NetworkState base = init_network(spec, seed);
  Rng rng(derive_seed(seed, 0x6772616463686bULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(batch_rows, spec.input_dim);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = gauss(rng);
  std::vector<int> y(batch_rows);
  std::uniform_int_distribution<int> cls(0, spec.output_classes - 1);
  for (int& v : y) v = cls(rng);

  // Loss depends on parameters only through the frozen masks, so each
  // evaluation runs on a throwaway copy whose running stats may drift.
  NetworkState work = base;
  const ForwardTrace ref = forward(work, x, Mode::train);
  const Gradients analytic = backward(base, ref, y);
  const auto ref_pattern = kink_pattern(spec, ref);

  GradCheckReport report;
  auto loss_at = [&](std::size_t layer, bool bias, Eigen::Index k, double delta,
                     bool& crossed) {
    NetworkState s = base;
    Matrix& m = bias ? s.layers[layer].bias : s.layers[layer].weight;
    m.data()[k] += delta;
    const ForwardTrace t = forward_frozen(s, x, ref);
    if (kink_pattern(spec, t) != ref_pattern) crossed = true;
    return softmax_cross_entropy_bits(t.logits(), y);
  };

  for (std::size_t i = 0; i < base.layers.size(); ++i) {
    if (!base.layers[i].has_params()) continue;
    for (bool bias : {false, true}) {
      const Matrix& a = bias ? analytic.layers[i].bias : analytic.layers[i].weight;
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        double h = step;
        bool ok = false;
        double numeric = 0.0;
        for (int attempt = 0; attempt <= kStepShrinks && !ok; ++attempt, h *= 0.1) {
          bool crossed = false;
          const double up = loss_at(i, bias, k, h, crossed);
          const double down = loss_at(i, bias, k, -h, crossed);
          numeric = (up - down) / (2.0 * h);
          ok = !crossed;
        }
        if (!ok) {
          ++report.skipped_kinks;
          continue;
        }
        const double an = a.data()[k];
        const double denom = std::max({std::abs(an), std::abs(numeric), kRelFloor});
        report.max_rel_error = std::max(report.max_rel_error, std::abs(an - numeric) / denom);
        ++report.checked;
      }
    }
  }
  return report;
}

std::vector<GradCheckCase> standard_gradcheck_suite() {
  std::vector<GradCheckCase> cases;

  const int small_hidden[] = {6, 5, 4};
  cases.push_back({"relu", dense_relu_spec(6, small_hidden, 3), 1e-4});

  NetworkSpec leaky;
  leaky.input_dim = 5;
  leaky.output_classes = 4;
  leaky.layers = {LayerSpec::affine(8), LayerSpec::leaky_relu(0.2), LayerSpec::affine(6),
                  LayerSpec::leaky_relu(0.2), LayerSpec::affine(4)};
  cases.push_back({"leaky_relu", leaky, 1e-4});

  NetworkSpec drop = leaky;
  drop.layers = {LayerSpec::affine(8), LayerSpec::leaky_relu(0.2), LayerSpec::dropout(0.5),
                 LayerSpec::affine(6), LayerSpec::relu(),           LayerSpec::dropout(0.3),
                 LayerSpec::affine(4)};
  cases.push_back({"dropout", drop, 1e-4});

  // Same block structure as the probe decoder, scaled down.
  NetworkSpec bn;
  bn.input_dim = 4;
  bn.output_classes = 3;
  bn.layers = {LayerSpec::affine(8),     LayerSpec::batch_norm(), LayerSpec::leaky_relu(0.2),
               LayerSpec::dropout(0.7),  LayerSpec::affine(6),    LayerSpec::batch_norm(),
               LayerSpec::leaky_relu(0.2), LayerSpec::dropout(0.7), LayerSpec::affine(3)};
  cases.push_back({"batch_norm", bn, 1e-3});

  return cases;
}

}  // namespace repinfo

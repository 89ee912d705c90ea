#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "detkit/bases.hpp"
#include "detkit/errors.hpp"
#include "detkit/parallel.hpp"
#include "detkit/rng.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

enum class LayerKind { conv1d, conv2d, linear, head };
enum class ResidualRole { none, branch_last };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::linear;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::vector<std::size_t> kernel;  // empty for linear/head
  std::size_t stage = 0;
  ResidualRole residual_role = ResidualRole::none;

  std::size_t fan_in() const {
    std::size_t f = c_in;
    for (std::size_t k : kernel) f *= k;
    return f;
  }
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
};

struct InitPlan {
  std::optional<BasisKind> uniform_basis;  // same basis at every stage
  std::map<std::size_t, BasisKind> stage_basis;
  bool mixed_default = true;
  double fixup_alpha = 0.01;

  static InitPlan uniform(BasisKind kind) {
    InitPlan p;
    p.uniform_basis = kind;
    p.mixed_default = false;
    return p;
  }
};

struct ParameterSet {
  // kept sorted lexicographically by name bytes; this is the canonical
  // hashing and update order.
  std::vector<std::pair<std::string, Tensor<float>>> entries;

  void add(std::string name, Tensor<float> t) {
    auto it = std::lower_bound(
        entries.begin(), entries.end(), name,
        [](const auto& e, const std::string& n) { return e.first < n; });
    if (it != entries.end() && it->first == name)
      throw spec_error("duplicate parameter name: " + name);
    entries.insert(it, {std::move(name), std::move(t)});
  }

  const Tensor<float>& get(const std::string& name) const {
    for (const auto& [n, t] : entries)
      if (n == name) return t;
    throw spec_error("missing parameter: " + name);
  }

  Tensor<float>& get(const std::string& name) {
    for (auto& [n, t] : entries)
      if (n == name) return t;
    throw spec_error("missing parameter: " + name);
  }
};

/// Zero-means the tensor and rescales its population standard deviation
/// to 1/sqrt(3 * fan_in). All arithmetic in f64; the caller converts to
/// f32 once at the very end of the pipeline.
inline Tensor<double> zero_mean_variance_match(const Tensor<double>& w,
                                               std::size_t fan_in) {
  if (fan_in < 1) throw spec_error("variance match: fan_in >= 1 required");
  const std::size_t n = w.numel();
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += w[i];
  mean /= static_cast<double>(n);

  Tensor<double> out = w;
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] -= mean;
    var += out[i] * out[i];
  }
  var /= static_cast<double>(n);
  if (var == 0.0)
    throw degenerate_error("variance match: constant tensor");

  const double target = 1.0 / std::sqrt(3.0 * static_cast<double>(fan_in));
  const double scale = target / std::sqrt(var);
  for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
  return out;
}

namespace detail {

inline Tensor<double> kron(const Tensor<double>& a, const Tensor<double>& b) {
  const std::size_t ar = a.extent(0), ac = a.extent(1);
  const std::size_t br = b.extent(0), bc = b.extent(1);
  Tensor<double> out({ar * br, ac * bc});
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t j = 0; j < ac; ++j)
      for (std::size_t p = 0; p < br; ++p)
        for (std::size_t q = 0; q < bc; ++q)
          out.at(i * br + p, j * bc + q) = a.at(i, j) * b.at(p, q);
  return out;
}

}  // namespace detail

/// Raw basis rows mapped onto a conv/linear weight tensor, then
/// zero-mean/variance matched; branch-last tensors pick up the fixup
/// factor. Column index j enumerates (c_in, kernel) channel-major.
inline Tensor<double> init_conv(const LayerSpec& layer, BasisKind kind,
                                double fixup_alpha = 0.01) {
  Tensor<double> w;
  if (layer.kind == LayerKind::conv1d || layer.kind == LayerKind::linear) {
    if (layer.kind == LayerKind::conv1d && layer.kernel.size() != 1)
      throw spec_error(layer.name + ": conv1d needs one kernel extent");
    if (layer.kind == LayerKind::linear && !layer.kernel.empty())
      throw spec_error(layer.name + ": linear takes no kernel");
    const std::size_t fan = layer.fan_in();
    BasisMatrix b = basis_matrix(kind, layer.c_out, fan, /*normalized=*/false);
    std::vector<std::size_t> shape{layer.c_out, layer.c_in};
    if (layer.kind == LayerKind::conv1d) shape.push_back(layer.kernel[0]);
    w = b.rows.reshaped(shape);
  } else if (layer.kind == LayerKind::conv2d) {
    if (layer.kernel.size() != 2)
      throw spec_error(layer.name + ": conv2d needs two kernel extents");
    const std::size_t kh = layer.kernel[0], kw = layer.kernel[1];
    // Separable construction: channel basis (c_in) kron 2D spatial basis
    // (kh kron kw). Unique filter count is c_in * kh * kw; excess
    // filters cycle modulo that count.
    Tensor<double> channel =
        basis_matrix(kind, layer.c_in, layer.c_in, false).rows;
    Tensor<double> spatial =
        detail::kron(basis_matrix(kind, kh, kh, false).rows,
                     basis_matrix(kind, kw, kw, false).rows);
    Tensor<double> unique = detail::kron(channel, spatial);
    const std::size_t u = unique.extent(0);
    Tensor<double> flat({layer.c_out, layer.fan_in()});
    for (std::size_t f = 0; f < layer.c_out; ++f)
      for (std::size_t j = 0; j < flat.extent(1); ++j)
        flat.at(f, j) = unique.at(f % u, j);
    w = flat.reshaped({layer.c_out, layer.c_in, kh, kw});
  } else {
    throw spec_error(layer.name + ": init_conv does not handle head layers");
  }

  Tensor<double> out = zero_mean_variance_match(w, layer.fan_in());
  if (layer.residual_role == ResidualRole::branch_last)
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= fixup_alpha;
  return out;
}

/// Simplex equiangular tight frame: K unit-norm rows in R^D with all
/// pairwise cosines equal to -1/(K-1). Built from the left singular
/// vectors of the centered identity, embedded in the leading K-1
/// coordinates; the remaining D-(K-1) coordinates stay zero.
inline Tensor<double> etf_head(std::size_t num_classes, std::size_t dim) {
  if (num_classes < 2) throw spec_error("etf: K >= 2 required");
  if (num_classes > dim) throw dimension_error("etf: D >= K required");
  const std::size_t k = num_classes;

  Tensor<double> centered = Tensor<double>::identity(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      centered.at(i, j) -= 1.0 / static_cast<double>(k);

  SvdResult svd = svd_small(centered);  // rank K-1, singular values 1,...,1,0

  Tensor<double> head({k, dim});
  for (std::size_t i = 0; i < k; ++i) {
    double nrm = 0;
    for (std::size_t c = 0; c + 1 < k; ++c) nrm += svd.u.at(i, c) * svd.u.at(i, c);
    nrm = std::sqrt(nrm);
    for (std::size_t c = 0; c + 1 < k; ++c) head.at(i, c) = svd.u.at(i, c) / nrm;
  }
  return head;
}

namespace detail {

inline BasisKind stage_kind(const InitPlan& plan, std::size_t stage,
                            const std::vector<std::size_t>& stages_sorted) {
  if (plan.uniform_basis) return *plan.uniform_basis;
  auto it = plan.stage_basis.find(stage);
  if (it != plan.stage_basis.end()) return it->second;
  if (!plan.mixed_default)
    throw spec_error("no basis assigned for stage " + std::to_string(stage));
  // Quartile rule: early DCT-II, middle Hadamard, late Hartley, final DCT-II.
  const auto pos = static_cast<std::size_t>(
      std::lower_bound(stages_sorted.begin(), stages_sorted.end(), stage) -
      stages_sorted.begin());
  const std::size_t q = (4 * pos) / stages_sorted.size();
  static const BasisKind kMap[4] = {BasisKind::dct2, BasisKind::hadamard,
                                    BasisKind::hartley, BasisKind::dct2};
  return kMap[std::min<std::size_t>(q, 3)];
}

}  // namespace detail

/// Fully deterministic model initialization: pure function of
/// (ModelSpec, InitPlan), no seed anywhere. Everything is generated in
/// f64 and converted to f32 exactly once.
inline ParameterSet init_model(const ModelSpec& model, const InitPlan& plan) {
  std::set<std::size_t> stage_set;
  for (const auto& l : model.layers) stage_set.insert(l.stage);
  std::vector<std::size_t> stages(stage_set.begin(), stage_set.end());

  std::vector<Tensor<float>> slots(model.layers.size());
  parallel_for(model.layers.size(), [&](std::size_t i) {
    const LayerSpec& layer = model.layers[i];
    Tensor<double> w64 =
        (layer.kind == LayerKind::head)
            ? etf_head(layer.c_out, layer.c_in)
            : init_conv(layer, detail::stage_kind(plan, layer.stage, stages),
                        plan.fixup_alpha);
    slots[i] = w64.cast<float>();
  });

  ParameterSet params;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    params.add(model.layers[i].name, std::move(slots[i]));
  return params;
}

/// Seeded Kaiming-uniform reference: U[-sqrt(6/fan_in), +sqrt(6/fan_in)],
/// one xoshiro stream walked over layers in declaration order. Used only
/// by the comparison harness.
inline ParameterSet kaiming_init(const ModelSpec& model, std::uint64_t seed) {
  Xoshiro256StarStar rng(seed);
  ParameterSet params;
  for (const auto& layer : model.layers) {
    std::vector<std::size_t> shape{layer.c_out, layer.c_in};
    for (std::size_t k : layer.kernel) shape.push_back(k);
    if (layer.kind == LayerKind::head) shape = {layer.c_out, layer.c_in};
    Tensor<float> w(shape);
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.fan_in()));
    for (std::size_t i = 0; i < w.numel(); ++i)
      w[i] = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    params.add(layer.name, std::move(w));
  }
  return params;
}

/// Declarative model file, one layer per line:
///   name kind c_in c_out kernel stage role
/// kernel is "-" (linear/head) or comma-separated extents; role is
/// "none" or "branch_last". Blank lines and '#' comments are skipped.
inline ModelSpec parse_model_spec(std::istream& in) {
  ModelSpec model;
  std::string line;
  std::set<std::string> names;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    LayerSpec l;
    std::string kind, kernel, role;
    if (!(ss >> l.name)) continue;  // blank
    if (!(ss >> kind >> l.c_in >> l.c_out >> kernel >> l.stage >> role))
      throw spec_error("bad model line: " + line);
    if (kind == "conv1d") l.kind = LayerKind::conv1d;
    else if (kind == "conv2d") l.kind = LayerKind::conv2d;
    else if (kind == "linear") l.kind = LayerKind::linear;
    else if (kind == "head") l.kind = LayerKind::head;
    else throw spec_error("bad layer kind: " + kind);
    if (kernel != "-") {
      std::istringstream ks(kernel);
      std::string tok;
      while (std::getline(ks, tok, ',')) l.kernel.push_back(std::stoul(tok));
    }
    if (role == "none") l.residual_role = ResidualRole::none;
    else if (role == "branch_last") l.residual_role = ResidualRole::branch_last;
    else throw spec_error("bad residual role: " + role);
    if (!names.insert(l.name).second)
      throw spec_error("duplicate layer name: " + l.name);
    if (l.fan_in() < 1) throw spec_error(l.name + ": fan_in >= 1 required");
    model.layers.push_back(std::move(l));
  }
  return model;
}

inline ModelSpec load_model_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open model spec: " + path);
  return parse_model_spec(f);
}

}  // namespace detkit

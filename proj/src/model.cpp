#include "qcnn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace qcnn {

namespace {

const char* kPlaneNames[4] = {"r", "x", "y", "z"};

std::string dims(std::initializer_list<std::size_t> d) { return shape_str(Shape(d)); }

}  // namespace

std::vector<LayerInfo> layer_table(const ModelConfig& cfg, Algebra algebra) {
  cfg.validate();
  const bool quat = algebra == Algebra::Quaternion;
  const std::size_t mult = quat ? 1 : 4;
  std::vector<LayerInfo> rows;
  std::size_t in_units = 1;
  for (std::size_t l = 0; l < cfg.n_conv_layers; ++l) {
    const std::size_t out_units = cfg.maps_at(l);
    LayerInfo row;
    row.name = "conv" + std::to_string(l);
    if (quat) {
      const QConvLayer shape_only(out_units, in_units, cfg.kernel_freq, cfg.kernel_time, cfg.bias, {});
      row.kind = "qconv2d";
      row.weights = shape_only.weight_count();
      row.other = shape_only.param_count() - shape_only.weight_count() + out_units;
    } else {
      const RealConvShape s{out_units * mult, in_units * mult, cfg.kernel_freq, cfg.kernel_time, cfg.bias};
      row.kind = "conv2d";
      row.weights = s.weight_count();
      row.other = s.param_count() - s.weight_count() + s.out_ch;
    }
    row.shape = dims({out_units * mult, in_units * mult, cfg.kernel_freq, cfg.kernel_time});
    rows.push_back(row);
    in_units = out_units;
  }
  in_units *= cfg.pooled_width();
  for (std::size_t d = 0; d < cfg.n_dense; ++d) {
    LayerInfo row;
    row.name = "dense" + std::to_string(d);
    if (quat) {
      const QDenseLayer shape_only(cfg.dense_width, in_units, cfg.bias);
      row.kind = "qdense";
      row.weights = shape_only.weight_count();
      row.other = shape_only.param_count() - shape_only.weight_count() + cfg.dense_width;
    } else {
      const RealDenseShape s{cfg.dense_width * mult, in_units * mult, cfg.bias};
      row.kind = "dense";
      row.weights = s.weight_count();
      row.other = s.param_count() - s.weight_count() + s.out;
    }
    row.shape = dims({cfg.dense_width * mult, in_units * mult});
    rows.push_back(row);
    in_units = cfg.dense_width;
  }
  const RealDenseShape head{cfg.symbols.size() + 1, 4 * in_units, true};
  rows.push_back({"output", "dense", dims({head.out, head.in}), head.weight_count(), head.out});
  return rows;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto geometry = Conv2dGeometry::same(cfg_.kernel_freq, cfg_.kernel_time);
  const std::size_t rf = cfg_.kernel_freq * cfg_.kernel_time;
  std::uint64_t layer_index = 0;

  std::size_t in_q = 1;
  for (std::size_t l = 0; l < cfg_.n_conv_layers; ++l) {
    const std::size_t out_q = cfg_.maps_at(l);
    QConvLayer layer(out_q, in_q, cfg_.kernel_freq, cfg_.kernel_time, cfg_.bias, geometry);
    const InitSpec spec{cfg_.init, in_q * rf, out_q * rf, derive_seed(seed, layer_index++)};
    layer.weight = quaternion_init(spec, layer.weight.shape());
    convs_.push_back(std::move(layer));
    conv_slopes_.emplace_back(Shape{out_q}, cfg_.prelu_init);
    in_q = out_q;
  }
  in_q *= cfg_.pooled_width();
  for (std::size_t d = 0; d < cfg_.n_dense; ++d) {
    QDenseLayer layer(cfg_.dense_width, in_q, cfg_.bias);
    const InitSpec spec{cfg_.init, in_q, cfg_.dense_width, derive_seed(seed, layer_index++)};
    layer.weight = quaternion_init(spec, layer.weight.shape());
    denses_.push_back(std::move(layer));
    dense_slopes_.emplace_back(Shape{cfg_.dense_width}, cfg_.prelu_init);
    in_q = cfg_.dense_width;
  }

  const std::size_t fan_in = 4 * in_q;
  const std::size_t fan_out = num_classes();
  out_weight_ = Tensor({fan_out, fan_in});
  out_bias_ = Tensor({fan_out});
  std::mt19937_64 rng(derive_seed(seed, layer_index));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> glorot(-limit, limit);
  for (double& w : out_weight_.data()) w = glorot(rng);
}

template <typename Self, typename F>
void Model::visit(Self& self, F&& f) {
  for (std::size_t l = 0; l < self.convs_.size(); ++l) {
    auto& layer = self.convs_[l];
    const std::string p = "conv" + std::to_string(l);
    const bool reg = l > 0;
    auto w = layer.weight.planes();
    for (int c = 0; c < 4; ++c) f(p + ".w." + kPlaneNames[c], *w[c], reg);
    if (layer.has_bias()) {
      auto b = layer.bias.planes();
      for (int c = 0; c < 4; ++c) f(p + ".b." + kPlaneNames[c], *b[c], false);
    }
    f(p + ".prelu", self.conv_slopes_[l], false);
  }
  for (std::size_t d = 0; d < self.denses_.size(); ++d) {
    auto& layer = self.denses_[d];
    const std::string p = "dense" + std::to_string(d);
    auto w = layer.weight.planes();
    for (int c = 0; c < 4; ++c) f(p + ".w." + kPlaneNames[c], *w[c], true);
    if (layer.has_bias()) {
      auto b = layer.bias.planes();
      for (int c = 0; c < 4; ++c) f(p + ".b." + kPlaneNames[c], *b[c], false);
    }
    f(p + ".prelu", self.dense_slopes_[d], false);
  }
  f(std::string("output.w"), self.out_weight_, false);
  f(std::string("output.b"), self.out_bias_, false);
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> out;
  visit(*this, [&](const std::string& name, Tensor& t, bool reg) { out.push_back({name, &t, reg}); });
  return out;
}

std::vector<ConstParamRef> Model::parameters() const {
  std::vector<ConstParamRef> out;
  visit(*this, [&](const std::string& name, const Tensor& t, bool reg) { out.push_back({name, &t, reg}); });
  return out;
}

std::size_t Model::count_params() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value->size();
  return n;
}

std::size_t Model::count_weights() const {
  std::size_t n = 0;
  for (const auto& layer : convs_) n += layer.weight_count();
  for (const auto& layer : denses_) n += layer.weight_count();
  return n + out_weight_.size();
}

Model::Forward Model::forward(Tape& tape, const QuaternionPlanes& input, std::span<const std::size_t> lengths,
                              bool training, std::mt19937_64& rng) const {
  const Shape& s = input.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != cfg_.input_width) {
    throw std::invalid_argument("Model::forward: expected input (batch, 1, " + std::to_string(cfg_.input_width) +
                                ", frames), got " + shape_str(s));
  }
  if (lengths.size() != s[0]) throw std::invalid_argument("Model::forward: one length per batch item required");
  for (std::size_t len : lengths) {
    if (len == 0 || len > s[3]) throw std::invalid_argument("Model::forward: utterance length out of range");
  }

  Forward fwd;
  auto bind_planes = [&](const QuaternionPlanes& p) {
    QTensor q = as_parameter(tape, p);
    for (const Var& v : q.planes()) fwd.leaves.push_back(v);
    return q;
  };
  auto bind = [&](const Tensor& t) {
    Var v = tape.parameter(t);
    fwd.leaves.push_back(v);
    return v;
  };
  auto mask = [&](const QTensor& q) {
    return QTensor{time_mask(q.r, lengths), time_mask(q.x, lengths), time_mask(q.y, lengths),
                   time_mask(q.z, lengths)};
  };

  QTensor h = mask(as_constant(tape, input));  // padding must not leak through the first kernel
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    const QConvLayer& layer = convs_[l];
    QTensor kernel = bind_planes(layer.weight);
    std::optional<QTensor> bias;
    if (layer.has_bias()) bias = bind_planes(layer.bias);
    Var slopes = bind(conv_slopes_[l]);
    h = prelu(qconv2d(h, kernel, bias, layer.geometry), slopes);
    if (l == 0) {
      h = split_maxpool_freq(h, cfg_.pool_width);
    } else {
      h = quaternion_dropout(h, cfg_.dropout, rng, training);
    }
    h = mask(h);
  }

  QTensor m{frames_to_matrix(h.r), frames_to_matrix(h.x), frames_to_matrix(h.y), frames_to_matrix(h.z)};
  for (std::size_t d = 0; d < denses_.size(); ++d) {
    const QDenseLayer& layer = denses_[d];
    QTensor weight = bind_planes(layer.weight);
    std::optional<QTensor> bias;
    if (layer.has_bias()) bias = bind_planes(layer.bias);
    Var slopes = bind(dense_slopes_[d]);
    m = quaternion_dropout(prelu(qdense(m, weight, bias), slopes), cfg_.dropout, rng, training);
  }

  Var features = concat_rows({m.r, m.x, m.y, m.z});
  Var w = bind(out_weight_);
  Var b = bind(out_bias_);
  fwd.logits = transpose(add_bias(matmul(w, features), b, 0));
  return fwd;
}

std::vector<Tensor> Model::gradients(const Tape& tape, const Forward& fwd) {
  std::vector<Tensor> out;
  out.reserve(fwd.leaves.size());
  for (const Var& v : fwd.leaves) out.push_back(tape.grad(v));
  return out;
}

}  // namespace qcnn

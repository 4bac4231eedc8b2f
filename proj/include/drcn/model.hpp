#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "drcn/layers.hpp"
#include "drcn/loss.hpp"
#include "drcn/random.hpp"
#include "drcn/tensor.hpp"

// The network: a shared convolutional encoder feeding two heads. The label
// pipeline appends dense fc_out + softmax; the reconstruction pipeline runs a
// mirror-image decoder (dense, dense, then transposed convolutions with
// duplication unpooling) back to input geometry. Encoder parameters are the
// same tensors in both pipelines — updating one updates the other.

namespace drcn {

struct ArchitectureSpec {
  std::size_t in_channels = 1;
  std::size_t in_height = 28;
  std::size_t in_width = 28;
  std::size_t classes = 10;
  std::array<std::size_t, 3> conv_channels{100, 150, 200};
  std::array<std::size_t, 3> conv_kernels{5, 5, 3};
  std::size_t fc_width = 300;
  bool with_decoder = true;
};

// Spatial geometry after each encoder stage; construction validates the whole
// chain and names the first stage that fails.
struct ShapeChain {
  std::size_t c1_h, c1_w;  // conv1 output
  std::size_t p1_h, p1_w;  // pool1 output
  std::size_t c2_h, c2_w;  // conv2 output
  std::size_t p2_h, p2_w;  // pool2 output
  std::size_t c3_h, c3_w;  // conv3 output
  std::size_t flat;        // flattened feature count entering fc4
};

inline ShapeChain infer_shape_chain(const ArchitectureSpec& a) {
  if (a.classes < 2) throw ArgumentError("architecture needs at least 2 classes");
  if (a.fc_width == 0) throw ArgumentError("architecture needs fc_width > 0");
  for (std::size_t k : a.conv_kernels) ConvLayer::check_kernel(k, k);

  auto conv_out = [](std::size_t in, std::size_t k, const char* stage) {
    if (in < k) {
      throw DimensionError(std::string(stage) + ": input extent " + std::to_string(in) +
                           " is smaller than kernel " + std::to_string(k));
    }
    return in - k + 1;
  };
  auto pool_out = [](std::size_t in, const char* stage) {
    if (in % 2 != 0) {
      throw DimensionError(std::string(stage) + ": input extent " + std::to_string(in) +
                           " is odd, cannot 2x2-pool");
    }
    return in / 2;
  };

  ShapeChain c{};
  c.c1_h = conv_out(a.in_height, a.conv_kernels[0], "conv1");
  c.c1_w = conv_out(a.in_width, a.conv_kernels[0], "conv1");
  c.p1_h = pool_out(c.c1_h, "pool1");
  c.p1_w = pool_out(c.c1_w, "pool1");
  c.c2_h = conv_out(c.p1_h, a.conv_kernels[1], "conv2");
  c.c2_w = conv_out(c.p1_w, a.conv_kernels[1], "conv2");
  c.p2_h = pool_out(c.c2_h, "pool2");
  c.p2_w = pool_out(c.c2_w, "pool2");
  c.c3_h = conv_out(c.p2_h, a.conv_kernels[2], "conv3");
  c.c3_w = conv_out(c.p2_w, a.conv_kernels[2], "conv3");
  c.flat = a.conv_channels[2] * c.c3_h * c.c3_w;
  return c;
}

struct DrcnModel {
  ArchitectureSpec arch;
  ShapeChain chain;

  // encoder
  ConvLayer conv1, conv2, conv3;
  DenseLayer fc4, fc5;
  // label head
  DenseLayer fc_out;
  // decoder (empty tensors when arch.with_decoder is false)
  DenseLayer dec_fc5, dec_fc4;
  TransposedConvLayer dec_conv3, dec_conv2, dec_conv1;

  bool has_decoder() const { return arch.with_decoder; }
};

// Initialization draws He-normal weights in a fixed declaration order from
// three independent substreams, so a decoder-less build consumes exactly the
// same encoder/labeler draws as a full one.
inline DrcnModel build_model(const ArchitectureSpec& arch, const Rng& master) {
  DrcnModel m;
  m.arch = arch;
  m.chain = infer_shape_chain(arch);

  Rng enc = master.substream("init.encoder");
  m.conv1 = ConvLayer::he_init(arch.conv_channels[0], arch.in_channels,
                               arch.conv_kernels[0], arch.conv_kernels[0], enc);
  m.conv2 = ConvLayer::he_init(arch.conv_channels[1], arch.conv_channels[0],
                               arch.conv_kernels[1], arch.conv_kernels[1], enc);
  m.conv3 = ConvLayer::he_init(arch.conv_channels[2], arch.conv_channels[1],
                               arch.conv_kernels[2], arch.conv_kernels[2], enc);
  m.fc4 = DenseLayer::he_init(arch.fc_width, m.chain.flat, enc);
  m.fc5 = DenseLayer::he_init(arch.fc_width, arch.fc_width, enc);

  Rng lab = master.substream("init.labeler");
  m.fc_out = DenseLayer::he_init(arch.classes, arch.fc_width, lab);

  if (arch.with_decoder) {
    Rng dec = master.substream("init.decoder");
    m.dec_fc5 = DenseLayer::he_init(arch.fc_width, arch.fc_width, dec);
    m.dec_fc4 = DenseLayer::he_init(m.chain.flat, arch.fc_width, dec);
    m.dec_conv3 = TransposedConvLayer::he_init(arch.conv_channels[2], arch.conv_channels[1],
                                               arch.conv_kernels[2], arch.conv_kernels[2], dec);
    m.dec_conv2 = TransposedConvLayer::he_init(arch.conv_channels[1], arch.conv_channels[0],
                                               arch.conv_kernels[1], arch.conv_kernels[1], dec);
    m.dec_conv1 = TransposedConvLayer::he_init(arch.conv_channels[0], arch.in_channels,
                                               arch.conv_kernels[0], arch.conv_kernels[0], dec);
  }
  return m;
}

// ---------------------------------------------------------------------------
// parameter registry

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

enum class ParamSet { encoder, labeler, decoder, classification, reconstruction, all };

inline std::vector<ParamRef> param_refs(DrcnModel& m, ParamSet set) {
  std::vector<ParamRef> refs;
  auto encoder = [&] {
    refs.push_back({"conv1.kernels", &m.conv1.kernels});
    refs.push_back({"conv1.bias", &m.conv1.bias});
    refs.push_back({"conv2.kernels", &m.conv2.kernels});
    refs.push_back({"conv2.bias", &m.conv2.bias});
    refs.push_back({"conv3.kernels", &m.conv3.kernels});
    refs.push_back({"conv3.bias", &m.conv3.bias});
    refs.push_back({"fc4.weights", &m.fc4.weights});
    refs.push_back({"fc4.bias", &m.fc4.bias});
    refs.push_back({"fc5.weights", &m.fc5.weights});
    refs.push_back({"fc5.bias", &m.fc5.bias});
  };
  auto labeler = [&] {
    refs.push_back({"fc_out.weights", &m.fc_out.weights});
    refs.push_back({"fc_out.bias", &m.fc_out.bias});
  };
  auto decoder = [&] {
    if (!m.has_decoder()) {
      throw ArgumentError("model has no decoder: reconstruction parameters unavailable");
    }
    refs.push_back({"dec_fc5.weights", &m.dec_fc5.weights});
    refs.push_back({"dec_fc5.bias", &m.dec_fc5.bias});
    refs.push_back({"dec_fc4.weights", &m.dec_fc4.weights});
    refs.push_back({"dec_fc4.bias", &m.dec_fc4.bias});
    refs.push_back({"dec_conv3.kernels", &m.dec_conv3.kernels});
    refs.push_back({"dec_conv3.bias", &m.dec_conv3.bias});
    refs.push_back({"dec_conv2.kernels", &m.dec_conv2.kernels});
    refs.push_back({"dec_conv2.bias", &m.dec_conv2.bias});
    refs.push_back({"dec_conv1.kernels", &m.dec_conv1.kernels});
    refs.push_back({"dec_conv1.bias", &m.dec_conv1.bias});
  };
  switch (set) {
    case ParamSet::encoder: encoder(); break;
    case ParamSet::labeler: labeler(); break;
    case ParamSet::decoder: decoder(); break;
    case ParamSet::classification: encoder(); labeler(); break;
    case ParamSet::reconstruction: encoder(); decoder(); break;
    case ParamSet::all:
      encoder();
      labeler();
      if (m.has_decoder()) decoder();
      break;
  }
  return refs;
}

struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

inline std::vector<ConstParamRef> param_refs(const DrcnModel& m, ParamSet set) {
  // Read-only view over the same registry; nothing is mutated through it.
  auto refs = param_refs(const_cast<DrcnModel&>(m), set);
  std::vector<ConstParamRef> out;
  out.reserve(refs.size());
  for (auto& r : refs) out.push_back({std::move(r.name), r.tensor});
  return out;
}

// Gradients named and ordered exactly like the matching param_refs set.
using NamedGrads = std::vector<std::pair<std::string, Tensor>>;

// ---------------------------------------------------------------------------
// encoder forward/backward

struct EncoderTrace {
  Tensor input;
  Tensor c1, r1;
  PoolResult p1;
  Tensor c2, r2;
  PoolResult p2;
  Tensor c3, r3;
  Tensor flat;
  Tensor f4, r4, r4d;
  Tensor f5, r5, r5d;
  Tensor mask4, mask5;  // dropout masks; empty when dropout was off
  bool dropout = false;

  // Encoder output as seen by the head that consumed it.
  const Tensor& features() const { return r5d; }
};

struct EncodeOptions {
  bool dropout = false;   // classification-pipeline training only
  double p_keep = 0.5;
  Rng* dropout_rng = nullptr;
};

inline EncoderTrace encode(const DrcnModel& m, const Tensor& batch,
                           const EncodeOptions& opt = {}) {
  if (batch.rank() != 4 || batch.dim(1) != m.arch.in_channels ||
      batch.dim(2) != m.arch.in_height || batch.dim(3) != m.arch.in_width) {
    throw DimensionError("encode: batch " + shape_str(batch.shape()) +
                         " does not match architecture input " +
                         std::to_string(m.arch.in_channels) + "x" +
                         std::to_string(m.arch.in_height) + "x" +
                         std::to_string(m.arch.in_width));
  }
  if (opt.dropout && opt.dropout_rng == nullptr) {
    throw ArgumentError("encode: dropout requested without an rng");
  }
  EncoderTrace t;
  t.input = batch;
  t.c1 = conv2d_forward(m.conv1, batch);
  t.r1 = relu(t.c1);
  t.p1 = maxpool2_forward(t.r1);
  t.c2 = conv2d_forward(m.conv2, t.p1.output);
  t.r2 = relu(t.c2);
  t.p2 = maxpool2_forward(t.r2);
  t.c3 = conv2d_forward(m.conv3, t.p2.output);
  t.r3 = relu(t.c3);
  t.flat = t.r3.reshaped({batch.dim(0), m.chain.flat});
  t.f4 = dense_forward(m.fc4, t.flat);
  t.r4 = relu(t.f4);
  t.dropout = opt.dropout;
  if (opt.dropout) {
    DropoutResult d4 = dropout_forward(t.r4, opt.p_keep, *opt.dropout_rng);
    t.r4d = std::move(d4.output);
    t.mask4 = std::move(d4.mask);
  } else {
    t.r4d = t.r4;
  }
  t.f5 = dense_forward(m.fc5, t.r4d);
  t.r5 = relu(t.f5);
  if (opt.dropout) {
    DropoutResult d5 = dropout_forward(t.r5, opt.p_keep, *opt.dropout_rng);
    t.r5d = std::move(d5.output);
    t.mask5 = std::move(d5.mask);
  } else {
    t.r5d = t.r5;
  }
  return t;
}

// Backpropagate from a gradient on trace.features() down to all encoder
// parameters; returns grads in encoder declaration order.
inline NamedGrads encoder_backward(const DrcnModel& m, const EncoderTrace& t,
                                   const Tensor& g_features) {
  Tensor g_r5 = t.dropout ? dropout_backward(t.mask5, g_features) : g_features;
  Tensor g_f5 = relu_backward(t.f5, g_r5);
  DenseGrads d5 = dense_backward(m.fc5, t.r4d, g_f5);
  Tensor g_r4 = t.dropout ? dropout_backward(t.mask4, d5.input) : std::move(d5.input);
  Tensor g_f4 = relu_backward(t.f4, g_r4);
  DenseGrads d4 = dense_backward(m.fc4, t.flat, g_f4);
  Tensor g_r3 = d4.input.reshaped(t.r3.shape());
  Tensor g_c3 = relu_backward(t.c3, g_r3);
  ConvGrads c3 = conv2d_backward(m.conv3, t.p2.output, g_c3);
  Tensor g_r2 = maxpool2_backward(t.p2.switches, c3.input);
  Tensor g_c2 = relu_backward(t.c2, g_r2);
  ConvGrads c2 = conv2d_backward(m.conv2, t.p1.output, g_c2);
  Tensor g_r1 = maxpool2_backward(t.p1.switches, c2.input);
  Tensor g_c1 = relu_backward(t.c1, g_r1);
  ConvGrads c1 = conv2d_backward(m.conv1, t.input, g_c1);

  NamedGrads g;
  g.emplace_back("conv1.kernels", std::move(c1.kernels));
  g.emplace_back("conv1.bias", std::move(c1.bias));
  g.emplace_back("conv2.kernels", std::move(c2.kernels));
  g.emplace_back("conv2.bias", std::move(c2.bias));
  g.emplace_back("conv3.kernels", std::move(c3.kernels));
  g.emplace_back("conv3.bias", std::move(c3.bias));
  g.emplace_back("fc4.weights", std::move(d4.weights));
  g.emplace_back("fc4.bias", std::move(d4.bias));
  g.emplace_back("fc5.weights", std::move(d5.weights));
  g.emplace_back("fc5.bias", std::move(d5.bias));
  return g;
}

// ---------------------------------------------------------------------------
// classification pipeline f_c

// Eval-mode class probabilities (no dropout).
inline Tensor predict_probs(const DrcnModel& m, const Tensor& batch) {
  EncoderTrace t = encode(m, batch);
  return softmax(dense_forward(m.fc_out, t.features()));
}

struct ClassifyResult {
  double loss;
  Tensor probs;
  NamedGrads grads;  // classification params: encoder then labeler
};

inline ClassifyResult classify_loss_and_grads(const DrcnModel& m, const Tensor& batch,
                                              const Tensor& onehot, double p_keep,
                                              Rng& dropout_rng) {
  EncodeOptions opt;
  opt.dropout = p_keep < 1.0;
  opt.p_keep = p_keep;
  opt.dropout_rng = &dropout_rng;
  EncoderTrace t = encode(m, batch, opt);
  Tensor probs = softmax(dense_forward(m.fc_out, t.features()));
  CrossEntropyResult ce = cross_entropy(probs, onehot);
  DenseGrads head = dense_backward(m.fc_out, t.features(), ce.logit_grad);

  ClassifyResult r{ce.value, std::move(probs), encoder_backward(m, t, head.input)};
  r.grads.emplace_back("fc_out.weights", std::move(head.weights));
  r.grads.emplace_back("fc_out.bias", std::move(head.bias));
  return r;
}

// ---------------------------------------------------------------------------
// reconstruction pipeline f_r

struct DecoderTrace {
  Tensor u5, ru5;
  Tensor u4, ru4;
  Tensor z3;       // ru4 reshaped to conv3 output geometry
  Tensor t3, rt3;  // dec_conv3 pre/post relu
  Tensor up2;
  Tensor t2, rt2;
  Tensor up1;
  Tensor recon;    // linear output, input geometry
};

inline DecoderTrace decode(const DrcnModel& m, const Tensor& features) {
  if (!m.has_decoder()) {
    throw ArgumentError("decode: model was built without a decoder");
  }
  const std::size_t B = features.dim(0);
  DecoderTrace t;
  t.u5 = dense_forward(m.dec_fc5, features);
  t.ru5 = relu(t.u5);
  t.u4 = dense_forward(m.dec_fc4, t.ru5);
  t.ru4 = relu(t.u4);
  t.z3 = t.ru4.reshaped({B, m.arch.conv_channels[2], m.chain.c3_h, m.chain.c3_w});
  t.t3 = tconv2d_forward(m.dec_conv3, t.z3);
  t.rt3 = relu(t.t3);
  t.up2 = unpool2_forward(t.rt3);
  t.t2 = tconv2d_forward(m.dec_conv2, t.up2);
  t.rt2 = relu(t.t2);
  t.up1 = unpool2_forward(t.rt2);
  t.recon = tconv2d_forward(m.dec_conv1, t.up1);
  return t;
}

// Eval-mode reconstruction; output shape equals input shape by construction.
inline Tensor reconstruct_images(const DrcnModel& m, const Tensor& batch) {
  EncoderTrace enc = encode(m, batch);
  return decode(m, enc.features()).recon;
}

struct ReconstructResult {
  double loss;
  Tensor recon;
  NamedGrads grads;  // reconstruction params: encoder then decoder
};

// noisy goes through the network; the squared loss pulls toward clean.
inline ReconstructResult reconstruct_loss_and_grads(const DrcnModel& m, const Tensor& noisy,
                                                    const Tensor& clean) {
  if (!noisy.same_shape(clean)) {
    throw DimensionError("reconstruct: noisy " + shape_str(noisy.shape()) +
                         " and clean " + shape_str(clean.shape()) + " differ");
  }
  EncoderTrace enc = encode(m, noisy);
  DecoderTrace dec = decode(m, enc.features());
  SquaredLossResult sq = squared_loss(dec.recon, clean);

  TConvGrads g1 = tconv2d_backward(m.dec_conv1, dec.up1, sq.grad);
  Tensor g_rt2 = unpool2_backward(g1.input);
  Tensor g_t2 = relu_backward(dec.t2, g_rt2);
  TConvGrads g2 = tconv2d_backward(m.dec_conv2, dec.up2, g_t2);
  Tensor g_rt3 = unpool2_backward(g2.input);
  Tensor g_t3 = relu_backward(dec.t3, g_rt3);
  TConvGrads g3 = tconv2d_backward(m.dec_conv3, dec.z3, g_t3);
  Tensor g_ru4 = g3.input.reshaped(dec.u4.shape());
  Tensor g_u4 = relu_backward(dec.u4, g_ru4);
  DenseGrads g4 = dense_backward(m.dec_fc4, dec.ru5, g_u4);
  Tensor g_u5 = relu_backward(dec.u5, g4.input);
  DenseGrads g5 = dense_backward(m.dec_fc5, enc.features(), g_u5);

  ReconstructResult r{sq.value, std::move(dec.recon), encoder_backward(m, enc, g5.input)};
  r.grads.emplace_back("dec_fc5.weights", std::move(g5.weights));
  r.grads.emplace_back("dec_fc5.bias", std::move(g5.bias));
  r.grads.emplace_back("dec_fc4.weights", std::move(g4.weights));
  r.grads.emplace_back("dec_fc4.bias", std::move(g4.bias));
  r.grads.emplace_back("dec_conv3.kernels", std::move(g3.kernels));
  r.grads.emplace_back("dec_conv3.bias", std::move(g3.bias));
  r.grads.emplace_back("dec_conv2.kernels", std::move(g2.kernels));
  r.grads.emplace_back("dec_conv2.bias", std::move(g2.bias));
  r.grads.emplace_back("dec_conv1.kernels", std::move(g1.kernels));
  r.grads.emplace_back("dec_conv1.bias", std::move(g1.bias));
  return r;
}

}  // namespace drcn

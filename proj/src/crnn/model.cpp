// SPDX-License-Identifier: Apache-2.0
#include "disfluency/crnn/model.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "disfluency/binary_io.hpp"
#include "disfluency/errors.hpp"

namespace disfluency::crnn {

CrnnArch CrnnArch::mfcc_default() {
  CrnnArch a;
  a.input_kind = FeatureKind::mfcc;
  a.input_bins = kMfccCoeffs;
  a.conv = {ConvSpec{32, 8, 8, 5, 0.25}, ConvSpec{64, 4, 4, 4, 0.25}};
  return a;
}

CrnnArch CrnnArch::log_mel_default() {
  CrnnArch a;
  a.input_kind = FeatureKind::log_mel;
  a.input_bins = kLogMelBands;
  a.conv = {ConvSpec{32, 8, 8, 8, 0.25}, ConvSpec{64, 4, 4, 4, 0.25}};
  return a;
}

CrnnArch CrnnArch::for_kind(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::mfcc: return mfcc_default();
    case FeatureKind::log_mel: return log_mel_default();
    default: throw ShapeError("the CRNN takes mfcc or log_mel input");
  }
}

int CrnnArch::pooled_bins() const {
  int bins = input_bins;
  for (const auto& c : conv) bins /= c.pool_freq;
  return bins;
}

int CrnnArch::stacked_dim() const {
  const int maps = conv.empty() ? 1 : conv.back().filters;
  return maps * pooled_bins();
}

void CrnnArch::validate() const {
  int bins = input_bins;
  if (bins <= 0) throw ShapeError("input bins must be positive");
  for (const auto& c : conv) {
    if (c.filters <= 0 || c.kernel_freq <= 0 || c.kernel_time <= 0 || c.pool_freq <= 0) {
      throw ShapeError("conv layer sizes must be positive");
    }
    if (bins % c.pool_freq != 0) {
      throw ShapeError("frequency size " + std::to_string(bins) + " not divisible by pool " +
                       std::to_string(c.pool_freq));
    }
    if (c.dropout < 0.0 || c.dropout >= 1.0) throw ShapeError("dropout must be in [0, 1)");
    bins /= c.pool_freq;
  }
  if (gru_layers < 1 || gru_hidden < 1 || fc_hidden < 1 || classes < 2) {
    throw ShapeError("recurrent and dense sizes must be positive");
  }
  if (fc_dropout < 0.0 || fc_dropout >= 1.0) throw ShapeError("dropout must be in [0, 1)");
}

bool operator==(const ConvSpec& a, const ConvSpec& b) {
  return a.filters == b.filters && a.kernel_freq == b.kernel_freq && a.kernel_time == b.kernel_time &&
         a.pool_freq == b.pool_freq && a.dropout == b.dropout;
}

bool operator==(const CrnnArch& a, const CrnnArch& b) {
  return a.input_kind == b.input_kind && a.input_bins == b.input_bins && a.conv == b.conv &&
         a.gru_layers == b.gru_layers && a.gru_hidden == b.gru_hidden && a.fc_hidden == b.fc_hidden &&
         a.fc_dropout == b.fc_dropout && a.classes == b.classes;
}

namespace {

Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  return m;
}

RowMatrix dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double p) {
  RowMatrix m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? 0.0 : keep;
  return m;
}

}  // namespace

CrnnModel CrnnModel::initialize(const CrnnArch& arch, std::uint64_t seed) {
  arch.validate();
  CrnnModel m;
  m.arch = arch;
  m.rng_seed = seed;
  Rng rng(mix_seed(seed, 0xC0));
  int cin = 1;
  for (std::size_t i = 0; i < arch.conv.size(); ++i) {
    const auto& c = arch.conv[i];
    const int area = c.kernel_freq * c.kernel_time;
    m.params.push_back(glorot(rng, c.filters, cin * area, cin * area, c.filters * area));
    m.params.push_back(Matrix::Zero(c.filters, 1));
    m.names.push_back("conv" + std::to_string(i + 1) + ".weight");
    m.names.push_back("conv" + std::to_string(i + 1) + ".bias");
    cin = c.filters;
  }
  int in_dim = arch.stacked_dim();
  const int d = arch.gru_hidden;
  for (int l = 0; l < arch.gru_layers; ++l) {
    m.params.push_back(glorot(rng, 3 * d, in_dim, in_dim, d));
    m.params.push_back(glorot(rng, 3 * d, d, d, d));
    m.params.push_back(Matrix::Zero(3 * d, 1));
    const std::string p = "gru" + std::to_string(l + 1);
    m.names.push_back(p + ".input");
    m.names.push_back(p + ".recurrent");
    m.names.push_back(p + ".bias");
    in_dim = d;
  }
  m.params.push_back(glorot(rng, arch.fc_hidden, d, d, arch.fc_hidden));
  m.params.push_back(Matrix::Zero(arch.fc_hidden, 1));
  m.params.push_back(glorot(rng, arch.classes, arch.fc_hidden, arch.fc_hidden, arch.classes));
  m.params.push_back(Matrix::Zero(arch.classes, 1));
  m.names.insert(m.names.end(), {"fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"});
  m.input_mean = Vector::Zero(arch.input_bins);
  m.input_scale = Vector::Ones(arch.input_bins);
  return m;
}

GruWeights CrnnModel::gru(std::size_t layer) const {
  return GruWeights{params[gru_input(layer)], params[gru_recurrent(layer)], params[gru_bias(layer)]};
}

std::size_t CrnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.size());
  return n;
}

double CrnnModel::squared_norm() const {
  double s = 0.0;
  for (const auto& p : params) s += p.squaredNorm();
  return s;
}

void CrnnModel::check_finite() const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].allFinite()) throw ShapeError("non-finite values in " + names[i]);
  }
}

Matrix forward_window(const CrnnModel& model, const RowMatrix& input, const ForwardOptions& opts,
                      ForwardCache* cache) {
  const auto& arch = model.arch;
  if (input.rows() != arch.input_bins) {
    throw ShapeError("input has " + std::to_string(input.rows()) + " bins, model expects " +
                     std::to_string(arch.input_bins));
  }
  if (opts.training && opts.rng == nullptr) throw ShapeError("training forward pass needs an rng");
  const std::size_t n_conv = arch.conv.size();
  if (cache != nullptr) {
    cache->conv.assign(n_conv, {});
    cache->pool.assign(n_conv, {});
    cache->conv_dropout.assign(n_conv, {});
    cache->gru.assign(static_cast<std::size_t>(arch.gru_layers), {});
  }

  FeatureMaps x = FeatureMaps::from_matrix(input);
  if (cache != nullptr) cache->input = x;
  for (std::size_t i = 0; i < n_conv; ++i) {
    const auto& spec = arch.conv[i];
    x = conv_forward(x, model.params[model.conv_weight(i)], model.params[model.conv_bias(i)], spec.kernel_freq,
                     spec.kernel_time, cache ? &cache->conv[i] : nullptr);
    x = maxpool_freq(x, spec.pool_freq, cache ? &cache->pool[i] : nullptr);
    if (opts.training && spec.dropout > 0.0) {
      RowMatrix mask = dropout_mask(*opts.rng, x.data.rows(), x.data.cols(), spec.dropout);
      x.data.array() *= mask.array();
      if (cache != nullptr) cache->conv_dropout[i] = std::move(mask);
    }
  }

  Matrix seq = stack_maps(x);
  const Vector h0 = Vector::Zero(arch.gru_hidden);
  for (int l = 0; l < arch.gru_layers; ++l) {
    seq = gru_forward(seq, model.gru(static_cast<std::size_t>(l)), h0,
                      cache ? &cache->gru[static_cast<std::size_t>(l)] : nullptr);
  }

  Matrix fc1 = model.params[model.fc1_weight()] * seq;
  fc1.colwise() += model.params[model.fc1_bias()].col(0);
  fc1 = fc1.cwiseMax(0.0);
  Matrix fc1_dropped = fc1;
  RowMatrix fc1_mask;
  if (opts.training && arch.fc_dropout > 0.0) {
    fc1_mask = dropout_mask(*opts.rng, fc1.rows(), fc1.cols(), arch.fc_dropout);
    fc1_dropped.array() *= fc1_mask.array();
  }

  Matrix logits = model.params[model.fc2_weight()] * fc1_dropped;
  logits.colwise() += model.params[model.fc2_bias()].col(0);
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const double mx = logits.col(t).maxCoeff();
    const Eigen::ArrayXd e = (logits.col(t).array() - mx).exp();
    probs.col(t) = (e / e.sum()).matrix();
  }
  if (cache != nullptr) {
    cache->fc1_out = std::move(fc1);
    cache->fc1_dropped = std::move(fc1_dropped);
    cache->fc1_mask = std::move(fc1_mask);
    cache->probs = probs;
  }
  return probs;
}

RowMatrix normalize_input(const CrnnModel& model, const RowMatrix& raw) {
  if (raw.rows() != model.input_mean.size()) throw ShapeError("feature bins do not match model normalization");
  RowMatrix out = raw;
  for (Eigen::Index c = 0; c < raw.rows(); ++c) {
    out.row(c) = (raw.row(c).array() - model.input_mean[c]) * model.input_scale[c];
  }
  return out;
}

Matrix forward(const CrnnModel& model, const FeatureMatrix& feats, bool training, Rng* rng) {
  if (feats.kind != model.arch.input_kind) {
    throw ShapeError("model expects " + std::string(to_string(model.arch.input_kind)) + " features, got " +
                     std::string(to_string(feats.kind)));
  }
  const RowMatrix x = normalize_input(model, feats.values);
  const Eigen::Index T = x.cols();
  const Eigen::Index L = model.seq_len;
  Matrix probs(model.arch.classes, T);
  ForwardOptions opts{training, rng};
  for (Eigen::Index start = 0; start < T; start += L) {
    const Eigen::Index n = std::min(L, T - start);
    RowMatrix window = RowMatrix::Zero(x.rows(), L);
    window.leftCols(n) = x.middleCols(start, n);
    const Matrix p = forward_window(model, window, opts);
    probs.middleCols(start, n) = p.leftCols(n);
  }
  return probs;
}

std::vector<unsigned char> serialize_model(const CrnnModel& m) {
  ByteWriter w;
  write_checkpoint_header(w, CheckpointKind::crnn, CrnnModel::kFormatVersion);
  const auto& a = m.arch;
  w.u32(static_cast<std::uint32_t>(a.input_kind));
  w.u32(static_cast<std::uint32_t>(a.input_bins));
  w.u32(static_cast<std::uint32_t>(a.conv.size()));
  for (const auto& c : a.conv) {
    w.u32(static_cast<std::uint32_t>(c.filters));
    w.u32(static_cast<std::uint32_t>(c.kernel_freq));
    w.u32(static_cast<std::uint32_t>(c.kernel_time));
    w.u32(static_cast<std::uint32_t>(c.pool_freq));
    w.f64(c.dropout);
  }
  w.u32(static_cast<std::uint32_t>(a.gru_layers));
  w.u32(static_cast<std::uint32_t>(a.gru_hidden));
  w.u32(static_cast<std::uint32_t>(a.fc_hidden));
  w.f64(a.fc_dropout);
  w.u32(static_cast<std::uint32_t>(a.classes));
  w.u32(static_cast<std::uint32_t>(m.seq_len));
  w.u64(m.rng_seed);
  w.matrix(m.input_mean);
  w.matrix(m.input_scale);
  w.u32(static_cast<std::uint32_t>(m.params.size()));
  for (const auto& p : m.params) w.matrix(p);
  return w.buffer();
}

CrnnModel deserialize_model(std::vector<unsigned char> bytes) {
  ByteReader r(std::move(bytes));
  read_checkpoint_header(r, CheckpointKind::crnn, CrnnModel::kFormatVersion);
  CrnnArch a;
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw ParseError("checkpoint input kind is not mfcc or log_mel");
  a.input_kind = static_cast<FeatureKind>(kind);
  a.input_bins = static_cast<int>(r.u32());
  const std::uint32_t n_conv = r.u32();
  if (n_conv > 16) throw ParseError("implausible conv layer count in checkpoint");
  for (std::uint32_t i = 0; i < n_conv; ++i) {
    ConvSpec c;
    c.filters = static_cast<int>(r.u32());
    c.kernel_freq = static_cast<int>(r.u32());
    c.kernel_time = static_cast<int>(r.u32());
    c.pool_freq = static_cast<int>(r.u32());
    c.dropout = r.f64();
    a.conv.push_back(c);
  }
  a.gru_layers = static_cast<int>(r.u32());
  a.gru_hidden = static_cast<int>(r.u32());
  a.fc_hidden = static_cast<int>(r.u32());
  a.fc_dropout = r.f64();
  a.classes = static_cast<int>(r.u32());
  try {
    a.validate();
  } catch (const ShapeError& e) {
    throw ParseError(std::string("invalid architecture in checkpoint: ") + e.what());
  }
  CrnnModel m = CrnnModel::initialize(a, 0);
  m.seq_len = static_cast<int>(r.u32());
  m.rng_seed = r.u64();
  m.input_mean = r.matrix().col(0);
  m.input_scale = r.matrix().col(0);
  const std::uint32_t n = r.u32();
  if (n != m.params.size()) throw ParseError("checkpoint tensor count does not match architecture");
  for (std::uint32_t i = 0; i < n; ++i) {
    Matrix p = r.matrix();
    if (p.rows() != m.params[i].rows() || p.cols() != m.params[i].cols()) {
      throw ParseError("tensor " + m.names[i] + " has the wrong shape");
    }
    m.params[i] = std::move(p);
  }
  if (!r.at_end()) throw ParseError("trailing bytes in checkpoint");
  if (m.input_mean.size() != a.input_bins || m.input_scale.size() != a.input_bins) {
    throw ParseError("normalization size does not match architecture");
  }
  return m;
}

void save_model(const CrnnModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

CrnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return deserialize_model(std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                                      std::istreambuf_iterator<char>()));
}

}  // namespace disfluency::crnn

#include "smcnet/model.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace smcnet {

std::string_view to_string(Precision p) { return p == Precision::F64 ? "f64" : "f32"; }

std::vector<StageShape> stage_shapes(const ModelConfig& cfg) {
  if (cfg.kernel == 0 || cfg.pool == 0 || cfg.conv1_filters == 0 || cfg.conv2_filters == 0 ||
      cfg.in_channels == 0 || cfg.num_classes == 0)
    throw ConfigError("model config has a zero-sized layer");
  std::vector<StageShape> out;
  Shape s{cfg.in_channels, cfg.input_h, cfg.input_w};
  out.push_back({"input", s});
  auto conv = [&](const char* name, std::uint32_t filters) {
    if (s[1] < cfg.kernel || s[2] < cfg.kernel)
      throw ShapeError(std::string("input too small: stage ") + name + " needs at least " +
                       std::to_string(cfg.kernel) + "x" + std::to_string(cfg.kernel) + " but receives " +
                       shape_string(s));
    s = {filters, s[1] - cfg.kernel + 1, s[2] - cfg.kernel + 1};
    out.push_back({name, s});
  };
  conv("conv1", cfg.conv1_filters);
  conv("conv2", cfg.conv2_filters);
  if (s[1] < cfg.pool || s[2] < cfg.pool)
    throw ShapeError("input too small: stage maxpool needs at least " + std::to_string(cfg.pool) + "x" +
                     std::to_string(cfg.pool) + " but receives " + shape_string(s));
  s = {s[0], s[1] / cfg.pool, s[2] / cfg.pool};
  out.push_back({"maxpool", s});
  out.push_back({"flatten", Shape{2 * numel(s)}});
  out.push_back({"dense", Shape{cfg.num_classes}});
  return out;
}

std::size_t expected_parameter_count(const ModelConfig& cfg) {
  const auto stages = stage_shapes(cfg);
  const std::size_t k2 = static_cast<std::size_t>(cfg.kernel) * cfg.kernel;
  const std::size_t c0 = cfg.in_channels, c1 = cfg.conv1_filters, c2 = cfg.conv2_filters;
  const std::size_t conv1 = 2 * (c1 * c0 * k2 + c1);
  const std::size_t bn1 = 4 * c1;
  const std::size_t conv2 = 2 * (c2 * c1 * k2 + c2);
  const std::size_t bn2 = 4 * c2;
  const std::size_t flat = stages[4].shape[0];
  const std::size_t dense = flat * cfg.num_classes + cfg.num_classes;
  return conv1 + bn1 + conv2 + bn2 + dense;
}

template <class T>
SMCNet<T>::SMCNet(const ModelConfig& cfg)
    : conv1(cfg.in_channels, cfg.conv1_filters, cfg.kernel),
      conv2(cfg.conv1_filters, cfg.conv2_filters, cfg.kernel),
      bn1(cfg.conv1_filters),
      bn2(cfg.conv2_filters),
      pool(cfg.pool),
      head(stage_shapes(cfg)[4].shape[0], cfg.num_classes),
      cfg_(cfg) {
  std::mt19937_64 rng(cfg.seed);
  conv1.init_glorot(rng);
  conv2.init_glorot(rng);
  head.init_glorot(rng);
}

template <class T>
RTensor<T> SMCNet<T>::forward(const CTensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.input_h || x.dim(3) != cfg_.input_w)
    throw ShapeError("model expects (B, " + std::to_string(cfg_.in_channels) + ", " + std::to_string(cfg_.input_h) +
                     ", " + std::to_string(cfg_.input_w) + "), got " + shape_string(x.shape));
  CTensor<T> h = conv1.forward(x);
  h = cfg_.bn_after_activation ? bn1.forward(act1.forward(h)) : act1.forward(bn1.forward(h));
  h = conv2.forward(h);
  h = cfg_.bn_after_activation ? bn2.forward(act2.forward(h)) : act2.forward(bn2.forward(h));
  h = pool.forward(h);
  has_forward_ = true;
  return head.forward(flatten.forward(h));
}

template <class T>
RTensor<T> SMCNet<T>::infer(const CTensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.input_h || x.dim(3) != cfg_.input_w)
    throw ShapeError("model expects (B, " + std::to_string(cfg_.in_channels) + ", " + std::to_string(cfg_.input_h) +
                     ", " + std::to_string(cfg_.input_w) + "), got " + shape_string(x.shape));
  CTensor<T> h = conv1.infer(x);
  h = cfg_.bn_after_activation ? bn1.infer(act1.infer(h)) : act1.infer(bn1.infer(h));
  h = conv2.infer(h);
  h = cfg_.bn_after_activation ? bn2.infer(act2.infer(h)) : act2.infer(bn2.infer(h));
  return head.infer(flatten.infer(pool.infer(h)));
}

template <class T>
CTensor<T> SMCNet<T>::backward(const RTensor<T>& grad_logits, bool need_input_grad) {
  if (!has_forward_) throw UsageError("SMCNet::backward() called before forward()");
  CTensor<T> g = flatten.backward(head.backward(grad_logits));
  g = pool.backward(g);
  g = cfg_.bn_after_activation ? act2.backward(bn2.backward(g)) : bn2.backward(act2.backward(g));
  g = conv2.backward(g);
  g = cfg_.bn_after_activation ? act1.backward(bn1.backward(g)) : bn1.backward(act1.backward(g));
  return conv1.backward(g, need_input_grad);
}

template <class T>
void SMCNet<T>::set_training(bool on) {
  training_ = on;
  bn1.set_training(on);
  bn2.set_training(on);
}

template <class T>
void SMCNet<T>::zero_grad() {
  for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <class T>
std::vector<ParamRef<T>> SMCNet<T>::parameters() {
  return {param_ref("conv1.weight", conv1.weight), param_ref("conv1.bias", conv1.bias),
          param_ref("bn1.gamma", bn1.gamma),       param_ref("bn1.beta", bn1.beta),
          param_ref("conv2.weight", conv2.weight), param_ref("conv2.bias", conv2.bias),
          param_ref("bn2.gamma", bn2.gamma),       param_ref("bn2.beta", bn2.beta),
          param_ref("head.weight", head.weight),   param_ref("head.bias", head.bias)};
}

template <class T>
std::vector<ParamRef<T>> SMCNet<T>::buffers() {
  return {{"bn1.running_mean", as_reals(bn1.running_mean.data), {}},
          {"bn1.running_var", as_reals(bn1.running_var.data), {}},
          {"bn2.running_mean", as_reals(bn2.running_mean.data), {}},
          {"bn2.running_var", as_reals(bn2.running_var.data), {}}};
}

template <class T>
std::size_t SMCNet<T>::parameter_count() const {
  return 2 * (conv1.weight.size() + conv1.bias.size() + bn1.gamma.size() + bn1.beta.size() +
              conv2.weight.size() + conv2.bias.size() + bn2.gamma.size() + bn2.beta.size()) +
         head.weight.size() + head.bias.size();
}

namespace {

template <class T>
std::vector<std::span<const T>> state_spans(const SMCNet<T>& m) {
  return {as_reals(m.conv1.weight.data),     as_reals(m.conv1.bias.data),       as_reals(m.bn1.gamma.data),
          as_reals(m.bn1.beta.data),         as_reals(m.conv2.weight.data),     as_reals(m.conv2.bias.data),
          as_reals(m.bn2.gamma.data),        as_reals(m.bn2.beta.data),         as_reals(m.head.weight.data),
          as_reals(m.head.bias.data),        as_reals(m.bn1.running_mean.data), as_reals(m.bn1.running_var.data),
          as_reals(m.bn2.running_mean.data), as_reals(m.bn2.running_var.data)};
}

template <class T>
std::vector<std::span<T>> state_spans_mut(SMCNet<T>& m) {
  std::vector<std::span<T>> out;
  for (auto& p : m.parameters()) out.push_back(p.value);
  for (auto& b : m.buffers()) out.push_back(b.value);
  return out;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t read_le(std::istream& in, int bytes, const char* what) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), bytes);
  if (in.gcount() != bytes) throw ParseError(ParseError::Kind::Truncated, std::string("truncated SMCW file while reading ") + what);
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

template <class T>
constexpr Precision precision_of() {
  return sizeof(T) == 8 ? Precision::F64 : Precision::F32;
}

}  // namespace

ModelConfig read_weights_config(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw ParseError(ParseError::Kind::Truncated, "truncated SMCW magic");
  if (std::memcmp(magic, kWeightsMagic, 4) != 0) throw ParseError(ParseError::Kind::BadMagic, "bad magic: expected \"SMCW\"");
  const auto version = read_le(in, 4, "version");
  if (version != kWeightsVersion)
    throw ParseError(ParseError::Kind::BadVersion, "unsupported SMCW version " + std::to_string(version));
  ModelConfig c;
  c.in_channels = static_cast<std::uint32_t>(read_le(in, 4, "in_channels"));
  c.conv1_filters = static_cast<std::uint32_t>(read_le(in, 4, "conv1_filters"));
  c.conv2_filters = static_cast<std::uint32_t>(read_le(in, 4, "conv2_filters"));
  c.kernel = static_cast<std::uint32_t>(read_le(in, 4, "kernel"));
  c.pool = static_cast<std::uint32_t>(read_le(in, 4, "pool"));
  c.input_h = static_cast<std::uint32_t>(read_le(in, 4, "input_h"));
  c.input_w = static_cast<std::uint32_t>(read_le(in, 4, "input_w"));
  c.num_classes = static_cast<std::uint32_t>(read_le(in, 4, "num_classes"));
  c.bn_after_activation = read_le(in, 4, "bn_after_activation") != 0;
  const auto prec = read_le(in, 4, "precision");
  if (prec != 32 && prec != 64) throw ParseError(ParseError::Kind::BadValue, "SMCW precision must be 32 or 64");
  c.precision = static_cast<Precision>(prec);
  c.seed = read_le(in, 8, "seed");
  return c;
}

template <class T>
void save_weights(const SMCNet<T>& model, std::ostream& sink) {
  const ModelConfig& c = model.config();
  std::string buf(kWeightsMagic, 4);
  put_u32(buf, kWeightsVersion);
  for (std::uint32_t v : {c.in_channels, c.conv1_filters, c.conv2_filters, c.kernel, c.pool, c.input_h, c.input_w,
                          c.num_classes, static_cast<std::uint32_t>(c.bn_after_activation)})
    put_u32(buf, v);
  put_u32(buf, static_cast<std::uint32_t>(precision_of<T>()));
  put_u64(buf, c.seed);
  for (const auto& span : state_spans(model)) {
    put_u32(buf, static_cast<std::uint32_t>(span.size()));
    for (T v : span) {
      if constexpr (sizeof(T) == 8)
        put_u64(buf, std::bit_cast<std::uint64_t>(v));
      else
        put_u32(buf, std::bit_cast<std::uint32_t>(v));
    }
  }
  sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!sink) throw IoError("failed writing SMCW weights");
}

template <class T>
void load_weights(SMCNet<T>& model, std::istream& source) {
  ModelConfig file_cfg = read_weights_config(source);
  ModelConfig expect = model.config();
  expect.precision = precision_of<T>();
  if (!(file_cfg == expect)) {
    std::string diff;
    auto note = [&](const char* name, auto a, auto b) {
      if (a != b) diff += std::string(" ") + name + " (file " + std::to_string(a) + " vs model " + std::to_string(b) + ")";
    };
    note("in_channels", file_cfg.in_channels, expect.in_channels);
    note("conv1_filters", file_cfg.conv1_filters, expect.conv1_filters);
    note("conv2_filters", file_cfg.conv2_filters, expect.conv2_filters);
    note("kernel", file_cfg.kernel, expect.kernel);
    note("pool", file_cfg.pool, expect.pool);
    note("input_h", file_cfg.input_h, expect.input_h);
    note("input_w", file_cfg.input_w, expect.input_w);
    note("num_classes", file_cfg.num_classes, expect.num_classes);
    note("bn_after_activation", int(file_cfg.bn_after_activation), int(expect.bn_after_activation));
    note("precision", static_cast<std::uint32_t>(file_cfg.precision), static_cast<std::uint32_t>(expect.precision));
    note("seed", file_cfg.seed, expect.seed);
    throw ConfigError("weight file config mismatch:" + diff);
  }
  for (auto span : state_spans_mut(model)) {
    const auto count = read_le(source, 4, "tensor length");
    if (count != span.size())
      throw ParseError(ParseError::Kind::DimensionOverflow,
                       "SMCW tensor holds " + std::to_string(count) + " scalars, model expects " + std::to_string(span.size()));
    for (T& v : span) {
      if constexpr (sizeof(T) == 8)
        v = std::bit_cast<double>(read_le(source, 8, "tensor data"));
      else
        v = std::bit_cast<float>(static_cast<std::uint32_t>(read_le(source, 4, "tensor data")));
    }
  }
}

template <class T>
std::uint64_t weights_digest(const SMCNet<T>& model) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& span : state_spans(model)) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(span.data());
    for (std::size_t i = 0; i < span.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

template class SMCNet<float>;
template class SMCNet<double>;
template void save_weights<float>(const SMCNet<float>&, std::ostream&);
template void save_weights<double>(const SMCNet<double>&, std::ostream&);
template void load_weights<float>(SMCNet<float>&, std::istream&);
template void load_weights<double>(SMCNet<double>&, std::istream&);
template std::uint64_t weights_digest<float>(const SMCNet<float>&);
template std::uint64_t weights_digest<double>(const SMCNet<double>&);

}  // namespace smcnet

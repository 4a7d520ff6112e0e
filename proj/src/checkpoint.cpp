#include "chanprune/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "chanprune/errors.h"
#include "chanprune/io_util.h"

namespace chanprune {

namespace {

constexpr const char* kMagic = "chanprune-checkpoint";

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void write_floats(std::ostream& out, const Tensor& t) {
  for (float f : t.values()) {
    const std::uint32_t le = to_le(std::bit_cast<std::uint32_t>(f));
    out.write(reinterpret_cast<const char*>(&le), sizeof le);
  }
}

void read_floats(std::istream& in, Tensor& t) {
  for (float& f : t.values()) {
    std::uint32_t le = 0;
    if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) {
      throw FormatError("checkpoint truncated inside tensor data");
    }
    f = std::bit_cast<float>(to_le(le));
  }
}

std::string next_line(std::istream& in, const char* expecting) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string("checkpoint ended before ") + expecting);
  return line;
}

Shape read_dims(std::istringstream& is) {
  Shape s;
  std::size_t d;
  while (is >> d) s.push_back(d);
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const NetworkDef& net, const WeightStore& weights) {
  validate(net);
  if (net.name.empty() || net.name.find_first_of(" \t\n") != std::string::npos) {
    throw std::invalid_argument("network name must be a non-empty token without whitespace");
  }
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  out << "name " << net.name << '\n';
  out << "input " << net.input[0] << ' ' << net.input[1] << ' ' << net.input[2] << '\n';
  out << "classes " << net.num_classes << '\n';
  out << "layers " << net.layers.size() << '\n';
  for (const LayerSpec& l : net.layers) {
    out << layer_kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::Conv: out << ' ' << l.outputs << ' ' << l.kernel << ' ' << l.stride << ' ' << l.pad; break;
      case LayerKind::Dense: out << ' ' << l.outputs; break;
      case LayerKind::MaxPool: out << ' ' << l.kernel << ' ' << l.stride; break;
      case LayerKind::Relu: break;
    }
    out << '\n';
  }
  std::size_t tensors = 0;
  for (const LayerParams& p : weights.layers) tensors += is_weighted(p.kind) ? 2 : 0;
  out << "tensors " << tensors << '\n';
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    const LayerParams& p = weights.layers[i];
    if (!is_weighted(p.kind)) continue;
    out << i << " weight";
    for (std::size_t d : p.weight.shape()) out << ' ' << d;
    out << '\n' << i << " bias";
    for (std::size_t d : p.bias.shape()) out << ' ' << d;
    out << '\n';
  }
  out << "data\n";
  for (const LayerParams& p : weights.layers) {
    if (!is_weighted(p.kind)) continue;
    write_floats(out, p.weight);
    write_floats(out, p.bias);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint ck;
  {
    std::istringstream is(next_line(in, "header"));
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != kMagic) throw FormatError("not a chanprune checkpoint");
    if (version != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
  }
  auto keyed = [&](const char* key) {
    std::istringstream is(next_line(in, key));
    std::string k;
    is >> k;
    if (k != key) throw FormatError(std::string("checkpoint: expected '") + key + "', got '" + k + "'");
    std::string rest;
    std::getline(is >> std::ws, rest);
    return rest;
  };
  ck.net.name = keyed("name");
  {
    std::istringstream is(keyed("input"));
    ck.net.input = read_dims(is);
  }
  ck.net.num_classes = std::stoul(keyed("classes"));
  const std::size_t n_layers = std::stoul(keyed("layers"));
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::istringstream is(next_line(in, "layer spec"));
    std::string kind;
    is >> kind;
    LayerSpec l;
    if (kind == "conv") {
      l.kind = LayerKind::Conv;
      is >> l.outputs >> l.kernel >> l.stride >> l.pad;
    } else if (kind == "dense") {
      l.kind = LayerKind::Dense;
      is >> l.outputs;
    } else if (kind == "maxpool") {
      l.kind = LayerKind::MaxPool;
      is >> l.kernel >> l.stride;
    } else if (kind == "relu") {
      l.kind = LayerKind::Relu;
    } else {
      throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
    }
    if (is.fail()) throw FormatError("checkpoint: malformed " + kind + " layer spec");
    ck.net.layers.push_back(l);
  }
  try {
    validate(ck.net);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint describes an invalid network: ") + e.what());
  }

  // Shapes in the header must agree with the layer specs.
  const WeightStore expected = init_weights(ck.net, 0);
  const std::size_t n_tensors = std::stoul(keyed("tensors"));
  ck.weights.layers.resize(n_layers);
  std::size_t seen = 0;
  for (std::size_t i = 0; i < n_layers; ++i) {
    ck.weights.layers[i].kind = ck.net.layers[i].kind;
    if (!is_weighted(ck.net.layers[i].kind)) continue;
    for (const char* which : {"weight", "bias"}) {
      std::istringstream is(next_line(in, "tensor header"));
      std::size_t layer = 0;
      std::string name;
      is >> layer >> name;
      const Shape dims = read_dims(is);
      const bool is_weight = std::strcmp(which, "weight") == 0;
      const Tensor& want = is_weight ? expected.layers[i].weight : expected.layers[i].bias;
      if (layer != i || name != which || dims != want.shape()) {
        throw FormatError("checkpoint: tensor header mismatch at layer " + std::to_string(i));
      }
      (is_weight ? ck.weights.layers[i].weight : ck.weights.layers[i].bias) = Tensor(dims);
      ++seen;
    }
  }
  if (seen != n_tensors) throw FormatError("checkpoint: tensor count mismatch");
  if (next_line(in, "data marker") != "data") throw FormatError("checkpoint: missing data marker");
  for (LayerParams& p : ck.weights.layers) {
    if (!is_weighted(p.kind)) continue;
    read_floats(in, p.weight);
    read_floats(in, p.bias);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkDef& net,
                     const WeightStore& weights) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint(os, net, weights);
  write_file_atomic(path, os.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace chanprune

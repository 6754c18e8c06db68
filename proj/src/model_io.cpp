#include "chaosot/model_io.hpp"

#include "chaosot/error.hpp"

namespace chaosot {

io::Bytes encode_model(const Model& model) {
  model.validate();
  const auto& s = model.spec;
  io::Bytes out;
  for (char c : {'C', 'H', 'M', '1'}) out.push_back(static_cast<std::uint8_t>(c));
  io::put_u8(out, static_cast<std::uint8_t>(s.kind));
  io::put_u16(out, static_cast<std::uint16_t>(s.layer_count()));
  for (auto w : s.widths) io::put_u32(out, static_cast<std::uint32_t>(w));
  io::put_u8(out, static_cast<std::uint8_t>(s.activation));
  io::put_u8(out, s.residual ? 1 : 0);
  io::put_u32(out, static_cast<std::uint32_t>(s.radius));
  io::put_u32(out, static_cast<std::uint32_t>(s.out_rows));
  io::put_u8(out, static_cast<std::uint8_t>(s.system));
  io::put_u32(out, static_cast<std::uint32_t>(s.state_dim));
  for (const auto& p : model.params)
    for (double v : p.values()) io::put_f64(out, v);
  return out;
}

Model decode_model(const io::Bytes& bytes) {
  io::Reader r(bytes, "model");
  r.expect_magic("CHM1");
  Model m;
  auto& s = m.spec;
  const auto kind = r.u8();
  if (kind > 2) throw FormatError("model: unknown kind " + std::to_string(kind));
  s.kind = static_cast<ModelKind>(kind);
  const std::size_t layers = r.u16();
  if (layers == 0) throw FormatError("model: no layers");
  for (std::size_t i = 0; i <= layers; ++i) s.widths.push_back(r.u32());
  const auto act = r.u8();
  if (act > 3) throw FormatError("model: unknown activation " + std::to_string(act));
  s.activation = static_cast<ad::Activation>(act);
  const auto residual = r.u8();
  if (residual > 1) throw FormatError("model: bad residual flag");
  s.residual = residual == 1;
  s.radius = r.u32();
  s.out_rows = r.u32();
  const auto tag = r.u8();
  if (tag > 3) throw FormatError("model: unknown system tag");
  s.system = static_cast<SystemKind>(tag);
  s.state_dim = r.u32();
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  // Shapes come from a freshly initialised model of the same spec.
  const Model shapes = init_model(s, 0);
  for (const auto& p : shapes.params) {
    std::vector<double> v(p.size());
    for (auto& x : v) x = r.f64();
    try {
      m.params.emplace_back(p.shape(), std::move(v));
    } catch (const NumericalError&) {
      throw FormatError("model: non-finite parameter values");
    }
  }
  if (r.remaining() != 0) throw FormatError("model: trailing bytes after parameters");
  return m;
}

void save_model(const std::string& path, const Model& model) { io::write_file_atomic(path, encode_model(model)); }

Model load_model(const std::string& path) { return decode_model(io::read_file(path)); }

}  // namespace chaosot

#include "chaosot/trajectory_io.hpp"

#include "chaosot/error.hpp"

namespace chaosot {

io::Bytes encode_trajectory(const Trajectory& traj) {
  traj.validate();
  io::Bytes out;
  out.reserve(32 + 8 * traj.states.size());
  for (char c : {'C', 'H', 'A', '1'}) out.push_back(static_cast<std::uint8_t>(c));
  io::put_u8(out, static_cast<std::uint8_t>(traj.system));
  for (int i = 0; i < 3; ++i) io::put_u8(out, 0);
  io::put_u64(out, traj.steps);
  io::put_u64(out, traj.dim);
  io::put_f64(out, traj.dt);
  for (double v : traj.states) io::put_f64(out, v);
  return out;
}

Trajectory decode_trajectory(const io::Bytes& bytes) {
  io::Reader r(bytes, "trajectory");
  r.expect_magic("CHA1");
  const auto tag = r.u8();
  if (tag > 3) throw FormatError("trajectory: unknown system tag " + std::to_string(tag));
  for (int i = 0; i < 3; ++i) r.u8();
  Trajectory t;
  t.system = static_cast<SystemKind>(tag);
  t.steps = r.u64();
  t.dim = r.u64();
  t.dt = r.f64();
  if (t.dim == 0 || t.steps == 0 || r.remaining() / 8 / t.dim < t.steps || r.remaining() != 8 * t.steps * t.dim)
    throw FormatError("trajectory: payload size does not match header");
  t.states.resize(t.steps * t.dim);
  for (auto& v : t.states) v = r.f64();
  t.validate();
  return t;
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
  io::write_file_atomic(path, encode_trajectory(traj));
}

Trajectory load_trajectory(const std::string& path) { return decode_trajectory(io::read_file(path)); }

}  // namespace chaosot

#include <cstdint>
#include <cstring>
#include <map>

#include "hoa/error.hpp"
#include "hoa/hand_model.hpp"
#include "io_util.hpp"

namespace hoa {

namespace {

constexpr char kMagic[] = "HOAHAND1";
constexpr std::size_t kMagicSize = 8;

struct Array {
  std::uint8_t dtype = 0;  // 0 float32, 1 int32
  std::vector<std::uint32_t> dims;
  std::vector<float> f;
  std::vector<std::int32_t> i;

  std::size_t size() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

template <typename T>
void put(std::string& out, T value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) {
    throw Error(ErrorCode::kFormat, "truncated hand model file");
  }
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

void put_array(std::string& out, const std::string& name, const Array& a) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out += name;
  put<std::uint8_t>(out, a.dtype);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) put<std::uint32_t>(out, d);
  if (a.dtype == 0) {
    out.append(reinterpret_cast<const char*>(a.f.data()), a.f.size() * 4);
  } else {
    out.append(reinterpret_cast<const char*>(a.i.data()), a.i.size() * 4);
  }
}

Array float_array(const Eigen::MatrixXd& m) {
  Array a;
  a.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  a.f.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.f.push_back(static_cast<float>(m(r, c)));
  }
  return a;
}

Eigen::MatrixXd to_matrix(const Array& a, const std::string& name) {
  if (a.dtype != 0 || a.dims.size() != 2) {
    throw Error(ErrorCode::kFormat, "array '" + name + "' must be a 2-d float32 array");
  }
  Eigen::MatrixXd m(a.dims[0], a.dims[1]);
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.f[n++];
  }
  return m;
}

}  // namespace

std::string hand_model_to_bytes(const HandModelData& data) {
  std::string out(kMagic, kMagicSize);
  put<std::uint32_t>(out, 7);
  put_array(out, "template_verts", float_array(data.template_vertices()));

  Array faces;
  faces.dtype = 1;
  faces.dims = {static_cast<std::uint32_t>(data.faces().size()), 3};
  for (const auto& f : data.faces()) faces.i.insert(faces.i.end(), f.begin(), f.end());
  put_array(out, "faces", faces);

  put_array(out, "joint_regressor", float_array(data.joint_regressor()));
  put_array(out, "skin_weights", float_array(data.skin_weights()));
  put_array(out, "shape_basis", float_array(data.shape_basis()));

  Array parents;
  parents.dtype = 1;
  parents.dims = {kHandJoints};
  parents.i.assign(data.parents().begin(), data.parents().end());
  put_array(out, "parents", parents);

  Array hand;
  hand.dtype = 1;
  hand.dims = {1};
  hand.i = {static_cast<std::int32_t>(data.handedness())};
  put_array(out, "handedness", hand);
  return out;
}

HandModelData hand_model_from_bytes(const std::string& bytes) {
  if (bytes.size() < kMagicSize || bytes.compare(0, kMagicSize, kMagic) != 0) {
    throw Error(ErrorCode::kFormat, "not a hand model file (bad magic)");
  }
  std::size_t pos = kMagicSize;
  const auto count = get<std::uint32_t>(bytes, pos);
  std::map<std::string, Array> arrays;
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto len = get<std::uint16_t>(bytes, pos);
    if (pos + len > bytes.size()) throw Error(ErrorCode::kFormat, "truncated hand model file");
    std::string name = bytes.substr(pos, len);
    pos += len;
    Array a;
    a.dtype = get<std::uint8_t>(bytes, pos);
    if (a.dtype > 1) throw Error(ErrorCode::kFormat, "unknown dtype for '" + name + "'");
    const auto ndim = get<std::uint32_t>(bytes, pos);
    if (ndim > 4) throw Error(ErrorCode::kFormat, "too many dims for '" + name + "'");
    for (std::uint32_t d = 0; d < ndim; ++d) a.dims.push_back(get<std::uint32_t>(bytes, pos));
    const std::size_t nbytes = a.size() * 4;
    if (pos + nbytes > bytes.size()) throw Error(ErrorCode::kFormat, "truncated hand model file");
    if (a.dtype == 0) {
      a.f.resize(a.size());
      std::memcpy(a.f.data(), bytes.data() + pos, nbytes);
    } else {
      a.i.resize(a.size());
      std::memcpy(a.i.data(), bytes.data() + pos, nbytes);
    }
    pos += nbytes;
    arrays.emplace(std::move(name), std::move(a));
  }
  auto need = [&](const std::string& name) -> const Array& {
    auto it = arrays.find(name);
    if (it == arrays.end()) {
      throw Error(ErrorCode::kFormat, "hand model file lacks array '" + name + "'");
    }
    return it->second;
  };

  const Eigen::MatrixXd verts = to_matrix(need("template_verts"), "template_verts");
  if (verts.cols() != 3) throw Error(ErrorCode::kFormat, "template_verts must be V x 3");
  const Array& fa = need("faces");
  if (fa.dtype != 1 || fa.dims.size() != 2 || fa.dims[1] != 3) {
    throw Error(ErrorCode::kFormat, "faces must be an F x 3 int32 array");
  }
  std::vector<Triangle> faces(fa.dims[0]);
  for (std::size_t t = 0; t < faces.size(); ++t) {
    faces[t] = {fa.i[3 * t], fa.i[3 * t + 1], fa.i[3 * t + 2]};
  }
  const Array& pa = need("parents");
  if (pa.dtype != 1 || pa.size() != kHandJoints) {
    throw Error(ErrorCode::kFormat, "parents must hold 21 int32 values");
  }
  std::array<int, kHandJoints> parents{};
  for (int i = 0; i < kHandJoints; ++i) parents[i] = pa.i[i];
  Handedness hand = Handedness::kRight;
  if (auto it = arrays.find("handedness"); it != arrays.end()) {
    if (it->second.dtype != 1 || it->second.size() != 1 || it->second.i[0] < 0 ||
        it->second.i[0] > 1) {
      throw Error(ErrorCode::kFormat, "handedness must be 0 (right) or 1 (left)");
    }
    hand = static_cast<Handedness>(it->second.i[0]);
  }
  return HandModelData(verts, std::move(faces),
                       to_matrix(need("joint_regressor"), "joint_regressor"),
                       to_matrix(need("skin_weights"), "skin_weights"),
                       to_matrix(need("shape_basis"), "shape_basis"), parents, hand);
}

void save_hand_model(const std::filesystem::path& path, const HandModelData& data) {
  detail::write_file_atomic(path, hand_model_to_bytes(data));
}

HandModelData load_hand_model(const std::filesystem::path& path) {
  return hand_model_from_bytes(detail::read_file(path));
}

}  // namespace hoa

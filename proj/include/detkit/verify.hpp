#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "detkit/errors.hpp"
#include "detkit/hash.hpp"
#include "detkit/init_plan.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

struct CanonicalDigest {
  std::string algorithm = "MD5 (RFC 1321)";
  std::string hex;
  std::size_t param_count = 0;
  std::size_t total_bytes = 0;
};

struct VerificationReport {
  bool identical = false;
  std::optional<std::string> first_divergent_param;
  CanonicalDigest a;
  CanonicalDigest b;
};

namespace detail {

inline void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline std::string param_bytes(const std::string& name,
                               const Tensor<float>& t) {
  std::string out;
  out.reserve(name.size() + 1 + 8 * (1 + t.rank()) + 4 * t.numel());
  out.append(name);
  out.push_back('\0');
  append_u64_le(out, t.rank());
  for (std::size_t e : t.shape()) append_u64_le(out, e);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t[i]))
      throw numeric_error("canonical bytes: non-finite value in " + name);
    append_f32_le(out, t[i]);
  }
  return out;
}

}  // namespace detail

/// Canonical serialization: parameters in lexicographic name-byte order,
/// each as [name][0x00][rank u64 LE][extents u64 LE][f32 values LE,
/// row-major]. Invariant to insertion order and thread count.
inline std::string canonical_bytes(const ParameterSet& params) {
  std::string out;
  for (const auto& [name, t] : params.entries)
    out += detail::param_bytes(name, t);
  return out;
}

inline CanonicalDigest digest(const ParameterSet& params) {
  const std::string bytes = canonical_bytes(params);
  CanonicalDigest d;
  d.hex = md5_hex(bytes);
  d.param_count = params.entries.size();
  d.total_bytes = bytes.size();
  return d;
}

/// Per-parameter comparison in canonical order; reports the first name
/// whose bytes (or presence) differ.
inline VerificationReport compare_runs(const ParameterSet& a,
                                       const ParameterSet& b) {
  VerificationReport rep;
  rep.a = digest(a);
  rep.b = digest(b);
  rep.identical = rep.a.hex == rep.b.hex;
  if (rep.identical) return rep;

  std::size_t i = 0, j = 0;
  while (i < a.entries.size() || j < b.entries.size()) {
    if (i >= a.entries.size()) { rep.first_divergent_param = b.entries[j].first; return rep; }
    if (j >= b.entries.size()) { rep.first_divergent_param = a.entries[i].first; return rep; }
    const auto& [an, at] = a.entries[i];
    const auto& [bn, bt] = b.entries[j];
    if (an != bn) {
      rep.first_divergent_param = std::min(an, bn);
      return rep;
    }
    if (detail::param_bytes(an, at) != detail::param_bytes(bn, bt)) {
      rep.first_divergent_param = an;
      return rep;
    }
    ++i; ++j;
  }
  rep.first_divergent_param = "<none>";  // digests differ but streams match: unreachable
  return rep;
}

// ---------------------------------------------------------------------------
// NPY v1.0 container, little-endian '<f4'/'<f8', C order. Round-trips are
// bit-exact.

namespace detail {

template <typename T>
const char* npy_descr();
template <>
inline const char* npy_descr<float>() { return "<f4"; }
template <>
inline const char* npy_descr<double>() { return "<f8"; }

inline std::string npy_header(const char* descr,
                              const std::vector<std::size_t>& shape) {
  std::ostringstream dict;
  dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    dict << shape[i];
    if (shape.size() == 1 || i + 1 < shape.size()) dict << ",";
    if (i + 1 < shape.size()) dict << " ";
  }
  dict << "), }";
  std::string d = dict.str();
  const std::size_t base = 10 + d.size() + 1;  // magic+version+len + dict + '\n'
  const std::size_t padded = (base + 63) / 64 * 64;
  d.append(padded - base, ' ');
  d.push_back('\n');

  std::string out = "\x93NUMPY";
  out.push_back('\x01');
  out.push_back('\x00');
  const auto hlen = static_cast<std::uint16_t>(d.size());
  out.push_back(static_cast<char>(hlen & 0xFF));
  out.push_back(static_cast<char>(hlen >> 8));
  out += d;
  return out;
}

}  // namespace detail

template <typename T>
void export_array(const Tensor<T>& t, const std::string& path) {
  if (!t.all_finite()) throw numeric_error("export_array: non-finite value");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for write: " + path);
  f << detail::npy_header(detail::npy_descr<T>(), t.shape());
  static_assert(std::endian::native == std::endian::little,
                "NPY writer assumes a little-endian host");
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(sizeof(T) * t.numel()));
  if (!f) throw io_error("write failed: " + path);
}

template <typename T>
Tensor<T> import_array(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw io_error("not an NPY file: " + path);
  if (magic[6] != 1) throw io_error("unsupported NPY version: " + path);
  unsigned char len_bytes[2];
  f.read(reinterpret_cast<char*>(len_bytes), 2);
  const std::size_t hlen = len_bytes[0] | (len_bytes[1] << 8);
  std::string header(hlen, '\0');
  f.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw io_error("truncated NPY header: " + path);

  const std::string want = std::string("'") + detail::npy_descr<T>() + "'";
  if (header.find(want) == std::string::npos)
    throw io_error("NPY dtype mismatch in " + path + " (want " +
                   detail::npy_descr<T>() + ")");
  if (header.find("'fortran_order': False") == std::string::npos)
    throw io_error("NPY fortran_order not supported: " + path);

  const auto lp = header.find('(');
  const auto rp = header.find(')', lp);
  if (lp == std::string::npos || rp == std::string::npos)
    throw io_error("malformed NPY shape: " + path);
  std::vector<std::size_t> shape;
  std::string tok;
  std::istringstream ss(header.substr(lp + 1, rp - lp - 1));
  while (std::getline(ss, tok, ',')) {
    std::istringstream ts(tok);
    std::size_t v;
    if (ts >> v) shape.push_back(v);
  }
  if (shape.empty()) throw io_error("scalar NPY not supported: " + path);

  Tensor<T> t(shape);
  f.read(reinterpret_cast<char*>(t.data()),
         static_cast<std::streamsize>(sizeof(T) * t.numel()));
  if (f.gcount() != static_cast<std::streamsize>(sizeof(T) * t.numel()))
    throw io_error("truncated NPY payload: " + path);
  return t;
}

// ---------------------------------------------------------------------------
// Checkpoint directory: one NPY per parameter plus digest.txt (single
// line of lowercase hex + newline).

inline void save_parameter_set(const ParameterSet& params,
                               const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, t] : params.entries)
    export_array(t, dir + "/" + name + ".npy");
  std::ofstream d(dir + "/digest.txt");
  d << digest(params).hex << "\n";
}

inline ParameterSet load_parameter_set(const std::string& dir) {
  ParameterSet params;
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string fn = e.path().filename().string();
    if (fn.size() > 4 && fn.substr(fn.size() - 4) == ".npy")
      files.push_back(fn);
  }
  std::sort(files.begin(), files.end());
  for (const auto& fn : files)
    params.add(fn.substr(0, fn.size() - 4),
               import_array<float>(dir + "/" + fn));
  return params;
}

}  // namespace detkit

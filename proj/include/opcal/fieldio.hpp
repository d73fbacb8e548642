#pragma once

// Field serialization.  Binary layout: 32-byte header (magic "OPCFLD01",
// little-endian uint32 version, ndim, shape[3], pad), then float32 pairs
// (re, im) in column-major order over (tangential index, normal index).  A
// JSON sidecar <path>.json carries the grid so a reader can rebuild it.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "opcal/errors.hpp"
#include "opcal/grid.hpp"

namespace opcal {

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_field(const std::string& path, const DiscreteField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw argument_error("cannot open for writing: " + path);
  out.write("OPCFLD01", 8);
  detail::put_u32(out, 1);  // version
  detail::put_u32(out, 2);  // ndim
  detail::put_u32(out, static_cast<std::uint32_t>(f.grid.Mp));
  detail::put_u32(out, static_cast<std::uint32_t>(f.grid.Mn));
  detail::put_u32(out, 0);
  detail::put_u32(out, 0);  // pad to 32 bytes
  std::vector<float> buf;
  buf.reserve(static_cast<size_t>(f.v.size()) * 2);
  for (int j = 0; j < f.v.cols(); ++j)
    for (int i = 0; i < f.v.rows(); ++i) {
      buf.push_back(static_cast<float>(f.v(i, j).real()));
      buf.push_back(static_cast<float>(f.v(i, j).imag()));
    }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw numerical_error("short write: " + path);

  nlohmann::json meta;
  meta["format"] = "OPCFLD01";
  meta["tangential_points"] = f.grid.Mp;
  meta["tangential_length"] = f.grid.Lp;
  meta["normal_points"] = f.grid.Mn;
  meta["normal_length"] = f.grid.Ln;
  meta["stretch"] = f.grid.stretch;
  meta["p"] = f.p;
  std::ofstream js(path + ".json");
  js << meta.dump(2) << "\n";
}

inline DiscreteField read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw argument_error("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "OPCFLD01", 8) != 0)
    throw config_error("bad field magic in " + path);
  std::uint32_t version = detail::get_u32(in);
  std::uint32_t ndim = detail::get_u32(in);
  std::uint32_t Mp = detail::get_u32(in);
  std::uint32_t Mn = detail::get_u32(in);
  detail::get_u32(in);
  detail::get_u32(in);
  if (version != 1 || ndim != 2) throw config_error("unsupported field version in " + path);
  if (Mp < 1 || Mn < 2 || static_cast<std::uint64_t>(Mp) * Mn > (1u << 28))
    throw config_error("implausible field shape in " + path);

  std::ifstream js(path + ".json");
  if (!js) throw config_error("missing sidecar " + path + ".json");
  nlohmann::json meta = nlohmann::json::parse(js, nullptr, false);
  if (meta.is_discarded()) throw config_error("unparseable sidecar " + path + ".json");
  Grid g = Grid::make(meta.at("tangential_length").get<double>(), static_cast<int>(Mp),
                      meta.at("normal_length").get<double>(), static_cast<int>(Mn),
                      meta.value("stretch", 1.0));
  DiscreteField f = DiscreteField::zeros(g, meta.value("p", 2.0));

  std::vector<float> buf(static_cast<size_t>(Mp) * Mn * 2);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw config_error("truncated field payload in " + path);
  size_t k = 0;
  for (int j = 0; j < f.v.cols(); ++j)
    for (int i = 0; i < f.v.rows(); ++i) {
      f.v(i, j) = Cplx(buf[k], buf[k + 1]);
      k += 2;
    }
  return f;
}

// CSV rows print with %.17g so a rerun with the same seed is byte-identical.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
    if (!out_) throw argument_error("cannot open for writing: " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ",";
      out_ << columns[i];
    }
    out_ << "\n";
  }

  void row(const std::vector<double>& vals) {
    char buf[40];
    for (size_t i = 0; i < vals.size(); ++i) {
      if (i) out_ << ",";
      std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
      out_ << buf;
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace opcal

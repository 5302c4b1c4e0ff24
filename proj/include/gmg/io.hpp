#ifndef GMG_IO_HPP
#define GMG_IO_HPP

#include "gmg/common.hpp"
#include "gmg/point_cloud.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gmg {

using Json = nlohmann::json;

/// All numeric output goes through format_double (17 significant digits) and
/// is stored in JSON as decimal strings, keeping reruns byte-identical.
inline Json json_number(double value) { return Json(format_double(value)); }

inline Json json_matrix(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(json_number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json json_vector(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v(i)));
  return out;
}

/// Writes via a temporary file plus rename so interrupted runs leave nothing
/// at the destination path.
inline void atomic_write_text(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open " + tmp + " for writing");
    out << content;
    out.flush();
    require(out.good(), ErrorCode::Io, "write to " + tmp + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::Io, "rename " + tmp + " -> " + path + " failed: " + ec.message());
}

inline void atomic_write_json(const std::string& path, const Json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

inline std::string matrix_to_csv(const Matrix& m) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  return out.str();
}

inline void write_csv_matrix(const std::string& path, const Matrix& m) {
  atomic_write_text(path, matrix_to_csv(m));
}

/// Comma-separated values, one row per line, no header, decimal floats.
inline Matrix read_csv_matrix(const std::string& path) {
  require(std::filesystem::exists(path), ErrorCode::InputNotFound,
          "input file not found: " + path);
  std::ifstream in(path);
  require(in.good(), ErrorCode::InputNotFound, "cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t consumed = 0;
        double value = std::stod(cell, &consumed);
        while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed])))
          ++consumed;
        require(consumed == cell.size(), ErrorCode::ConfigParse, "");
        row.push_back(value);
      } catch (const Error&) {
        throw Error(ErrorCode::ConfigParse, path + ":" + std::to_string(line_number) +
                                                ": malformed number '" + cell + "'");
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigParse, path + ":" + std::to_string(line_number) +
                                                ": malformed number '" + cell + "'");
      }
    }
    require(!row.empty(), ErrorCode::ConfigParse,
            path + ":" + std::to_string(line_number) + ": empty row");
    require(rows.empty() || row.size() == rows.front().size(), ErrorCode::ConfigParse,
            path + ":" + std::to_string(line_number) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::ConfigParse, path + ": no data rows");

  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline PointCloud read_point_cloud(const std::string& path) {
  PointCloud cloud(read_csv_matrix(path));
  validate(cloud);
  return cloud;
}

}  // namespace gmg

#endif  // GMG_IO_HPP

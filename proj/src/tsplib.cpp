#include "dash/tsplib.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "dash/errors.hpp"

namespace dash {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(std::string_view tok, std::size_t line_no) {
  // strtod accepts the 2.00000e+02 style used in several TSPLIB files.
  std::string buf(tok);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size())
    fail(ErrorKind::Data, "TSPLIB line " + std::to_string(line_no) + ": bad number '" + buf + "'");
  return v;
}

}  // namespace

TspInstance parse_tsplib(std::string_view text) {
  TspInstance inst;
  inst.rounding = DistanceRounding::TsplibNint;
  std::size_t dimension = 0;
  std::string edge_type;
  bool in_coords = false;
  bool saw_coords = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line == "EOF") break;

    if (in_coords) {
      std::istringstream is{std::string(line)};
      std::string id, x, y;
      if (!(is >> id >> x >> y)) {
        // A new keyword section ends the coordinate block.
        in_coords = false;
      } else {
        inst.coords.push_back({parse_number(x, line_no), parse_number(y, line_no)});
        continue;
      }
    }

    if (line.starts_with("NODE_COORD_SECTION")) {
      if (edge_type.empty() || edge_type != "EUC_2D")
        fail(ErrorKind::UnsupportedFormat,
             "TSPLIB EDGE_WEIGHT_TYPE '" + edge_type + "' is not supported (EUC_2D only)");
      in_coords = true;
      saw_coords = true;
      continue;
    }
    if (line.ends_with("_SECTION")) {
      if (edge_type != "EUC_2D")
        fail(ErrorKind::UnsupportedFormat,
             "TSPLIB EDGE_WEIGHT_TYPE '" + edge_type + "' is not supported (EUC_2D only)");
      continue;  // e.g. DISPLAY_DATA_SECTION in an EUC_2D file; ignored
    }

    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const std::string_view key = trim(line.substr(0, colon));
    const std::string_view value = trim(line.substr(colon + 1));
    if (key == "NAME") {
      inst.name = std::string(value);
    } else if (key == "TYPE") {
      if (value != "TSP")
        fail(ErrorKind::UnsupportedFormat, "TSPLIB TYPE '" + std::string(value) + "' is not TSP");
    } else if (key == "DIMENSION") {
      dimension = static_cast<std::size_t>(parse_number(value, line_no));
    } else if (key == "EDGE_WEIGHT_TYPE") {
      edge_type = std::string(value);
      if (edge_type != "EUC_2D")
        fail(ErrorKind::UnsupportedFormat,
             "TSPLIB EDGE_WEIGHT_TYPE '" + edge_type + "' is not supported (EUC_2D only)");
    }
  }

  if (!saw_coords) fail(ErrorKind::Data, "TSPLIB file has no NODE_COORD_SECTION");
  if (dimension != 0 && dimension != inst.coords.size())
    fail(ErrorKind::Data, "TSPLIB DIMENSION " + std::to_string(dimension) + " but " +
                              std::to_string(inst.coords.size()) + " coordinates");
  inst.validate();
  return inst;
}

TspInstance parse_tsplib_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open TSPLIB file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  TspInstance inst = parse_tsplib(ss.str());
  if (inst.name.empty()) inst.name = path.stem().string();

  auto sidecar = path;
  sidecar.replace_extension(".opt");
  if (std::ifstream opt(sidecar); opt) {
    double best = 0.0;
    if (!(opt >> best) || best <= 0.0)
      fail(ErrorKind::Data, "unreadable best-known value in " + sidecar.string());
    inst.reference = best;
  }
  return inst;
}

}  // namespace dash

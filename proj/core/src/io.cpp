#include "nsfp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nsfp/errors.hpp"

namespace nsfp {

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericalError("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw NumericalError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw NumericalError("rename failed: " + tmp + " -> " + path);
}

void write_snapshot(const std::string& path, const Grid& g, double time,
                    const std::vector<std::pair<std::string, const ScalarField*>>& fields) {
  std::ostringstream os;
  os << "# nsfp-snapshot\n";
  os << "# dim " << g.dim << "\n";
  os << "# cells " << g.n << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", g.dx);
  os << "# spacing " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", time);
  os << "# time " << buf << "\n";
  os << "# fields";
  for (const auto& [name, ptr] : fields) {
    (void)ptr;
    os << " " << name;
  }
  os << "\n";
  for (int c = 0; c < g.size(); ++c) {
    bool first = true;
    for (const auto& [name, ptr] : fields) {
      (void)name;
      std::snprintf(buf, sizeof buf, "%.17g", (*ptr)[c]);
      if (!first) os << " ";
      os << buf;
      first = false;
    }
    os << "\n";
  }
  atomic_write(path, os.str());
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open snapshot: " + path);
  Snapshot s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# nsfp-snapshot", 0) == 0) continue;
    if (line.rfind("# dim ", 0) == 0) {
      s.dim = std::stoi(line.substr(6));
    } else if (line.rfind("# cells ", 0) == 0) {
      s.cells = std::stoi(line.substr(8));
    } else if (line.rfind("# spacing ", 0) == 0) {
      s.spacing = std::stod(line.substr(10));
    } else if (line.rfind("# time ", 0) == 0) {
      s.time = std::stod(line.substr(7));
    } else if (line.rfind("# fields", 0) == 0) {
      std::istringstream is(line.substr(8));
      std::string name;
      while (is >> name) s.field_names.push_back(name);
      break;
    } else {
      throw ConfigError("snapshot: unexpected header line: " + line);
    }
  }
  if (s.dim == 0 || s.cells == 0 || s.field_names.empty())
    throw ConfigError("snapshot: incomplete header in " + path);
  const long N = s.dim == 2 ? long(s.cells) * s.cells : long(s.cells) * s.cells * s.cells;
  s.fields.assign(s.field_names.size(), ScalarField(N));
  for (long c = 0; c < N; ++c)
    for (std::size_t f = 0; f < s.fields.size(); ++f)
      if (!(in >> s.fields[f][c])) throw ConfigError("snapshot: truncated body in " + path);
  return s;
}

}  // namespace nsfp

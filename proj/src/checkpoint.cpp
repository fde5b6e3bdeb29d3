#include "rppo/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "rppo/config.hpp"
#include "rppo/errors.hpp"

namespace rppo {

std::string checkpoint_to_text(const GmmParams& g) {
  std::ostringstream out;
  out << "# gmm checkpoint\n";
  out << "ds = " << g.state_dim() << "\n";
  out << "da = " << g.action_dim() << "\n";
  out << "K = " << g.components() << "\n";
  out << "floor = " << format_double(g.floor()) << "\n";
  out << "eta =";
  for (int i = 0; i < g.components(); ++i) out << " " << format_double(g.eta()[i]);
  out << "\n";
  const int n = g.joint_dim() + 1;
  for (int c = 0; c < g.components(); ++c) {
    out << "comp" << c << " =";
    const Matrix& m = g.component(c).mat();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) out << " " << format_double(m(i, j));
    }
    out << "\n";
  }
  return out.str();
}

GmmParams checkpoint_from_text(const std::string& text) {
  const KvDocument kv = KvDocument::parse_text(text);
  const int ds = static_cast<int>(parse_long(kv.get("ds"), "ds"));
  const int da = static_cast<int>(parse_long(kv.get("da"), "da"));
  const int k = static_cast<int>(parse_long(kv.get("K"), "K"));
  const double floor = parse_double(kv.get("floor"), "floor");
  if (k < 1) throw ConfigError("checkpoint: K must be positive");

  for (const auto& [key, value] : kv.entries()) {
    if (key == "ds" || key == "da" || key == "K" || key == "floor" || key == "eta") continue;
    if (key.rfind("comp", 0) == 0) continue;
    throw ConfigError("checkpoint: unknown key '" + key + "'");
  }

  const std::vector<double> eta_vals = parse_double_list(kv.get("eta"), "eta");
  if (static_cast<int>(eta_vals.size()) != k) throw ConfigError("checkpoint: eta length != K");
  Vector eta(k);
  for (int i = 0; i < k; ++i) eta[i] = eta_vals[i];

  const int n = ds + da + 1;
  std::vector<SpdMatrix> comps;
  comps.reserve(k);
  for (int c = 0; c < k; ++c) {
    const std::string key = "comp" + std::to_string(c);
    const std::vector<double> vals = parse_double_list(kv.get(key), key);
    if (static_cast<int>(vals.size()) != n * (n + 1) / 2) {
      throw ConfigError("checkpoint: wrong entry count for " + key);
    }
    Matrix m(n, n);
    std::size_t p = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        m(i, j) = vals[p];
        m(j, i) = vals[p];
        ++p;
      }
    }
    comps.push_back(SpdMatrix(m, floor));
  }
  return GmmParams(ds, da, std::move(eta), std::move(comps), floor);
}

void write_checkpoint(const std::string& path, const GmmParams& g) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << checkpoint_to_text(g);
}

GmmParams read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_text(buf.str());
}

}  // namespace rppo

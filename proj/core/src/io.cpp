#include "streamcrf/io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>

namespace streamcrf {

namespace {

using nlohmann::json;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

Tensor matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* name) {
  if (!j.is_array() || j.size() != rows) {
    throw InputError(std::string(name) + " must have " + std::to_string(rows) + " rows");
  }
  Tensor m({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw InputError(std::string(name) + " row " + std::to_string(r) + " must have " +
                       std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json matrix_to_json(const Tensor& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    const auto row = m.slice(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || s.find_first_not_of(" \t", used) != std::string::npos) {
    throw InputError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
  return v;
}

int parse_index(const std::string& s, std::size_t line) {
  const double v = parse_number(s, line);
  if (v < 0 || v != static_cast<int>(v)) {
    throw InputError("line " + std::to_string(line) + ": '" + s + "' is not an index");
  }
  return static_cast<int>(v);
}

// Data rows of a streamcrf CSV, skipping comments, blanks and the column header.
std::vector<std::pair<std::size_t, std::vector<std::string>>> csv_rows(std::istream& in) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("b,", 0) == 0) continue;
    rows.emplace_back(n, split_csv(line));
  }
  return rows;
}

std::ostream& precise(std::ostream& out) {
  return out << std::setprecision(std::numeric_limits<double>::max_digits10);
}

}  // namespace

SemiCrfParams params_from_json(const json& j) {
  try {
    const int C = j.at("C").get<int>();
    const int K = j.at("K").get<int>();
    if (C < 1 || K < 1) throw InputError("C and K must be >= 1");
    SemiCrfParams p = SemiCrfParams::zeros(C, K);
    p.transition = matrix_from_json(j.at("transition"), sz(C), sz(C), "transition");
    p.duration_bias = matrix_from_json(j.at("duration_bias"), sz(K), sz(C), "duration_bias");
    if (j.contains("pi_start")) p.pi_start = j["pi_start"].get<std::vector<double>>();
    if (j.contains("pi_end")) p.pi_end = j["pi_end"].get<std::vector<double>>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed parameter JSON: ") + e.what());
  }
}

json params_to_json(const SemiCrfParams& p) {
  json j;
  j["C"] = p.num_labels;
  j["K"] = p.max_duration;
  j["transition"] = matrix_to_json(p.transition);
  j["duration_bias"] = matrix_to_json(p.duration_bias);
  if (p.pi_start) j["pi_start"] = *p.pi_start;
  if (p.pi_end) j["pi_end"] = *p.pi_end;
  return j;
}

SemiCrfParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open parameter file " + path.string());
  try {
    return params_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

EmissionBatch read_emissions_csv(std::istream& in) {
  const auto rows = csv_rows(in);
  if (rows.empty()) throw InputError("emission CSV has no data rows");
  const std::size_t width = rows.front().second.size();
  if (width < 3) throw InputError("emission CSV rows need b,t and at least one label column");
  std::map<std::pair<int, int>, std::vector<double>> cells;
  int B = 0;
  for (const auto& [line, cols] : rows) {
    if (cols.size() != width) {
      throw InputError("line " + std::to_string(line) + ": expected " + std::to_string(width) +
                       " columns");
    }
    const int b = parse_index(cols[0], line), t = parse_index(cols[1], line);
    std::vector<double> v;
    for (std::size_t c = 2; c < width; ++c) v.push_back(parse_number(cols[c], line));
    if (!cells.emplace(std::pair{b, t}, std::move(v)).second) {
      throw InputError("line " + std::to_string(line) + ": duplicate position (b=" +
                       std::to_string(b) + ", t=" + std::to_string(t) + ")");
    }
    B = std::max(B, b + 1);
  }
  std::vector<int> lengths(sz(B), 0);
  for (const auto& [key, v] : cells) lengths[sz(key.first)] = std::max(lengths[sz(key.first)], key.second + 1);
  const int T = *std::max_element(lengths.begin(), lengths.end());
  EmissionBatch em{Tensor({sz(B), sz(T), width - 2}), lengths};
  for (int b = 0; b < B; ++b) {
    if (lengths[sz(b)] == 0) throw InputError("sequence " + std::to_string(b) + " has no rows");
    for (int t = 0; t < lengths[sz(b)]; ++t) {
      const auto it = cells.find({b, t});
      if (it == cells.end()) {
        throw InputError("missing emission row (b=" + std::to_string(b) + ", t=" +
                         std::to_string(t) + ")");
      }
      std::copy(it->second.begin(), it->second.end(), em.scores.slice(b, t).begin());
    }
  }
  validate(em);
  return em;
}

EmissionBatch emissions_from_json(const json& j) {
  try {
    const json& scores = j.is_object() ? j.at("scores") : j;
    if (!scores.is_array() || scores.empty() || !scores[0].is_array() || scores[0].empty() ||
        !scores[0][0].is_array()) {
      throw InputError("emission JSON must be a (B, T, C) nested array");
    }
    const std::size_t B = scores.size(), T = scores[0].size(), C = scores[0][0].size();
    EmissionBatch em{Tensor({B, T, C}), std::vector<int>(B, static_cast<int>(T))};
    for (std::size_t b = 0; b < B; ++b) {
      const Tensor m = matrix_from_json(scores[b], T, C, "emission sequence");
      std::copy(m.data().begin(), m.data().end(), em.scores.slice(b).begin());
    }
    if (j.is_object() && j.contains("lengths")) em.lengths = j["lengths"].get<std::vector<int>>();
    validate(em);
    return em;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed emission JSON: ") + e.what());
  }
}

json emissions_to_json(const EmissionBatch& em) {
  json scores = json::array();
  for (int b = 0; b < em.batch(); ++b) {
    json seq = json::array();
    for (int t = 0; t < em.length(); ++t) {
      const auto row = em.scores.slice(b, t);
      seq.push_back(std::vector<double>(row.begin(), row.end()));
    }
    scores.push_back(std::move(seq));
  }
  return {{"scores", std::move(scores)}, {"lengths", em.lengths}};
}

void write_emissions_csv(std::ostream& out, const EmissionBatch& em) {
  out << kCsvHeader << '\n' << "b,t";
  for (int c = 0; c < em.labels(); ++c) out << ",c" << c;
  out << '\n';
  precise(out);
  for (int b = 0; b < em.batch(); ++b) {
    for (int t = 0; t < em.lengths[sz(b)]; ++t) {
      out << b << ',' << t;
      for (double v : em.scores.slice(b, t)) out << ',' << v;
      out << '\n';
    }
  }
}

EmissionBatch load_emissions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open emission file " + path.string());
  if (path.extension() == ".json") {
    try {
      return emissions_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  }
  return read_emissions_csv(in);
}

void write_segmentations_csv(std::ostream& out, const std::vector<Segmentation>& segs) {
  out << kCsvHeader << '\n' << "b,start,duration,label\n";
  for (std::size_t b = 0; b < segs.size(); ++b) {
    for (const Segment& s : segs[b]) {
      out << b << ',' << s.start << ',' << s.duration << ',' << s.label << '\n';
    }
  }
}

std::vector<Segmentation> read_segmentations_csv(std::istream& in) {
  std::vector<Segmentation> out;
  for (const auto& [line, cols] : csv_rows(in)) {
    if (cols.size() != 4) throw InputError("line " + std::to_string(line) + ": expected 4 columns");
    const int b = parse_index(cols[0], line);
    if (sz(b) >= out.size()) out.resize(sz(b) + 1);
    out[sz(b)].push_back({parse_index(cols[1], line), parse_index(cols[2], line),
                          parse_index(cols[3], line)});
  }
  return out;
}

json segmentation_to_json(const Segmentation& seg) {
  json arr = json::array();
  for (const Segment& s : seg) {
    arr.push_back({{"start", s.start}, {"duration", s.duration}, {"label", s.label}});
  }
  return arr;
}

json decoded_to_json(const std::vector<Decoded>& decoded) {
  json arr = json::array();
  for (const Decoded& d : decoded) {
    arr.push_back({{"score", d.score}, {"segments", segmentation_to_json(d.segmentation)}});
  }
  return arr;
}

void write_marginals_csv(std::ostream& out, const MarginalSet& m) {
  const int C = static_cast<int>(m.position.dim(2));
  out << kCsvHeader << '\n' << "b,t,boundary";
  for (int c = 0; c < C; ++c) out << ",p" << c;
  out << '\n';
  precise(out);
  for (std::size_t b = 0; b < m.lengths.size(); ++b) {
    for (int t = 0; t < m.lengths[b]; ++t) {
      out << b << ',' << t << ',' << m.boundary(b, t);
      for (double p : m.position.slice(b, t)) out << ',' << p;
      out << '\n';
    }
  }
}

json marginals_to_json(const MarginalSet& m) {
  json seqs = json::array();
  for (std::size_t b = 0; b < m.lengths.size(); ++b) {
    json pos = json::array(), bdy = json::array();
    for (int t = 0; t < m.lengths[b]; ++t) {
      const auto row = m.position.slice(b, t);
      pos.push_back(std::vector<double>(row.begin(), row.end()));
      bdy.push_back(m.boundary(b, t));
    }
    seqs.push_back({{"length", m.lengths[b]},
                    {"expected_segments", m.expected_segments[b]},
                    {"boundary", std::move(bdy)},
                    {"position", std::move(pos)}});
  }
  return {{"sequences", std::move(seqs)}};
}

}  // namespace streamcrf

#include "drbart/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "drbart/errors.hpp"

namespace drbart {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string slurp(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

// ---- CSV -------------------------------------------------------------------

CsvTable read_csv(std::istream& in) {
  const std::string text = slurp(in);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && trim(record[0]).empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
      ++line;
    } else {
      field += c;
      if (c != ' ' && c != '\t') field_started = true;
    }
  }
  if (quoted) throw InputError("CSV line " + std::to_string(line) + ": unterminated quoted field");
  if (!field.empty() || !record.empty()) end_record();

  if (records.empty()) throw InputError("CSV input is empty (a header row is required)");
  CsvTable t;
  for (const std::string& h : records[0]) t.header.push_back(trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw InputError("CSV row " + std::to_string(r) + ": expected " +
                       std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(records[r].size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv(in);
}

LoadedData load_csv(std::istream& in, const std::string& response,
                    const std::vector<std::string>& covars) {
  const CsvTable t = read_csv(in);
  auto column = [&](const std::string& name) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw InputError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - t.header.begin());
  };
  const std::size_t yc = column(response);
  std::vector<std::string> names = covars;
  if (names.empty())
    for (const std::string& h : t.header)
      if (h != response) names.push_back(h);
  if (names.empty()) throw InputError("no covariate columns");
  std::vector<std::size_t> xc;
  for (const std::string& n : names) {
    if (n == response) throw InputError("column '" + n + "' is both response and covariate");
    xc.push_back(column(n));
  }

  auto number = [&](std::size_t row, std::size_t col) {
    const std::string cell = trim(t.rows[row][col]);
    const std::string where = "row " + std::to_string(row + 1) + ", column '" + t.header[col] + "'";
    if (cell.empty()) throw InputError(where + ": missing value");
    double v = 0.0;
    const char* first = cell.data();
    if (*first == '+') ++first;
    const auto r = std::from_chars(first, cell.data() + cell.size(), v);
    if (r.ec != std::errc() || r.ptr != cell.data() + cell.size())
      throw InputError(where + ": non-numeric value '" + cell + "'");
    if (!std::isfinite(v)) throw InputError(where + ": non-finite value '" + cell + "'");
    return v;
  };

  LoadedData out;
  out.raw.p = xc.size();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c : xc) out.raw.x.push_back(number(r, c));
    out.raw.y.push_back(number(r, yc));
  }
  out.standardization = Standardization::fit(out.raw.x, out.raw.p, out.raw.y);
  out.standardization.y_name = response;
  out.standardization.x_names = names;
  out.model = out.standardization.apply(out.raw.x, out.raw.y);
  return out;
}

LoadedData load_csv(const std::string& path, const std::string& response,
                    const std::vector<std::string>& covars) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return load_csv(in, response, covars);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    out << '\n';
  }
}

// ---- Draw files ------------------------------------------------------------

namespace {

json tree_to_json(const Tree& t) {
  json a = json::array();
  for (const Tree::PreorderEntry& e : t.to_preorder()) {
    if (e.leaf)
      a.push_back(e.value);
    else
      a.push_back(json::array({e.rule.axis, e.rule.cut}));
  }
  return a;
}

Tree tree_from_json(const json& a) {
  std::vector<Tree::PreorderEntry> entries;
  for (const json& e : a) {
    Tree::PreorderEntry p;
    if (e.is_number()) {
      p.value = e.get<double>();
    } else if (e.is_array() && e.size() == 2) {
      p.leaf = false;
      p.rule.axis = e[0].get<int>();
      p.rule.cut = e[1].get<double>();
    } else {
      throw InputError("tree node is neither a leaf value nor [axis, cut]");
    }
    entries.push_back(p);
  }
  return Tree::from_preorder(entries);
}

json ensemble_to_json(const Ensemble& e) {
  json a = json::array();
  for (const Tree& t : e.trees) a.push_back(tree_to_json(t));
  return a;
}

Ensemble ensemble_from_json(const json& a, EnsembleKind kind) {
  Ensemble e(kind, 0);
  for (const json& t : a) e.trees.push_back(tree_from_json(t));
  return e;
}

json header_json(const DrawFileHeader& h) {
  const ChainConfig& c = h.config;
  const Standardization& s = h.standardization;
  json j;
  j["schema_version"] = h.schema_version;
  j["format"] = "drbart-draws";
  j["variant"] = variant_name(c.variant);
  j["chain"] = h.chain;
  j["seed"] = c.seed;
  j["n_iter"] = c.n_iter;
  j["n_burn"] = c.n_burn;
  j["thin"] = c.thin;
  j["latent_update"] = c.latent_update == LatentUpdate::Gibbs ? "gibbs" : "slice";
  j["use_latent"] = c.use_latent;
  j["change_prob"] = c.change_prob;
  j["save_latents"] = c.save_latents;
  j["bart"] = {{"alpha", c.hp.alpha}, {"beta", c.hp.beta},         {"k", c.hp.k},
               {"m", c.hp.m},         {"sigma_mu", c.hp.sigma_mu}, {"min_leaf", c.hp.min_leaf}};
  j["variance"] = {{"m_v", c.vhp.m_v}, {"a0", c.vhp.a0},       {"a", c.vhp.a},
                   {"b", c.vhp.b},     {"alpha", c.vhp.alpha}, {"beta", c.vhp.beta}};
  j["sigma0"] = {{"mode", c.s0.mode == Sigma0Spec::Mode::Fixed ? "fixed" : "inverse_gamma"},
                 {"value", c.s0.fixed_value},
                 {"nu0", c.s0.nu0},
                 {"xi0", c.s0.xi0}};
  j["standardization"] = {{"y_name", s.y_name},   {"y_min", s.y_min}, {"y_max", s.y_max},
                          {"x_names", s.x_names}, {"x_min", s.x_min}, {"x_max", s.x_max}};
  return j;
}

}  // namespace

bool DrawFileHeader::operator==(const DrawFileHeader& o) const {
  return header_json(*this) == header_json(o);
}

std::string header_to_json_line(const DrawFileHeader& h) { return header_json(h).dump(); }

std::string draw_to_json_line(const PosteriorDraw& d) {
  json j;
  j["iter"] = d.iter;
  j["sigma0_sq"] = d.sigma0_sq;
  j["mean"] = ensemble_to_json(d.mean);
  j["var"] = ensemble_to_json(d.var);
  if (d.latents) j["latents"] = *d.latents;
  return j.dump();
}

DrawFileHeader header_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    DrawFileHeader h;
    h.schema_version = j.at("schema_version").get<int>();
    if (h.schema_version != kDrawSchemaVersion)
      throw InputError("draw file schema version " + std::to_string(h.schema_version) +
                       " is not supported (expected " + std::to_string(kDrawSchemaVersion) + ")");
    ChainConfig& c = h.config;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    h.chain = j.at("chain").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.n_iter = j.at("n_iter").get<int>();
    c.n_burn = j.at("n_burn").get<int>();
    c.thin = j.at("thin").get<int>();
    c.latent_update = j.at("latent_update").get<std::string>() == "gibbs" ? LatentUpdate::Gibbs
                                                                          : LatentUpdate::Slice;
    c.use_latent = j.at("use_latent").get<bool>();
    c.change_prob = j.at("change_prob").get<double>();
    c.save_latents = j.at("save_latents").get<bool>();
    const json& b = j.at("bart");
    c.hp.alpha = b.at("alpha").get<double>();
    c.hp.beta = b.at("beta").get<double>();
    c.hp.k = b.at("k").get<double>();
    c.hp.m = b.at("m").get<int>();
    c.hp.sigma_mu = b.at("sigma_mu").get<double>();
    c.hp.min_leaf = b.at("min_leaf").get<int>();
    const json& v = j.at("variance");
    c.vhp.m_v = v.at("m_v").get<int>();
    c.vhp.a0 = v.at("a0").get<double>();
    c.vhp.a = v.at("a").get<double>();
    c.vhp.b = v.at("b").get<double>();
    c.vhp.alpha = v.at("alpha").get<double>();
    c.vhp.beta = v.at("beta").get<double>();
    const json& s0 = j.at("sigma0");
    c.s0.mode = s0.at("mode").get<std::string>() == "fixed" ? Sigma0Spec::Mode::Fixed
                                                            : Sigma0Spec::Mode::InverseGamma;
    c.s0.fixed_value = s0.at("value").get<double>();
    c.s0.nu0 = s0.at("nu0").get<double>();
    c.s0.xi0 = s0.at("xi0").get<double>();
    const json& st = j.at("standardization");
    Standardization& s = h.standardization;
    s.y_name = st.at("y_name").get<std::string>();
    s.y_min = st.at("y_min").get<double>();
    s.y_max = st.at("y_max").get<double>();
    s.x_names = st.at("x_names").get<std::vector<std::string>>();
    s.x_min = st.at("x_min").get<std::vector<double>>();
    s.x_max = st.at("x_max").get<std::vector<double>>();
    if (s.x_min.size() != s.x_max.size()) throw InputError("standardization ranges differ in length");
    return h;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed draw file header: ") + e.what());
  }
}

PosteriorDraw draw_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    PosteriorDraw d;
    d.iter = j.at("iter").get<int>();
    d.sigma0_sq = j.at("sigma0_sq").get<double>();
    d.mean = ensemble_from_json(j.at("mean"), EnsembleKind::Mean);
    d.var = ensemble_from_json(j.at("var"), EnsembleKind::Variance);
    if (j.contains("latents")) d.latents = j.at("latents").get<std::vector<double>>();
    return d;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed draw record: ") + e.what());
  } catch (const StructuralError& e) {
    throw InputError(std::string("malformed tree in draw record: ") + e.what());
  }
}

DrawWriter::DrawWriter(const std::string& path, const DrawFileHeader& header) : path_(path) {
  file_ = std::fopen(path.c_str(), "wb");
  if (file_ == nullptr) throw InputError("cannot write '" + path + "'");
  write_line(header_to_json_line(header));
}

DrawWriter::~DrawWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void DrawWriter::append(const PosteriorDraw& d) { write_line(draw_to_json_line(d)); }

void DrawWriter::close() {
  if (file_ != nullptr && std::fclose(file_) != 0) {
    file_ = nullptr;
    throw std::runtime_error("error closing '" + path_ + "'");
  }
  file_ = nullptr;
}

void DrawWriter::write_line(const std::string& line) {
  if (file_ == nullptr) throw ContractError("write to a closed draw file");
  std::string buf = line;
  buf += '\n';
  if (std::fwrite(buf.data(), 1, buf.size(), file_) != buf.size() || std::fflush(file_) != 0)
    throw std::runtime_error("error writing '" + path_ + "'");
}

void save_draws(const std::string& path, const DrawFileHeader& header,
                const std::vector<PosteriorDraw>& draws) {
  DrawWriter w(path, header);
  for (const PosteriorDraw& d : draws) w.append(d);
  w.close();
}

DrawFile load_draws(std::istream& in) {
  const std::string text = slurp(in);
  if (text.empty()) throw InputError("empty draw file (no header line)");
  DrawFile f;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos)
      throw InputError("truncated draw file: line " + std::to_string(line_no) + " is incomplete");
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    try {
      if (line_no == 1)
        f.header = header_from_json_line(line);
      else
        f.draws.push_back(draw_from_json_line(line));
    } catch (const InputError& e) {
      const bool last = pos >= text.size();
      throw InputError((last && line_no > 1 ? "truncated draw file: line " : "draw file line ") +
                       std::to_string(line_no) + ": " + e.what());
    }
  }
  return f;
}

DrawFile load_draws(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return load_draws(in);
}

}  // namespace drbart

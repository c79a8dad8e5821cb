#include "riskmap/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "riskmap/errors.hpp"

namespace riskmap {
namespace {

std::vector<CsvRow> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::vector<CsvRow> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    CsvRow row;
    row.line = number;
    std::string field;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
      const char c = line[k];
      if (quoted) {
        if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else if (c == '"') {
          quoted = false;
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.fields.push_back(field);
        field.clear();
      } else {
        field += c;
      }
    }
    if (quoted) throw ParseError(path, static_cast<std::size_t>(number), "unterminated quote");
    row.fields.push_back(field);
    for (auto& f : row.fields) {
      const auto b = f.find_first_not_of(" \t");
      const auto e = f.find_last_not_of(" \t");
      f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    out.push_back(std::move(row));
  }
  return out;
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
  throw ParseError(path, static_cast<std::size_t>(line), what);
}

void expect_fields(const CsvTable& t, const CsvRow& row) {
  if (row.fields.size() != t.header.size()) {
    fail(t.path, row.line,
         "expected " + std::to_string(t.header.size()) + " fields, found " +
             std::to_string(row.fields.size()));
  }
}

void expect_header(const CsvTable& t, const std::vector<std::string>& names) {
  if (t.header != names) {
    std::string want;
    for (const auto& n : names) want += (want.empty() ? "" : ",") + n;
    fail(t.path, 1, "header must be '" + want + "'");
  }
}

double parse_real(const std::string& path, int line, const std::string& text,
                  const std::string& what) {
  double x = 0.0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, x);
  if (text.empty() || r.ec != std::errc() || r.ptr != end) {
    fail(path, line, what + ": '" + text + "' is not a number");
  }
  return x;
}

Count parse_count(const std::string& path, int line, const std::string& text) {
  Count x = 0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, x);
  if (text.empty() || r.ec != std::errc() || r.ptr != end) {
    fail(path, line, "value '" + text + "' is not an integer count");
  }
  if (x < 0) fail(path, line, "negative count " + text);
  return x;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::vector<CsvRow> records = read_records(path);
  if (records.empty()) fail(path, 0, "file is empty");
  CsvTable t;
  t.path = path;
  t.header = records.front().fields;
  t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  return t;
}

const std::string& MergePlan::resolve(const std::string& id) const {
  const auto it = target_of.find(id);
  return it == target_of.end() ? id : it->second;
}

MergePlan load_merge(const std::string& path) {
  const CsvTable t = read_csv(path);
  expect_header(t, {"target_id", "target_name", "source_id"});
  MergePlan plan;
  for (const CsvRow& row : t.rows) {
    expect_fields(t, row);
    const std::string& target = row.fields[0];
    const std::string& name = row.fields[1];
    const std::string& source = row.fields[2];
    if (target.empty() || source.empty()) fail(path, row.line, "empty id");
    if (!plan.target_of.emplace(source, target).second) {
      fail(path, row.line, "region '" + source + "' is merged more than once");
    }
    const auto [it, fresh] = plan.target_name.emplace(target, name);
    if (!fresh && it->second != name) {
      fail(path, row.line, "target '" + target + "' is given two names");
    }
  }
  for (const auto& [source, target] : plan.target_of) {
    if (plan.target_of.count(target) && plan.target_of.at(target) != target) {
      fail(path, 0, "merge target '" + target + "' is itself merged into another region");
    }
  }
  return plan;
}

RegionTable load_regions(const std::string& regions_path, const std::string& adjacency_path,
                         const MergePlan& merge) {
  const CsvTable t = read_csv(regions_path);
  expect_header(t, {"id", "name", "population", "area_km2", "centroid_x", "centroid_y"});
  std::vector<Region> raw;
  std::set<std::string> seen;
  for (const CsvRow& row : t.rows) {
    expect_fields(t, row);
    Region r;
    r.id = row.fields[0];
    r.name = row.fields[1];
    if (r.id.empty()) fail(regions_path, row.line, "empty region id");
    if (!seen.insert(r.id).second) fail(regions_path, row.line, "duplicate region id '" + r.id + "'");
    r.population = parse_real(regions_path, row.line, row.fields[2], "population");
    r.area = parse_real(regions_path, row.line, row.fields[3], "area_km2");
    r.x = parse_real(regions_path, row.line, row.fields[4], "centroid_x");
    r.y = parse_real(regions_path, row.line, row.fields[5], "centroid_y");
    if (!(r.population > 0.0)) fail(regions_path, row.line, "population must be positive");
    if (!(r.area > 0.0)) fail(regions_path, row.line, "area_km2 must be positive");
    raw.push_back(std::move(r));
  }
  if (raw.empty()) fail(regions_path, 0, "no regions");
  for (const auto& [source, target] : merge.target_of) {
    if (!seen.count(source)) {
      throw ParseError(regions_path, 0, "merge source '" + source + "' is not a region");
    }
  }

  // Fold merged regions together, keeping first-appearance order.
  std::vector<Region> merged;
  std::map<std::string, std::size_t> slot;
  for (const Region& r : raw) {
    const std::string& id = merge.resolve(r.id);
    auto it = slot.find(id);
    if (it == slot.end()) {
      Region g;
      g.id = id;
      const auto named = merge.target_name.find(id);
      g.name = named != merge.target_name.end() ? named->second : r.name;
      slot.emplace(id, merged.size());
      merged.push_back(g);
      it = slot.find(id);
    }
    Region& g = merged[it->second];
    g.population += r.population;
    g.x += r.area * r.x;
    g.y += r.area * r.y;
    g.area += r.area;
  }
  for (Region& g : merged) {
    g.x /= g.area;
    g.y /= g.area;
  }

  // Edge list.
  std::vector<CsvRow> edges = read_records(adjacency_path);
  if (!edges.empty() && edges.front().fields == std::vector<std::string>{"id_a", "id_b"}) {
    edges.erase(edges.begin());
  }
  std::map<std::pair<std::string, std::string>, int> pairs;
  for (const CsvRow& row : edges) {
    if (row.fields.size() != 2) fail(adjacency_path, row.line, "expected 'id_a,id_b'");
    const std::string& a = row.fields[0];
    const std::string& b = row.fields[1];
    for (const std::string& id : {a, b}) {
      if (!seen.count(id) && !slot.count(id)) {
        fail(adjacency_path, row.line, "unknown region id '" + id + "'");
      }
    }
    if (a == b) fail(adjacency_path, row.line, "region '" + a + "' paired with itself");
    if (!pairs.emplace(std::make_pair(a, b), row.line).second) {
      fail(adjacency_path, row.line, "duplicate pair " + a + "," + b);
    }
  }
  bool directed = false;
  for (const auto& [p, line] : pairs) {
    if (pairs.count({p.second, p.first})) directed = true;
  }
  if (directed) {
    for (const auto& [p, line] : pairs) {
      if (!pairs.count({p.second, p.first})) {
        fail(adjacency_path, line,
             "asymmetric pair " + p.first + "," + p.second +
                 ": the file lists pairs in both directions but this one has no reverse");
      }
    }
  }
  std::map<std::string, std::set<std::string>> neighbours;
  for (const auto& [p, line] : pairs) {
    const std::string& a = merge.resolve(p.first);
    const std::string& b = merge.resolve(p.second);
    if (a == b) continue;  // internal border of a merged region
    neighbours[a].insert(b);
    neighbours[b].insert(a);
  }
  for (Region& g : merged) {
    const auto& n = neighbours[g.id];
    g.neighbors.assign(n.begin(), n.end());
  }
  return RegionTable(std::move(merged));
}

CountMode parse_count_mode(const std::string& text) {
  if (text == "cumulative") return CountMode::Cumulative;
  if (text == "daily") return CountMode::Daily;
  throw ConfigError("count mode must be 'cumulative' or 'daily', got '" + text + "'");
}

LoadedCounts load_counts(const std::string& path, CountMode mode, const RegionTable& regions,
                         const MergePlan& merge) {
  const CsvTable t = read_csv(path);
  expect_header(t, {"date", "region_id", "value"});
  std::map<std::string, std::map<Date, Count>> series;
  for (const CsvRow& row : t.rows) {
    expect_fields(t, row);
    Date date;
    try {
      date = Date::parse(row.fields[0]);
    } catch (const std::invalid_argument&) {
      fail(path, row.line, "bad date '" + row.fields[0] + "' (expected YYYY-MM-DD)");
    }
    const std::string& id = row.fields[1];
    if (!regions.index_of(merge.resolve(id))) fail(path, row.line, "unknown region id '" + id + "'");
    const Count value = parse_count(path, row.line, row.fields[2]);
    auto& s = series[id];
    if (!s.empty() && !(s.rbegin()->first < date)) {
      fail(path, row.line,
           s.count(date) ? "duplicate entry for " + id + " on " + date.to_string()
                         : "dates for " + id + " are not increasing");
    }
    s.emplace(date, value);
  }
  if (series.empty()) fail(path, 0, "no data rows");

  Date first = series.begin()->second.begin()->first;
  Date last = first;
  for (const auto& [id, s] : series) {
    first = std::min(first, s.begin()->first);
    last = std::max(last, s.rbegin()->first);
  }
  const int span = (last - first) + 1;
  std::string gaps;
  int gap_count = 0;
  for (const auto& [id, s] : series) {
    for (int k = 0; k < span; ++k) {
      if (!s.count(first + k)) {
        if (++gap_count <= 10) gaps += " " + id + "@" + (first + k).to_string();
      }
    }
  }
  if (gap_count > 0) {
    fail(path, 0, std::to_string(gap_count) + " missing cell(s):" + gaps + (gap_count > 10 ? " ..." : ""));
  }

  const int m = regions.size();
  CountMatrix raw = CountMatrix::Zero(m, span);
  std::vector<bool> covered(static_cast<std::size_t>(m), false);
  for (const auto& [id, s] : series) {
    const int i = *regions.index_of(merge.resolve(id));
    covered[static_cast<std::size_t>(i)] = true;
    int k = 0;
    for (const auto& [date, value] : s) raw(i, k++) += value;
  }
  for (int i = 0; i < m; ++i) {
    if (!covered[static_cast<std::size_t>(i)]) {
      fail(path, 0, "no counts for region '" + regions[i].id + "'");
    }
  }

  LoadedCounts out;
  if (mode == CountMode::Daily) {
    out.panel.counts = raw;
    for (int k = 0; k < span; ++k) out.panel.dates.push_back(first + k);
  } else {
    if (span < 2) fail(path, 0, "cumulative input needs at least two dates");
    out.panel.counts.resize(m, span - 1);
    for (int k = 1; k < span; ++k) {
      out.panel.dates.push_back(first + k);
      for (int i = 0; i < m; ++i) {
        const Count d = raw(i, k) - raw(i, k - 1);
        if (d < 0) ++out.clamped;
        out.panel.counts(i, k - 1) = std::max<Count>(d, 0);
      }
    }
    if (out.clamped > 0) {
      out.warnings.push_back(std::to_string(out.clamped) +
                             " negative daily difference(s) in '" + path + "' set to 0");
    }
  }
  out.panel.validate();
  return out;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_regions(const std::string& path, const RegionTable& regions) {
  auto out = open_output(path);
  out << "id,name,population,area_km2,centroid_x,centroid_y\n";
  for (const Region& r : regions.regions()) {
    out << csv_field(r.id) << ',' << csv_field(r.name) << ',' << format_double(r.population) << ','
        << format_double(r.area) << ',' << format_double(r.x) << ',' << format_double(r.y) << '\n';
  }
}

void write_adjacency(const std::string& path, const RegionTable& regions) {
  auto out = open_output(path);
  out << "id_a,id_b\n";
  const Adjacency adj = regions.adjacency();
  for (int i = 0; i < regions.size(); ++i) {
    for (int j : adj[static_cast<std::size_t>(i)]) {
      if (j > i) out << csv_field(regions[i].id) << ',' << csv_field(regions[j].id) << '\n';
    }
  }
}

void write_counts(const std::string& path, const CountPanel& panel, const RegionTable& regions,
                  CountMode mode) {
  panel.validate();
  if (panel.regions() != regions.size()) throw ContractError("write_counts: region mismatch");
  auto out = open_output(path);
  out << "date,region_id,value\n";
  for (int i = 0; i < panel.regions(); ++i) {
    Count total = 0;
    if (mode == CountMode::Cumulative) {
      out << (panel.dates.front() + -1).to_string() << ',' << csv_field(regions[i].id) << ",0\n";
    }
    for (int t = 0; t < panel.days(); ++t) {
      total += panel.counts(i, t);
      const Count value = mode == CountMode::Cumulative ? total : panel.counts(i, t);
      out << panel.dates[static_cast<std::size_t>(t)].to_string() << ',' << csv_field(regions[i].id)
          << ',' << value << '\n';
    }
  }
}

void write_samples(const std::string& path, const PosteriorSamples& samples) {
  auto out = open_output(path);
  out << "# seed=" << samples.seed << " chains=" << samples.chains << '\n';
  out << "chain,iteration";
  for (const auto& name : kHyperNames) out << ',' << name;
  for (const char* block : {"delta", "eps"}) {
    for (int t = 1; t <= samples.days; ++t) out << ',' << block << '_' << t;
  }
  for (const char* block : {"zeta", "xi"}) {
    for (int i = 1; i <= samples.regions; ++i) out << ',' << block << '_' << i;
  }
  out << '\n';
  for (const Draw& d : samples.draws) {
    out << d.chain << ',' << d.iteration;
    for (double v : d.hyper.to_array()) out << ',' << format_double(v);
    for (const Eigen::VectorXd* v : {&d.latent.delta, &d.latent.eps, &d.latent.zeta, &d.latent.xi}) {
      for (Eigen::Index k = 0; k < v->size(); ++k) out << ',' << format_double((*v)[k]);
    }
    out << '\n';
  }
}

PosteriorSamples read_samples(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw ParseError(path, 0, "cannot open file");
  PosteriorSamples s;
  std::string first;
  std::getline(probe, first);
  unsigned long long seed = 0;
  int chains = 0;
  if (std::sscanf(first.c_str(), "# seed=%llu chains=%d", &seed, &chains) != 2) {
    fail(path, 1, "missing '# seed=... chains=...' line");
  }
  s.seed = seed;
  s.chains = chains;

  const CsvTable t = read_csv(path);
  const auto& h = t.header;
  auto count_prefix = [&](const std::string& prefix) {
    return static_cast<int>(std::count_if(h.begin(), h.end(), [&](const std::string& c) {
      return c.rfind(prefix, 0) == 0;
    }));
  };
  s.days = count_prefix("delta_");
  s.regions = count_prefix("zeta_");
  const std::size_t expected = 2 + kNumHyper + 2 * static_cast<std::size_t>(s.days + s.regions);
  if (h.size() != expected || h[0] != "chain" || h[1] != "iteration" ||
      count_prefix("eps_") != s.days || count_prefix("xi_") != s.regions) {
    fail(path, 2, "unexpected samples header");
  }
  for (int k = 0; k < kNumHyper; ++k) {
    if (h[static_cast<std::size_t>(2 + k)] != kHyperNames[static_cast<std::size_t>(k)]) {
      fail(path, 2, "unexpected samples header");
    }
  }
  for (const CsvRow& row : t.rows) {
    expect_fields(t, row);
    Draw d;
    std::size_t c = 0;
    d.chain = static_cast<int>(parse_count(path, row.line, row.fields[c++]));
    d.iteration = static_cast<int>(parse_count(path, row.line, row.fields[c++]));
    std::array<double, kNumHyper> values{};
    for (auto& v : values) {
      v = parse_real(path, row.line, row.fields[c], h[c]);
      ++c;
    }
    d.hyper = HyperParams::from_array(values);
    d.latent = LatentState::zeros(s.regions, s.days);
    for (Eigen::VectorXd* v : {&d.latent.delta, &d.latent.eps, &d.latent.zeta, &d.latent.xi}) {
      for (Eigen::Index k = 0; k < v->size(); ++k) {
        (*v)[k] = parse_real(path, row.line, row.fields[c], h[c]);
        ++c;
      }
    }
    try {
      validate(d.hyper);
    } catch (const DomainError& e) {
      fail(path, row.line, e.what());
    }
    s.draws.push_back(std::move(d));
  }
  if (s.draws.empty()) fail(path, 0, "no draws");
  return s;
}

void write_summary(const std::string& path, const std::vector<SummaryRow>& rows) {
  auto out = open_output(path);
  out << "parameter,mean,lower95,upper95,rhat\n";
  for (const SummaryRow& r : rows) {
    out << r.parameter << ',' << format_double(r.mean) << ',' << format_double(r.lower95) << ','
        << format_double(r.upper95) << ',' << format_double(r.rhat) << '\n';
  }
}

void write_ledger(const std::string& path, const PosteriorSamples& samples) {
  auto out = open_output(path);
  out << "chain,block,proposed_burn_in,accepted_burn_in,proposed,accepted,acceptance_rate,final_scale\n";
  for (const BlockLedger& l : samples.ledger) {
    out << l.chain << ',' << l.block << ',' << l.proposed_burn_in << ',' << l.accepted_burn_in << ','
        << l.proposed << ',' << l.accepted << ',' << format_double(l.acceptance_rate()) << ','
        << (l.scale_trace.empty() ? std::string() : format_double(l.scale_trace.back())) << '\n';
  }
}

void write_calibration(const std::string& path, const CalibrationReport& report,
                       const RegionTable& regions, const CountPanel& panel) {
  std::set<Cell> low(report.flagged.begin(), report.flagged.end());
  std::set<Cell> bad(report.unreliable.begin(), report.unreliable.end());
  auto out = open_output(path);
  out << "region_id,date,observed,cpo,pit,low_cpo,unreliable\n";
  for (int i = 0; i < panel.regions(); ++i) {
    for (int t = 0; t < panel.days(); ++t) {
      out << csv_field(regions[i].id) << ',' << panel.dates[static_cast<std::size_t>(t)].to_string()
          << ',' << panel.counts(i, t) << ',' << format_double(report.cpo(i, t)) << ','
          << format_double(report.pit(i, t)) << ',' << low.count({i, t}) << ','
          << bad.count({i, t}) << '\n';
    }
  }
}

void write_histogram(const std::string& path, const std::vector<double>& heights) {
  auto out = open_output(path);
  out << "bin,lower,upper,height\n";
  const double J = static_cast<double>(heights.size());
  for (std::size_t j = 0; j < heights.size(); ++j) {
    out << j + 1 << ',' << format_double(static_cast<double>(j) / J) << ','
        << format_double(static_cast<double>(j + 1) / J) << ',' << format_double(heights[j]) << '\n';
  }
}

void write_forecast(const std::string& path, const ForecastResult& forecast,
                    const RegionTable& regions) {
  auto out = open_output(path);
  out << "date,region_id,mean,lower95,upper95\n";
  auto row = [&](const Date& date, const std::string& id, const CellSummary& s) {
    out << date.to_string() << ',' << csv_field(id) << ',' << format_double(s.mean) << ','
        << format_double(s.lower95) << ',' << format_double(s.upper95) << '\n';
  };
  for (int j = 0; j < forecast.horizon; ++j) {
    const Date& date = forecast.dates[static_cast<std::size_t>(j)];
    for (int i = 0; i < regions.size(); ++i) {
      row(date, regions[i].id,
          forecast.region_summary[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
    row(date, "COUNTRY", forecast.country_summary[static_cast<std::size_t>(j)]);
  }
}

void write_truth(const std::string& path, const HyperParams& truth) {
  auto out = open_output(path);
  out << "parameter,value\n";
  const auto values = truth.to_array();
  for (int k = 0; k < kNumHyper; ++k) {
    out << kHyperNames[static_cast<std::size_t>(k)] << ',' << format_double(values[static_cast<std::size_t>(k)]) << '\n';
  }
}

}  // namespace riskmap

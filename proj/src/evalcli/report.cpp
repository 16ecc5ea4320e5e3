#include "amc/evalcli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "amc/common/bytes.hpp"
#include "amc/common/error.hpp"

namespace amc::eval {
namespace {

using nlohmann::json;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct CellKey {
  std::string offline, online;
  std::size_t shots;
  bool operator<(const CellKey& o) const {
    return std::tie(offline, online, shots) < std::tie(o.offline, o.online, o.shots);
  }
  bool operator==(const CellKey& o) const = default;
};

// Pooled SER per (cell, seed), averaged over attacks; cells in first-seen order.
std::vector<std::pair<CellKey, std::map<std::uint64_t, double>>> per_seed(const SerReport& r) {
  std::vector<std::pair<CellKey, std::map<std::uint64_t, std::pair<double, int>>>> acc;
  for (const auto& row : r.rows) {
    if (row.snr_db) continue;
    CellKey k{row.offline, row.online, row.shots};
    auto it = std::find_if(acc.begin(), acc.end(), [&](const auto& p) { return p.first == k; });
    if (it == acc.end()) {
      acc.push_back({k, {}});
      it = acc.end() - 1;
    }
    auto& [sum, cnt] = it->second[row.seed];
    sum += row.ser();
    ++cnt;
  }
  std::vector<std::pair<CellKey, std::map<std::uint64_t, double>>> out;
  for (auto& [k, m] : acc) {
    std::map<std::uint64_t, double> s;
    for (auto& [seed, sc] : m) s[seed] = sc.first / sc.second;
    out.push_back({k, std::move(s)});
  }
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace

std::string report_csv(const SerReport& r) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& row : r.rows) {
    os << row.offline << ',' << row.online << ',' << row.shots << ','
       << (row.snr_db ? fmt("%g", *row.snr_db) : std::string("all")) << ',' << row.attack << ','
       << fmt("%.6f", row.ser()) << ',' << row.n << ',' << row.seed << '\n';
  }
  return os.str();
}

std::string efficiency_csv(const SerReport& r) {
  std::ostringstream os;
  os << "offline,online,shots,reached,mean_ser,threshold,offline_cpu_s,offline_wall_s,online_cpu_s,online_wall_s\n";
  for (const auto& e : r.efficiency) {
    os << e.offline << ',' << e.online << ',' << e.shots << ',' << (e.reached ? "yes" : "no") << ','
       << fmt("%.6f", e.mean_ser) << ',' << fmt("%.6f", e.threshold) << ',' << fmt("%.3f", e.offline_cpu_seconds)
       << ',' << fmt("%.3f", e.offline_wall_seconds) << ',' << fmt("%.3f", e.online_cpu_seconds) << ','
       << fmt("%.3f", e.online_wall_seconds) << '\n';
  }
  return os.str();
}

json report_to_json(const SerReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"offline", row.offline},
                    {"online", row.online},
                    {"shots", row.shots},
                    {"snr_db", row.snr_db ? json(*row.snr_db) : json(nullptr)},
                    {"attack", row.attack},
                    {"wrong", row.wrong},
                    {"n", row.n},
                    {"seed", row.seed}});
  }
  json eff = json::array();
  for (const auto& e : r.efficiency) {
    json curve = json::array();
    for (const auto& [k, s] : e.curve) curve.push_back({k, s});
    eff.push_back({{"offline", e.offline},
                   {"online", e.online},
                   {"shots", e.shots},
                   {"reached", e.reached},
                   {"mean_ser", e.mean_ser},
                   {"threshold", e.threshold},
                   {"offline_cpu_seconds", e.offline_cpu_seconds},
                   {"offline_wall_seconds", e.offline_wall_seconds},
                   {"online_cpu_seconds", e.online_cpu_seconds},
                   {"online_wall_seconds", e.online_wall_seconds},
                   {"curve", curve}});
  }
  // Nested view by strategy for readers; the flat rows are authoritative.
  json nested = json::object();
  for (const auto& [k, seeds] : per_seed(r)) {
    double mean = 0.0;
    for (const auto& [s, v] : seeds) mean += v;
    mean /= static_cast<double>(seeds.size());
    nested[k.offline][k.online][std::to_string(k.shots)] = mean;
  }
  return {{"schema_version", kReportSchemaVersion},
          {"config_digest", r.config_digest},
          {"seeds", r.seeds},
          {"rows", rows},
          {"efficiency", eff},
          {"pooled_mean_ser", nested}};
}

SerReport report_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion)
      throw FormatError("report: unsupported schema_version", 0);
    SerReport r;
    r.config_digest = j.at("config_digest").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& x : j.at("rows")) {
      SerRow row;
      row.offline = x.at("offline").get<std::string>();
      row.online = x.at("online").get<std::string>();
      row.shots = x.at("shots").get<std::size_t>();
      if (!x.at("snr_db").is_null()) row.snr_db = x.at("snr_db").get<double>();
      row.attack = x.at("attack").get<std::string>();
      row.wrong = x.at("wrong").get<std::size_t>();
      row.n = x.at("n").get<std::size_t>();
      row.seed = x.at("seed").get<std::uint64_t>();
      r.rows.push_back(std::move(row));
    }
    for (const auto& x : j.at("efficiency")) {
      EfficiencyRow e;
      e.offline = x.at("offline").get<std::string>();
      e.online = x.at("online").get<std::string>();
      e.shots = x.at("shots").get<std::size_t>();
      e.reached = x.at("reached").get<bool>();
      e.mean_ser = x.at("mean_ser").get<double>();
      e.threshold = x.at("threshold").get<double>();
      e.offline_cpu_seconds = x.at("offline_cpu_seconds").get<double>();
      e.offline_wall_seconds = x.at("offline_wall_seconds").get<double>();
      e.online_cpu_seconds = x.at("online_cpu_seconds").get<double>();
      e.online_wall_seconds = x.at("online_wall_seconds").get<double>();
      for (const auto& p : x.at("curve")) e.curve.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<double>());
      r.efficiency.push_back(std::move(e));
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: malformed JSON: ") + e.what(), 0);
  }
}

std::vector<SummaryRow> summarize(const SerReport& r) {
  std::vector<SummaryRow> out;
  for (const auto& [k, seeds] : per_seed(r)) {
    SummaryRow s{k.offline, k.online, k.shots, 0.0, 0.0, seeds.size()};
    for (const auto& [seed, v] : seeds) s.mean += v;
    s.mean /= static_cast<double>(seeds.size());
    if (seeds.size() > 1) {
      double ss = 0.0;
      for (const auto& [seed, v] : seeds) ss += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(ss / static_cast<double>(seeds.size() - 1));
    }
    out.push_back(s);
  }
  return out;
}

double mean_ser(const SerReport& r, const std::string& offline, const std::string& online, std::size_t shots) {
  for (const auto& s : summarize(r))
    if (s.offline == offline && s.online == online && s.shots == shots) return s.mean;
  return std::numeric_limits<double>::quiet_NaN();
}

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  constexpr double W = 640, H = 420, L = 64, R = 170, T = 40, B = 56;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  for (const auto& s : series)
    for (double x : s.x) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  const double y0 = 0.0, y1 = 1.0;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
     << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = y0 + (y1 - y0) * i / 5.0;
    os << "<line x1=\"" << L << "\" y1=\"" << py(y) << "\" x2=\"" << W - R << "\" y2=\"" << py(y)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << fmt("%.1f", y)
       << "</text>\n";
  }
  std::set<double> xs;
  for (const auto& s : series) xs.insert(s.x.begin(), s.x.end());
  for (double x : xs)
    os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt("%g", x)
       << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">"
     << xml_escape(x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << xml_escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) os << (k ? " " : "") << px(s.x[k]) << ',' << py(s.y[k]);
    os << "\"/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k)
      os << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = T + 16 + 20.0 * static_cast<double>(i);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 36 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> emit_report(const SerReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "plots", ec);
  if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> out;
  auto put = [&](const std::filesystem::path& p, const std::string& text) {
    write_text_atomic(p, text);
    out.push_back(p);
  };
  put(dir / "report.csv", report_csv(r));
  put(dir / "report.json", report_to_json(r).dump(1) + "\n");

  std::ostringstream sum;
  sum << "offline,online,shots,mean_ser,std_ser,seeds\n";
  for (const auto& s : summarize(r))
    sum << s.offline << ',' << s.online << ',' << s.shots << ',' << fmt("%.6f", s.mean) << ','
        << fmt("%.6f", s.std) << ',' << s.seeds << '\n';
  put(dir / "summary.csv", sum.str());
  if (!r.efficiency.empty()) put(dir / "efficiency.csv", efficiency_csv(r));

  // SER vs SNR, averaged over seeds and attacks, one chart per (online, shots).
  std::vector<std::pair<std::string, std::size_t>> figures;
  std::vector<std::string> offline_order;
  std::map<std::tuple<std::string, std::size_t, std::string, double>, std::pair<double, double>> acc;
  for (const auto& row : r.rows) {
    if (!row.snr_db) continue;
    const std::pair<std::string, std::size_t> fig{row.online, row.shots};
    if (std::find(figures.begin(), figures.end(), fig) == figures.end()) figures.push_back(fig);
    if (std::find(offline_order.begin(), offline_order.end(), row.offline) == offline_order.end())
      offline_order.push_back(row.offline);
    auto& [sum_ser, cnt] = acc[{row.online, row.shots, row.offline, *row.snr_db}];
    sum_ser += row.ser();
    cnt += 1.0;
  }
  for (const auto& [online, shots] : figures) {
    std::vector<Series> series;
    for (const auto& offline : offline_order) {
      Series s{offline, {}, {}};
      for (const auto& [key, v] : acc) {
        if (std::get<0>(key) != online || std::get<1>(key) != shots || std::get<2>(key) != offline) continue;
        s.x.push_back(std::get<3>(key));
        s.y.push_back(v.first / v.second);
      }
      if (!s.x.empty()) series.push_back(std::move(s));
    }
    const std::string name = online == "none" ? "ser_vs_snr_none" : "ser_vs_snr_" + online + "_" + std::to_string(shots) + "shot";
    const std::string title = online == "none" ? "Zero-shot SER on the attacked target"
                                               : online + ", " + std::to_string(shots) + "-shot SER on the attacked target";
    put(dir / "plots" / (name + ".svg"), svg_line_chart(title, "SNR (dB)", "SER", series));
  }
  return out;
}

SerReport load_report(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open report " + json_path.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError("report " + json_path.string() + ": " + e.what(), 0);
  }
}

}  // namespace amc::eval

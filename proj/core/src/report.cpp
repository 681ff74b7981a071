#include "compre/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "compre/error.hpp"
#include "compre/random.hpp"

namespace compre {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  return out;
}

std::string percent(double fraction) { return format_fixed(100.0 * fraction, 1); }

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

void write_curve_csv(const AblationCurve& curve, std::ostream& out) {
  out << "tau,accuracy,n\n";
  for (const auto& p : curve.points) out << p.tau << ',' << format_fixed(p.accuracy, 3) << ',' << p.item_count << '\n';
}

void emit_curve_csv(const AblationCurve& curve, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_curve_csv(curve, out);
}

void write_positional_table(std::span<const PositionalColumn> columns, std::ostream& out) {
  if (columns.empty()) throw std::invalid_argument("positional table has no columns");
  constexpr std::pair<ExtractMode, std::string_view> order[] = {
      {ExtractMode::beginning, "beginning"}, {ExtractMode::random_window, "random"}, {ExtractMode::end, "end"}};
  out << "extract";
  for (const auto& c : columns) {
    if (c.rows.empty()) throw std::invalid_argument("positional column '" + c.name + "' has no rows");
    out << ',' << csv_cell(c.name);
  }
  out << '\n';
  for (const auto& [mode, label] : order) {
    out << label;
    for (const auto& c : columns) {
      const auto it = std::find_if(c.rows.begin(), c.rows.end(), [&](const PositionalRow& r) { return r.mode == mode; });
      if (it == c.rows.end()) {
        throw std::invalid_argument("positional column '" + c.name + "' lacks a " + std::string(label) + " row");
      }
      out << ',' << percent(it->accuracy);
    }
    out << '\n';
  }
}

void emit_positional_table(std::span<const PositionalColumn> columns, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_positional_table(columns, buf);  // validate before touching the file
  auto out = open_out(path);
  out << buf.str();
}

void write_world_knowledge_csv(const WorldKnowledgeReport& report, std::ostream& out) {
  out << "corpus,Standard,Context-free,Random,effective_options,n\n";
  for (const auto& r : report.rows) {
    out << csv_cell(r.corpus) << ',' << percent(r.standard_accuracy) << ',' << percent(r.context_free_accuracy) << ','
        << percent(r.random_baseline) << ',' << format_fixed(r.effective_options, 3) << ',' << r.item_count << '\n';
  }
}

void emit_world_knowledge_csv(const WorldKnowledgeReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_world_knowledge_csv(report, out);
}

void write_labels_csv(std::span<const QuestionLabel> labels, std::ostream& out) {
  out << "id,label,tau_star,unanswered\n";
  for (const auto& l : labels) {
    out << csv_cell(l.item_id) << ',' << to_string(l.label.level) << ',';
    if (l.label.level == ComprehensionLevel::partial) out << l.label.tau_star;
    out << ',' << (l.label.unanswered ? "true" : "false") << '\n';
  }
}

std::string render_curve_svg(std::span<const AblationCurve> curves, double random_baseline) {
  constexpr double width = 480, height = 320, left = 50, right = 20, top = 20, bottom = 40;
  constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  auto x = [&](double tau) { return left + tau / 100.0 * (width - left - right); };
  auto y = [&](double acc) { return top + (1.0 - acc) * (height - top - bottom); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << y(0) << "\" x2=\"" << x(100) << "\" y2=\"" << y(0)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << y(0) << "\" x2=\"" << left << "\" y2=\"" << y(1)
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 100; t += 20) {
    svg << "<text x=\"" << x(t) << "\" y=\"" << height - 20 << "\" font-size=\"10\" text-anchor=\"middle\">" << t
        << "%</text>\n";
  }
  for (int a = 0; a <= 100; a += 25) {
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y(a / 100.0) + 3 << "\" font-size=\"10\" text-anchor=\"end\">"
        << a << "</text>\n";
  }
  if (random_baseline >= 0.0) {
    svg << "<line x1=\"" << x(0) << "\" y1=\"" << y(random_baseline) << "\" x2=\"" << x(100) << "\" y2=\""
        << y(random_baseline) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = palette[c % std::size(palette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : curves[c].points) svg << format_fixed(x(p.tau), 1) << ',' << format_fixed(y(p.accuracy), 1) << ' ';
    svg << "\"/>\n";
    svg << "<text x=\"" << x(100) - 4 << "\" y=\"" << top + 12 * (c + 1) << "\" font-size=\"10\" text-anchor=\"end\" fill=\""
        << color << "\">" << curves[c].corpus << " (" << to_string(curves[c].mode) << ")</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string fingerprint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for fingerprinting");
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(buf.str())));
  return std::string("fnv1a64:") + hex;
}

nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["corpora"] = nlohmann::ordered_json::array();
  for (const auto& c : m.corpora) j["corpora"].push_back({{"path", c.path}, {"fingerprint", c.fingerprint}});
  j["scorers"] = m.scorers;
  j["seeds"] = m.seeds;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["artifacts"] = m.artifacts;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.value("config", nlohmann::json::object());
    for (const auto& c : j.value("corpora", nlohmann::json::array())) {
      m.corpora.push_back({c.at("path").get<std::string>(), c.at("fingerprint").get<std::string>()});
    }
    m.scorers = j.value("scorers", std::vector<std::string>{});
    m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << to_json(manifest).dump(2) << '\n';
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open manifest");
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace compre

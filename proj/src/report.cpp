#include "repinfo/report.hpp"

#include "repinfo/checkpoint.hpp"
#include "repinfo/config.hpp"
#include "repinfo/errors.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace repinfo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw InputError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, std::size_t line) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw InputError("line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || end != s.c_str() + s.size() || errno == ERANGE) {
    throw InputError("line " + std::to_string(line) + ": bad unsigned integer '" + s + "'");
  }
  return v;
}

template <typename Row, typename Parse>
std::vector<Row> read_csv(std::istream& in, const char* header, std::size_t fields, Parse&& parse) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != header) {
    throw InputError("line 1: expected header '" + std::string(header) + "'");
  }
  std::vector<Row> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != fields) {
      throw InputError("line " + std::to_string(number) + ": expected " + std::to_string(fields) + " fields");
    }
    rows.push_back(parse(cells, number));
  }
  return rows;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
}

std::string plan_json(const ExperimentPlan& plan, std::uint64_t seed, const std::string& status,
                      const std::string& failure, const std::string& started_at, double wall_seconds) {
  json doc = json::parse(serialize_plan(plan));
  doc["run"] = {{"seed", seed},
                {"status", status},
                {"failure", failure},
                {"started_at", started_at},
                {"wall_seconds", wall_seconds}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------- SVG

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Rgb {
  double r, g, b;
  std::string hex() const {
    char buf[8];
    auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0))); };
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
    return buf;
  }
};

constexpr Rgb kDirectionBlue{31, 119, 180};
constexpr Rgb kColorOrange{255, 127, 14};
constexpr Rgb kCoarsePurple{148, 103, 189};
constexpr Rgb kAccuracyGreen{44, 160, 44};
constexpr Rgb kAxisGrey{90, 90, 90};

Rgb kind_color(LabelKind kind) {
  switch (kind) {
    case LabelKind::direction: return kDirectionBlue;
    case LabelKind::color: return kColorOrange;
    case LabelKind::coarse: return kCoarsePurple;
  }
  return kAxisGrey;
}

// depth in [0, 1]: 0 = first hidden layer (light), 1 = last (dark).
Rgb shade(Rgb base, double depth) {
  const double white = 0.55 * (1.0 - depth);
  const double dark = 1.0 - 0.35 * depth;
  auto mix = [&](double c) { return (c + (255.0 - c) * white) * dark; };
  return {mix(base.r), mix(base.g), mix(base.b)};
}

class Svg {
 public:
  Svg(int width, int height) {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
         << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
         << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double w = 1.0,
            const std::string& dash = {}) {
    out_ << "<line x1=\"" << n(x1) << "\" y1=\"" << n(y1) << "\" x2=\"" << n(x2) << "\" y2=\"" << n(y2)
         << "\" stroke=\"" << stroke << "\" stroke-width=\"" << n(w) << '"';
    if (!dash.empty()) out_ << " stroke-dasharray=\"" << dash << '"';
    out_ << "/>\n";
  }

  void polyline(const std::vector<std::array<double, 2>>& pts, const std::string& stroke, double w,
                const std::string& dash = {}) {
    if (pts.empty()) return;
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << n(w) << '"';
    if (!dash.empty()) out_ << " stroke-dasharray=\"" << dash << '"';
    out_ << " points=\"";
    for (const auto& p : pts) out_ << n(p[0]) << ',' << n(p[1]) << ' ';
    out_ << "\"/>\n";
  }

  void polygon(const std::vector<std::array<double, 2>>& pts, const std::string& fill, double opacity) {
    if (pts.empty()) return;
    out_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << n(opacity) << "\" stroke=\"none\" points=\"";
    for (const auto& p : pts) out_ << n(p[0]) << ',' << n(p[1]) << ' ';
    out_ << "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill, const std::string& stroke = "none") {
    out_ << "<circle cx=\"" << n(cx) << "\" cy=\"" << n(cy) << "\" r=\"" << n(r) << "\" fill=\"" << fill
         << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke) {
    out_ << "<rect x=\"" << n(x) << "\" y=\"" << n(y) << "\" width=\"" << n(w) << "\" height=\"" << n(h)
         << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12,
            double rotate = 0.0, const std::string& fill = "#222222") {
    out_ << "<text x=\"" << n(x) << "\" y=\"" << n(y) << "\" font-family=\"sans-serif\" font-size=\"" << size
         << "\" text-anchor=\"" << anchor << "\" fill=\"" << fill << '"';
    if (rotate != 0.0) out_ << " transform=\"rotate(" << n(rotate) << ' ' << n(x) << ' ' << n(y) << ")\"";
    out_ << '>' << xml_escape(s) << "</text>\n";
  }

  void raw(const std::string& s) { out_ << s; }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

  static std::string n(double v) { return fmt_fixed(v, 2); }

 private:
  std::ostringstream out_;
};

struct Frame {
  double left = 70, right = 70, top = 40, bottom = 55;
  int width = 720, height = 440;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
  double pacc(double a) const { return height - bottom - a * (height - top - bottom); }
};

std::string tick_label(double v) {
  if (std::abs(v - std::round(v)) < 1e-9) return fmt_fixed(v, 0);
  return fmt_fixed(v, 2);
}

double nice_step(double span, int target) {
  const double raw = span / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

void draw_axes(Svg& svg, const Frame& f, const FigureSpec& spec, bool acc_axis) {
  const double bottom = f.height - f.bottom;
  const double right = f.width - f.right;
  svg.rect(f.left, f.top, right - f.left, bottom - f.top, "none", "#bbbbbb");

  const double xs = nice_step(f.x1 - f.x0, 8);
  for (double x = std::ceil(f.x0 / xs) * xs; x <= f.x1 + 1e-9; x += xs) {
    svg.line(f.px(x), bottom, f.px(x), bottom + 5, "#555555");
    svg.text(f.px(x), bottom + 18, tick_label(x));
  }
  const double ys = nice_step(f.y1 - f.y0, 5);
  for (double y = std::ceil(f.y0 / ys) * ys; y <= f.y1 + 1e-9; y += ys) {
    svg.line(f.left - 5, f.py(y), f.left, f.py(y), "#555555");
    svg.line(f.left, f.py(y), right, f.py(y), "#eeeeee");
    svg.text(f.left - 8, f.py(y) + 4, tick_label(y), "end");
  }
  if (f.y0 < 0.0) svg.line(f.left, f.py(0.0), right, f.py(0.0), "#888888", 1.0, "2,2");

  svg.text((f.left + right) / 2, f.height - 12, spec.x_label, "middle", 13);
  svg.text(18, (f.top + bottom) / 2, spec.y_label, "middle", 13, -90);
  if (!spec.title.empty()) svg.text(f.width / 2.0, 24, spec.title, "middle", 15);

  if (acc_axis) {
    const std::string green = kAccuracyGreen.hex();
    svg.line(right, f.top, right, bottom, green);
    for (int i = 0; i <= 5; ++i) {
      const double a = i / 5.0;
      svg.line(right, f.pacc(a), right + 5, f.pacc(a), green);
      svg.text(right + 8, f.pacc(a) + 4, fmt_fixed(a, 1), "start", 12, 0.0, green);
    }
    svg.text(f.width - 16, (f.top + bottom) / 2, "validation accuracy", "middle", 13, 90, green);
  }
}

struct CurvePoint {
  double x, y, sem;
};

struct Series {
  int layer = 0;
  LabelKind kind = LabelKind::direction;
  std::vector<CurvePoint> points;
};

bool selected(const FigureSpec& spec, int layer, LabelKind kind) {
  const bool layer_ok = spec.layers.empty() || std::find(spec.layers.begin(), spec.layers.end(), layer) != spec.layers.end();
  const bool kind_ok = spec.kinds.empty() || std::find(spec.kinds.begin(), spec.kinds.end(), kind) != spec.kinds.end();
  return layer_ok && kind_ok;
}

std::string render_curves(const std::vector<Series>& series, const std::vector<CurvePoint>& accuracy,
                          double h_y, int layer_count, const FigureSpec& spec, bool bands) {
  if (series.empty()) throw InputError("figure selection matches no info rows");

  Frame f;
  f.width = spec.width;
  f.height = spec.height;
  f.x0 = 1e300;
  f.x1 = -1e300;
  double ymin = 0.0;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      f.x0 = std::min(f.x0, p.x);
      f.x1 = std::max(f.x1, p.x);
      ymin = std::min(ymin, p.y - (bands ? p.sem : 0.0));
    }
  }
  if (f.x1 <= f.x0) f.x1 = f.x0 + 1;
  f.y1 = h_y > 0.0 ? h_y : 1.0;
  f.y0 = spec.raw ? std::floor(ymin * 4.0) / 4.0 : 0.0;
  if (f.y0 > -1e-12) f.y0 = 0.0;

  const bool acc_axis = spec.show_val_acc && !accuracy.empty();
  Svg svg(f.width, f.height);
  draw_axes(svg, f, spec, acc_axis);

  auto clamp_y = [&](double y) { return std::clamp(y, f.y0, f.y1); };
  for (const auto& s : series) {
    const double depth = layer_count > 1 ? static_cast<double>(s.layer) / (layer_count - 1) : 1.0;
    const std::string color = shade(kind_color(s.kind), depth).hex();
    if (bands) {
      std::vector<std::array<double, 2>> poly;
      for (const auto& p : s.points) poly.push_back({f.px(p.x), f.py(clamp_y(p.y + p.sem))});
      for (auto it = s.points.rbegin(); it != s.points.rend(); ++it) {
        poly.push_back({f.px(it->x), f.py(clamp_y(it->y - it->sem))});
      }
      svg.polygon(poly, color, 0.2);
    }
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : s.points) pts.push_back({f.px(p.x), f.py(clamp_y(p.y))});
    svg.polyline(pts, color, 2.0);
    if (s.points.size() == 1) svg.circle(pts[0][0], pts[0][1], 3, color);
  }
  if (acc_axis) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : accuracy) {
      if (p.x >= f.x0 && p.x <= f.x1) pts.push_back({f.px(p.x), f.pacc(std::clamp(p.y, 0.0, 1.0))});
    }
    svg.polyline(pts, kAccuracyGreen.hex(), 1.5, "6,4");
  }

  // legend: one entry per series, top-left inside the frame
  double ly = f.top + 16;
  for (const auto& s : series) {
    const double depth = layer_count > 1 ? static_cast<double>(s.layer) / (layer_count - 1) : 1.0;
    const std::string color = shade(kind_color(s.kind), depth).hex();
    svg.line(f.left + 10, ly - 4, f.left + 30, ly - 4, color, 2.0);
    svg.text(f.left + 36, ly, std::string(to_string(s.kind)) + " layer " + std::to_string(s.layer + 1), "start", 11);
    ly += 14;
  }
  if (acc_axis) {
    svg.line(f.left + 10, ly - 4, f.left + 30, ly - 4, kAccuracyGreen.hex(), 1.5, "6,4");
    svg.text(f.left + 36, ly, "validation accuracy", "start", 11);
  }
  return svg.finish();
}

// Marker glyph per direction class.
void marker(Svg& svg, int shape, double x, double y, const std::string& color) {
  const double r = 3.5;
  switch (shape % 6) {
    case 0:
      svg.circle(x, y, r, color);
      return;
    case 1:
      svg.line(x - r, y - r, x + r, y + r, color, 1.6);
      svg.line(x - r, y + r, x + r, y - r, color, 1.6);
      return;
    case 2:
      svg.rect(x - r, y - r, 2 * r, 2 * r, color, "none");
      return;
    case 3:
      svg.polygon({{{x, y - r}}, {{x + r, y + r}}, {{x - r, y + r}}}, color, 1.0);
      return;
    case 4:
      svg.polygon({{{x, y - r}}, {{x + r, y}}, {{x, y + r}}, {{x - r, y}}}, color, 1.0);
      return;
    default:
      svg.line(x - r, y, x + r, y, color, 1.6);
      svg.line(x, y - r, x, y + r, color, 1.6);
  }
}

std::string label_color(int label, int classes) {
  if (classes <= 2) return label == 0 ? "#d62728" : "#2ca02c";
  static const std::array<const char*, 10> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[static_cast<std::size_t>(label) % palette.size()];
}

std::string mean_sem_text(const std::optional<MeanSem>& m, int digits) {
  if (!m) return "-";
  return fmt_fixed(m->mean, digits) + " +/- " + fmt_fixed(m->sem, digits);
}

std::string mean_sem_csv(const std::optional<MeanSem>& m) {
  if (!m) return ",";
  return fmt_double(m->mean) + "," + fmt_double(m->sem);
}

}  // namespace

// ---------------------------------------------------------------- CSV

std::string format_info_row(std::uint64_t seed, const InfoEstimate& e) {
  return std::to_string(seed) + "," + std::to_string(e.epoch) + "," + std::to_string(e.layer_index) + "," +
         to_string(e.label_kind) + "," + fmt_double(e.h_y) + "," + fmt_double(e.ce_test) + "," +
         fmt_double(e.iu_raw) + "," + fmt_double(e.iu) + "," + std::to_string(e.probe_seed);
}

std::string format_metrics_row(std::uint64_t seed, const EpochRecord& r) {
  return std::to_string(seed) + "," + std::to_string(r.epoch) + "," + r.phase + "," +
         fmt_double(r.train_loss_bits) + "," + fmt_double(r.train_acc) + "," + fmt_double(r.val_acc) + "," +
         fmt_double(r.lr);
}

std::vector<InfoEstimate> read_info_csv(std::istream& in) {
  return read_csv<InfoEstimate>(in, kInfoHeader, 9, [](const std::vector<std::string>& c, std::size_t line) {
    InfoEstimate e;
    parse_u64(c[0], line);
    e.epoch = static_cast<int>(parse_int(c[1], line));
    e.layer_index = static_cast<int>(parse_int(c[2], line));
    try {
      e.label_kind = parse_label_kind(c[3]);
    } catch (const InputError&) {
      throw InputError("line " + std::to_string(line) + ": unknown label kind '" + c[3] + "'");
    }
    e.h_y = parse_double(c[4], line);
    e.ce_test = parse_double(c[5], line);
    e.iu_raw = parse_double(c[6], line);
    e.iu = parse_double(c[7], line);
    e.probe_seed = parse_u64(c[8], line);
    return e;
  });
}

std::vector<EpochRecord> read_metrics_csv(std::istream& in) {
  return read_csv<EpochRecord>(in, kMetricsHeader, 7, [](const std::vector<std::string>& c, std::size_t line) {
    EpochRecord r;
    parse_u64(c[0], line);
    r.epoch = static_cast<int>(parse_int(c[1], line));
    r.phase = c[2];
    r.train_loss_bits = parse_double(c[3], line);
    r.train_acc = parse_double(c[4], line);
    r.val_acc = parse_double(c[5], line);
    r.lr = parse_double(c[6], line);
    return r;
  });
}

// ---------------------------------------------------------------- store

RunStore::RunStore(fs::path root) : root_(std::move(root)) { make_dirs(root_); }

fs::path RunStore::create_run_dir(const std::string& timestamp, std::uint64_t seed) const {
  const std::string base = "run_" + timestamp + "_" + std::to_string(seed);
  for (int attempt = 1; attempt < 10000; ++attempt) {
    const fs::path dir = root_ / (attempt == 1 ? base : base + "_" + std::to_string(attempt));
    std::error_code ec;
    if (fs::create_directory(dir, ec)) {
      make_dirs(dir / "checkpoints");
      make_dirs(dir / "figures");
      return dir;
    }
    if (ec) throw IoError(dir.string(), ec.message());
  }
  throw IoError((root_ / base).string(), "no free run directory name");
}

fs::path checkpoint_path(const fs::path& run_dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%04d.bin", epoch);
  return run_dir / "checkpoints" / name;
}

fs::path final_checkpoint_path(const fs::path& run_dir) { return run_dir / "checkpoints" / "final.bin"; }

RunWriter::RunWriter(const RunStore& store) : store_(store) {}

void RunWriter::begin(const ExperimentPlan& plan, std::uint64_t seed) {
  plan_ = plan;
  seed_ = seed;
  dir_ = store_.create_run_dir(utc_timestamp(), seed);
  write_text(dir_ / "plan.json", plan_json(plan, seed, "running", "", "", 0.0));
  write_text(dir_ / "metrics.csv", std::string(kMetricsHeader) + "\n");
  write_text(dir_ / "info.csv", std::string(kInfoHeader) + "\n");
}

void RunWriter::append(const std::string& file, const std::string& line) const {
  const fs::path path = dir_ / file;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError(path.string(), "cannot open for appending");
  out << line << '\n';
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

void RunWriter::epoch(const EpochRecord& row) { append("metrics.csv", format_metrics_row(seed_, row)); }

void RunWriter::info(std::span<const InfoEstimate> rows) {
  for (const auto& e : rows) append("info.csv", format_info_row(seed_, e));
}

void RunWriter::checkpoint(int epoch, const NetworkState& state) { save_state(checkpoint_path(dir_, epoch), state); }

void RunWriter::finish(const RunRecord& record) {
  if (record.final_state) save_state(final_checkpoint_path(dir_), *record.final_state);
  write_text(dir_ / "plan.json", plan_json(record.plan, record.seed, to_string(record.status), record.failure,
                                           record.started_at, record.wall_seconds));
}

fs::path save_run(const RunRecord& record, const RunStore& store) {
  const fs::path dir = store.create_run_dir(record.started_at.empty() ? utc_timestamp() : record.started_at,
                                            record.seed);
  write_text(dir / "plan.json", plan_json(record.plan, record.seed, to_string(record.status), record.failure,
                                          record.started_at, record.wall_seconds));
  std::string metrics = std::string(kMetricsHeader) + "\n";
  for (const auto& r : record.metrics) metrics += format_metrics_row(record.seed, r) + "\n";
  write_text(dir / "metrics.csv", metrics);
  std::string info = std::string(kInfoHeader) + "\n";
  for (const auto& e : record.info) info += format_info_row(record.seed, e) + "\n";
  write_text(dir / "info.csv", info);
  if (record.final_state) save_state(final_checkpoint_path(dir), *record.final_state);
  return dir;
}

RunRecord load_run(const fs::path& run_dir) {
  json doc;
  const fs::path plan_path = run_dir / "plan.json";
  try {
    doc = json::parse(read_text(plan_path));
  } catch (const json::parse_error& e) {
    throw InputError(plan_path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("run") || !doc["run"].is_object()) {
    throw InputError(plan_path.string() + ": missing run section");
  }
  const json run = doc["run"];
  doc.erase("run");

  RunRecord record;
  record.plan = parse_config_text(doc.dump()).plan;
  try {
    record.seed = run.at("seed").get<std::uint64_t>();
    const auto status = run.at("status").get<std::string>();
    record.failure = run.value("failure", std::string());
    if (status == "running") {
      record.status = RunStatus::aborted;
      if (record.failure.empty()) record.failure = "run did not finish";
    } else {
      record.status = parse_run_status(status);
    }
    record.started_at = run.value("started_at", std::string());
    record.wall_seconds = run.value("wall_seconds", 0.0);
  } catch (const json::exception& e) {
    throw InputError(plan_path.string() + ": run section: " + e.what());
  }

  {
    std::ifstream in(run_dir / "metrics.csv", std::ios::binary);
    if (!in) throw IoError((run_dir / "metrics.csv").string(), "cannot open for reading");
    record.metrics = read_metrics_csv(in);
  }
  {
    std::ifstream in(run_dir / "info.csv", std::ios::binary);
    if (!in) throw IoError((run_dir / "info.csv").string(), "cannot open for reading");
    record.info = read_info_csv(in);
  }
  if (fs::exists(final_checkpoint_path(run_dir))) record.final_state = load_state(final_checkpoint_path(run_dir));
  return record;
}

std::vector<fs::path> list_runs(const fs::path& root) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("run_", 0) == 0 &&
        fs::exists(entry.path() / "plan.json")) {
      out.push_back(entry.path());
    }
  }
  if (ec) throw IoError(root.string(), ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- figures

std::string render_info_curves(const RunRecord& record, const FigureSpec& spec) {
  std::map<std::pair<int, LabelKind>, Series> by_key;
  double h_y = 0.0;
  for (const auto& e : record.info) {
    if (!selected(spec, e.layer_index, e.label_kind)) continue;
    Series& s = by_key[{e.layer_index, e.label_kind}];
    s.layer = e.layer_index;
    s.kind = e.label_kind;
    s.points.push_back({static_cast<double>(e.epoch), spec.raw ? e.iu_raw : e.iu, 0.0});
    h_y = std::max(h_y, e.h_y);
  }
  std::vector<Series> series;
  for (auto& [key, s] : by_key) {
    std::sort(s.points.begin(), s.points.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
    series.push_back(std::move(s));
  }
  std::vector<CurvePoint> acc;
  for (const auto& m : record.metrics) acc.push_back({static_cast<double>(m.epoch), m.val_acc, 0.0});
  return render_curves(series, acc, h_y, record.plan.hidden_layer_count(), spec, false);
}

std::string render_info_curves(const Aggregate& aggregate, const FigureSpec& spec) {
  std::map<std::pair<int, LabelKind>, Series> by_key;
  int layer_count = 0;
  for (const auto& p : aggregate.info) {
    layer_count = std::max(layer_count, p.layer + 1);
    if (!selected(spec, p.layer, p.kind)) continue;
    Series& s = by_key[{p.layer, p.kind}];
    s.layer = p.layer;
    s.kind = p.kind;
    const MeanSem& m = spec.raw ? p.iu_raw : p.iu;
    s.points.push_back({static_cast<double>(p.epoch), m.mean, m.sem});
  }
  std::vector<Series> series;
  for (auto& [key, s] : by_key) {
    std::sort(s.points.begin(), s.points.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
    series.push_back(std::move(s));
  }
  std::vector<CurvePoint> acc;
  for (const auto& [epoch, m] : aggregate.val_acc) acc.push_back({static_cast<double>(epoch), m.mean, m.sem});
  return render_curves(series, acc, aggregate.h_y_max, layer_count, spec, true);
}

Matrix pca_project(const Matrix& values) {
  if (values.cols() < 2) throw InputError("scatter needs a layer width of at least 2");
  Matrix out = Matrix::Zero(values.rows(), 2);
  if (values.rows() < 2) return out;
  const RowVector mean = values.colwise().mean();
  const Matrix centered = values.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(values.rows() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index d = values.cols();
  Eigen::MatrixXd basis(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    basis.col(k) = v;
  }
  out = centered * basis;
  return out;
}

std::string render_scatter(const ActivationMatrix& acts, const std::string& title) {
  const Matrix xy = pca_project(acts.values);
  const auto rows = static_cast<std::size_t>(xy.rows());
  if (acts.direction.size() != rows || acts.color.size() != rows) {
    throw InputError("scatter labels must match activation rows");
  }

  FigureSpec spec;
  spec.title = title.empty() ? "layer " + std::to_string(acts.layer_index + 1) + ", epoch " +
                                   std::to_string(acts.epoch)
                             : title;
  spec.x_label = "PC 1";
  spec.y_label = "PC 2";
  spec.width = 520;
  spec.height = 520;

  Frame f;
  f.width = spec.width;
  f.height = spec.height;
  f.right = 30;
  double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
  if (rows > 0) {
    lo_x = xy.col(0).minCoeff();
    hi_x = xy.col(0).maxCoeff();
    lo_y = xy.col(1).minCoeff();
    hi_y = xy.col(1).maxCoeff();
  }
  const double pad_x = std::max(1e-6, 0.08 * (hi_x - lo_x));
  const double pad_y = std::max(1e-6, 0.08 * (hi_y - lo_y));
  f.x0 = lo_x - pad_x;
  f.x1 = hi_x + pad_x;
  f.y0 = lo_y - pad_y;
  f.y1 = hi_y + pad_y;

  int colors = 2;
  for (int c : acts.color) colors = std::max(colors, c + 1);

  Svg svg(f.width, f.height);
  draw_axes(svg, f, spec, false);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    marker(svg, acts.direction[r], f.px(xy(i, 0)), f.py(xy(i, 1)), label_color(acts.color[r], colors));
  }
  return svg.finish();
}

std::string render_sweep_summary(std::span<const PretrainPoint> points, const std::string& title) {
  if (points.empty()) throw InputError("sweep summary needs at least one point");
  FigureSpec spec;
  spec.title = title;
  spec.x_label = "colour pretraining epochs";

  Frame f;
  f.width = spec.width;
  f.height = spec.height;
  f.x0 = points.front().pretrain_epochs;
  f.x1 = points.front().pretrain_epochs;
  double h_y = 0.0;
  for (const auto& p : points) {
    f.x0 = std::min<double>(f.x0, p.pretrain_epochs);
    f.x1 = std::max<double>(f.x1, p.pretrain_epochs);
    h_y = std::max(h_y, p.sweep.aggregate.h_y_max);
  }
  if (f.x1 <= f.x0) f.x1 = f.x0 + 1;
  f.y0 = 0.0;
  f.y1 = h_y > 0.0 ? h_y : 1.0;

  Svg svg(f.width, f.height);
  draw_axes(svg, f, spec, true);
  auto draw = [&](auto pick, const std::string& color, const std::string& dash, bool acc) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : points) {
      const MeanSem m = pick(p);
      const double x = f.px(p.pretrain_epochs);
      auto y = [&](double v) { return acc ? f.pacc(std::clamp(v, 0.0, 1.0)) : f.py(std::clamp(v, f.y0, f.y1)); };
      pts.push_back({x, y(m.mean)});
      svg.line(x, y(m.mean - m.sem), x, y(m.mean + m.sem), color, 1.2);
      svg.circle(x, y(m.mean), 3, color);
    }
    svg.polyline(pts, color, 2.0, dash);
  };
  draw([](const PretrainPoint& p) { return p.direction_iu; }, kDirectionBlue.hex(), "", false);
  draw([](const PretrainPoint& p) { return p.color_iu; }, kColorOrange.hex(), "", false);
  draw([](const PretrainPoint& p) { return p.val_acc; }, kAccuracyGreen.hex(), "6,4", true);

  double ly = f.top + 16;
  for (auto [label, color] : {std::pair{"direction", kDirectionBlue}, std::pair{"color", kColorOrange}}) {
    svg.line(f.left + 10, ly - 4, f.left + 30, ly - 4, color.hex(), 2.0);
    svg.text(f.left + 36, ly, label, "start", 11);
    ly += 14;
  }
  svg.line(f.left + 10, ly - 4, f.left + 30, ly - 4, kAccuracyGreen.hex(), 1.5, "6,4");
  svg.text(f.left + 36, ly, "validation accuracy", "start", 11);
  return svg.finish();
}

std::vector<fs::path> write_run_figures(const fs::path& run_dir, const RunRecord& record) {
  const fs::path dir = run_dir / "figures";
  make_dirs(dir);
  std::vector<fs::path> written;
  if (!record.info.empty()) {
    FigureSpec spec;
    spec.title = record.plan.name + " seed " + std::to_string(record.seed);
    write_text(dir / "info_curves.svg", render_info_curves(record, spec));
    written.push_back(dir / "info_curves.svg");
    spec.raw = true;
    write_text(dir / "info_curves_raw.svg", render_info_curves(record, spec));
    written.push_back(dir / "info_curves_raw.svg");
  }
  if (record.final_state) {
    constexpr std::size_t kScatterSamples = 600;
    const auto samples = draw_samples(record.plan.task, kScatterSamples, derive_seed(record.seed, 0x73636174));
    const int last = record.plan.hidden_layer_count() - 1;
    const int epoch = record.metrics.empty() ? 0 : record.metrics.back().epoch;
    const ActivationMatrix acts = capture_activations(*record.final_state, samples, last, epoch);
    if (acts.values.cols() >= 2) {
      write_text(dir / "scatter_last_hidden.svg", render_scatter(acts));
      written.push_back(dir / "scatter_last_hidden.svg");
    }
  }
  return written;
}

// ---------------------------------------------------------------- summary

SummaryTable summarize(std::span<const RunRecord> records) {
  if (records.empty()) throw InputError("summarize needs at least one record");
  SummaryRow row;
  row.label = records.front().plan.name;
  std::map<LabelKind, std::vector<double>> iu;
  std::vector<double> acc, gaps;
  for (const RunRecord& r : records) {
    if (r.status != RunStatus::completed) continue;
    ++row.runs;
    acc.push_back(r.final_val_acc());
    const int epoch = r.final_probed_epoch();
    const auto layers = r.plan.layers_to_probe();
    const int last = layers.empty() ? 0 : *std::max_element(layers.begin(), layers.end());
    for (LabelKind k : r.plan.probed_kinds) {
      if (const auto* e = r.find(epoch, last, k)) iu[k].push_back(e->iu);
    }
    if (r.plan.main_kind == LabelKind::coarse) {
      const auto fine = r.curve(last, LabelKind::direction);
      if (!fine.empty()) {
        double best = fine.front().iu;
        for (const auto& e : fine) best = std::max(best, e.iu);
        gaps.push_back(best - fine.back().iu);
      }
    }
  }
  row.val_acc = mean_sem(acc);
  if (iu.contains(LabelKind::direction)) row.direction_iu = mean_sem(iu[LabelKind::direction]);
  if (iu.contains(LabelKind::color)) row.color_iu = mean_sem(iu[LabelKind::color]);
  if (iu.contains(LabelKind::coarse)) row.coarse_iu = mean_sem(iu[LabelKind::coarse]);
  if (!gaps.empty()) row.forgetting_gap = mean_sem(gaps);
  return SummaryTable{{row}};
}

SummaryTable summarize(std::span<const PretrainPoint> points) {
  if (points.empty()) throw InputError("summarize needs at least one sweep point");
  SummaryTable table;
  for (const auto& p : points) {
    SummaryRow row;
    row.label = "P=" + std::to_string(p.pretrain_epochs);
    row.runs = p.direction_iu.count;
    row.direction_iu = p.direction_iu;
    row.color_iu = p.color_iu;
    row.val_acc = p.val_acc;
    table.rows.push_back(row);
  }
  return table;
}

std::string SummaryTable::text() const {
  std::ostringstream out;
  out << std::left << std::setw(22) << "run" << std::setw(6) << "runs" << std::setw(20) << "dir_iu" << std::setw(20)
      << "color_iu" << std::setw(20) << "coarse_iu" << std::setw(20) << "val_acc" << "forgetting_gap\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(22) << r.label << std::setw(6) << r.runs << std::setw(20)
        << mean_sem_text(r.direction_iu, 3) << std::setw(20) << mean_sem_text(r.color_iu, 3) << std::setw(20)
        << mean_sem_text(r.coarse_iu, 3) << std::setw(20) << mean_sem_text(r.val_acc, 4)
        << mean_sem_text(r.forgetting_gap, 3) << '\n';
  }
  return out.str();
}

std::string SummaryTable::csv() const {
  std::string out =
      "label,runs,dir_iu_mean,dir_iu_sem,color_iu_mean,color_iu_sem,coarse_iu_mean,coarse_iu_sem,"
      "val_acc_mean,val_acc_sem,forgetting_gap_mean,forgetting_gap_sem\n";
  for (const auto& r : rows) {
    out += r.label + "," + std::to_string(r.runs) + "," + mean_sem_csv(r.direction_iu) + "," +
           mean_sem_csv(r.color_iu) + "," + mean_sem_csv(r.coarse_iu) + "," + mean_sem_csv(r.val_acc) + "," +
           mean_sem_csv(r.forgetting_gap) + "\n";
  }
  return out;
}

}  // namespace repinfo

#include "synthctl/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace synthctl {

using nlohmann::ordered_json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";  // also folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

/// RFC 4180 quoting for fields containing a comma, quote or line break.
std::string csv_field(const std::string& x) {
  if (x.find_first_of(",\"\r\n") == std::string::npos) return x;
  std::string out = "\"";
  for (char c : x) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string hex64(std::uint64_t x) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

namespace {

struct Field {
  std::string text;
  long column;  // 1-based byte column of the field start
};

/// Split one CSV record. Double-quoted fields may contain commas and "" escapes;
/// records never span lines.
std::vector<Field> split_record(std::string_view line, long line_no) {
  std::vector<Field> out;
  std::size_t i = 0;
  while (true) {
    Field f{{}, static_cast<long>(i) + 1};
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            f.text.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        f.text.push_back(line[i++]);
      }
      if (!closed) throw ParseError("unterminated quoted field", line_no, f.column);
      if (i < line.size() && line[i] != ',') {
        throw ParseError("unexpected character after closing quote", line_no, static_cast<long>(i) + 1);
      }
    } else {
      const std::size_t end = std::min(line.find(',', i), line.size());
      f.text.assign(line.substr(i, end - i));
      i = end;
    }
    out.push_back(std::move(f));
    if (i >= line.size()) break;
    ++i;  // comma
    if (i == line.size()) {
      out.push_back({{}, static_cast<long>(i) + 1});
      break;
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_number(const Field& f, long line_no) {
  const std::string_view s = trim(f.text);
  if (s.empty()) throw ParseError("empty value (missing data is not supported)", line_no, f.column);
  double x = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("not a number: '" + std::string(s) + "'", line_no, f.column);
  }
  if (!std::isfinite(x)) throw ParseError("non-finite value '" + std::string(s) + "'", line_no, f.column);
  return x;
}

struct Csv {
  std::vector<std::vector<Field>> records;
  std::vector<long> lines;
};

Csv read_records(std::istream& in) {
  Csv csv;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    csv.records.push_back(split_record(line, line_no));
    csv.lines.push_back(line_no);
  }
  if (csv.records.empty()) throw ParseError("empty file", 1, 1);
  return csv;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidSpecification("cannot open '" + path + "'");
  return in;
}

long parse_period(const Field& f, long line_no) {
  const std::string_view s = trim(f.text);
  long value = 0;
  if (s.size() < 2 || s.front() != 't') {
    throw ParseError("period column must be named t<integer>, got '" + std::string(s) + "'", line_no, f.column);
  }
  const auto res = std::from_chars(s.data() + 1, s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("period column must be named t<integer>, got '" + std::string(s) + "'", line_no, f.column);
  }
  return value;
}

}  // namespace

Panel<double> read_panel_csv(std::istream& in, Index t0, const std::optional<std::string>& treated) {
  const Csv csv = read_records(in);
  const std::vector<Field>& header = csv.records[0];
  const long header_line = csv.lines[0];
  if (trim(header[0].text) != "unit") {
    throw ParseError("first header column must be 'unit'", header_line, header[0].column);
  }
  if (header.size() < 3) throw ParseError("panel needs at least two period columns", header_line, 1);
  std::vector<long> periods;
  for (std::size_t c = 1; c < header.size(); ++c) {
    periods.push_back(parse_period(header[c], header_line));
    if (periods.size() > 1 && periods.back() <= periods[periods.size() - 2]) {
      throw ParseError("period columns must be strictly increasing", header_line, header[c].column);
    }
  }

  const auto T = static_cast<Index>(periods.size());
  const auto N = static_cast<Index>(csv.records.size() - 1);
  if (N < 2) throw ParseError("panel needs a treated unit and at least one donor", header_line, 1);
  Eigen::MatrixXd y(N, T);
  std::vector<std::string> labels;
  for (Index i = 0; i < N; ++i) {
    const std::vector<Field>& rec = csv.records[static_cast<std::size_t>(i) + 1];
    const long line_no = csv.lines[static_cast<std::size_t>(i) + 1];
    if (rec.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(rec.size()),
                       line_no, rec.back().column);
    }
    std::string label(trim(rec[0].text));
    if (label.empty()) throw ParseError("empty unit label", line_no, rec[0].column);
    for (const std::string& seen : labels) {
      if (seen == label) throw ParseError("duplicate unit '" + label + "'", line_no, rec[0].column);
    }
    labels.push_back(std::move(label));
    for (Index t = 0; t < T; ++t) y(i, t) = parse_number(rec[static_cast<std::size_t>(t) + 1], line_no);
  }

  Index treated_row = 0;
  if (treated) {
    const auto it = std::find(labels.begin(), labels.end(), *treated);
    if (it == labels.end()) throw InvalidSpecification("treated unit '" + *treated + "' not found in panel");
    treated_row = static_cast<Index>(it - labels.begin());
  }
  if (t0 < 1 || t0 >= T) {
    throw InvalidSpecification("--t0 must satisfy 1 <= t0 < T (t0=" + std::to_string(t0) +
                               ", T=" + std::to_string(T) + ")");
  }
  std::vector<Index> order{treated_row};
  for (Index i = 0; i < N; ++i) {
    if (i != treated_row) order.push_back(i);
  }
  Eigen::MatrixXd ordered(N, T);
  std::vector<std::string> ordered_labels;
  for (Index r = 0; r < N; ++r) {
    ordered.row(r) = y.row(order[static_cast<std::size_t>(r)]);
    ordered_labels.push_back(labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])]);
  }
  return Panel<double>(std::move(ordered), t0, std::move(ordered_labels), std::move(order), std::move(periods));
}

Panel<double> read_panel_csv(const std::string& path, Index t0, const std::optional<std::string>& treated) {
  std::ifstream in = open_input(path);
  return read_panel_csv(in, t0, treated);
}

CovariateTable read_covariates_csv(std::istream& in, const Panel<double>& panel) {
  const Csv csv = read_records(in);
  const std::vector<Field>& header = csv.records[0];
  if (trim(header[0].text) != "unit") {
    throw ParseError("first header column must be 'unit'", csv.lines[0], header[0].column);
  }
  CovariateTable out;
  for (std::size_t c = 1; c < header.size(); ++c) out.names.emplace_back(trim(header[c].text));
  if (out.names.empty()) throw ParseError("covariate file has no covariate columns", csv.lines[0], 1);
  out.values.resize(panel.units(), static_cast<Index>(out.names.size()));
  std::vector<bool> seen(static_cast<std::size_t>(panel.units()), false);
  const std::vector<std::string>& labels = panel.unit_labels();
  for (std::size_t r = 1; r < csv.records.size(); ++r) {
    const std::vector<Field>& rec = csv.records[r];
    const long line_no = csv.lines[r];
    if (rec.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(rec.size()),
                       line_no, rec.back().column);
    }
    const std::string label(trim(rec[0].text));
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw ParseError("unit '" + label + "' is not in the panel", line_no, rec[0].column);
    const auto row = static_cast<std::size_t>(it - labels.begin());
    if (seen[row]) throw ParseError("duplicate unit '" + label + "'", line_no, rec[0].column);
    seen[row] = true;
    for (std::size_t c = 1; c < rec.size(); ++c) {
      out.values(static_cast<Index>(row), static_cast<Index>(c) - 1) = parse_number(rec[c], line_no);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw InvalidSpecification("covariate file has no row for unit '" + labels[i] + "'");
  }
  return out;
}

CovariateTable read_covariates_csv(const std::string& path, const Panel<double>& panel) {
  std::ifstream in = open_input(path);
  return read_covariates_csv(in, panel);
}

std::vector<std::string> labels_by_id(const Panel<double>& panel) {
  std::vector<std::string> out(static_cast<std::size_t>(panel.units()));
  for (Index r = 0; r < panel.units(); ++r) {
    const auto id = static_cast<std::size_t>(panel.unit_ids()[static_cast<std::size_t>(r)]);
    if (id >= out.size()) out.resize(id + 1);
    out[id] = panel.unit_labels()[static_cast<std::size_t>(r)];
  }
  return out;
}

namespace {

ordered_json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

ordered_json provenance_json(const Provenance& p) {
  ordered_json j;
  j["tool"] = "synthctl";
  j["version"] = SYNTHCTL_VERSION;
  j["command"] = p.command;
  j["config_hash"] = hex64(p.config_hash);
  j["seed"] = p.seed ? ordered_json(*p.seed) : ordered_json(nullptr);
  j["inputs"] = p.inputs;
  return j;
}

ordered_json weights_json(const WeightVector<double>& weights, const std::vector<Index>& donor_ids,
                          const std::vector<std::string>& labels) {
  ordered_json a = ordered_json::array();
  for (std::size_t i = 0; i < donor_ids.size(); ++i) {
    const auto id = static_cast<std::size_t>(donor_ids[i]);
    ordered_json w;
    w["unit"] = id < labels.size() ? labels[id] : std::to_string(id + 1);
    w["id"] = id + 1;
    w["weight"] = number(weights.w(static_cast<Index>(i)));
    a.push_back(std::move(w));
  }
  return a;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string weights_csv(const WeightVector<double>& weights, const std::vector<Index>& donor_ids,
                        const std::vector<std::string>& labels) {
  std::string out = "unit,id,weight\n";
  for (std::size_t i = 0; i < donor_ids.size(); ++i) {
    const auto id = static_cast<std::size_t>(donor_ids[i]);
    out += csv_field(id < labels.size() ? labels[id] : std::to_string(id + 1)) + "," + std::to_string(id + 1) + "," +
           format_number(weights.w(static_cast<Index>(i))) + "\n";
  }
  if (weights.intercept) out += "(intercept),," + format_number(*weights.intercept) + "\n";
  return out;
}

std::string path_csv(const Panel<double>& panel, const Eigen::VectorXd& counterfactual, const Eigen::VectorXd& effect) {
  std::string out = "t,treated,counterfactual,effect,post\n";
  for (Index t = 0; t < panel.periods(); ++t) {
    out += std::to_string(panel.period_labels()[static_cast<std::size_t>(t)]) + "," +
           format_number(panel.treated()(t)) + "," + format_number(counterfactual(t)) + "," +
           format_number(effect(t)) + "," + (t >= panel.t0() ? "1" : "0") + "\n";
  }
  return out;
}

std::string estimate_json(const EstimationResult<double>& result, const Panel<double>& panel,
                          const Provenance& provenance) {
  const std::vector<std::string> labels = labels_by_id(panel);
  ordered_json j;
  j["provenance"] = provenance_json(provenance);
  j["treated"] = panel.unit_labels()[0];
  j["t0"] = panel.t0();
  j["periods"] = panel.period_labels();
  j["constrained"] = result.weights.constrained;
  j["intercept"] = result.weights.intercept ? number(*result.weights.intercept) : ordered_json(nullptr);
  j["weights"] = weights_json(result.weights, result.donor_ids, labels);
  j["pre_rmse"] = number(result.pre_rmse);
  j["post_rmse"] = number(result.post_rmse);
  j["counterfactual"] = vector_json(result.counterfactual);
  j["effect"] = vector_json(result.effect);
  return dump(j);
}

std::string backdate_json(const BackdateReport<double>& report, const Panel<double>& panel,
                          const Provenance& provenance) {
  const std::vector<std::string> labels = labels_by_id(panel);
  ordered_json j;
  j["provenance"] = provenance_json(provenance);
  j["treated"] = panel.unit_labels()[0];
  j["t0"] = report.t0;
  j["t0_backdated"] = report.t0_backdated;
  j["periods"] = panel.period_labels();
  j["intercept"] =
      report.weights_backdated.intercept ? number(*report.weights_backdated.intercept) : ordered_json(nullptr);
  j["weights"] = weights_json(report.weights_backdated, report.donor_ids, labels);
  j["fit_rmse"] = number(report.fit_rmse);
  j["holdout_rmse"] = number(report.holdout_rmse);
  j["pre_rmse"] = number(report.pre_rmse);
  j["post_rmse"] = number(report.post_rmse);
  j["counterfactual"] = vector_json(report.counterfactual);
  j["effect"] = vector_json(report.effect_path);
  return dump(j);
}

std::string backdate_path_csv(const BackdateReport<double>& report, const Panel<double>& panel) {
  std::string out = "t,treated,counterfactual,effect,window\n";
  for (Index t = 0; t < panel.periods(); ++t) {
    const char* window = t < report.t0_backdated ? "fit" : (t < report.t0 ? "holdout" : "post");
    out += std::to_string(panel.period_labels()[static_cast<std::size_t>(t)]) + "," +
           format_number(panel.treated()(t)) + "," + format_number(report.counterfactual(t)) + "," +
           format_number(report.effect_path(t)) + "," + window + "\n";
  }
  return out;
}

namespace {

std::string opt(const std::optional<double>& x) { return x ? format_number(*x) : ""; }

}  // namespace

std::string summary_csv(const std::vector<SimulationSummary>& summaries) {
  std::string out =
      "cell,J,T0,sigma,rho,post_rmse,post_rmse_se,pre_rmse,pre_rmse_se,w2,w2_se,"
      "ref_post_rmse,ref_pre_rmse,ref_w2,replications,failures\n";
  for (const SimulationSummary& s : summaries) {
    const ReferenceRow ref = s.reference.value_or(ReferenceRow{});
    const DgpDescriptor& d = s.descriptor;
    out += csv_field(s.name) + "," + std::to_string(d.donors) + "," + std::to_string(d.t0) + "," + format_number(d.sigma) + "," +
           (std::isnan(d.rho) ? std::string() : format_number(d.rho)) + "," + format_number(s.mean_post_rmse) + "," +
           format_number(s.se_post_rmse) + "," + format_number(s.mean_pre_rmse) + "," +
           format_number(s.se_pre_rmse) + "," + opt(s.mean_w2) + "," + opt(s.se_w2) + "," + opt(ref.post_rmse) + "," +
           opt(ref.pre_rmse) + "," + opt(ref.w2) + "," + std::to_string(s.replications_completed) + "," +
           std::to_string(s.failures) + "\n";
  }
  return out;
}

std::string summary_json(const std::vector<SimulationSummary>& summaries, const Provenance& provenance) {
  ordered_json j;
  j["provenance"] = provenance_json(provenance);
  ordered_json cells = ordered_json::array();
  for (const SimulationSummary& s : summaries) {
    ordered_json c;
    c["cell"] = s.name;
    c["J"] = s.descriptor.donors;
    c["T0"] = s.descriptor.t0;
    c["T"] = s.descriptor.t_total;
    c["sigma"] = number(s.descriptor.sigma);
    c["rho"] = number(s.descriptor.rho);
    c["replications"] = s.replications_completed;
    c["failures"] = s.failures;
    c["post_rmse"] = {{"mean", number(s.mean_post_rmse)}, {"se", number(s.se_post_rmse)}};
    c["pre_rmse"] = {{"mean", number(s.mean_pre_rmse)}, {"se", number(s.se_pre_rmse)}};
    c["post_effect"] = {{"mean", number(s.mean_post_effect)}, {"se", number(s.se_post_effect)}};
    c["w2"] = s.mean_w2 ? ordered_json{{"mean", number(*s.mean_w2)}, {"se", number(*s.se_w2)}}
                        : ordered_json(nullptr);
    if (s.reference) {
      const auto ref_val = [](const std::optional<double>& x) { return x ? number(*x) : ordered_json(nullptr); };
      c["reference"] = {{"post_rmse", ref_val(s.reference->post_rmse)},
                        {"pre_rmse", ref_val(s.reference->pre_rmse)},
                        {"w2", ref_val(s.reference->w2)}};
    } else {
      c["reference"] = nullptr;
    }
    c["band_lo"] = vector_json(s.band_lo);
    c["band_hi"] = vector_json(s.band_hi);
    c["mean_effect"] = vector_json(s.mean_effect);
    c["se_effect"] = vector_json(s.se_effect);
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  return dump(j);
}

std::string bands_csv(const std::vector<SimulationSummary>& summaries) {
  std::string out = "cell,t,band_lo,band_hi,mean_effect,se_effect\n";
  for (const SimulationSummary& s : summaries) {
    for (Index t = 0; t < s.band_lo.size(); ++t) {
      out += csv_field(s.name) + "," + std::to_string(t + 1) + "," + format_number(s.band_lo(t)) + "," +
             format_number(s.band_hi(t)) + "," + format_number(s.mean_effect(t)) + "," +
             format_number(s.se_effect(t)) + "\n";
    }
  }
  return out;
}

std::string draw_path_csv(const CellSpec& cell, const ReplicationResult& result) {
  const DgpDescriptor d = describe(cell.dgp);
  const Index t0 = cell.backdate.value_or(d.t0);
  std::string out = "t,untreated,observed,counterfactual,effect,window\n";
  const Eigen::VectorXd& cf = result.estimate.counterfactual;
  for (Index t = 0; t < cf.size(); ++t) {
    const char* window = t < t0 ? "fit" : (t < d.t0 ? "holdout" : "post");
    out += std::to_string(t + 1) + "," + format_number(cf(t) - result.error_path(t)) + "," +
           format_number(cf(t) + result.effect_path(t)) + "," + format_number(cf(t)) + "," +
           format_number(result.effect_path(t)) + "," + window + "\n";
  }
  return out;
}

}  // namespace synthctl

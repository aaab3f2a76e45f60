// Copyright 2026 The uqshift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "uqshift/harness.h"

namespace uqshift {
namespace {

using Kind = DistributionTag::Kind;
using nlohmann::json;

struct Column {
  const char* header;
  const char* metric;
  bool higher_is_better;
  bool flagged;
};

struct TableSpec {
  std::vector<Kind> dists;
  std::vector<Column> columns;
};

TableSpec SpecFor(ReportStyle style) {
  const Column acc{"Acc", "accuracy", true, true};
  const Column auroc{"AUROC", "auroc", true, true};
  const Column aupr{"AUPR", "aupr", true, true};
  switch (style) {
    case ReportStyle::kTable2:
      return {{Kind::kInTest, Kind::kExtProt, Kind::kExt5ad, Kind::kOodScc,
               Kind::kOodCad, Kind::kOodCxr},
              {acc, auroc, aupr}};
    case ReportStyle::kTable3:
      return {{Kind::kInTest, Kind::kExtProt, Kind::kExt5ad},
              {{"Entropy", "entropy", false, true},
               {"AUROC", "auroc", true, false},
               {"AUPR", "aupr", true, false}}};
    case ReportStyle::kTable4:
      return {{Kind::kOodScc, Kind::kOodCad, Kind::kOodCxr},
              {{"Entropy", "entropy", false, true},
               {"AUROC", "auroc", true, false},
               {"AUPR", "aupr", true, false}}};
    case ReportStyle::kTable5:
      return {{Kind::kExt5ad, Kind::kOodScc},
              {{"AUROC", "auroc", true, false},
               {"AUPR", "aupr", true, false},
               {"FPR", "fpr", false, true}}};
  }
  throw std::invalid_argument("unknown report style");
}

double MetricValue(const MetricBlock& b, std::string_view metric) {
  if (metric == "accuracy") return b.accuracy;
  if (metric == "auroc") return b.auroc;
  if (metric == "aupr") return b.aupr;
  if (metric == "fpr") return b.fpr;
  if (metric == "entropy") return b.mean_entropy;
  if (metric == "n") return static_cast<double>(b.n);
  throw std::invalid_argument("unknown metric '" + std::string(metric) + "'");
}

void SetMetric(MetricBlock& b, std::string_view metric, double v) {
  if (metric == "accuracy") {
    b.accuracy = v;
  } else if (metric == "auroc") {
    b.auroc = v;
  } else if (metric == "aupr") {
    b.aupr = v;
  } else if (metric == "fpr") {
    b.fpr = v;
  } else if (metric == "entropy") {
    b.mean_entropy = v;
  } else if (metric == "n") {
    b.n = static_cast<int64_t>(v);
  } else {
    throw std::invalid_argument("unknown metric '" + std::string(metric) + "'");
  }
}

constexpr const char* kBlockMetrics[] = {"accuracy", "auroc", "aupr",
                                         "fpr",      "entropy", "n"};

std::string Fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string Pad(const std::string& s, size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

// "best" / "second" within one distribution, or empty.
std::string RankFlag(double value, std::vector<double> values,
                     bool higher_is_better) {
  if (!higher_is_better) {
    value = -value;
    for (double& v : values) v = -v;
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (!values.empty() && value == values[0]) return "best";
  if (values.size() > 1 && value == values[1]) return "second";
  return "";
}

}  // namespace

ReportStyle ParseReportStyle(std::string_view name) {
  if (name == "table2") return ReportStyle::kTable2;
  if (name == "table3") return ReportStyle::kTable3;
  if (name == "table4") return ReportStyle::kTable4;
  if (name == "table5") return ReportStyle::kTable5;
  throw std::invalid_argument("unknown report style '" + std::string(name) +
                              "' (expected table2..table5)");
}

RenderedTable RenderReport(const EvalReport& report, ReportStyle style) {
  if (report.cells.empty()) throw std::invalid_argument("empty report");
  const TableSpec spec = SpecFor(style);
  const size_t kMethodWidth = 12, kDistWidth = 10, kValueWidth = 11;

  std::ostringstream text, jsonl;
  text << Pad("Method", kMethodWidth) << Pad("Dist", kDistWidth);
  for (const auto& col : spec.columns) {
    text << Pad(std::string(col.header) + (col.higher_is_better ? "^" : "v"),
                kValueWidth);
  }
  text << '\n';
  text << std::string(kMethodWidth + kDistWidth +
                          kValueWidth * spec.columns.size(),
                      '-')
       << '\n';

  for (const std::string& method : Methods()) {
    bool first = true;
    for (Kind kind : spec.dists) {
      const DistributionTag tag(kind);
      text << Pad(first ? method : "", kMethodWidth) << Pad(tag.name(), kDistWidth);
      first = false;
      const ReportCell* cell = report.Find(method, tag);
      for (const auto& col : spec.columns) {
        if (cell == nullptr) {
          text << Pad("---", kValueWidth);
          continue;
        }
        const double value = MetricValue(cell->block, col.metric);
        std::string flag;
        if (col.flagged) {
          std::vector<double> peers;
          for (const std::string& other : Methods()) {
            if (const ReportCell* c = report.Find(other, tag)) {
              peers.push_back(MetricValue(c->block, col.metric));
            }
          }
          flag = RankFlag(value, peers, col.higher_is_better);
        }
        const char* mark = flag == "best" ? "*" : flag == "second" ? "+" : "";
        text << Pad(Fixed4(value) + mark, kValueWidth);
        json rec;
        rec["method"] = method;
        rec["dist"] = tag.name();
        rec["metric"] = col.metric;
        rec["value"] = value;
        if (!flag.empty()) rec["flag"] = flag;
        jsonl << rec.dump() << '\n';
      }
      text << '\n';
    }
  }
  text << "\n* best, + second best per distribution";
  bool any_flag_column = false;
  for (const auto& col : spec.columns) {
    if (!col.flagged) continue;
    text << (any_flag_column ? ", " : " (") << col.header;
    any_flag_column = true;
  }
  text << ")\n";
  return {text.str(), jsonl.str()};
}

void WriteRenderedReport(const EvalReport& report, ReportStyle style,
                         const std::filesystem::path& path) {
  const RenderedTable table = RenderReport(report, style);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream(path) << table.text;
  std::ofstream(path.string() + ".jsonl") << table.jsonl;
}

std::string ReportBody(const EvalReport& report) {
  std::ostringstream out;
  for (const auto& cell : report.cells) {
    for (const char* metric : kBlockMetrics) {
      json rec;
      rec["method"] = cell.method;
      rec["dist"] = cell.tag.name();
      rec["metric"] = metric;
      rec["value"] = MetricValue(cell.block, metric);
      out << rec.dump() << '\n';
    }
  }
  for (const auto& row : report.ood_detection) {
    for (const auto& [metric, value] :
         {std::pair{"ood_auroc", row.auroc}, std::pair{"ood_aupr", row.aupr},
          std::pair{"ood_fpr", row.fpr}}) {
      json rec;
      rec["method"] = row.method;
      rec["dist"] = row.ood_tag.name();
      rec["reference"] = row.id_tag.name();
      rec["metric"] = metric;
      rec["value"] = value;
      out << rec.dump() << '\n';
    }
  }
  return out.str();
}

void SaveReport(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.jsonl") << ReportBody(report);
  json meta;
  meta["config_hash"] = report.config_hash;
  meta["seed"] = report.seed;
  meta["started_at"] = report.started_at;
  meta["finished_at"] = report.finished_at;
  std::ofstream(dir / "metadata.json") << meta.dump(2) << '\n';
  for (auto [style, name] : {std::pair{ReportStyle::kTable2, "table2.txt"},
                             std::pair{ReportStyle::kTable3, "table3.txt"},
                             std::pair{ReportStyle::kTable4, "table4.txt"},
                             std::pair{ReportStyle::kTable5, "table5.txt"}}) {
    WriteRenderedReport(report, style, dir / name);
  }
}

EvalReport LoadReport(const std::filesystem::path& dir) {
  std::ifstream in(dir / "report.jsonl");
  if (!in) throw std::runtime_error("no report.jsonl in " + dir.string());
  EvalReport report;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    const std::string method = rec.at("method");
    const DistributionTag tag = DistributionTag::Parse(rec.at("dist").get<std::string>());
    const std::string metric = rec.at("metric");
    const double value = rec.at("value");
    if (rec.contains("reference")) {
      const DistributionTag ref =
          DistributionTag::Parse(rec.at("reference").get<std::string>());
      auto it = std::find_if(
          report.ood_detection.begin(), report.ood_detection.end(),
          [&](const OodDetectionRow& r) {
            return r.method == method && r.ood_tag == tag && r.id_tag == ref;
          });
      if (it == report.ood_detection.end()) {
        report.ood_detection.push_back({method, ref, tag});
        it = report.ood_detection.end() - 1;
      }
      if (metric == "ood_auroc") it->auroc = value;
      if (metric == "ood_aupr") it->aupr = value;
      if (metric == "ood_fpr") it->fpr = value;
      continue;
    }
    auto it = std::find_if(report.cells.begin(), report.cells.end(),
                           [&](const ReportCell& c) {
                             return c.method == method && c.tag == tag;
                           });
    if (it == report.cells.end()) {
      report.cells.push_back({method, tag, {}, {}, {}});
      it = report.cells.end() - 1;
    }
    SetMetric(it->block, metric, value);
  }
  std::ifstream meta_in(dir / "metadata.json");
  if (meta_in) {
    const json meta = json::parse(meta_in);
    report.config_hash = meta.value("config_hash", "");
    report.seed = meta.value("seed", uint64_t{0});
    report.started_at = meta.value("started_at", "");
    report.finished_at = meta.value("finished_at", "");
  }
  return report;
}

std::string FormatMetricBlock(const MetricBlock& b) {
  std::ostringstream out;
  out << "n " << b.n << "  accuracy " << Fixed4(b.accuracy) << "  auroc "
      << Fixed4(b.auroc) << "  aupr " << Fixed4(b.aupr) << "  fpr@95tpr "
      << Fixed4(b.fpr) << "  entropy " << Fixed4(b.mean_entropy);
  return out.str();
}

}  // namespace uqshift

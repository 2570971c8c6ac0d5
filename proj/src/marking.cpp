#include "examgrid/marking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace examgrid::marking {

using vqp::QuestionKind;

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out += c;
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    const char n = s[++i];
    out += n == 'n' ? '\n' : n == 'r' ? '\r' : n;
  }
  return out;
}

double parse_number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(d))
    throw MarkingError("BadReport", key + ": not a number");
  return d;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string first_line(const std::string& s, std::size_t limit) {
  std::string line = s.substr(0, s.find('\n'));
  if (line.size() > limit) line = line.substr(0, limit - 3) + "...";
  else if (line.size() < s.size()) line += " ...";
  return line;
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Auto: return "auto";
    case Status::Pending: return "pending";
    case Status::Manual: return "manual";
  }
  return "?";
}

Totals recompute(const std::vector<Row>& rows) {
  Totals t;
  for (const auto& r : rows) {
    t.max += r.max;
    switch (r.status) {
      case Status::Auto: t.auto_subtotal += r.awarded.value_or(0.0); break;
      case Status::Manual: t.manual_subtotal += r.awarded.value_or(0.0); break;
      case Status::Pending: ++t.pending; break;
    }
  }
  return t;
}

MarkReport auto_mark(const vqp::QuestionPaper& design, const vqp::QuestionPaper& answered) {
  if (design.variant != vqp::Variant::Design)
    throw vqp::PaperError("WrongVariant", "marking needs the DESIGN paper");
  if (answered.variant != vqp::Variant::Answered)
    throw vqp::PaperError("WrongVariant", "marking needs an ANSWERED paper");
  if (design.id != answered.id)
    throw MarkingError("PaperMismatch", "paper id '" + answered.id + "' vs '" + design.id + "'");
  if (design.questions.size() != answered.questions.size())
    throw MarkingError("PaperMismatch", "question count " + std::to_string(answered.questions.size()) +
                                            " vs " + std::to_string(design.questions.size()));

  MarkReport report;
  report.paper_id = design.id;
  for (const auto& q : design.questions) {
    const auto* a = answered.find(q.number);
    if (!a || a->kind != q.kind)
      throw MarkingError("PaperMismatch", "question " + std::to_string(q.number) + " differs");
    Row row;
    row.number = q.number;
    row.kind = q.kind;
    row.response = a->response.value_or("");
    if (q.kind == QuestionKind::Mcq) {
      row.status = Status::Auto;
      const bool right = q.key && row.response.size() == 1 && row.response[0] == *q.key;
      row.awarded = right ? 1.0 : 0.0;
    } else {
      row.status = Status::Pending;
    }
    report.rows.push_back(std::move(row));
  }
  report.totals = recompute(report.rows);
  return report;
}

MarkReport apply_manual(MarkReport report, int question, double score) {
  auto it = std::find_if(report.rows.begin(), report.rows.end(),
                         [&](const Row& r) { return r.number == question; });
  if (it == report.rows.end())
    throw MarkingError("UnknownQuestion", "no question " + std::to_string(question));
  if (it->status == Status::Auto)
    throw MarkingError("NotManual", "question " + std::to_string(question) + " is auto-marked");
  if (!std::isfinite(score) || score < 0.0 || score > it->max)
    throw MarkingError("ScoreOutOfRange",
                       "score must be within [0, " + format_score(it->max) + "]");
  it->status = Status::Manual;
  it->awarded = score;
  report.totals = recompute(report.rows);
  return report;
}

std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s = buf;
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string summarize(const MarkReport& report) {
  const Totals t = recompute(report.rows);
  std::ostringstream out;
  if (t.pending > 0)
    out << "INCOMPLETE: " << t.pending << " question(s) awaiting manual marks\n";
  out << "Paper: " << report.paper_id << "\n";
  out << pad("Q", 5) << pad("Kind", 8) << pad("Status", 9) << pad("Awarded", 9) << pad("Max", 6)
      << "Response\n";
  for (const auto& r : report.rows) {
    out << pad(std::to_string(r.number), 5) << pad(std::string(vqp::to_string(r.kind)), 8)
        << pad(std::string(to_string(r.status)), 9)
        << pad(r.awarded ? format_score(*r.awarded) : "PENDING", 9) << pad(format_score(r.max), 6)
        << (r.response.empty() ? "-" : first_line(r.response, 40)) << "\n";
  }
  out << "Auto: " << format_score(t.auto_subtotal) << "  Manual: " << format_score(t.manual_subtotal)
      << "  Pending: " << t.pending << "\n";
  out << "Total: " << format_score(t.awarded()) << "/" << format_score(t.max) << "\n";
  return out.str();
}

std::string export_rows(const MarkReport& report) {
  const Totals t = recompute(report.rows);
  std::ostringstream out;
  out << "paper=" << report.paper_id << "\n";
  for (const auto& r : report.rows) {
    const std::string q = "q." + std::to_string(r.number) + ".";
    out << q << "kind=" << vqp::to_string(r.kind) << "\n";
    out << q << "status=" << to_string(r.status) << "\n";
    out << q << "awarded=" << (r.awarded ? format_score(*r.awarded) : "PENDING") << "\n";
    out << q << "max=" << format_score(r.max) << "\n";
    out << q << "response=" << escape(r.response) << "\n";
  }
  out << "total.auto=" << format_score(t.auto_subtotal) << "\n";
  out << "total.manual=" << format_score(t.manual_subtotal) << "\n";
  out << "total.pending=" << t.pending << "\n";
  out << "total.awarded=" << format_score(t.awarded()) << "\n";
  out << "total.max=" << format_score(t.max) << "\n";
  return out.str();
}

MarkReport parse_rows(std::string_view text) {
  MarkReport report;
  std::map<int, Row> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  bool have_paper = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw MarkingError("BadReport", "expected key=value: " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "paper") {
      report.paper_id = value;
      have_paper = true;
      continue;
    }
    if (key.starts_with("total.")) continue;  // recomputed
    if (!key.starts_with("q.")) throw MarkingError("BadReport", "unknown key " + key);
    const auto dot = key.find('.', 2);
    if (dot == std::string::npos) throw MarkingError("BadReport", "bad key " + key);
    int number = 0;
    try {
      number = std::stoi(key.substr(2, dot - 2));
    } catch (const std::exception&) {
      throw MarkingError("BadReport", "bad question number in " + key);
    }
    Row& r = rows[number];
    r.number = number;
    const std::string field = key.substr(dot + 1);
    if (field == "kind") {
      if (value == "MCQ") r.kind = QuestionKind::Mcq;
      else if (value == "STRUCT") r.kind = QuestionKind::Struct;
      else throw MarkingError("BadReport", key + ": unknown kind");
    } else if (field == "status") {
      if (value == "auto") r.status = Status::Auto;
      else if (value == "pending") r.status = Status::Pending;
      else if (value == "manual") r.status = Status::Manual;
      else throw MarkingError("BadReport", key + ": unknown status");
    } else if (field == "awarded") {
      if (value == "PENDING") r.awarded.reset();
      else r.awarded = parse_number(key, value);
    } else if (field == "max") {
      r.max = parse_number(key, value);
    } else if (field == "response") {
      r.response = unescape(value);
    } else {
      throw MarkingError("BadReport", "unknown key " + key);
    }
  }
  if (!have_paper) throw MarkingError("BadReport", "missing paper=");
  for (auto& [n, r] : rows) {
    if ((r.status == Status::Pending) != !r.awarded.has_value())
      throw MarkingError("BadReport", "question " + std::to_string(n) + ": status and score disagree");
    if (r.awarded && (*r.awarded < 0.0 || *r.awarded > r.max))
      throw MarkingError("BadReport", "question " + std::to_string(n) + ": score out of range");
    report.rows.push_back(r);
  }
  report.totals = recompute(report.rows);
  return report;
}

}  // namespace examgrid::marking

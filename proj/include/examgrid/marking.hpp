#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "examgrid/error.hpp"
#include "examgrid/vqp.hpp"

namespace examgrid::marking {

// PaperMismatch, NotManual, ScoreOutOfRange, UnknownQuestion, BadReport.
class MarkingError : public Error {
 public:
  using Error::Error;
};

enum class Status { Auto, Pending, Manual };
std::string_view to_string(Status s);

struct Row {
  int number = 0;
  vqp::QuestionKind kind = vqp::QuestionKind::Mcq;
  Status status = Status::Auto;
  std::optional<double> awarded;  // nullopt while pending
  double max = 1.0;
  std::string response;  // echo; empty when blank

  bool operator==(const Row&) const = default;
};

struct Totals {
  double auto_subtotal = 0.0;
  double manual_subtotal = 0.0;
  int pending = 0;
  double max = 0.0;

  double awarded() const { return auto_subtotal + manual_subtotal; }
  bool operator==(const Totals&) const = default;
};

struct MarkReport {
  std::string paper_id;
  std::vector<Row> rows;
  Totals totals;

  bool operator==(const MarkReport&) const = default;
};

Totals recompute(const std::vector<Row>& rows);

// One mark per question. MCQ rows score 1 when the response equals the key
// and 0 otherwise (blank included); STRUCT rows start pending.
// Throws vqp::PaperError WrongVariant, MarkingError PaperMismatch.
MarkReport auto_mark(const vqp::QuestionPaper& design, const vqp::QuestionPaper& answered);

// Sets or overwrites the manual score of a STRUCT row.
MarkReport apply_manual(MarkReport report, int question, double score);

// Totals and a per-question table; starts with an INCOMPLETE banner while
// anything is pending.
std::string summarize(const MarkReport& report);

// "awarded/max" with at least one decimal, e.g. "5.0/6.0".
std::string format_score(double v);

// key=value rows (paper=, q.N.kind=, q.N.status=, q.N.awarded=, q.N.max=,
// q.N.response=, total.*). Newlines and backslashes in responses are
// escaped as \n and \\.
std::string export_rows(const MarkReport& report);
MarkReport parse_rows(std::string_view text);

}  // namespace examgrid::marking

#pragma once

// Virtual question paper (VQP): a line-oriented UTF-8 document that carries
// an exam through its three lifecycle stages.
//
//   DESIGN    authored by the lecturer, may carry MCQ keys and model answers
//   EXAM      distributed copy, keys and model answers stripped
//   ANSWERED  returned copy, carries the student's responses
//
// Canonical text form:
//
//   %VQP 1
//   @id: algebra-01
//   @title: Algebra quiz
//   @duration: 30
//   @variant: DESIGN
//   @author: J. Doe
//
//   #Q 1 MCQ
//   ?: What is 2 + 2?
//   A) 3
//   B) 4
//   !key: B
//
//   #Q 2 STRUCT
//   ?: Prove it.
//   +: Show your working.
//   lines: 5
//   !model: By counting.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "examgrid/error.hpp"

namespace examgrid::vqp {

enum class Variant { Design, Exam, Answered };
enum class QuestionKind { Mcq, Struct };

std::string_view to_string(Variant v);
std::string_view to_string(QuestionKind k);
std::optional<Variant> parse_variant(std::string_view s);

struct Option {
  char label = 'A';
  std::string text;

  bool operator==(const Option&) const = default;
};

struct Question {
  int number = 0;
  QuestionKind kind = QuestionKind::Mcq;
  // May span several lines separated by '\n'.
  std::string stem;

  // MCQ only.
  std::vector<Option> options;
  std::optional<char> key;

  // STRUCT only.
  int answer_lines = 0;
  std::optional<std::string> model;

  // ANSWERED only. A single label for MCQ, free text for STRUCT.
  std::optional<std::string> response;

  bool operator==(const Question&) const = default;
};

struct QuestionPaper {
  std::string id;
  std::string title;
  int duration_minutes = 0;
  Variant variant = Variant::Design;
  std::string author;
  std::vector<Question> questions;

  bool operator==(const QuestionPaper&) const = default;

  const Question* find(int number) const;
};

// Student responses keyed by question number.
using Responses = std::map<int, std::string>;

enum class Rule {
  EmptyId,
  BadId,
  NonPositiveDuration,
  BadText,
  NumberingGap,
  DuplicateNumber,
  TooFewOptions,
  TooManyOptions,
  NonConsecutiveLabels,
  KeyNotOption,
  ResponseNotOption,
  KeyOutsideDesign,
  ModelOutsideDesign,
  ResponseOutsideAnswered,
  OptionsOnStruct,
  KeyOnStruct,
  LinesOnMcq,
  ModelOnMcq,
  NonPositiveLines,
};

std::string_view to_string(Rule r);

struct Violation {
  int question = 0;  // 0 for header-level rules
  Rule rule = Rule::EmptyId;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

// Failures that carry the 1-based source line they were detected on.
class ParseError : public Error {
 public:
  ParseError(std::string code, int line, const std::string& reason)
      : Error(std::move(code), "line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class SyntaxError : public ParseError {
 public:
  SyntaxError(int line, const std::string& reason)
      : ParseError("SyntaxError", line, reason) {}
};

class ConstraintError : public ParseError {
 public:
  ConstraintError(int line, const std::string& reason)
      : ParseError("ConstraintError", line, reason) {}
};

// WrongVariant, UnknownQuestion, InvalidOption.
class PaperError : public Error {
 public:
  using Error::Error;
};

QuestionPaper parse_vqp(std::string_view source);
std::string serialize_vqp(const QuestionPaper& paper);

std::vector<Violation> validate(const QuestionPaper& paper);

QuestionPaper to_exam(const QuestionPaper& paper);
QuestionPaper merge_answers(const QuestionPaper& exam, const Responses& responses);

// Checks a single response against a question of an EXAM/ANSWERED paper.
// Throws UnknownQuestion / InvalidOption.
void check_response(const QuestionPaper& paper, int number, std::string_view response);

}  // namespace examgrid::vqp

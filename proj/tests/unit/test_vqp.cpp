#include "doctest.h"

#include <algorithm>

#include "examgrid/vqp.hpp"
#include "generators.hpp"

using namespace examgrid::vqp;
using testsupport::random_paper;
using testsupport::Rng;

namespace {

const char* kMinimalDesign =
    "%VQP 1\n"
    "@id: q1\n"
    "@title: One\n"
    "@duration: 10\n"
    "@variant: DESIGN\n"
    "@author: A\n"
    "\n"
    "#Q 1 MCQ\n"
    "?: Pick B\n"
    "A) no\n"
    "B) yes\n"
    "!key: B\n";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

std::string error_code(auto&& fn) {
  try {
    fn();
  } catch (const examgrid::Error& e) {
    return e.code();
  }
  return "none";
}

QuestionPaper two_question_exam() {
  QuestionPaper p;
  p.id = "x";
  p.title = "t";
  p.duration_minutes = 5;
  p.variant = Variant::Exam;
  Question a;
  a.number = 1;
  a.stem = "a";
  a.options = {{'A', "1"}, {'B', "2"}, {'C', "3"}, {'D', "4"}};
  Question b;
  b.number = 2;
  b.kind = QuestionKind::Struct;
  b.stem = "b";
  b.answer_lines = 3;
  p.questions = {a, b};
  return p;
}

}  // namespace

TEST_CASE("minimal design document parses with its key") {
  auto p = parse_vqp(kMinimalDesign);
  CHECK(p.id == "q1");
  CHECK(p.variant == Variant::Design);
  REQUIRE(p.questions.size() == 1);
  CHECK(p.questions[0].key == 'B');
  CHECK(p.questions[0].options.size() == 2);
  CHECK(validate(p).empty());
}

TEST_CASE("key line in an EXAM paper is a constraint error on that line") {
  const auto text = replace(kMinimalDesign, "DESIGN", "EXAM");
  try {
    parse_vqp(text);
    FAIL("expected ConstraintError");
  } catch (const ConstraintError& e) {
    CHECK(e.line() == 12);
  }
}

TEST_CASE("syntax errors carry the offending line") {
  try {
    parse_vqp("%VQP 1\n@id: a\n@duration: x\n");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_vqp("VQP 1\n"), SyntaxError);
  CHECK_THROWS_AS(parse_vqp(""), SyntaxError);
  const auto dup = std::string(kMinimalDesign) + "\n#Q 1 STRUCT\n?: again\nlines: 2\n";
  CHECK_THROWS_AS(parse_vqp(dup), ConstraintError);
}

TEST_CASE("empty paper serializes to the header alone") {
  QuestionPaper p;
  p.id = "empty";
  p.title = "Nothing";
  p.duration_minutes = 1;
  p.variant = Variant::Exam;
  p.author = "me";
  CHECK(serialize_vqp(p) ==
        "%VQP 1\n@id: empty\n@title: Nothing\n@duration: 1\n@variant: EXAM\n@author: me\n");
  CHECK(parse_vqp(serialize_vqp(p)) == p);
}

TEST_CASE("three-line STRUCT response uses continuation lines") {
  auto p = merge_answers(two_question_exam(), {{2, "one\ntwo\nthree"}});
  const auto text = serialize_vqp(p);
  CHECK(text.find("=ans: one\n+: two\n+: three\n") != std::string::npos);
  CHECK(parse_vqp(text) == p);
}

TEST_CASE("non-canonical whitespace canonicalizes and re-parses equal") {
  const std::string messy =
      "%VQP 1\r\n"
      "@variant:   DESIGN  \r\n"
      "@id:q1\n"
      "@duration:  10\n"
      "@title: One   \n"
      "@author: A\n"
      "\n\n\n"
      "#Q 1 MCQ\n"
      "?:   Pick B\n"
      "B)   yes\n"
      "A) no\n"
      "!key:B\n"
      "\n";
  const auto p = parse_vqp(messy);
  const auto canon = serialize_vqp(p);
  CHECK(canon == kMinimalDesign);
  CHECK(parse_vqp(canon) == p);
  CHECK(serialize_vqp(parse_vqp(canon)) == canon);
}

TEST_CASE("generated papers round-trip and serialize idempotently") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto variant = static_cast<Variant>(i % 3);
    const auto p = random_paper(rng, variant);
    REQUIRE(validate(p).empty());
    const auto text = serialize_vqp(p);
    const auto back = parse_vqp(text);
    CHECK(back == p);
    CHECK(serialize_vqp(back) == text);
  }
}

TEST_CASE("to_exam strips keys and models only") {
  auto p = parse_vqp(kMinimalDesign);
  Question q2;
  q2.number = 2;
  q2.stem = "second";
  q2.options = {{'A', "a"}, {'B', "b"}, {'C', "c"}, {'D', "d"}};
  q2.key = 'D';
  p.questions.push_back(q2);
  const auto exam = to_exam(p);
  const auto text = serialize_vqp(exam);
  CHECK(exam.variant == Variant::Exam);
  CHECK(text.find("!key") == std::string::npos);
  CHECK(text.find("!model") == std::string::npos);
  CHECK(error_code([&] { to_exam(exam); }) == "WrongVariant");

  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto d = random_paper(rng, Variant::Design);
    const auto e = to_exam(d);
    REQUIRE(e.questions.size() == d.questions.size());
    CHECK(e.id == d.id);
    CHECK(e.title == d.title);
    CHECK(e.author == d.author);
    CHECK(e.duration_minutes == d.duration_minutes);
    for (std::size_t k = 0; k < d.questions.size(); ++k) {
      auto expected = d.questions[k];
      expected.key.reset();
      expected.model.reset();
      CHECK(e.questions[k] == expected);
    }
    CHECK(validate(e).empty());
  }
}

TEST_CASE("merge_answers attaches responses and leaves the rest blank") {
  const auto exam = two_question_exam();
  const auto answered = merge_answers(exam, {{1, "A"}});
  CHECK(answered.variant == Variant::Answered);
  CHECK(answered.questions[0].response == "A");
  CHECK_FALSE(answered.questions[1].response.has_value());
  CHECK(error_code([&] { merge_answers(exam, {{3, "A"}}); }) == "UnknownQuestion");
  CHECK(error_code([&] { merge_answers(exam, {{1, "E"}}); }) == "InvalidOption");
  CHECK(error_code([&] { merge_answers(answered, {}); }) == "WrongVariant");
}

TEST_CASE("merge_answers preserves question count and stems") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const auto d = random_paper(rng, Variant::Design);
    Responses r;
    for (const auto& q : d.questions) {
      if (rng() % 2) continue;
      r[q.number] = q.kind == QuestionKind::Mcq ? std::string(1, q.options.back().label)
                                                : "free text\nline two";
    }
    const auto a = merge_answers(to_exam(d), r);
    REQUIRE(a.questions.size() == d.questions.size());
    for (std::size_t k = 0; k < d.questions.size(); ++k) {
      CHECK(a.questions[k].stem == d.questions[k].stem);
      const auto it = r.find(d.questions[k].number);
      CHECK(a.questions[k].response == (it == r.end() ? std::nullopt : std::optional(it->second)));
    }
    CHECK(parse_vqp(serialize_vqp(a)) == a);
  }
}

TEST_CASE("validate reports rule and question") {
  CHECK(validate(parse_vqp(kMinimalDesign)).empty());

  auto p = two_question_exam();
  p.questions[0].options.resize(1);
  auto v = validate(p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == Rule::TooFewOptions);
  CHECK(v[0].question == 1);

  p = two_question_exam();
  p.questions[1].number = 1;
  v = validate(p);
  CHECK(std::any_of(v.begin(), v.end(), [](const Violation& x) {
    return x.rule == Rule::DuplicateNumber && x.question == 1;
  }));

  p = two_question_exam();
  p.questions[0].key = 'B';
  v = validate(p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == Rule::KeyOutsideDesign);

  p = two_question_exam();
  p.questions[0].options[2].label = 'D';
  v = validate(p);
  CHECK(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.rule == Rule::NonConsecutiveLabels; }));

  p = two_question_exam();
  p.questions[1].answer_lines = 0;
  v = validate(p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == Rule::NonPositiveLines);
}

TEST_CASE("check_response") {
  const auto exam = two_question_exam();
  CHECK_NOTHROW(check_response(exam, 1, "D"));
  CHECK_NOTHROW(check_response(exam, 2, "anything at all"));
  CHECK(error_code([&] { check_response(exam, 1, "AB"); }) == "InvalidOption");
  CHECK(error_code([&] { check_response(exam, 9, "A"); }) == "UnknownQuestion");
}

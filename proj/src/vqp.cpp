#include "examgrid/vqp.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

namespace examgrid::vqp {

namespace {

constexpr std::string_view kMagic = "%VQP 1";
constexpr int kMinOptions = 2;
constexpr int kMaxOptions = 10;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// A text line survives a serialize/parse cycle only if trimming is a no-op.
bool representable_line(std::string_view s) {
  return s.find('\n') == std::string_view::npos && trim(s) == s;
}

bool representable_text(std::string_view s) {
  std::size_t start = 0;
  while (true) {
    auto nl = s.find('\n', start);
    auto line = s.substr(start, nl == std::string_view::npos ? s.size() - start : nl - start);
    if (!representable_line(line)) return false;
    if (nl == std::string_view::npos) return true;
    start = nl + 1;
  }
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Returns the value after `prefix` if the line starts with it.
std::optional<std::string_view> field(std::string_view line, std::string_view prefix) {
  if (!line.starts_with(prefix)) return std::nullopt;
  return trim(line.substr(prefix.size()));
}

std::string emit(std::string_view prefix, std::string_view value) {
  std::string out(prefix);
  if (!value.empty()) {
    out += ' ';
    out += value;
  }
  out += '\n';
  return out;
}

std::string emit_text(std::string_view first_prefix, std::string_view text) {
  std::string out;
  std::size_t start = 0;
  bool first = true;
  while (true) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
    out += emit(first ? first_prefix : "+:", line);
    first = false;
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

bool valid_token(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

struct LineInfo {
  int header = 1;
  std::map<int, int> question;  // question number -> "#Q" line
};

struct Parser {
  QuestionPaper paper;
  LineInfo lines;
  std::set<std::string> seen_headers;
  bool have_variant = false;
  bool have_duration = false;
  bool have_id = false;
  std::set<int> numbers;

  Question* current = nullptr;
  bool have_stem = false;
  bool have_lines = false;
  int current_line = 0;
  std::string* continuation = nullptr;

  void close_block() {
    if (!current) return;
    if (!have_stem) throw SyntaxError(current_line, "question has no '?:' stem line");
    if (current->kind == QuestionKind::Struct && !have_lines)
      throw SyntaxError(current_line, "STRUCT question has no 'lines:' field");
    current = nullptr;
    continuation = nullptr;
  }

  void header_line(int n, std::string_view line) {
    auto colon = line.find(':');
    if (colon == std::string_view::npos) throw SyntaxError(n, "header line without ':'");
    std::string name(line.substr(1, colon - 1));
    auto value = trim(line.substr(colon + 1));
    if (!seen_headers.insert(name).second) throw SyntaxError(n, "duplicate header @" + name);
    if (name == "id") {
      if (!valid_token(value)) throw SyntaxError(n, "@id must be a non-empty token");
      paper.id = value;
      have_id = true;
    } else if (name == "title") {
      paper.title = value;
    } else if (name == "duration") {
      auto v = parse_int(value);
      if (!v) throw SyntaxError(n, "@duration must be an integer");
      if (*v <= 0) throw ConstraintError(n, "@duration must be positive");
      paper.duration_minutes = *v;
      have_duration = true;
    } else if (name == "variant") {
      auto v = parse_variant(value);
      if (!v) throw SyntaxError(n, "unknown variant '" + std::string(value) + "'");
      paper.variant = *v;
      have_variant = true;
    } else if (name == "author") {
      paper.author = value;
    } else {
      throw SyntaxError(n, "unknown header @" + name);
    }
  }

  void question_line(int n, std::string_view line) {
    close_block();
    if (!have_id || !have_variant || !have_duration)
      throw SyntaxError(n, "header must declare @id, @duration and @variant before questions");
    // "#Q <n> MCQ|STRUCT"
    std::istringstream in{std::string(line)};
    std::string tag, number, kind, extra;
    in >> tag >> number >> kind;
    if (tag != "#Q" || kind.empty() || (in >> extra))
      throw SyntaxError(n, "expected '#Q <n> MCQ|STRUCT'");
    auto num = parse_int(number);
    if (!num) throw SyntaxError(n, "question number is not an integer");
    Question q;
    q.number = *num;
    if (kind == "MCQ") {
      q.kind = QuestionKind::Mcq;
    } else if (kind == "STRUCT") {
      q.kind = QuestionKind::Struct;
    } else {
      throw SyntaxError(n, "unknown question kind '" + kind + "'");
    }
    if (q.number <= 0) throw ConstraintError(n, "question number must be positive");
    if (!numbers.insert(q.number).second)
      throw ConstraintError(n, "duplicate question number " + number);
    lines.question[q.number] = n;
    paper.questions.push_back(std::move(q));
    current = &paper.questions.back();
    current_line = n;
    have_stem = false;
    have_lines = false;
  }

  void require_variant(int n, Variant allowed, std::string_view what) {
    if (paper.variant != allowed)
      throw ConstraintError(n, std::string(what) + " not allowed in " +
                                   std::string(to_string(paper.variant)) + " variant");
  }

  void body_line(int n, std::string_view line) {
    if (!current) throw SyntaxError(n, "unexpected line outside a question block");
    Question& q = *current;
    auto* prev_continuation = continuation;
    continuation = nullptr;

    if (auto v = field(line, "+:")) {
      if (!prev_continuation) throw SyntaxError(n, "'+:' continuation without a preceding text field");
      *prev_continuation += '\n';
      *prev_continuation += *v;
      continuation = prev_continuation;
    } else if (auto v = field(line, "?:")) {
      if (have_stem) throw SyntaxError(n, "duplicate '?:' stem");
      q.stem = *v;
      have_stem = true;
      continuation = &q.stem;
    } else if (auto v = field(line, "!key:")) {
      require_variant(n, Variant::Design, "!key");
      if (q.kind != QuestionKind::Mcq) throw SyntaxError(n, "!key on a STRUCT question");
      if (q.key) throw SyntaxError(n, "duplicate !key");
      if (v->size() != 1) throw ConstraintError(n, "!key must be a single option letter");
      q.key = (*v)[0];
    } else if (auto v = field(line, "!model:")) {
      require_variant(n, Variant::Design, "!model");
      if (q.kind != QuestionKind::Struct) throw SyntaxError(n, "!model on an MCQ question");
      if (q.model) throw SyntaxError(n, "duplicate !model");
      q.model = std::string(*v);
      continuation = &*q.model;
    } else if (auto v = field(line, "=ans:")) {
      require_variant(n, Variant::Answered, "=ans");
      if (q.response) throw SyntaxError(n, "duplicate =ans");
      q.response = std::string(*v);
      if (q.kind == QuestionKind::Struct) continuation = &*q.response;
    } else if (auto v = field(line, "lines:")) {
      if (q.kind != QuestionKind::Struct) throw SyntaxError(n, "lines: on an MCQ question");
      if (have_lines) throw SyntaxError(n, "duplicate lines:");
      auto count = parse_int(*v);
      if (!count) throw SyntaxError(n, "lines: must be an integer");
      if (*count <= 0) throw ConstraintError(n, "lines: must be positive");
      q.answer_lines = *count;
      have_lines = true;
    } else if (line.size() >= 2 && line[0] >= 'A' && line[0] <= 'Z' && line[1] == ')') {
      if (q.kind != QuestionKind::Mcq) throw SyntaxError(n, "option on a STRUCT question");
      q.options.push_back(Option{line[0], std::string(trim(line.substr(2)))});
    } else {
      throw SyntaxError(n, "unrecognized line");
    }
  }
};

int line_for(const LineInfo& info, const Violation& v) {
  if (v.question == 0) return info.header;
  auto it = info.question.find(v.question);
  return it == info.question.end() ? info.header : it->second;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Design: return "DESIGN";
    case Variant::Exam: return "EXAM";
    case Variant::Answered: return "ANSWERED";
  }
  return "?";
}

std::string_view to_string(QuestionKind k) {
  return k == QuestionKind::Mcq ? "MCQ" : "STRUCT";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "DESIGN") return Variant::Design;
  if (s == "EXAM") return Variant::Exam;
  if (s == "ANSWERED") return Variant::Answered;
  return std::nullopt;
}

std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::EmptyId: return "EmptyId";
    case Rule::BadId: return "BadId";
    case Rule::NonPositiveDuration: return "NonPositiveDuration";
    case Rule::BadText: return "BadText";
    case Rule::NumberingGap: return "NumberingGap";
    case Rule::DuplicateNumber: return "DuplicateNumber";
    case Rule::TooFewOptions: return "TooFewOptions";
    case Rule::TooManyOptions: return "TooManyOptions";
    case Rule::NonConsecutiveLabels: return "NonConsecutiveLabels";
    case Rule::KeyNotOption: return "KeyNotOption";
    case Rule::ResponseNotOption: return "ResponseNotOption";
    case Rule::KeyOutsideDesign: return "KeyOutsideDesign";
    case Rule::ModelOutsideDesign: return "ModelOutsideDesign";
    case Rule::ResponseOutsideAnswered: return "ResponseOutsideAnswered";
    case Rule::OptionsOnStruct: return "OptionsOnStruct";
    case Rule::KeyOnStruct: return "KeyOnStruct";
    case Rule::LinesOnMcq: return "LinesOnMcq";
    case Rule::ModelOnMcq: return "ModelOnMcq";
    case Rule::NonPositiveLines: return "NonPositiveLines";
  }
  return "?";
}

const Question* QuestionPaper::find(int number) const {
  for (const auto& q : questions)
    if (q.number == number) return &q;
  return nullptr;
}

std::vector<Violation> validate(const QuestionPaper& paper) {
  std::vector<Violation> out;
  auto add = [&](int q, Rule r, std::string detail = {}) {
    out.push_back(Violation{q, r, std::move(detail)});
  };

  if (paper.id.empty()) {
    add(0, Rule::EmptyId);
  } else if (!valid_token(paper.id)) {
    add(0, Rule::BadId, paper.id);
  }
  if (paper.duration_minutes <= 0) add(0, Rule::NonPositiveDuration);
  if (!representable_line(paper.title)) add(0, Rule::BadText, "title");
  if (!representable_line(paper.author)) add(0, Rule::BadText, "author");

  std::set<int> seen;
  for (const auto& q : paper.questions) {
    if (!seen.insert(q.number).second) add(q.number, Rule::DuplicateNumber);
  }
  const int n = static_cast<int>(paper.questions.size());
  for (int i = 1; i <= n; ++i) {
    if (!seen.count(i)) add(i, Rule::NumberingGap, "question " + std::to_string(i) + " missing");
  }
  for (int num : seen) {
    if (num < 1 || num > n) add(num, Rule::NumberingGap, "number outside 1.." + std::to_string(n));
  }

  auto is_label = [](const Question& q, std::string_view s) {
    return s.size() == 1 && std::any_of(q.options.begin(), q.options.end(),
                                        [&](const Option& o) { return o.label == s[0]; });
  };

  for (const auto& q : paper.questions) {
    if (!representable_text(q.stem)) add(q.number, Rule::BadText, "stem");
    if (q.key && paper.variant != Variant::Design) add(q.number, Rule::KeyOutsideDesign);
    if (q.model && paper.variant != Variant::Design) add(q.number, Rule::ModelOutsideDesign);
    if (q.response && paper.variant != Variant::Answered)
      add(q.number, Rule::ResponseOutsideAnswered);

    if (q.kind == QuestionKind::Mcq) {
      const int count = static_cast<int>(q.options.size());
      if (count < kMinOptions) add(q.number, Rule::TooFewOptions);
      if (count > kMaxOptions) add(q.number, Rule::TooManyOptions);
      for (int i = 0; i < count; ++i) {
        if (q.options[i].label != static_cast<char>('A' + i)) {
          add(q.number, Rule::NonConsecutiveLabels);
          break;
        }
      }
      for (const auto& o : q.options) {
        if (!representable_line(o.text)) {
          add(q.number, Rule::BadText, std::string("option ") + o.label);
          break;
        }
      }
      if (q.key && !is_label(q, std::string_view(&*q.key, 1)))
        add(q.number, Rule::KeyNotOption, std::string(1, *q.key));
      if (q.response && !is_label(q, *q.response))
        add(q.number, Rule::ResponseNotOption, *q.response);
      if (q.answer_lines != 0) add(q.number, Rule::LinesOnMcq);
      if (q.model) add(q.number, Rule::ModelOnMcq);
    } else {
      if (!q.options.empty()) add(q.number, Rule::OptionsOnStruct);
      if (q.key) add(q.number, Rule::KeyOnStruct);
      if (q.answer_lines <= 0) add(q.number, Rule::NonPositiveLines);
      if (q.model && !representable_text(*q.model)) add(q.number, Rule::BadText, "model");
      if (q.response && !representable_text(*q.response))
        add(q.number, Rule::BadText, "response");
    }
  }
  return out;
}

QuestionPaper parse_vqp(std::string_view source) {
  std::vector<std::string_view> raw;
  {
    std::size_t start = 0;
    while (start <= source.size()) {
      auto nl = source.find('\n', start);
      if (nl == std::string_view::npos) {
        if (start < source.size()) raw.push_back(source.substr(start));
        break;
      }
      raw.push_back(source.substr(start, nl - start));
      start = nl + 1;
    }
  }
  if (raw.empty() || rtrim(raw[0]) != kMagic)
    throw SyntaxError(1, "first line must be '%VQP 1'");

  Parser p;
  for (std::size_t i = 1; i < raw.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    auto line = rtrim(raw[i]);
    if (line.empty()) continue;
    if (line[0] == '@') {
      if (p.current || !p.paper.questions.empty())
        throw SyntaxError(n, "header line after the first question");
      p.header_line(n, line);
    } else if (line[0] == '#') {
      p.question_line(n, line);
    } else {
      p.body_line(n, line);
    }
  }
  p.close_block();
  const int last = static_cast<int>(raw.size());
  if (!p.have_id) throw SyntaxError(last, "missing @id header");
  if (!p.have_duration) throw SyntaxError(last, "missing @duration header");
  if (!p.have_variant) throw SyntaxError(last, "missing @variant header");

  for (auto& q : p.paper.questions) {
    std::stable_sort(q.options.begin(), q.options.end(),
                     [](const Option& a, const Option& b) { return a.label < b.label; });
  }
  std::sort(p.paper.questions.begin(), p.paper.questions.end(),
            [](const Question& a, const Question& b) { return a.number < b.number; });

  auto violations = validate(p.paper);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::string reason(to_string(v.rule));
    if (v.question) reason += " (question " + std::to_string(v.question) + ")";
    if (!v.detail.empty()) reason += ": " + v.detail;
    throw ConstraintError(line_for(p.lines, v), reason);
  }
  return std::move(p.paper);
}

std::string serialize_vqp(const QuestionPaper& paper) {
  std::string out;
  out += kMagic;
  out += '\n';
  out += emit("@id:", paper.id);
  out += emit("@title:", paper.title);
  out += emit("@duration:", std::to_string(paper.duration_minutes));
  out += emit("@variant:", to_string(paper.variant));
  out += emit("@author:", paper.author);

  for (const auto& q : paper.questions) {
    out += '\n';
    out += "#Q " + std::to_string(q.number) + " " + std::string(to_string(q.kind)) + "\n";
    out += emit_text("?:", q.stem);
    if (q.kind == QuestionKind::Mcq) {
      auto options = q.options;
      std::stable_sort(options.begin(), options.end(),
                       [](const Option& a, const Option& b) { return a.label < b.label; });
      for (const auto& o : options) out += emit(std::string(1, o.label) + ")", o.text);
      if (q.key) out += emit("!key:", std::string(1, *q.key));
      if (q.response) out += emit("=ans:", *q.response);
    } else {
      out += emit("lines:", std::to_string(q.answer_lines));
      if (q.model) out += emit_text("!model:", *q.model);
      if (q.response) out += emit_text("=ans:", *q.response);
    }
  }
  return out;
}

QuestionPaper to_exam(const QuestionPaper& paper) {
  if (paper.variant != Variant::Design)
    throw PaperError("WrongVariant", "to_exam needs a DESIGN paper, got " +
                                         std::string(to_string(paper.variant)));
  QuestionPaper exam = paper;
  exam.variant = Variant::Exam;
  for (auto& q : exam.questions) {
    q.key.reset();
    q.model.reset();
  }
  return exam;
}

void check_response(const QuestionPaper& paper, int number, std::string_view response) {
  const Question* q = paper.find(number);
  if (!q) throw PaperError("UnknownQuestion", "question " + std::to_string(number));
  if (q->kind == QuestionKind::Mcq) {
    bool ok = response.size() == 1 &&
              std::any_of(q->options.begin(), q->options.end(),
                          [&](const Option& o) { return o.label == response[0]; });
    if (!ok)
      throw PaperError("InvalidOption", "question " + std::to_string(number) + " has no option '" +
                                            std::string(response) + "'");
  } else if (!representable_text(response)) {
    throw PaperError("InvalidOption", "question " + std::to_string(number) +
                                          ": response lines must not start or end with whitespace");
  }
}

QuestionPaper merge_answers(const QuestionPaper& exam, const Responses& responses) {
  if (exam.variant != Variant::Exam)
    throw PaperError("WrongVariant", "merge_answers needs an EXAM paper, got " +
                                         std::string(to_string(exam.variant)));
  for (const auto& [number, response] : responses) check_response(exam, number, response);

  QuestionPaper answered = exam;
  answered.variant = Variant::Answered;
  for (auto& q : answered.questions) {
    auto it = responses.find(q.number);
    if (it != responses.end()) q.response = it->second;
  }
  return answered;
}

}  // namespace examgrid::vqp

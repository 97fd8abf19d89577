#include "tts/answer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>
#include <regex>

namespace tts {

namespace {

std::string decimal_text(const DecimalAnswer& d) {
  const bool negative = d.mantissa < 0;
  std::string digits = std::to_string(negative ? -d.mantissa : d.mantissa);
  if (static_cast<int>(digits.size()) <= d.places)
    digits.insert(0, static_cast<std::size_t>(d.places) - digits.size() + 1, '0');
  std::string out = negative ? "-" : "";
  out += digits.substr(0, digits.size() - d.places);
  if (d.places > 0) out += "." + digits.substr(digits.size() - d.places);
  return out;
}

}  // namespace

std::string render(const CanonicalAnswer& canonical) {
  struct Visitor {
    std::string operator()(const IntegerAnswer& a) const { return std::to_string(a.value); }
    std::string operator()(const RationalAnswer& a) const {
      return "\\frac{" + std::to_string(a.numerator) + "}{" + std::to_string(a.denominator) + "}";
    }
    std::string operator()(const DecimalAnswer& a) const { return decimal_text(a); }
    std::string operator()(const ChoiceAnswer& a) const { return std::string(1, a.letter); }
    std::string operator()(const SymbolicAnswer& a) const { return a.text; }
  };
  return std::visit(Visitor{}, canonical);
}

const char* canonical_type_name(const CanonicalAnswer& canonical) {
  static constexpr std::array<const char*, 5> names{"integer", "rational", "decimal", "choice",
                                                    "symbolic"};
  return names[canonical.index()];
}

namespace answer {

namespace {

constexpr std::string_view kBoxed = "\\boxed{";
constexpr int kMaxDigits = 18;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Index one past the brace closing the group opened just before `pos`, or
// npos when the text ends first.
std::size_t match_group(std::string_view text, std::size_t pos) {
  int depth = 1;
  for (std::size_t i = pos; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size() && (text[i + 1] == '{' || text[i + 1] == '}')) {
      ++i;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos)) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Removes a control word unless it is the prefix of a longer one
// (\right vs \rightarrow).
void remove_control_word(std::string& s, std::string_view word) {
  for (std::size_t pos = s.find(word); pos != std::string::npos; pos = s.find(word, pos)) {
    const std::size_t end = pos + word.size();
    if (end < s.size() && is_alpha(s[end])) {
      pos = end;
      continue;
    }
    s.erase(pos, word.size());
  }
}

bool wraps_whole(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size() + 1 || s.substr(0, prefix.size()) != prefix) return false;
  return match_group(s, prefix.size()) == s.size();
}

std::string clean_once(std::string s) {
  s = std::string(trim(s));
  if (s.size() >= 4 && s.starts_with("$$") && s.ends_with("$$")) s = s.substr(2, s.size() - 4);
  else if (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = s.substr(1, s.size() - 2);
  if (s.size() >= 4 && (s.starts_with("\\(") && s.ends_with("\\)")))
    s = s.substr(2, s.size() - 4);
  if (s.size() >= 4 && (s.starts_with("\\[") && s.ends_with("\\]")))
    s = s.substr(2, s.size() - 4);

  remove_control_word(s, "\\left");
  remove_control_word(s, "\\right");
  remove_control_word(s, "\\displaystyle");
  remove_control_word(s, "\\qquad");
  remove_control_word(s, "\\quad");
  for (std::string_view sp : {"\\!", "\\,", "\\;", "\\:", "\\ "}) replace_all(s, sp, "");
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");

  s = std::string(trim(s));
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';')) {
    s.pop_back();
    s = std::string(trim(s));
  }

  for (std::string_view wrapper : {"\\text{", "\\textbf{", "\\mathrm{", "\\mathbf{", "{"}) {
    if (wraps_whole(s, wrapper)) {
      s = s.substr(wrapper.size(), s.size() - wrapper.size() - 1);
      break;
    }
  }
  std::erase_if(s, is_space);
  return s;
}

bool parse_int64(std::string_view s, std::int64_t& out) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || !std::all_of(s.begin(), s.end(), is_digit)) return false;
  while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
  if (static_cast<int>(s.size()) > kMaxDigits) return false;
  std::int64_t v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  out = negative ? -v : v;
  return true;
}

bool parse_grouped_int(std::string_view s, std::int64_t& out) {
  static const std::regex grouped(R"([-+]?\d{1,3}(,\d{3})+)");
  if (!std::regex_match(s.begin(), s.end(), grouped)) return false;
  std::string digits(s);
  std::erase(digits, ',');
  return parse_int64(digits, out);
}

bool parse_decimal(std::string_view s, DecimalAnswer& out) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  if (dot == std::string_view::npos || s.find('.', dot + 1) != std::string_view::npos) return false;
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = s.substr(dot + 1);
  if (frac.empty()) return false;
  if (!std::all_of(whole.begin(), whole.end(), is_digit) ||
      !std::all_of(frac.begin(), frac.end(), is_digit))
    return false;
  std::string digits = std::string(whole) + std::string(frac);
  const auto first_nonzero = digits.find_first_not_of('0');
  const std::string significant =
      first_nonzero == std::string::npos ? std::string() : digits.substr(first_nonzero);
  if (static_cast<int>(frac.size()) > kMaxDigits || static_cast<int>(significant.size()) > kMaxDigits)
    return false;
  std::int64_t mantissa = 0;
  for (char c : significant) mantissa = mantissa * 10 + (c - '0');
  out.mantissa = negative ? -mantissa : mantissa;
  out.places = static_cast<int>(frac.size());
  out.significant_digits = std::max<int>(1, static_cast<int>(significant.size()));
  return true;
}

std::optional<CanonicalAnswer> make_fraction(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  num /= g;
  den /= g;
  if (den == 1) return IntegerAnswer{num};
  return RationalAnswer{num, den};
}

std::optional<CanonicalAnswer> parse_fraction(std::string_view s) {
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  std::int64_t num = 0, den = 0;
  if (s.starts_with("\\frac")) {
    std::string_view rest = s.substr(5);
    std::string_view a, b;
    if (rest.size() == 2 && is_digit(rest[0]) && is_digit(rest[1])) {
      a = rest.substr(0, 1);
      b = rest.substr(1, 1);
    } else {
      if (rest.empty() || rest.front() != '{') return std::nullopt;
      const auto end_a = match_group(rest, 1);
      if (end_a == std::string_view::npos || end_a >= rest.size() || rest[end_a] != '{')
        return std::nullopt;
      const auto end_b = match_group(rest, end_a + 1);
      if (end_b != rest.size()) return std::nullopt;
      a = rest.substr(1, end_a - 2);
      b = rest.substr(end_a + 1, end_b - end_a - 2);
    }
    if (!parse_int64(a, num) || !parse_int64(b, den)) return std::nullopt;
  } else {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    if (!parse_int64(s.substr(0, slash), num) || !parse_int64(s.substr(slash + 1), den))
      return std::nullopt;
  }
  return make_fraction(negative ? -num : num, den);
}

std::optional<CanonicalAnswer> parse_number(std::string_view s) {
  std::int64_t v = 0;
  if (parse_int64(s, v) || parse_grouped_int(s, v)) return IntegerAnswer{v};
  DecimalAnswer d;
  if (parse_decimal(s, d)) return d;
  return parse_fraction(s);
}

std::optional<char> parse_choice(std::string_view s) {
  static const std::regex bracketed(R"((?:option|answer|choice)?:?[\(\[]([A-Za-z])[\)\]].*)",
                                    std::regex::icase);
  static const std::regex bare(R"((?:option|answer|choice)?:?([A-Za-z])(?:[\.\):].*)?)",
                               std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_match(s.begin(), s.end(), m, bracketed) ||
      std::regex_match(s.begin(), s.end(), m, bare)) {
    return static_cast<char>(std::toupper(static_cast<unsigned char>(m[1].str()[0])));
  }
  return std::nullopt;
}

// Exact value as numerator / denominator; denominators are positive.
struct Exact {
  __int128 num;
  __int128 den;
};

std::optional<Exact> exact_value(const CanonicalAnswer& c) {
  if (const auto* i = std::get_if<IntegerAnswer>(&c)) return Exact{i->value, 1};
  if (const auto* r = std::get_if<RationalAnswer>(&c)) return Exact{r->numerator, r->denominator};
  if (const auto* d = std::get_if<DecimalAnswer>(&c)) {
    __int128 scale = 1;
    for (int i = 0; i < d->places; ++i) scale *= 10;
    return Exact{d->mantissa, scale};
  }
  return std::nullopt;
}

// Rounds num/den (den > 0) to the nearest integer, halves away from zero.
__int128 round_half_away(__int128 num, __int128 den) {
  const bool negative = num < 0;
  const __int128 a = negative ? -num : num;
  const __int128 q = (2 * a + den) / (2 * den);
  return negative ? -q : q;
}

bool decimal_matches(const DecimalAnswer& d, const Exact& other) {
  __int128 scale = 1;
  for (int i = 0; i < d.places; ++i) scale *= 10;
  return round_half_away(other.num * scale, other.den) == d.mantissa;
}

}  // namespace

std::optional<std::string> extract_boxed(std::string_view text) {
  std::size_t search_end = text.size();
  while (search_end > 0) {
    const std::size_t pos = text.rfind(kBoxed, search_end - 1);
    if (pos == std::string_view::npos) break;
    const std::size_t content = pos + kBoxed.size();
    const std::size_t end = match_group(text, content);
    if (end != std::string_view::npos) return std::string(text.substr(content, end - 1 - content));
    if (pos == 0) break;
    search_end = pos;
  }
  return std::nullopt;
}

std::string clean(std::string_view raw) {
  std::string current(raw);
  for (;;) {
    std::string next = clean_once(current);
    if (next == current) return next;
    current = std::move(next);
  }
}

NormalizedAnswer normalize(std::string_view raw, QuestionKind kind) {
  const std::string cleaned = clean(raw);
  if (cleaned.empty()) throw UnusableAnswer("answer is empty after cleaning");
  NormalizedAnswer out{std::string(raw), SymbolicAnswer{cleaned}};
  if (kind == QuestionKind::multiple_choice) {
    if (auto letter = parse_choice(cleaned)) {
      out.canonical = ChoiceAnswer{*letter};
      return out;
    }
  }
  if (auto number = parse_number(cleaned)) out.canonical = *number;
  return out;
}

std::optional<NormalizedAnswer> try_normalize(std::string_view raw, QuestionKind kind) {
  try {
    return normalize(raw, kind);
  } catch (const UnusableAnswer&) {
    return std::nullopt;
  }
}

bool strict_equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b) {
  return a.canonical == b.canonical;
}

bool numeric_equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b) {
  const auto va = exact_value(a.canonical);
  const auto vb = exact_value(b.canonical);
  if (!va || !vb) return false;
  const auto* da = std::get_if<DecimalAnswer>(&a.canonical);
  const auto* db = std::get_if<DecimalAnswer>(&b.canonical);
  if (da && !db) return decimal_matches(*da, *vb);
  if (db && !da) return decimal_matches(*db, *va);
  return va->num * vb->den == vb->num * va->den;
}

bool equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b) {
  return strict_equivalent(a, b) || numeric_equivalent(a, b);
}

Grade grade_answer(const std::optional<NormalizedAnswer>& answer, const Question& question) {
  if (!answer) return Grade::no_answer;
  const auto gold = try_normalize(question.gold_answer, question.kind);
  return gold && equivalent(*answer, *gold) ? Grade::correct : Grade::incorrect;
}

GradeResult grade(std::string_view text, const Question& question) {
  GradeResult result;
  if (auto raw = extract_boxed(text)) result.answer = try_normalize(*raw, question.kind);
  result.grade = grade_answer(result.answer, question);
  return result;
}

}  // namespace answer
}  // namespace tts

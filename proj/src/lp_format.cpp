#include "imb/lp_format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <unordered_map>

#include "imb/io.hpp"

namespace imb::milp {

namespace {

enum class Tok { Name, Number, Op, Plus, Minus, Colon, End };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  int line = 0;
};

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("_.[]{}()!\"#$%&/,;?@'`|~").find(c) != std::string_view::npos;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) { throw ValidationError("LP line " + std::to_string(line) + ": " + msg); };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '\\') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '+') {
      out.push_back({Tok::Plus, "+", 0, line});
      ++i;
    } else if (c == '-') {
      out.push_back({Tok::Minus, "-", 0, line});
      ++i;
    } else if (c == ':') {
      out.push_back({Tok::Colon, ":", 0, line});
      ++i;
    } else if (c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      ++i;
      if (i < text.size() && (text[i] == '=' || text[i] == '<' || text[i] == '>')) op += text[i++];
      if (op == "=<" || op == "<") op = "<=";
      if (op == "=>" || op == ">") op = ">=";
      if (op == "==") op = "=";
      if (op != "<=" && op != ">=" && op != "=") fail("bad operator '" + op + "'");
      out.push_back({Tok::Op, op, 0, line});
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          j = k;
          while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        }
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + j, v);
      if (ec != std::errc{} || ptr != text.data() + j) fail("bad number '" + std::string(text.substr(i, j - i)) + "'");
      out.push_back({Tok::Number, std::string(text.substr(i, j - i)), v, line});
      i = j;
    } else if (name_char(c)) {
      std::size_t j = i;
      while (j < text.size() && name_char(text[j])) ++j;
      out.push_back({Tok::Name, std::string(text.substr(i, j - i)), 0, line});
      i = j;
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, "", 0, line});
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

enum class Section { None, Objective, Constraints, Bounds, Binaries, End };

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  LpFile run() {
    Section sec = Section::None;
    while (true) {
      if (auto s = section_at()) {
        sec = *s;
        if (sec == Section::End || peek().kind == Tok::End) break;
        continue;
      }
      if (peek().kind == Tok::End) break;
      switch (sec) {
        case Section::None: fail("expected Minimize or Maximize");
        case Section::Objective: objective(); break;
        case Section::Constraints: constraint(); break;
        case Section::Bounds: bound(); break;
        case Section::Binaries: binary(); break;
        case Section::End: break;
      }
    }
    if (!seen_objective_) fail("missing objective section");
    if (out_.maximize)
      for (int j = 0; j < out_.problem.lp.num_vars(); ++j) out_.problem.lp.set_cost(j, -out_.problem.lp.cost()[j]);
    for (int b : out_.problem.binaries) {
      auto& lp = out_.problem.lp;
      lp.set_bounds(b, std::max(lp.lower()[b], 0.0), std::min(lp.upper()[b], 1.0));
      if (lp.lower()[b] > lp.upper()[b]) throw ValidationError("binary " + lp.name(b) + " has bounds outside [0, 1]");
    }
    return std::move(out_);
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("LP line " + std::to_string(peek().line) + ": " + msg);
  }

  // Consumes a section keyword if one starts here.
  std::optional<Section> section_at() {
    const auto& t = peek();
    if (t.kind != Tok::Name) return std::nullopt;
    if (peek(1).kind == Tok::Colon) return std::nullopt;  // a label that happens to match
    const auto w = lower(t.text);
    if (w == "minimize" || w == "minimum" || w == "min" || w == "maximize" || w == "maximum" || w == "max") {
      if (seen_objective_) fail("second objective section");
      seen_objective_ = true;
      out_.maximize = w.starts_with("max");
      ++pos_;
      return Section::Objective;
    }
    if ((w == "subject" && lower(peek(1).text) == "to") || (w == "such" && lower(peek(1).text) == "that")) {
      pos_ += 2;
      return Section::Constraints;
    }
    if (w == "st" || w == "s.t.") {
      ++pos_;
      return Section::Constraints;
    }
    if (w == "bounds" || w == "bound") {
      ++pos_;
      return Section::Bounds;
    }
    if (w == "binary" || w == "binaries" || w == "bin") {
      ++pos_;
      return Section::Binaries;
    }
    if (w == "general" || w == "generals" || w == "gen" || w == "integer" || w == "integers" || w == "semi-continuous")
      fail("section '" + t.text + "' is not supported");
    if (w == "end") {
      ++pos_;
      return Section::End;
    }
    return std::nullopt;
  }

  bool at_section() {
    const auto save = pos_;
    const bool seen = seen_objective_;
    const bool max = out_.maximize;
    bool hit = false;
    try {
      hit = section_at().has_value();
    } catch (const ValidationError&) {
      hit = true;
    }
    pos_ = save;
    seen_objective_ = seen;
    out_.maximize = max;
    return hit;
  }

  int var(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, 0);
    if (inserted) it->second = out_.problem.lp.add_variable(0.0, kInf, 0.0, name);
    return it->second;
  }

  static bool is_inf(const std::string& s) {
    const auto w = lower(s);
    return w == "inf" || w == "infinity";
  }

  // Linear expression up to an operator or section keyword.
  std::vector<Term> expression() {
    std::vector<Term> terms;
    while (true) {
      const auto& t = peek();
      if (t.kind == Tok::Op || t.kind == Tok::End || at_section()) break;
      if (t.kind == Tok::Name && peek(1).kind == Tok::Colon) break;  // next statement's label
      double sign = 1.0;
      bool any = false;
      while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
        if (next().kind == Tok::Minus) sign = -sign;
        any = true;
      }
      double coef = 1.0;
      if (peek().kind == Tok::Number) {
        coef = next().number;
        any = true;
      }
      if (peek().kind != Tok::Name || at_section()) {
        if (any) fail("constant terms are not supported in expressions");
        fail("unexpected token '" + peek().text + "'");
      }
      terms.push_back({var(next().text), sign * coef});
    }
    return terms;
  }

  std::string label() {
    if (peek().kind == Tok::Name && peek(1).kind == Tok::Colon) {
      std::string l = next().text;
      ++pos_;
      return l;
    }
    return {};
  }

  double signed_value() {
    double sign = 1.0;
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus)
      if (next().kind == Tok::Minus) sign = -sign;
    const auto& t = peek();
    if (t.kind == Tok::Number) return sign * next().number;
    if (t.kind == Tok::Name && is_inf(t.text)) {
      ++pos_;
      return sign * kInf;
    }
    fail("expected a number");
  }

  void objective() {
    label();
    for (const auto& t : expression()) out_.problem.lp.set_cost(t.var, out_.problem.lp.cost()[t.var] + t.coef);
  }

  void constraint() {
    std::string name = label();
    auto terms = expression();
    if (peek().kind != Tok::Op) fail("expected <=, >= or = in constraint");
    const auto op = next().text;
    const double rhs = signed_value();
    if (!std::isfinite(rhs)) fail("infinite right-hand side");
    const Relation rel = op == "<=" ? Relation::LessEqual : op == ">=" ? Relation::GreaterEqual : Relation::Equal;
    out_.problem.lp.add_constraint(std::move(terms), rel, rhs, std::move(name));
  }

  void apply(int v, const std::string& op, double value, bool value_on_left) {
    auto& lp = out_.problem.lp;
    double lo = lp.lower()[v], hi = lp.upper()[v];
    std::string o = op;
    if (value_on_left) o = op == "<=" ? ">=" : op == ">=" ? "<=" : "=";
    if (o == "<=") hi = value;
    else if (o == ">=") lo = value;
    else lo = hi = value;
    lp.set_bounds(v, lo, hi);
  }

  void bound() {
    const auto& t = peek();
    const bool starts_with_value = t.kind == Tok::Number || t.kind == Tok::Plus || t.kind == Tok::Minus ||
                                   (t.kind == Tok::Name && is_inf(t.text));
    if (starts_with_value) {
      const double v1 = signed_value();
      if (peek().kind != Tok::Op) fail("expected an operator in bound");
      const auto op1 = next().text;
      if (peek().kind != Tok::Name) fail("expected a variable in bound");
      const int v = var(next().text);
      apply(v, op1, v1, true);
      if (peek().kind == Tok::Op) {
        const auto op2 = next().text;
        apply(v, op2, signed_value(), false);
      }
      return;
    }
    if (t.kind != Tok::Name) fail("unexpected token '" + t.text + "' in bounds");
    const int v = var(next().text);
    if (peek().kind == Tok::Name && lower(peek().text) == "free") {
      ++pos_;
      out_.problem.lp.set_bounds(v, -kInf, kInf);
      return;
    }
    if (peek().kind != Tok::Op) fail("expected an operator or 'free' in bound");
    const auto op = next().text;
    apply(v, op, signed_value(), false);
  }

  void binary() {
    if (peek().kind != Tok::Name) fail("expected a variable name in binaries");
    const int v = var(next().text);
    if (std::find(out_.problem.binaries.begin(), out_.problem.binaries.end(), v) == out_.problem.binaries.end())
      out_.problem.add_binary(v);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  bool seen_objective_ = false;
  LpFile out_;
  std::unordered_map<std::string, int> index_;
};

std::string number(double v) {
  if (v == kInf) return "+inf";
  if (v == -kInf) return "-inf";
  return format_double(v);
}

void append_expression(std::string& out, const std::vector<Term>& terms, const LinearProgram& lp) {
  if (terms.empty()) {
    if (lp.num_vars() > 0) out += " 0 " + lp.name(0);
    return;
  }
  int on_line = 0;
  bool first = true;
  for (const auto& t : terms) {
    if (on_line == 16) {
      out += "\n  ";
      on_line = 0;
    }
    const double a = std::abs(t.coef);
    out += first ? (t.coef < 0 ? " -" : "") : (t.coef < 0 ? " -" : " +");
    out += ' ';
    if (a != 1.0) out += format_double(a) + " ";
    out += lp.name(t.var);
    first = false;
    ++on_line;
  }
}

}  // namespace

LpFile parse_lp(std::string_view text) {
  auto parsed = Parser(text).run();
  parsed.problem.validate();
  return parsed;
}

std::string write_lp(const MilpProblem& problem) {
  const auto& lp = problem.lp;
  std::string out = "\\ written by imbalance\nMinimize\n obj:";
  std::vector<Term> obj;
  for (int j = 0; j < lp.num_vars(); ++j)
    if (lp.cost()[j] != 0.0) obj.push_back({j, lp.cost()[j]});
  append_expression(out, obj, lp);
  out += "\nSubject To\n";
  for (const auto& r : lp.constraints()) {
    out += " " + r.name + ":";
    append_expression(out, r.terms, lp);
    out += r.relation == Relation::LessEqual ? " <= " : r.relation == Relation::GreaterEqual ? " >= " : " = ";
    out += format_double(r.rhs) + "\n";
  }
  out += "Bounds\n";
  for (int j = 0; j < lp.num_vars(); ++j) {
    const double lo = lp.lower()[j], hi = lp.upper()[j];
    if (lo == 0.0 && hi == kInf) continue;
    if (lo == -kInf && hi == kInf) out += " " + lp.name(j) + " free\n";
    else if (lo == hi) out += " " + lp.name(j) + " = " + number(lo) + "\n";
    else out += " " + number(lo) + " <= " + lp.name(j) + " <= " + number(hi) + "\n";
  }
  if (!problem.binaries.empty()) {
    out += "Binaries\n";
    for (int b : problem.binaries) out += " " + lp.name(b) + "\n";
  }
  out += "End\n";
  return out;
}

}  // namespace imb::milp

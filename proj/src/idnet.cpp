#include "mcdag/idnet.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace mcdag {

namespace {

using Kind = DiagramError::Kind;

struct Line {
  int number;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string raw(text.substr(pos, end - pos));
    pos = end + 1;
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::string spaced;
    for (char ch : raw) {
      if (ch == '|' || ch == ':' || ch == '/') {
        spaced += ' ';
        spaced += ch;
        spaced += ' ';
      } else {
        spaced += ch;
      }
    }
    std::istringstream is(spaced);
    Line line{number, {}};
    for (std::string tok; is >> tok;) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
    if (end == text.size()) break;
  }
  return lines;
}

double parse_number(const std::string& tok, int line) {
  double v = 0.0;
  const char* first = tok.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw DiagramError(Kind::Syntax, "expected a number, got '" + tok + "'", line);
  return v;
}

std::size_t parse_count(const std::string& tok, int line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0)
    throw DiagramError(Kind::Syntax, "expected a positive integer, got '" + tok + "'", line);
  return v;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : lines_(tokenize(text)) {}

  InfluenceDiagram run() {
    if (lines_.empty()) throw DiagramError(Kind::Syntax, "empty input", 1);
    const auto& head = lines_.front();
    if (head.tokens.size() != 2 || head.tokens[0] != "IDNET" || head.tokens[1] != "1")
      throw DiagramError(Kind::Syntax, "expected header 'IDNET 1'", head.number);
    for (const auto& l : lines_)
      if (l.tokens[0] == "UTIL" && l.tokens.size() > 1) utility_names_.insert(l.tokens[1]);

    bool have_mode = false, have_order = false;
    for (std::size_t i = 1; i < lines_.size(); ++i) {
      const auto& l = lines_[i];
      const auto& kw = l.tokens[0];
      if (kw == "MODE") {
        if (l.tokens.size() != 2 || (l.tokens[1] != "prob" && l.tokens[1] != "poss"))
          throw DiagramError(Kind::Syntax, "expected 'MODE prob' or 'MODE poss'", l.number);
        if (have_mode) throw DiagramError(Kind::Syntax, "duplicate MODE line", l.number);
        d_.mode = l.tokens[1] == "prob" ? Mode::Prob : Mode::Poss;
        have_mode = true;
      } else if (kw == "VAR") {
        var_line(l);
      } else if (kw == "PROB") {
        prob_line(l);
      } else if (kw == "UTIL") {
        util_line(l);
      } else if (kw == "ORDER") {
        if (have_order) throw DiagramError(Kind::Syntax, "duplicate ORDER line", l.number);
        order_line(l);
        have_order = true;
      } else {
        throw DiagramError(Kind::Syntax, "unknown keyword '" + kw + "'", l.number);
      }
    }
    if (!have_mode) throw DiagramError(Kind::Syntax, "missing MODE line", head.number);
    if (!have_order) throw DiagramError(Kind::BlockPartition, "missing ORDER line", lines_.back().number);
    validate(d_, &src_);
    return std::move(d_);
  }

 private:
  VarId lookup(const std::string& name, int line) {
    if (auto id = d_.find(name)) return *id;
    if (utility_names_.count(name))
      throw DiagramError(Kind::UtilityNotLeaf, "utility " + name + " cannot be used as a parent", line);
    throw DiagramError(Kind::UnknownVariable, "unknown variable '" + name + "'", line);
  }

  std::vector<double> values_after_colon(const Line& l, std::size_t colon, std::size_t expected) {
    std::vector<double> values;
    for (std::size_t i = colon + 1; i < l.tokens.size(); ++i) values.push_back(parse_number(l.tokens[i], l.number));
    if (values.size() != expected)
      throw DiagramError(Kind::ValueCount,
                         "expected " + std::to_string(expected) + " values, got " + std::to_string(values.size()),
                         l.number);
    return values;
  }

  std::size_t find_token(const Line& l, const std::string& tok) {
    for (std::size_t i = 0; i < l.tokens.size(); ++i)
      if (l.tokens[i] == tok) return i;
    throw DiagramError(Kind::Syntax, "missing '" + tok + "'", l.number);
  }

  void var_line(const Line& l) {
    if (l.tokens.size() != 4) throw DiagramError(Kind::Syntax, "expected 'VAR <name> <size> CHANCE|DECISION'", l.number);
    const auto& name = l.tokens[1];
    if (d_.find(name) || utility_names_.count(name))
      throw DiagramError(Kind::InvalidArgument, "duplicate name '" + name + "'", l.number);
    VarKind kind;
    if (l.tokens[3] == "CHANCE")
      kind = VarKind::Chance;
    else if (l.tokens[3] == "DECISION")
      kind = VarKind::Decision;
    else
      throw DiagramError(Kind::Syntax, "expected CHANCE or DECISION", l.number);
    const auto id = static_cast<VarId>(d_.variables.size());
    d_.variables.push_back({id, name, kind, parse_count(l.tokens[2], l.number)});
    d_.parents.emplace_back();
    src_.variables[id] = l.number;
  }

  void prob_line(const Line& l) {
    const std::size_t bar = find_token(l, "|");
    const std::size_t colon = find_token(l, ":");
    if (bar != 2 || colon < bar) throw DiagramError(Kind::Syntax, "expected 'PROB <child> | <parents> : <values>'", l.number);
    const VarId child = lookup(l.tokens[1], l.number);
    if (d_.is_decision(child))
      throw DiagramError(Kind::InvalidArgument, "decision " + l.tokens[1] + " cannot have a CPT", l.number);
    if (d_.cpts.count(child)) throw DiagramError(Kind::InvalidArgument, "duplicate CPT for " + l.tokens[1], l.number);
    std::vector<VarId> scope;
    for (std::size_t i = bar + 1; i < colon; ++i) scope.push_back(lookup(l.tokens[i], l.number));
    scope.push_back(child);
    check_distinct(scope, l.number);
    const auto dims = d_.dims_of(scope);
    auto values = values_after_colon(l, colon, table_size(dims));
    try {
      d_.cpts[child] = ScopedTable(scope, dims, std::move(values));
    } catch (const FactorError& e) {
      throw DiagramError(Kind::InvalidArgument, e.what(), l.number);
    }
    src_.cpts[child] = l.number;
  }

  void util_line(const Line& l) {
    const std::size_t colon = find_token(l, ":");
    if (colon < 2) throw DiagramError(Kind::Syntax, "expected 'UTIL <name> <scope> : <values>'", l.number);
    const auto& name = l.tokens[1];
    std::vector<VarId> scope;
    for (std::size_t i = 2; i < colon; ++i) scope.push_back(lookup(l.tokens[i], l.number));
    check_distinct(scope, l.number);
    const auto dims = d_.dims_of(scope);
    auto values = values_after_colon(l, colon, table_size(dims));
    d_.utilities.push_back({name, ScopedTable(scope, dims, std::move(values))});
    src_.utilities.push_back(l.number);
  }

  void order_line(const Line& l) {
    src_.order = l.number;
    d_.blocks.assign(1, {});
    for (std::size_t i = 1; i < l.tokens.size(); ++i) {
      if (l.tokens[i] == "/")
        d_.blocks.emplace_back();
      else
        d_.blocks.back().push_back(lookup(l.tokens[i], l.number));
    }
  }

  void check_distinct(const std::vector<VarId>& scope, int line) {
    std::set<VarId> s(scope.begin(), scope.end());
    if (s.size() != scope.size()) throw DiagramError(Kind::InvalidArgument, "repeated variable in scope", line);
  }

  std::vector<Line> lines_;
  std::set<std::string> utility_names_;
  InfluenceDiagram d_;
  SourceLines src_;
};

void write_values(std::ostream& os, const ScopedTable& t) {
  os << " :";
  for (double v : t.values()) os << ' ' << format_double(v);
  os << '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

InfluenceDiagram parse_idnet(std::string_view text) { return Parser(text).run(); }

InfluenceDiagram load_idnet(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_idnet(ss.str());
}

std::string serialize_idnet(const InfluenceDiagram& d) {
  std::ostringstream os;
  os << "IDNET 1\nMODE " << to_string(d.mode) << '\n';
  for (const auto& v : d.variables)
    os << "VAR " << v.name << ' ' << v.domain_size << (v.kind == VarKind::Chance ? " CHANCE" : " DECISION") << '\n';
  for (const auto& [x, t] : d.cpts) {
    os << "PROB " << d.var(x).name << " |";
    for (std::size_t i = 0; i + 1 < t.scope().size(); ++i) os << ' ' << d.var(t.scope()[i]).name;
    write_values(os, t);
  }
  for (const auto& u : d.utilities) {
    os << "UTIL " << u.name;
    for (VarId v : u.table.scope()) os << ' ' << d.var(v).name;
    write_values(os, u.table);
  }
  os << "ORDER";
  for (std::size_t k = 0; k < d.blocks.size(); ++k) {
    if (k) os << " /";
    for (VarId v : d.blocks[k]) os << ' ' << d.var(v).name;
  }
  os << '\n';
  return os.str();
}

}  // namespace mcdag

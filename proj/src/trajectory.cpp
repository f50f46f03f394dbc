#include "council/trajectory.hpp"

#include <algorithm>
#include <cctype>

#include "council/errors.hpp"

namespace council {

namespace {

constexpr std::string_view kObsTag = "OBS: ";
constexpr std::string_view kActTag = "ACT: ";

}  // namespace

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

Observation::Observation(std::string text) : text_(std::move(text)) {
  if (is_blank(text_)) throw InvalidInput("observation text is empty");
}

Action::Action(std::string text) : text_(std::move(text)) {
  if (is_blank(text_)) throw InvalidInput("action text is empty");
}

Trajectory Trajectory::extended(Step step) const {
  auto steps = steps_;
  steps.push_back(std::move(step));
  return Trajectory(std::move(steps));
}

Trajectory Trajectory::prefix(std::size_t n) const {
  n = std::min(n, steps_.size());
  return Trajectory(std::vector<Step>(steps_.begin(), steps_.begin() + static_cast<std::ptrdiff_t>(n)));
}

bool Trajectory::is_prefix_of(const Trajectory& other) const {
  if (depth() > other.depth()) return false;
  return std::equal(steps_.begin(), steps_.end(), other.steps_.begin());
}

std::vector<Action> Trajectory::actions() const {
  std::vector<Action> out;
  out.reserve(steps_.size());
  for (const auto& s : steps_) out.push_back(s.action);
  return out;
}

std::vector<Trajectory> decompose_prefixes(const Trajectory& traj) {
  std::vector<Trajectory> out;
  out.reserve(traj.depth());
  for (std::size_t t = 1; t <= traj.depth(); ++t) out.push_back(traj.prefix(t));
  return out;
}

std::string escape_line(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_line(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (++i == text.size()) throw ParseFailure("dangling escape");
    switch (text[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw ParseFailure(std::string("unknown escape \\") + text[i]);
    }
  }
  return out;
}

std::string serialize_trajectory(const Trajectory& traj) {
  std::string out;
  for (const auto& step : traj.steps()) {
    out += kObsTag;
    out += escape_line(step.observation.text());
    out += '\n';
    out += kActTag;
    out += escape_line(step.action.text());
    out += '\n';
  }
  return out;
}

std::string query_text(const Trajectory& prefix, const Observation& initial) {
  if (!prefix.empty()) return serialize_trajectory(prefix);
  std::string out(kObsTag);
  out += escape_line(initial.text());
  out += '\n';
  return out;
}

Trajectory parse_trajectory(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) throw ParseFailure("missing trailing newline");
    lines.push_back(text.substr(0, nl));
    text.remove_prefix(nl + 1);
  }
  if (lines.size() % 2 != 0) throw ParseFailure("observation without action");
  std::vector<Step> steps;
  for (std::size_t i = 0; i < lines.size(); i += 2) {
    if (!lines[i].starts_with(kObsTag)) throw ParseFailure("expected OBS line");
    if (!lines[i + 1].starts_with(kActTag)) throw ParseFailure("expected ACT line");
    steps.push_back(Step{Observation(unescape_line(lines[i].substr(kObsTag.size()))),
                         Action(unescape_line(lines[i + 1].substr(kActTag.size())))});
  }
  return Trajectory(std::move(steps));
}

}  // namespace council

#include "doctest.h"

#include <cstdlib>
#include <thread>

#include "council/errors.hpp"
#include "council/llm.hpp"
#include "council/synthetic.hpp"
#include "support.hpp"

using namespace council;
using council::testing::make_trajectory;
using council::testing::StubBackend;

namespace {

RetryPolicy fast_policy() { return RetryPolicy{1, std::chrono::milliseconds(0), 2.0}; }

ChatRequest hello(const std::string& backend = "stub") {
  return ChatRequest{backend, {{Role::system, "sys"}, {Role::user, "hi"}}, 0.0, 16, std::chrono::milliseconds(100)};
}

struct Gateway {
  std::shared_ptr<LlmGateway> gateway = std::make_shared<LlmGateway>(fast_policy());
  StubBackend* stub = nullptr;

  explicit Gateway(std::vector<StubBackend::Behaviour> script) {
    auto backend = std::make_unique<StubBackend>(std::move(script));
    stub = backend.get();
    gateway->add_backend("stub", std::move(backend));
  }
};

std::size_t count_lines_starting(const std::string& text, const std::string& tag) {
  std::size_t n = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    if (text.compare(pos, tag.size(), tag) == 0) ++n;
    pos = end + 1;
  }
  return n;
}

}  // namespace

TEST_CASE("parse_score") {
  CHECK(parse_score("Score: 7") == doctest::Approx(0.7));
  CHECK(parse_score("0.85") == doctest::Approx(0.85));
  CHECK(parse_score("I think this plan is strong. 9/10.") == doctest::Approx(0.9));
  CHECK(parse_score("10") == 1.0);
  CHECK(parse_score("0") == 0.0);
  CHECK(parse_score("rating 42") == 1.0);
  CHECK(parse_score("-3") == 0.0);
  CHECK(parse_score("7.5 out of 10") == doctest::Approx(0.75));
  CHECK_THROWS_AS(parse_score("no idea"), ParseFailure);
  CHECK_THROWS_AS(parse_score(""), ParseFailure);
}

TEST_CASE("parse_score lands in [0, 1] for any text with a number") {
  const std::vector<std::string> samples = {"1e9", "99999999", ".5", "+.7", "score=-0.2", "3.", "x 1.0000001"};
  for (const auto& s : samples) {
    const double v = parse_score(s);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("extract_action") {
  CHECK(extract_action("10*10=100") == "10*10=100");
  CHECK(extract_action("\n  Action: `alpha-03`\nbecause...") == "alpha-03");
  CHECK(extract_action("\"4+4=8\"") == "4+4=8");
  CHECK(extract_action("   \n\n").empty());
}

TEST_CASE("compose_prompt") {
  PromptInput input{"Make 24.", "a op b = c", Observation("Remaining numbers: 4 4 100")};
  auto prefix = make_trajectory({{"Use 4 4 10 10", "10*10=100"}});
  auto exemplar = make_trajectory({{"Use 1 2 3 4", "1*2=2"}, {"Remaining: 2 3 4", "2*3=6"}});

  auto bare = compose_prompt(input, prefix, nullptr, PromptMode::act);
  CHECK_FALSE(bare.exemplar_region);
  auto again = compose_prompt(input, prefix, nullptr, PromptMode::act);
  CHECK(bare.current_region == again.current_region);
  CHECK(bare.directive == again.directive);
  CHECK(bare.directive.find("a op b = c") != std::string::npos);

  auto with = compose_prompt(input, prefix, &exemplar, PromptMode::act);
  REQUIRE(with.exemplar_region);
  CHECK(with.current_region == bare.current_region);
  CHECK(count_lines_starting(*with.exemplar_region, "OBS: ") == 2);
  CHECK(count_lines_starting(*with.exemplar_region, "ACT: ") == 2);
  PromptTemplates t;
  CHECK(with.exemplar_region->find(t.exemplar_note) != std::string::npos);

  // The exemplar sits wholly between its delimiters and apart from the current trajectory.
  auto messages = to_messages(with);
  REQUIRE(messages.size() == 2);
  CHECK(messages[0].role == Role::system);
  const auto& user = messages[1].content;
  const auto begin = user.find(t.exemplar_begin);
  const auto end = user.find(t.exemplar_end);
  const auto current = user.find(t.current_header);
  REQUIRE(begin != std::string::npos);
  REQUIRE(end != std::string::npos);
  CHECK(begin < end);
  CHECK(end < current);
  CHECK(user.find("1*2=2") > begin);
  CHECK(user.find("1*2=2") < end);
  CHECK(user.find("10*10=100") > current);

  auto eval = compose_prompt(input, prefix, nullptr, PromptMode::evaluate);
  CHECK(eval.directive.find("0 to 10") != std::string::npos);
}

TEST_CASE("prompt templates come from config") {
  auto t = PromptTemplates::from_json({{"act_directive", "Next move?"}});
  CHECK(t.act_directive == "Next move?");
  CHECK(t.exemplar_begin == PromptTemplates{}.exemplar_begin);
  CHECK_THROWS_AS(PromptTemplates::from_json({{"act_directiv", "typo"}}), ConfigError);
}

TEST_CASE("chat requests must open with a system message") {
  auto r = hello();
  CHECK_NOTHROW(r.validate());
  r.messages.erase(r.messages.begin());
  CHECK_THROWS_AS(r.validate(), InvalidInput);
  r.messages.clear();
  CHECK_THROWS_AS(r.validate(), InvalidInput);
}

TEST_CASE("gateway retry policy") {
  SUBCASE("canned reply") {
    Gateway g({StubBackend::reply("pong")});
    auto r = g.gateway->complete(hello());
    CHECK(r.text == "pong");
    CHECK(r.retries == 0);
  }
  SUBCASE("one timeout then success") {
    Gateway g({StubBackend::timeout(), StubBackend::reply("pong")});
    auto r = g.gateway->complete(hello());
    CHECK(r.text == "pong");
    CHECK(r.retries == 1);
    CHECK(g.gateway->usage().at("stub").failures == 1);
  }
  SUBCASE("two timeouts") {
    Gateway g({StubBackend::timeout()});
    CHECK_THROWS_AS(g.gateway->complete(hello()), ExpertUnavailable);
    CHECK(g.stub->calls() == 2);
  }
  SUBCASE("auth errors are not retried") {
    Gateway g({StubBackend::unauthorized(), StubBackend::reply("pong")});
    CHECK_THROWS_AS(g.gateway->complete(hello()), ConfigError);
    CHECK(g.stub->calls() == 1);
  }
  SUBCASE("unknown backend") {
    Gateway g({StubBackend::reply("pong")});
    CHECK_THROWS_AS(g.gateway->complete(hello("nope")), ConfigError);
  }
}

TEST_CASE("gateway counts tokens per backend") {
  Gateway g({StubBackend::reply("pong")});
  for (int i = 0; i < 3; ++i) g.gateway->complete(hello());
  auto u = g.gateway->usage().at("stub");
  CHECK(u.requests == 3);
  CHECK(u.prompt_tokens == 30);
  CHECK(u.completion_tokens == 6);
}

TEST_CASE("gateway tolerates concurrent callers") {
  Gateway g({StubBackend::reply("pong")});
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) g.gateway->complete(hello());
    });
  }
  for (auto& t : threads) t.join();
  CHECK(g.gateway->usage().at("stub").requests == 200);
}

TEST_CASE("backend config") {
  auto c = BackendConfig::from_json(
      {{"backend_id", "local"}, {"endpoint", "http://localhost:8000"}, {"model", "m"}, {"credential_env", "KEY"}});
  CHECK(c.request_cap == 4);
  CHECK_THROWS_AS(BackendConfig::from_json({{"backend_id", "x"}, {"endpoint", "http://h"}, {"model", "m"},
                                            {"credential_env", "K"}, {"request_cap", 0}}),
                  ConfigError);
}

TEST_CASE("llm-backed expert") {
  SyntheticEnvironment env;
  auto task = make_synthetic_task("t", "alpha", 1);
  ExpertContext ctx{env, task, env.replay(task, {}).current(), 0};
  ExpertDescriptor d{"llm", "LLM", ExpertKind::llm_backed};

  SUBCASE("proposals are extracted and deduplicated") {
    Gateway g({StubBackend::reply("Action: alpha-01"), StubBackend::reply("alpha-01"), StubBackend::reply("alpha-02")});
    LlmExpert expert(d, g.gateway, LlmExpertOptions{.backend_id = "stub"});
    auto props = propose_actions(expert, ctx, Trajectory{}, nullptr, 3);
    REQUIRE(props.size() == 2);
    CHECK(props[0].action.text() == "alpha-01");
    CHECK(props[1].action.text() == "alpha-02");
    auto sent = g.stub->requests();
    CHECK(sent.front().temperature == doctest::Approx(0.7));
  }
  SUBCASE("every call failing surfaces as unavailable") {
    Gateway g({StubBackend::timeout()});
    LlmExpert expert(d, g.gateway, LlmExpertOptions{.backend_id = "stub"});
    CHECK_THROWS_AS(expert.generate(ctx, Trajectory{}, nullptr, 2), ExpertUnavailable);
  }
  SUBCASE("scores use the 0 to 10 scale at temperature 0") {
    Gateway g({StubBackend::reply("8")});
    LlmExpert expert(d, g.gateway, LlmExpertOptions{.backend_id = "stub"});
    CHECK(evaluate_plausibility(expert, ctx, Trajectory{}) == doctest::Approx(0.8));
    CHECK(g.stub->requests().front().temperature == 0.0);
  }
  SUBCASE("unparseable scores fall back after one retry") {
    Gateway g({StubBackend::reply("hmm, hard to say")});
    LlmExpert expert(d, g.gateway, LlmExpertOptions{.backend_id = "stub"});
    CHECK(evaluate_plausibility(expert, ctx, Trajectory{}) == 0.5);
    CHECK(g.stub->calls() == 2);
  }
  SUBCASE("the exemplar reaches the prompt") {
    Gateway g({StubBackend::reply("alpha-03")});
    LlmExpert expert(d, g.gateway, LlmExpertOptions{.backend_id = "stub"});
    auto exemplar = make_trajectory({{"earlier", "alpha-09"}});
    expert.generate(ctx, Trajectory{}, &exemplar, 1);
    const auto& user = g.stub->requests().front().messages.at(1).content;
    CHECK(user.find("ACT: alpha-09") != std::string::npos);
  }
}

TEST_CASE("http backend errors") {
  ::unsetenv("COUNCIL_TEST_UNSET_KEY");
  BackendConfig keyed{"remote", "http://127.0.0.1:9", "m", "COUNCIL_TEST_UNSET_KEY", 1};
  CHECK_THROWS_AS(make_http_backend(keyed)->send(hello("remote")), ConfigError);

  // Port 9 refuses connections: a transport failure, which is retriable.
  BackendConfig open{"remote", "http://127.0.0.1:9", "m", "", 1};
  CHECK_THROWS_AS(make_http_backend(open)->send(hello("remote")), ProviderError);

  BackendConfig bad{"remote", "ftp://host", "m", "", 1};
  CHECK_THROWS_AS(make_http_backend(bad), ConfigError);
}
